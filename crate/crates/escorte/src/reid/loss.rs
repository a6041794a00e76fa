use crate::numcore::NumError;

/// Triplet margin loss for one triplet:
/// `max(d(a,p) - d(a,n) + margin, 0)` with `d` the L2 distance.
pub fn triplet_loss(a: &[f64], p: &[f64], n: &[f64], margin: f64) -> Result<f64, NumError> {
    if a.len() != p.len() || a.len() != n.len() {
        return Err(NumError::ShapeMismatch {
            op: "triplet_loss",
            lrows: 1,
            lcols: a.len(),
            rrows: 1,
            rcols: if a.len() != p.len() { p.len() } else { n.len() },
        });
    }
    debug_assert!(margin >= 0.0);
    let d_ap = l2(a, p);
    let d_an = l2(a, n);
    Ok((d_ap - d_an + margin).max(0.0))
}

/// Mean triplet loss over aligned anchor/positive/negative lists.
pub fn triplet_loss_batch(
    anchors: &[Vec<f64>],
    positives: &[Vec<f64>],
    negatives: &[Vec<f64>],
    margin: f64,
) -> Result<f64, NumError> {
    assert_eq!(anchors.len(), positives.len());
    assert_eq!(anchors.len(), negatives.len());
    let mut total = 0.0;
    for ((a, p), n) in anchors.iter().zip(positives).zip(negatives) {
        total += triplet_loss(a, p, n, margin)?;
    }
    Ok(total / anchors.len() as f64)
}

fn l2(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}
