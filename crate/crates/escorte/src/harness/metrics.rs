use thiserror::Error;

use crate::action::ActionState;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("mean AP of an empty class list is undefined")]
    EmptyApList,
    #[error("length mismatch: {predictions} predictions vs {truths} truths")]
    LengthMismatch { predictions: usize, truths: usize },
}

/// Ranked average precision.
///
/// Items are sorted by descending score (stable, so ties keep input order)
/// and AP is the mean of precision-at-k over the positive items. Returns
/// `None` when there are no positives — the class is undefined and must be
/// excluded from mAP.
pub fn average_precision(items: &[(f64, bool)]) -> Option<f64> {
    let n_pos = items.iter().filter(|(_, p)| *p).count();
    if n_pos == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| items[b].0.partial_cmp(&items[a].0).unwrap());
    let mut seen_pos = 0usize;
    let mut total = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if items[i].1 {
            seen_pos += 1;
            total += seen_pos as f64 / (rank + 1) as f64;
        }
    }
    Some(total / n_pos as f64)
}

/// Arithmetic mean over per-class APs.
pub fn mean_ap(per_class: &[f64]) -> Result<f64, MetricsError> {
    if per_class.is_empty() {
        return Err(MetricsError::EmptyApList);
    }
    Ok(per_class.iter().sum::<f64>() / per_class.len() as f64)
}

/// 3x3 confusion counts: entry `(i, j)` is the number of frames with truth
/// `i` predicted as `j`.
pub fn confusion_matrix(
    predictions: &[ActionState],
    truths: &[ActionState],
) -> Result<[[usize; 3]; 3], MetricsError> {
    if predictions.len() != truths.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            truths: truths.len(),
        });
    }
    let mut m = [[0usize; 3]; 3];
    for (p, t) in predictions.iter().zip(truths) {
        m[t.index()][p.index()] += 1;
    }
    Ok(m)
}
