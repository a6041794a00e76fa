use crate::numcore::Rng;

use super::train::ReidError;

/// One sampling domain: observations of a single identity plus feature
/// vectors guaranteed to belong to *other* identities.
///
/// When frames carry explicit identity labels, each identity becomes a
/// domain whose negatives are every other identity's observations. When
/// only subject/non-subject annotations exist (the sequence-file schema),
/// each sequence becomes a domain: its subject detections are the
/// positives and its non-subject detections the negatives — the one pairing
/// the annotations guarantee to be cross-identity.
#[derive(Debug, Clone)]
pub struct TripletDomain {
    pub positives: Vec<Vec<f64>>,
    pub negatives: Vec<Vec<f64>>,
}

impl TripletDomain {
    fn usable(&self) -> bool {
        self.positives.len() >= 2 && !self.negatives.is_empty()
    }
}

/// A batch of aligned (anchor, positive, negative) feature triplets.
#[derive(Debug, Clone)]
pub struct TripletBatch {
    pub anchors: Vec<Vec<f64>>,
    pub positives: Vec<Vec<f64>>,
    pub negatives: Vec<Vec<f64>>,
    pub margin: f64,
}

/// Draw `count` triplets uniformly: pick a usable domain, two distinct
/// observations of its identity, and one negative.
pub fn sample_triplets(
    domains: &[TripletDomain],
    rng: &mut Rng,
    count: usize,
    margin: f64,
) -> Result<TripletBatch, ReidError> {
    let usable: Vec<&TripletDomain> = domains.iter().filter(|d| d.usable()).collect();
    if usable.is_empty() {
        return Err(ReidError::Config(
            "triplet sampling needs at least 2 identities with 2+ observations each \
             (no domain has both 2+ positives and 1+ negative)"
                .into(),
        ));
    }
    let mut batch = TripletBatch {
        anchors: Vec::with_capacity(count),
        positives: Vec::with_capacity(count),
        negatives: Vec::with_capacity(count),
        margin,
    };
    for _ in 0..count {
        let dom = usable[rng.index(usable.len())];
        let ai = rng.index(dom.positives.len());
        let mut pi = rng.index(dom.positives.len() - 1);
        if pi >= ai {
            pi += 1;
        }
        let ni = rng.index(dom.negatives.len());
        batch.anchors.push(dom.positives[ai].clone());
        batch.positives.push(dom.positives[pi].clone());
        batch.negatives.push(dom.negatives[ni].clone());
    }
    Ok(batch)
}

/// Build per-identity domains from explicitly labeled observations.
pub fn domains_from_labeled(observations: &[(usize, Vec<f64>)]) -> Vec<TripletDomain> {
    let mut ids: Vec<usize> = observations.iter().map(|(id, _)| *id).collect();
    ids.sort_unstable();
    ids.dedup();
    ids.iter()
        .map(|id| TripletDomain {
            positives: observations
                .iter()
                .filter(|(i, _)| i == id)
                .map(|(_, f)| f.clone())
                .collect(),
            negatives: observations
                .iter()
                .filter(|(i, _)| i != id)
                .map(|(_, f)| f.clone())
                .collect(),
        })
        .collect()
}
