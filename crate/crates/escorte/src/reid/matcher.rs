use crate::numcore::Matrix;

/// L2 distance below which a candidate embedding is accepted as the subject.
pub const DEFAULT_MATCH_THRESHOLD: f64 = 1.5;

/// Embedding of the subject taken from the initial reference frame. Fixed
/// for the whole escort session; the fingerprint ties it to the exact model
/// that produced it.
#[derive(Debug, Clone)]
pub struct ReferenceAnchor {
    pub embedding: Matrix,
    pub source_frame: usize,
    pub model_fingerprint: u64,
}

/// Outcome of matching one frame's candidates against the anchor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult {
    /// Index of the matched detection, or `None` when the subject is
    /// considered absent from the image.
    pub subject_index: Option<usize>,
    /// Smallest candidate distance; infinity when there were no candidates.
    pub best_distance: f64,
}

impl MatchResult {
    pub fn absent() -> Self {
        MatchResult {
            subject_index: None,
            best_distance: f64::INFINITY,
        }
    }
}

/// Pick the candidate closest to the reference, if that distance is within
/// `threshold`. Ties break to the lowest detection index. An empty candidate
/// list yields Absent, not an error.
pub fn match_subject(
    reference: &ReferenceAnchor,
    candidates: &[Matrix],
    threshold: f64,
) -> MatchResult {
    let mut best: Option<(usize, f64)> = None;
    for (i, cand) in candidates.iter().enumerate() {
        let d = cand
            .l2_distance(&reference.embedding)
            .expect("candidate dim must match reference dim");
        if best.map_or(true, |(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    match best {
        Some((i, d)) if d <= threshold => MatchResult {
            subject_index: Some(i),
            best_distance: d,
        },
        Some((_, d)) => MatchResult {
            subject_index: None,
            best_distance: d,
        },
        None => MatchResult::absent(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Rng;

    fn anchor_at_origin(dim: usize) -> ReferenceAnchor {
        ReferenceAnchor {
            embedding: Matrix::zeros(1, dim),
            source_frame: 0,
            model_fingerprint: 0,
        }
    }

    fn candidates_at_distances(ds: &[f64]) -> Vec<Matrix> {
        ds.iter()
            .map(|d| Matrix::row(&[*d, 0.0]).unwrap())
            .collect()
    }

    #[test]
    fn picks_smallest_below_threshold() {
        let r = anchor_at_origin(2);
        let m = match_subject(&r, &candidates_at_distances(&[1.2, 1.6, 2.0]), 1.5);
        assert_eq!(m.subject_index, Some(0));
        assert!((m.best_distance - 1.2).abs() < 1e-15);
    }

    #[test]
    fn absent_when_all_above_threshold() {
        let r = anchor_at_origin(2);
        let m = match_subject(&r, &candidates_at_distances(&[1.6, 2.0]), 1.5);
        assert_eq!(m.subject_index, None);
        assert!((m.best_distance - 1.6).abs() < 1e-15);
    }

    #[test]
    fn tie_breaks_to_lowest_index() {
        let r = anchor_at_origin(2);
        let m = match_subject(&r, &candidates_at_distances(&[1.2, 1.2]), 1.5);
        assert_eq!(m.subject_index, Some(0));
    }

    #[test]
    fn empty_candidates_absent() {
        let r = anchor_at_origin(2);
        let m = match_subject(&r, &[], 1.5);
        assert_eq!(m.subject_index, None);
        assert!(m.best_distance.is_infinite());
    }

    #[test]
    fn threshold_monotonicity() {
        let mut rng = Rng::seed_from(51);
        let r = anchor_at_origin(3);
        for _ in 0..200 {
            let n = 1 + rng.index(5);
            let cands: Vec<Matrix> = (0..n).map(|_| rng.uniform_matrix(1, 3, -2.0, 2.0)).collect();
            let t1 = rng.uniform(0.0, 3.0);
            let t2 = t1 + rng.uniform(0.0, 2.0);
            let low = match_subject(&r, &cands, t1);
            let high = match_subject(&r, &cands, t2);
            // Raising the threshold never turns Found into Absent.
            if low.subject_index.is_some() {
                assert_eq!(low.subject_index, high.subject_index);
            }
            // Lowering it never turns Absent into Found.
            if high.subject_index.is_none() {
                assert!(low.subject_index.is_none());
            }
        }
    }

    #[test]
    fn decision_is_permutation_independent_when_argmin_unique() {
        let mut rng = Rng::seed_from(52);
        for _ in 0..100 {
            let r = anchor_at_origin(3);
            let n = 2 + rng.index(4);
            let cands: Vec<Matrix> =
                (0..n).map(|_| rng.uniform_matrix(1, 3, -2.0, 2.0)).collect();
            let base = match_subject(&r, &cands, 2.5);
            // Rotate the candidate list; the chosen candidate (by value, not
            // index) must not change as long as the argmin is unique.
            let mut rotated = cands.clone();
            rotated.rotate_left(1);
            let rot = match_subject(&r, &rotated, 2.5);
            match (base.subject_index, rot.subject_index) {
                (Some(i), Some(j)) => assert_eq!(cands[i].data(), rotated[j].data()),
                (None, None) => {}
                other => panic!("decision changed under permutation: {other:?}"),
            }
        }
    }
}
