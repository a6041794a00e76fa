use super::matrix::{Matrix, NumError};
use super::tape::{NodeId, Tape};

/// Compare analytic gradients against central finite differences.
///
/// `f` rebuilds the scalar objective on a fresh tape from the given
/// parameter nodes; it must be deterministic. Returns the maximum over all
/// parameter entries of `|analytic - central| / max(1, |analytic|)`.
pub fn grad_check<F>(f: F, params: &[Matrix], eps: f64) -> Result<f64, NumError>
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId, NumError>,
{
    assert!(eps > 0.0, "grad_check requires eps > 0");

    let eval = |ps: &[Matrix]| -> Result<f64, NumError> {
        let mut tape = Tape::new();
        let ids: Vec<NodeId> = ps.iter().map(|p| tape.param(p.clone())).collect();
        let loss = f(&mut tape, &ids)?;
        Ok(tape.value(loss).data()[0])
    };

    // Analytic pass.
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = params.iter().map(|p| tape.param(p.clone())).collect();
    let loss = f(&mut tape, &ids)?;
    tape.backward(loss)?;
    let analytic: Vec<Matrix> = ids
        .iter()
        .zip(params)
        .map(|(id, p)| {
            tape.grad(*id)
                .cloned()
                .unwrap_or_else(|| Matrix::zeros(p.rows(), p.cols()))
        })
        .collect();

    let mut worst = 0.0f64;
    let mut work: Vec<Matrix> = params.to_vec();
    for (pi, grad) in analytic.iter().enumerate() {
        for idx in 0..params[pi].data().len() {
            let orig = work[pi].data()[idx];
            work[pi].data_mut()[idx] = orig + eps;
            let plus = eval(&work)?;
            work[pi].data_mut()[idx] = orig - eps;
            let minus = eval(&work)?;
            work[pi].data_mut()[idx] = orig;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = grad.data()[idx];
            let rel = (a - numeric).abs() / a.abs().max(1.0);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Rng;

    #[test]
    fn quadratic_form_errs_below_1e9() {
        // f(W, x) = sum((x W)^2)
        let mut rng = Rng::seed_from(21);
        let params = vec![
            rng.uniform_matrix(3, 3, -1.0, 1.0),
            rng.uniform_matrix(1, 3, -1.0, 1.0),
        ];
        let err = grad_check(
            |tape, ids| {
                let y = tape.matmul(ids[1], ids[0])?;
                let sq = tape.mul(y, y)?;
                Ok(tape.sum_all(sq))
            },
            &params,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-9, "relative error {err}");
    }

    #[test]
    fn matmul_chain_matches_central_differences() {
        let mut rng = Rng::seed_from(22);
        let params = vec![
            rng.uniform_matrix(3, 3, -1.0, 1.0),
            rng.uniform_matrix(3, 3, -1.0, 1.0),
            rng.uniform_matrix(3, 3, -1.0, 1.0),
        ];
        let err = grad_check(
            |tape, ids| {
                let ab = tape.matmul(ids[0], ids[1])?;
                let abc = tape.matmul(ab, ids[2])?;
                Ok(tape.mean_all(abc))
            },
            &params,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "relative error {err}");
    }

    #[test]
    fn every_primitive_matches_central_differences() {
        let mut rng = Rng::seed_from(23);
        let params = vec![
            rng.uniform_matrix(3, 4, 0.1, 1.0),
            rng.uniform_matrix(1, 4, 0.1, 0.9),
            rng.uniform_matrix(4, 2, -1.0, 1.0),
        ];
        let err = grad_check(
            |tape, ids| {
                let sm = tape.row_softmax(ids[0]);
                let lnorm = tape.row_normalize(sm, 1e-5);
                let scaled = tape.mul_row_vec(lnorm, ids[1])?;
                let shifted = tape.add_row_vec(scaled, ids[1])?;
                let prod = tape.matmul(shifted, ids[2])?;
                let t = tape.transpose(prod);
                let left = tape.slice_cols(t, 0, 2);
                let right = tape.slice_cols(t, 1, 2);
                let cat = tape.concat_cols(&[left, right]);
                let act = tape.relu(cat);
                let sq = tape.mul(act, act)?;
                let rs = tape.row_sum(sq);
                let root = tape.sqrt(rs);
                Ok(tape.mean_all(root))
            },
            &params,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "relative error {err}");
    }

    #[test]
    fn log_clamped_matches_central_differences() {
        let mut rng = Rng::seed_from(24);
        let params = vec![rng.uniform_matrix(2, 3, -2.0, 2.0)];
        let err = grad_check(
            |tape, ids| {
                let probs = tape.row_softmax(ids[0]);
                let lp = tape.log_clamped(probs);
                let neg = tape.scale(lp, -1.0);
                Ok(tape.mean_all(neg))
            },
            &params,
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-6, "relative error {err}");
    }
}
