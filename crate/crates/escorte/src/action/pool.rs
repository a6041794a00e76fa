use crate::numcore::{Matrix, NumError};

/// Attention pooling: collapse `w` transformer outputs into one vector.
///
/// Computes exactly
/// `B = H·A`, `C = softmax(B)`, `u = Hᵀ·C`
/// for `H: w x d` and `A: d x 1`, returning `(B, C, u)`. The softmax runs
/// over the `w` entries of the single column, so `u` is a convex
/// combination of the rows of `H`.
pub fn attention_pool(h: &Matrix, a: &Matrix) -> Result<(Matrix, Matrix, Matrix), NumError> {
    if a.cols() != 1 || a.rows() != h.cols() {
        return Err(NumError::ShapeMismatch {
            op: "attention_pool",
            lrows: h.rows(),
            lcols: h.cols(),
            rrows: a.rows(),
            rcols: a.cols(),
        });
    }
    let b = h.matmul(a)?;
    let c = {
        let bt = b.transpose(); // 1 x w: softmax over the window entries
        bt.row_softmax().transpose()
    };
    let u = h.transpose().matmul(&c)?;
    Ok((b, c, u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Rng;

    #[test]
    fn identical_rows_return_the_row() {
        let r = [2.5, -1.0, 0.75];
        let h = Matrix::from_vec(4, 3, r.iter().cycle().take(12).cloned().collect()).unwrap();
        let a = Matrix::from_vec(3, 1, vec![0.3, -2.0, 1.1]).unwrap();
        let (_, c, u) = attention_pool(&h, &a).unwrap();
        let csum: f64 = c.data().iter().sum();
        assert!((csum - 1.0).abs() < 1e-12);
        for (ui, ri) in u.data().iter().zip(&r) {
            assert!((ui - ri).abs() <= 1e-12 * ri.abs().max(1.0));
        }
    }

    #[test]
    fn closed_form_two_by_two() {
        let h = Matrix::identity(2);
        let a = Matrix::from_vec(2, 1, vec![1.0, 0.0]).unwrap();
        let (b, c, u) = attention_pool(&h, &a).unwrap();
        assert_eq!(b.data(), &[1.0, 0.0]);
        let e = std::f64::consts::E;
        let expect = [e / (e + 1.0), 1.0 / (e + 1.0)];
        for (got, want) in c.data().iter().zip(&expect) {
            assert!((got - want).abs() < 1e-12);
        }
        for (got, want) in u.data().iter().zip(&expect) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_attention_vector_gives_columnwise_mean() {
        let mut rng = Rng::seed_from(81);
        let h = rng.uniform_matrix(5, 3, -2.0, 2.0);
        let a = Matrix::zeros(3, 1);
        let (_, c, u) = attention_pool(&h, &a).unwrap();
        for v in c.data() {
            assert!((v - 0.2).abs() < 1e-12);
        }
        for j in 0..3 {
            let mean: f64 = (0..5).map(|i| h.get(i, j)).sum::<f64>() / 5.0;
            assert!((u.get(j, 0) - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn pooled_vector_stays_inside_column_ranges() {
        let mut rng = Rng::seed_from(82);
        for _ in 0..500 {
            let w = 2 + rng.index(6);
            let d = 1 + rng.index(6);
            let h = rng.uniform_matrix(w, d, -5.0, 5.0);
            let a = rng.uniform_matrix(d, 1, -3.0, 3.0);
            let (_, c, u) = attention_pool(&h, &a).unwrap();
            let csum: f64 = c.data().iter().sum();
            assert!((csum - 1.0).abs() < 1e-12);
            for j in 0..d {
                let col: Vec<f64> = (0..w).map(|i| h.get(i, j)).collect();
                let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let v = u.get(j, 0);
                assert!(v >= lo - 1e-12 && v <= hi + 1e-12, "{v} not in [{lo}, {hi}]");
            }
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let h = Matrix::zeros(4, 3);
        let a = Matrix::zeros(2, 1);
        assert!(attention_pool(&h, &a).is_err());
    }
}
