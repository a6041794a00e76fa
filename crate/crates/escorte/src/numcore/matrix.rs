use thiserror::Error;

/// Errors raised by the numeric substrate.
#[derive(Debug, Error)]
pub enum NumError {
    #[error("shape mismatch in {op}: left is {lrows}x{lcols}, right is {rrows}x{rcols}")]
    ShapeMismatch {
        op: &'static str,
        lrows: usize,
        lcols: usize,
        rrows: usize,
        rcols: usize,
    },
    #[error("{op}: expected {expected}, got {rows}x{cols}")]
    BadShape {
        op: &'static str,
        expected: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("backward requires a scalar (1x1) loss node, got {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },
}

/// Dense row-major matrix of f64 values.
///
/// Public constructors and operations reject NaN/Inf entries, so a `Matrix`
/// obtained through this API always holds finite data. Row vectors are
/// `1 x d` matrices; a batch stacks one vector per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumError> {
        assert_eq!(data.len(), rows * cols, "data length must be rows*cols");
        let m = Matrix { rows, cols, data };
        m.check_finite("from_vec")?;
        Ok(m)
    }

    /// Infallible constructor for internal use where finiteness is known.
    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, v: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![v; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Row vector `1 x d` from a slice.
    pub fn row(values: &[f64]) -> Result<Self, NumError> {
        Self::from_vec(1, values.len(), values.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn check_finite(&self, op: &'static str) -> Result<(), NumError> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(NumError::NonFinite { op })
        }
    }

    fn same_shape(&self, other: &Matrix, op: &'static str) -> Result<(), NumError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(NumError::ShapeMismatch {
                op,
                lrows: self.rows,
                lcols: self.cols,
                rrows: other.rows,
                rcols: other.cols,
            });
        }
        Ok(())
    }

    /// Standard matrix product.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, NumError> {
        if self.cols != other.rows {
            return Err(NumError::ShapeMismatch {
                op: "matmul",
                lrows: self.rows,
                lcols: self.cols,
                rrows: other.rows,
                rcols: other.cols,
            });
        }
        let mut out = vec![0.0; self.rows * other.cols];
        let n = other.cols;
        for i in 0..self.rows {
            let arow = &self.data[i * self.cols..(i + 1) * self.cols];
            let orow = &mut out[i * n..(i + 1) * n];
            for (k, &aik) in arow.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                let brow = &other.data[k * n..(k + 1) * n];
                for (o, &b) in orow.iter_mut().zip(brow.iter()) {
                    *o += aik * b;
                }
            }
        }
        Ok(Matrix::from_vec_unchecked(self.rows, other.cols, out))
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = vec![0.0; self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        Matrix::from_vec_unchecked(self.cols, self.rows, out)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix, NumError> {
        self.same_shape(other, "add")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Matrix::from_vec_unchecked(self.rows, self.cols, data))
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix, NumError> {
        self.same_shape(other, "sub")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Matrix::from_vec_unchecked(self.rows, self.cols, data))
    }

    pub fn scale(&self, c: f64) -> Matrix {
        let data = self.data.iter().map(|v| v * c).collect();
        Matrix::from_vec_unchecked(self.rows, self.cols, data)
    }

    /// Elementwise max(x, 0).
    pub fn relu(&self) -> Matrix {
        let data = self.data.iter().map(|v| v.max(0.0)).collect();
        Matrix::from_vec_unchecked(self.rows, self.cols, data)
    }

    /// Per-row softmax with max-subtraction, so rows of any magnitude stay
    /// inside the exponentials' range.
    pub fn row_softmax(&self) -> Matrix {
        let mut out = vec![0.0; self.data.len()];
        for r in 0..self.rows {
            let row = self.row_slice(r);
            let orow = &mut out[r * self.cols..(r + 1) * self.cols];
            softmax_into(row, orow);
        }
        Matrix::from_vec_unchecked(self.rows, self.cols, out)
    }

    /// Euclidean norm of all entries (the L2 norm for vectors).
    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// L2 distance between two same-shaped matrices.
    pub fn l2_distance(&self, other: &Matrix) -> Result<f64, NumError> {
        self.same_shape(other, "l2_distance")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    /// Largest singular value, estimated by power iteration on `MᵀM`.
    pub fn operator_norm(&self) -> f64 {
        let gram = self.transpose().matmul(self).expect("gram");
        let n = gram.rows;
        if n == 0 {
            return 0.0;
        }
        let mut v = vec![1.0 / (n as f64).sqrt(); n];
        let mut lambda = 0.0;
        for _ in 0..500 {
            let mut w = vec![0.0; n];
            for i in 0..n {
                let grow = gram.row_slice(i);
                w[i] = grow.iter().zip(&v).map(|(g, x)| g * x).sum();
            }
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            for x in &mut w {
                *x /= norm;
            }
            let prev = lambda;
            lambda = norm;
            v = w;
            if (lambda - prev).abs() <= 1e-14 * lambda.max(1.0) {
                break;
            }
        }
        lambda.sqrt()
    }
}

pub(crate) fn softmax_into(row: &[f64], out: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &x) in out.iter_mut().zip(row.iter()) {
        let e = (x - max).exp();
        *o = e;
        sum += e;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Rng;

    #[test]
    fn matmul_identity() {
        let i = Matrix::identity(2);
        let a = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(i.matmul(&a).unwrap(), a);
    }

    #[test]
    fn matmul_hand_computed() {
        let a = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Matrix::from_vec(2, 1, vec![5.0, 6.0]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[17.0, 39.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 3);
        let err = a.matmul(&b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x3"), "message should name shapes: {msg}");
    }

    #[test]
    fn relu_cases() {
        let x = Matrix::from_vec(1, 3, vec![-1.0, 2.0, 0.0]).unwrap();
        assert_eq!(x.relu().data(), &[0.0, 2.0, 0.0]);
        let neg = Matrix::filled(2, 2, -3.5);
        assert_eq!(neg.relu(), Matrix::zeros(2, 2));
        let pos = Matrix::from_vec(1, 2, vec![0.5, 7.0]).unwrap();
        assert_eq!(pos.relu(), pos);
    }

    #[test]
    fn softmax_symmetry_and_closed_form() {
        let x = Matrix::from_vec(1, 2, vec![0.0, 0.0]).unwrap();
        assert_eq!(x.row_softmax().data(), &[0.5, 0.5]);

        let y = Matrix::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
        let s = y.row_softmax();
        let e = std::f64::consts::E;
        assert!((s.data()[0] - e / (e + 1.0)).abs() < 1e-12);
        assert!((s.data()[1] - 1.0 / (e + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn softmax_no_overflow() {
        let x = Matrix::from_vec(1, 2, vec![1000.0, 0.0]).unwrap();
        let s = x.row_softmax();
        assert!(s.check_finite("softmax").is_ok());
        assert!((s.data()[0] - 1.0).abs() < 1e-12);
        assert!(s.data()[1] < 1e-300);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = Rng::seed_from(7);
        for _ in 0..50 {
            let m = rng.uniform_matrix(3, 5, -50.0, 50.0);
            let s = m.row_softmax();
            for r in 0..3 {
                let sum: f64 = s.row_slice(r).iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn softmax_shift_invariance() {
        let mut rng = Rng::seed_from(8);
        for _ in 0..50 {
            let m = rng.uniform_matrix(2, 4, -10.0, 10.0);
            let c = rng.uniform(-100.0, 100.0);
            let shifted = m.add(&Matrix::filled(2, 4, c)).unwrap();
            let a = m.row_softmax();
            let b = shifted.row_softmax();
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matmul_associativity() {
        let mut rng = Rng::seed_from(9);
        for _ in 0..20 {
            let a = rng.uniform_matrix(3, 4, -1.0, 1.0);
            let b = rng.uniform_matrix(4, 2, -1.0, 1.0);
            let c = rng.uniform_matrix(2, 5, -1.0, 1.0);
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            for (x, y) in left.data().iter().zip(right.data()) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_non_finite() {
        assert!(Matrix::from_vec(1, 1, vec![f64::NAN]).is_err());
        assert!(Matrix::from_vec(1, 2, vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn operator_norm_of_diagonal() {
        let m = Matrix::from_vec(2, 2, vec![3.0, 0.0, 0.0, -2.0]).unwrap();
        assert!((m.operator_norm() - 3.0).abs() < 1e-9);
    }
}
