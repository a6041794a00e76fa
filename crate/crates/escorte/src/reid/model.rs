use crate::numcore::{Checkpoint, CheckpointError, Matrix, NodeId, NumError, Rng, Tape};

/// Two linear layers with a ReLU in between.
///
/// Inputs are row vectors; a batch stacks one detection feature per row.
/// `forward(x) = relu(x·W1 + b1)·W2 + b2` with `W1: in x hidden` and
/// `W2: hidden x embed`.
#[derive(Debug, Clone)]
pub struct EmbeddingModel {
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
}

impl EmbeddingModel {
    /// Fan-in scaled uniform init: entries of a layer with `fan_in` inputs
    /// are drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn init(in_dim: usize, hidden_dim: usize, embed_dim: usize, rng: &mut Rng) -> Self {
        let s1 = 1.0 / (in_dim as f64).sqrt();
        let s2 = 1.0 / (hidden_dim as f64).sqrt();
        EmbeddingModel {
            w1: rng.uniform_matrix(in_dim, hidden_dim, -s1, s1),
            b1: Matrix::zeros(1, hidden_dim),
            w2: rng.uniform_matrix(hidden_dim, embed_dim, -s2, s2),
            b2: Matrix::zeros(1, embed_dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn embed_dim(&self) -> usize {
        self.w2.cols()
    }

    /// Embed one feature vector (given as a slice of length `in_dim`).
    pub fn embed(&self, feature: &[f64]) -> Result<Matrix, NumError> {
        let x = Matrix::row(feature)?;
        self.embed_batch(&x)
    }

    /// Embed a batch of features, one per row.
    pub fn embed_batch(&self, features: &Matrix) -> Result<Matrix, NumError> {
        if features.cols() != self.in_dim() {
            return Err(NumError::ShapeMismatch {
                op: "embed",
                lrows: features.rows(),
                lcols: features.cols(),
                rrows: self.in_dim(),
                rcols: self.hidden_dim(),
            });
        }
        let mut h = features.matmul(&self.w1)?;
        add_row_in_place(&mut h, &self.b1);
        let mut out = h.relu().matmul(&self.w2)?;
        add_row_in_place(&mut out, &self.b2);
        out.check_finite("embed")?;
        Ok(out)
    }

    /// Record the forward pass on a tape; returns the embedding node along
    /// with the parameter nodes in [`EmbeddingModel::param_order`].
    pub fn forward_on_tape(
        &self,
        tape: &mut Tape,
        features: NodeId,
        params: &[NodeId; 4],
    ) -> Result<NodeId, NumError> {
        let [w1, b1, w2, b2] = *params;
        let h = tape.matmul(features, w1)?;
        let h = tape.add_row_vec(h, b1)?;
        let h = tape.relu(h);
        let out = tape.matmul(h, w2)?;
        tape.add_row_vec(out, b2)
    }

    pub fn register_params(&self, tape: &mut Tape) -> [NodeId; 4] {
        [
            tape.param(self.w1.clone()),
            tape.param(self.b1.clone()),
            tape.param(self.w2.clone()),
            tape.param(self.b2.clone()),
        ]
    }

    pub fn params(&self) -> Vec<Matrix> {
        vec![
            self.w1.clone(),
            self.b1.clone(),
            self.w2.clone(),
            self.b2.clone(),
        ]
    }

    pub fn set_params(&mut self, params: Vec<Matrix>) {
        let mut it = params.into_iter();
        self.w1 = it.next().unwrap();
        self.b1 = it.next().unwrap();
        self.w2 = it.next().unwrap();
        self.b2 = it.next().unwrap();
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(
            "reid",
            vec![
                self.in_dim() as u32,
                self.hidden_dim() as u32,
                self.embed_dim() as u32,
            ],
        );
        ck.push("w1", self.w1.clone());
        ck.push("b1", self.b1.clone());
        ck.push("w2", self.w2.clone());
        ck.push("b2", self.b2.clone());
        ck
    }

    pub fn from_checkpoint(mut ck: Checkpoint) -> Result<Self, CheckpointError> {
        ck.expect_kind("reid")?;
        Ok(EmbeddingModel {
            w1: ck.take("w1")?,
            b1: ck.take("b1")?,
            w2: ck.take("w2")?,
            b2: ck.take("b2")?,
        })
    }

    /// Fingerprint of the exact weights; recorded in reference anchors.
    pub fn fingerprint(&self) -> u64 {
        self.to_checkpoint().fingerprint()
    }
}

fn add_row_in_place(m: &mut Matrix, v: &Matrix) {
    let cols = m.cols();
    for r in 0..m.rows() {
        let start = r * cols;
        for c in 0..cols {
            let x = m.data()[start + c] + v.data()[c];
            m.data_mut()[start + c] = x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_embeds_to_zero() {
        let model = EmbeddingModel {
            w1: Matrix::zeros(3, 4),
            b1: Matrix::zeros(1, 4),
            w2: Matrix::zeros(4, 2),
            b2: Matrix::zeros(1, 2),
        };
        let out = model.embed(&[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(out.data(), &[0.0, 0.0]);
    }

    #[test]
    fn identity_composition_on_nonnegative_input() {
        let model = EmbeddingModel {
            w1: Matrix::identity(3),
            b1: Matrix::zeros(1, 3),
            w2: Matrix::identity(3),
            b2: Matrix::zeros(1, 3),
        };
        let x = [0.5, 0.0, 2.0];
        let out = model.embed(&x).unwrap();
        assert_eq!(out.data(), &x);
    }

    #[test]
    fn matches_straight_line_recomputation() {
        let mut rng = Rng::seed_from(31);
        let model = EmbeddingModel::init(5, 7, 3, &mut rng);
        let x: Vec<f64> = (0..5).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let out = model.embed(&x).unwrap();

        // Independent re-computation with bare loops.
        let mut hidden = vec![0.0; 7];
        for j in 0..7 {
            let mut acc = model.b1.get(0, j);
            for (i, xi) in x.iter().enumerate() {
                acc += xi * model.w1.get(i, j);
            }
            hidden[j] = acc.max(0.0);
        }
        for k in 0..3 {
            let mut acc = model.b2.get(0, k);
            for (j, hj) in hidden.iter().enumerate() {
                acc += hj * model.w2.get(j, k);
            }
            assert!((out.data()[k] - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut rng = Rng::seed_from(32);
        let model = EmbeddingModel::init(5, 7, 3, &mut rng);
        assert!(model.embed(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn embed_is_lipschitz_bounded_by_operator_norms() {
        let mut rng = Rng::seed_from(33);
        let model = EmbeddingModel::init(6, 9, 4, &mut rng);
        let bound_factor = model.w1.operator_norm() * model.w2.operator_norm();
        for _ in 0..50 {
            let x = rng.uniform_matrix(1, 6, -2.0, 2.0);
            let y = rng.uniform_matrix(1, 6, -2.0, 2.0);
            let fx = model.embed_batch(&x).unwrap();
            let fy = model.embed_batch(&y).unwrap();
            let lhs = fx.l2_distance(&fy).unwrap();
            let rhs = bound_factor * x.l2_distance(&y).unwrap() + 1e-9;
            assert!(lhs <= rhs, "{lhs} > {rhs}");
        }
    }

    #[test]
    fn checkpoint_round_trip_preserves_fingerprint() {
        let mut rng = Rng::seed_from(34);
        let model = EmbeddingModel::init(4, 6, 2, &mut rng);
        let dir = std::env::temp_dir().join("escorte-reid-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.ckpt");
        model.to_checkpoint().save(&path).unwrap();
        let loaded =
            EmbeddingModel::from_checkpoint(Checkpoint::load(&path).unwrap()).unwrap();
        assert_eq!(loaded.fingerprint(), model.fingerprint());
        std::fs::remove_file(&path).unwrap();
    }
}
