use super::matrix::{Matrix, NumError};

/// Hyperparameters of the adaptive-moment optimizer.
#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-parameter first/second moment accumulators plus the step counter.
///
/// The update is `p -= lr * m_hat / sqrt(v_hat + eps)` with the usual bias
/// correction, so the very first step with gradient `g = 1` moves by
/// `-lr / sqrt(1 + eps)`.
#[derive(Debug, Clone)]
pub struct AdamState {
    config: AdamConfig,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[Matrix]) -> Self {
        AdamState {
            config,
            m: params
                .iter()
                .map(|p| Matrix::zeros(p.rows(), p.cols()))
                .collect(),
            v: params
                .iter()
                .map(|p| Matrix::zeros(p.rows(), p.cols()))
                .collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Apply one update in place. Gradients must align with the parameter
    /// list the state was created for.
    pub fn step(&mut self, params: &mut [Matrix], grads: &[Matrix]) -> Result<(), NumError> {
        assert_eq!(params.len(), self.m.len(), "parameter count changed");
        assert_eq!(grads.len(), self.m.len(), "gradient count mismatch");
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.rows() != g.rows() || p.cols() != g.cols() {
                return Err(NumError::ShapeMismatch {
                    op: "optimizer_step",
                    lrows: p.rows(),
                    lcols: p.cols(),
                    rrows: g.rows(),
                    rcols: g.cols(),
                });
            }
            debug_assert_eq!(self.m[i].rows(), p.rows());
        }
        self.step += 1;
        let t = self.step as i32;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let pd = p.data_mut();
            for (((pi, gi), mi), vi) in pd
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut())
                .zip(v.data_mut().iter_mut())
            {
                *mi = c.beta1 * *mi + (1.0 - c.beta1) * gi;
                *vi = c.beta2 * *vi + (1.0 - c.beta2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *pi -= c.lr * m_hat / (v_hat + c.eps).sqrt();
            }
        }
        Ok(())
    }
}
