use thiserror::Error;

use crate::numcore::{AdamConfig, AdamState, Matrix, NumError, Rng, Tape};

use super::model::EmbeddingModel;
use super::sampler::{sample_triplets, TripletDomain};

#[derive(Debug, Error)]
pub enum ReidError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("training diverged at step {step}: loss = {loss}")]
    Diverged { step: usize, loss: f64 },
    #[error(transparent)]
    Num(#[from] NumError),
}

/// Training configuration for the embedding head.
#[derive(Debug, Clone)]
pub struct ReidConfig {
    pub in_dim: usize,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub margin: f64,
    pub lr: f64,
    pub steps: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for ReidConfig {
    fn default() -> Self {
        ReidConfig {
            in_dim: 64,
            hidden_dim: 128,
            embed_dim: 64,
            margin: 1.0,
            lr: 1e-3,
            steps: 500,
            batch: 64,
            seed: 1,
        }
    }
}

pub struct TrainedReid {
    pub model: EmbeddingModel,
    pub loss_history: Vec<f64>,
}

/// Train the embedding head with triplet margin loss over uniformly sampled
/// triplets. Deterministic given the seed.
pub fn train_reid(domains: &[TripletDomain], config: &ReidConfig) -> Result<TrainedReid, ReidError> {
    if config.margin < 0.0 {
        return Err(ReidError::Config("margin must be >= 0".into()));
    }
    if config.steps == 0 || config.batch == 0 {
        return Err(ReidError::Config("steps and batch must be positive".into()));
    }
    let mut rng = Rng::seed_from(config.seed);
    let mut model = EmbeddingModel::init(config.in_dim, config.hidden_dim, config.embed_dim, &mut rng);
    let mut params = model.params();
    let mut opt = AdamState::new(
        AdamConfig {
            lr: config.lr,
            ..AdamConfig::default()
        },
        &params,
    );
    let mut history = Vec::with_capacity(config.steps);

    for step in 0..config.steps {
        let batch = sample_triplets(domains, &mut rng, config.batch, config.margin)?;
        let anchors = stack(&batch.anchors, config.in_dim)?;
        let positives = stack(&batch.positives, config.in_dim)?;
        let negatives = stack(&batch.negatives, config.in_dim)?;

        let mut tape = Tape::new();
        let ids = [
            tape.param(params[0].clone()),
            tape.param(params[1].clone()),
            tape.param(params[2].clone()),
            tape.param(params[3].clone()),
        ];
        let a_in = tape.constant(anchors);
        let p_in = tape.constant(positives);
        let n_in = tape.constant(negatives);
        let loss = triplet_objective(&model, &mut tape, &ids, a_in, p_in, n_in, batch.margin)?;
        let loss_value = tape.value(loss).data()[0];
        if !loss_value.is_finite() {
            return Err(ReidError::Diverged {
                step,
                loss: loss_value,
            });
        }
        history.push(loss_value);
        tape.backward(loss)?;
        let grads: Vec<Matrix> = ids
            .iter()
            .zip(&params)
            .map(|(id, p)| {
                tape.grad(*id)
                    .cloned()
                    .unwrap_or_else(|| Matrix::zeros(p.rows(), p.cols()))
            })
            .collect();
        opt.step(&mut params, &grads)?;
    }
    model.set_params(params);
    Ok(TrainedReid {
        model,
        loss_history: history,
    })
}

/// Record the batched triplet objective on a tape:
/// embed a/p/n, take row-wise L2 distances, clamp with the margin, average.
pub fn triplet_objective(
    model: &EmbeddingModel,
    tape: &mut Tape,
    params: &[crate::numcore::NodeId; 4],
    anchors: crate::numcore::NodeId,
    positives: crate::numcore::NodeId,
    negatives: crate::numcore::NodeId,
    margin: f64,
) -> Result<crate::numcore::NodeId, NumError> {
    let ea = model.forward_on_tape(tape, anchors, params)?;
    let ep = model.forward_on_tape(tape, positives, params)?;
    let en = model.forward_on_tape(tape, negatives, params)?;
    let d_ap = row_l2(tape, ea, ep)?;
    let d_an = row_l2(tape, ea, en)?;
    let diff = tape.sub(d_ap, d_an)?;
    let rows = tape.value(diff).rows();
    let margin_node = tape.constant(Matrix::filled(rows, 1, margin));
    let shifted = tape.add(diff, margin_node)?;
    let clamped = tape.relu(shifted);
    Ok(tape.mean_all(clamped))
}

fn row_l2(
    tape: &mut Tape,
    x: crate::numcore::NodeId,
    y: crate::numcore::NodeId,
) -> Result<crate::numcore::NodeId, NumError> {
    let diff = tape.sub(x, y)?;
    let sq = tape.mul(diff, diff)?;
    let sums = tape.row_sum(sq);
    Ok(tape.sqrt(sums))
}

fn stack(rows: &[Vec<f64>], dim: usize) -> Result<Matrix, NumError> {
    let mut data = Vec::with_capacity(rows.len() * dim);
    for r in rows {
        if r.len() != dim {
            return Err(NumError::BadShape {
                op: "stack",
                expected: "feature length = configured in_dim",
                rows: 1,
                cols: r.len(),
            });
        }
        data.extend_from_slice(r);
    }
    Matrix::from_vec(rows.len(), dim, data)
}
