use rayon::prelude::*;
use thiserror::Error;

use crate::numcore::{AdamConfig, AdamState, Matrix, NumError, Rng, Tape};

use super::model::{ActionModel, NUM_CLASSES};
use super::ActionState;

#[derive(Debug, Error)]
pub enum ActionError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("training diverged at step {step}: loss = {loss}")]
    Diverged { step: usize, loss: f64 },
    #[error(transparent)]
    Num(#[from] NumError),
}

/// One training sequence: per frame, the subject vector if the subject was
/// seen (ground-truth identification) and the frame's action label.
#[derive(Debug, Clone)]
pub struct LabeledSequence {
    pub frames: Vec<(Option<Vec<f64>>, ActionState)>,
}

/// Training configuration for the windowed classifier.
#[derive(Debug, Clone)]
pub struct ActionConfig {
    pub window: usize,
    pub dim: usize,
    pub heads: usize,
    pub ff_width: usize,
    pub lr: f64,
    pub steps: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for ActionConfig {
    fn default() -> Self {
        ActionConfig {
            window: 60,
            dim: 68,
            heads: 4,
            ff_width: 272,
            lr: 1e-3,
            steps: 400,
            batch: 8,
            seed: 1,
        }
    }
}

pub struct TrainedAction {
    pub model: ActionModel,
    pub loss_history: Vec<f64>,
}

struct WindowRef {
    seq: usize,
    end: usize,
}

/// Train the action model with cross-entropy over uniformly sampled windows.
/// A window's label is the ground-truth action of its last frame. Gradients
/// within a batch are computed per window (in parallel) and summed in a
/// fixed order, so results are bit-identical for a given seed.
pub fn train_action(
    sequences: &[LabeledSequence],
    config: &ActionConfig,
) -> Result<TrainedAction, ActionError> {
    if config.steps == 0 || config.batch == 0 {
        return Err(ActionError::Config("steps and batch must be positive".into()));
    }
    if config.dim % config.heads != 0 {
        return Err(ActionError::Config(format!(
            "dim {} must be divisible by heads {}",
            config.dim, config.heads
        )));
    }
    let windows: Vec<WindowRef> = sequences
        .iter()
        .enumerate()
        .flat_map(|(si, s)| {
            (config.window..=s.frames.len()).map(move |end| WindowRef {
                seq: si,
                end: end - 1,
            })
        })
        .collect();
    if windows.is_empty() {
        return Err(ActionError::Config(format!(
            "no sequence reaches the window length {} — nothing to train on",
            config.window
        )));
    }

    let mut rng = Rng::seed_from(config.seed);
    let mut model = ActionModel::init(
        config.window,
        config.dim,
        config.heads,
        config.ff_width,
        &mut rng,
    );
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
        let picks: Vec<&WindowRef> = (0..config.batch)
            .map(|_| &windows[rng.index(windows.len())])
            .collect();

        model.set_params(params.clone());
        let results: Vec<Result<(f64, Vec<Matrix>), NumError>> = picks
            .par_iter()
            .map(|wref| window_gradients(&model, sequences, wref, config))
            .collect();

        let mut loss_sum = 0.0;
        let mut grad_sum: Vec<Matrix> = params
            .iter()
            .map(|p| Matrix::zeros(p.rows(), p.cols()))
            .collect();
        for r in results {
            let (loss, grads) = r?;
            loss_sum += loss;
            for (acc, g) in grad_sum.iter_mut().zip(&grads) {
                for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                    *a += b;
                }
            }
        }
        let inv = 1.0 / config.batch as f64;
        let loss_mean = loss_sum * inv;
        if !loss_mean.is_finite() {
            return Err(ActionError::Diverged {
                step,
                loss: loss_mean,
            });
        }
        history.push(loss_mean);
        for g in &mut grad_sum {
            *g = g.scale(inv);
        }
        opt.step(&mut params, &grad_sum)?;
    }
    model.set_params(params);
    Ok(TrainedAction {
        model,
        loss_history: history,
    })
}

fn window_gradients(
    model: &ActionModel,
    sequences: &[LabeledSequence],
    wref: &WindowRef,
    config: &ActionConfig,
) -> Result<(f64, Vec<Matrix>), NumError> {
    let frames = &sequences[wref.seq].frames;
    let start = wref.end + 1 - config.window;
    let mut data = Vec::with_capacity(config.window * config.dim);
    let mut mask = Vec::with_capacity(config.window);
    for (vec, _) in &frames[start..=wref.end] {
        match vec {
            Some(v) => {
                debug_assert_eq!(v.len(), config.dim);
                data.extend_from_slice(v);
                mask.push(true);
            }
            None => {
                data.extend(std::iter::repeat(0.0).take(config.dim));
                mask.push(false);
            }
        }
    }
    let input = Matrix::from_vec(config.window, config.dim, data)?;
    let label = frames[wref.end].1;

    let mut tape = Tape::new();
    let ids = model.register_params(&mut tape);
    let inp = tape.constant(input);
    let (_, logits) = model.forward_nodes(&mut tape, &ids, inp, &mask)?;
    let loss = nll_from_logits(&mut tape, logits, label)?;
    let loss_value = tape.value(loss).data()[0];
    tape.backward(loss)?;
    let grads = ids
        .iter()
        .map(|id| {
            tape.grad(*id)
                .cloned()
                .expect("every parameter participates in the forward pass")
        })
        .collect();
    Ok((loss_value, grads))
}

/// Cross-entropy node from logits: softmax, pick the true class, negative
/// clamped log.
pub(crate) fn nll_from_logits(
    tape: &mut Tape,
    logits: crate::numcore::NodeId,
    label: ActionState,
) -> Result<crate::numcore::NodeId, NumError> {
    let probs = tape.row_softmax(logits);
    let mut onehot = vec![0.0; NUM_CLASSES];
    onehot[label.index()] = 1.0;
    let target = tape.constant(Matrix::from_vec(1, NUM_CLASSES, onehot)?);
    let picked = tape.mul(probs, target)?;
    let p = tape.row_sum(picked);
    let lp = tape.log_clamped(p);
    Ok(tape.scale(lp, -1.0))
}
