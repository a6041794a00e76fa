//! Online action detection: buffer the last `w` subject vectors, run four
//! transformer encoder layers, pool the outputs with a learned attention
//! vector, and classify the window into one of the three escorting actions.

mod buffer;
mod handoff;
mod model;
mod pool;
mod train;

pub use buffer::WindowBuffer;
pub use handoff::LatestSlot;
pub use model::{cross_entropy, cross_entropy_batch, ActionModel, EncoderLayer, NUM_CLASSES};
pub use pool::attention_pool;
pub use train::{train_action, ActionConfig, ActionError, LabeledSequence, TrainedAction};

/// The three action classes, encoded 0 | 1 | 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActionState {
    Following,
    Lagging,
    Stopping,
}

impl ActionState {
    pub const ALL: [ActionState; 3] = [
        ActionState::Following,
        ActionState::Lagging,
        ActionState::Stopping,
    ];

    pub fn index(self) -> usize {
        match self {
            ActionState::Following => 0,
            ActionState::Lagging => 1,
            ActionState::Stopping => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<ActionState> {
        match i {
            0 => Some(ActionState::Following),
            1 => Some(ActionState::Lagging),
            2 => Some(ActionState::Stopping),
            _ => None,
        }
    }

    /// Lower-case name used by the sequence file format and reports.
    pub fn name(self) -> &'static str {
        match self {
            ActionState::Following => "following",
            ActionState::Lagging => "lagging",
            ActionState::Stopping => "stopping",
        }
    }

    pub fn from_name(s: &str) -> Option<ActionState> {
        match s {
            "following" => Some(ActionState::Following),
            "lagging" => Some(ActionState::Lagging),
            "stopping" => Some(ActionState::Stopping),
            _ => None,
        }
    }
}

/// One per-frame classification: a probability for each class, the argmax
/// state, and the index of the frame closing the window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionPrediction {
    pub probs: [f64; 3],
    pub state: ActionState,
    pub frame: usize,
}

impl ActionPrediction {
    pub fn from_probs(probs: [f64; 3], frame: usize) -> ActionPrediction {
        let mut best = 0;
        for i in 1..3 {
            if probs[i] > probs[best] {
                best = i;
            }
        }
        ActionPrediction {
            probs,
            state: ActionState::from_index(best).unwrap(),
            frame,
        }
    }
}
