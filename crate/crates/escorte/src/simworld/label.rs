use crate::action::ActionState;

use super::kinematics::STATIONARY_FRAMES;
use super::{GapBand, WorldState};

/// Ground-truth action label for the current state.
///
/// Stationarity wins: an escortee below the stationary speed cutoff for at
/// least [`STATIONARY_FRAMES`] consecutive frames is Stopping regardless of
/// gap. Otherwise the latched gap band decides — nominally gap < 2 m is
/// Following and beyond is Lagging, with the 1.8/2.2 m hysteresis applied
/// when the band was latched during [`super::kinematics_step`]. The label is
/// a pure function of the state, so re-labeling a recorded trace reproduces
/// the stored labels exactly.
pub fn label_frame(state: &WorldState) -> ActionState {
    if state.stationary_frames >= STATIONARY_FRAMES {
        ActionState::Stopping
    } else {
        match state.gap_band {
            GapBand::Near => ActionState::Following,
            GapBand::Far => ActionState::Lagging,
        }
    }
}
