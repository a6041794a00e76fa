//! Escort control: a finite state machine mapping the detected action
//! stream to speed commands and prompts.
//!
//! Transitions are debounced — a state change requires a confirm-count run
//! of identical observations — so single misclassified frames never move
//! the machine. Halting starts a prompt cycle: after `prompt_timeout`
//! seconds stopped, the robot asks the escortee to proceed; if no confirmed
//! Following arrives within `abort_timeout` more seconds, the escort is
//! aborted. Subject-absent observations freeze the timers and hold the
//! last command, so occlusion can never time an escort out.

use thiserror::Error;

use crate::action::ActionState;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("invalid control config: {0}")]
    InvalidConfig(String),
    #[error("control machine is aborted; create a fresh state with reset()")]
    SteppedAborted,
}

/// Speeds, debounce counts, and timeouts for the controller.
#[derive(Debug, Clone, Copy)]
pub struct ControlConfig {
    pub cruise_speed: f64,
    pub slowed_speed: f64,
    /// Consecutive Lagging observations before slowing down; also the run of
    /// Following that confirms a resume.
    pub lag_confirm: u32,
    /// Consecutive Stopping observations before halting.
    pub stop_confirm: u32,
    /// Seconds halted before prompting the escortee to proceed.
    pub prompt_timeout: f64,
    /// Seconds after the prompt without a confirmed resume before aborting.
    pub abort_timeout: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            cruise_speed: 1.0,
            slowed_speed: 0.5,
            lag_confirm: 15,
            stop_confirm: 30,
            prompt_timeout: 5.0,
            abort_timeout: 30.0,
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.slowed_speed > 0.0 && self.slowed_speed < self.cruise_speed) {
            return Err(ControlError::InvalidConfig(
                "need 0 < slowed_speed < cruise_speed".into(),
            ));
        }
        if self.prompt_timeout <= 0.0 || self.abort_timeout <= 0.0 {
            return Err(ControlError::InvalidConfig("timeouts must be positive".into()));
        }
        if self.lag_confirm == 0 || self.stop_confirm == 0 {
            return Err(ControlError::InvalidConfig("confirm counts must be >= 1".into()));
        }
        Ok(())
    }
}

/// Controller phases. `Aborted` is terminal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControlPhase {
    Proceeding,
    Slowed,
    Halted,
    Prompted,
    Aborted,
}

impl ControlPhase {
    pub fn name(self) -> &'static str {
        match self {
            ControlPhase::Proceeding => "proceeding",
            ControlPhase::Slowed => "slowed",
            ControlPhase::Halted => "halted",
            ControlPhase::Prompted => "prompted",
            ControlPhase::Aborted => "aborted",
        }
    }
}

/// One-shot utterance attached to a command on the transition that causes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prompt {
    None,
    KeepUp,
    PleaseProceed,
}

impl Prompt {
    pub fn name(self) -> &'static str {
        match self {
            Prompt::None => "none",
            Prompt::KeepUp => "keep-up",
            Prompt::PleaseProceed => "please-proceed",
        }
    }
}

/// Speed command with optional prompt; `terminate` implies speed 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotCommand {
    pub speed: f64,
    pub prompt: Prompt,
    pub terminate: bool,
}

/// Machine state: phase, debounce counters, and the two timers. Timers
/// reset on every transition; absent observations freeze them.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlState {
    pub phase: ControlPhase,
    pub time_in_phase: f64,
    pub time_since_prompt: f64,
    consec_following: u32,
    consec_lagging: u32,
    consec_stopping: u32,
}

/// Fresh machine in Proceeding with zeroed timers.
pub fn reset(config: &ControlConfig) -> Result<ControlState, ControlError> {
    config.validate()?;
    Ok(ControlState {
        phase: ControlPhase::Proceeding,
        time_in_phase: 0.0,
        time_since_prompt: 0.0,
        consec_following: 0,
        consec_lagging: 0,
        consec_stopping: 0,
    })
}

fn hold_command(phase: ControlPhase, config: &ControlConfig) -> RobotCommand {
    let speed = match phase {
        ControlPhase::Proceeding => config.cruise_speed,
        ControlPhase::Slowed => config.slowed_speed,
        ControlPhase::Halted | ControlPhase::Prompted | ControlPhase::Aborted => 0.0,
    };
    RobotCommand {
        speed,
        prompt: Prompt::None,
        terminate: phase == ControlPhase::Aborted,
    }
}

/// Advance the machine by one observation.
///
/// `observation` is the detected action, or `None` when the subject is
/// absent (occluded): timers freeze and the last command holds. Transitions:
/// - a `lag_confirm` run of Following returns any non-terminal phase to
///   Proceeding;
/// - Proceeding drops to Slowed (keep-up prompt) after a `lag_confirm` run
///   of Lagging;
/// - Proceeding or Slowed halts after a `stop_confirm` run of Stopping;
/// - Halted prompts the escortee after `prompt_timeout` seconds;
/// - Prompted aborts after `abort_timeout` more seconds without a confirmed
///   resume. Continued Stopping cannot re-enter Halted from Prompted — once
///   prompted, the cycle must end in a resume or an abort.
pub fn control_step(
    state: &ControlState,
    observation: Option<ActionState>,
    dt: f64,
    config: &ControlConfig,
) -> Result<(ControlState, RobotCommand), ControlError> {
    debug_assert!(dt > 0.0);
    if state.phase == ControlPhase::Aborted {
        return Err(ControlError::SteppedAborted);
    }
    let mut next = state.clone();

    let Some(action) = observation else {
        return Ok((next, hold_command(state.phase, config)));
    };

    match action {
        ActionState::Following => {
            next.consec_following = next.consec_following.saturating_add(1);
            next.consec_lagging = 0;
            next.consec_stopping = 0;
        }
        ActionState::Lagging => {
            next.consec_following = 0;
            next.consec_lagging = next.consec_lagging.saturating_add(1);
            next.consec_stopping = 0;
        }
        ActionState::Stopping => {
            next.consec_following = 0;
            next.consec_lagging = 0;
            next.consec_stopping = next.consec_stopping.saturating_add(1);
        }
    }
    next.time_in_phase += dt;
    if next.phase == ControlPhase::Prompted {
        next.time_since_prompt += dt;
    }

    fn transition(next: &mut ControlState, phase: ControlPhase) {
        next.phase = phase;
        next.time_in_phase = 0.0;
        next.time_since_prompt = 0.0;
        next.consec_following = 0;
        next.consec_lagging = 0;
        next.consec_stopping = 0;
    }

    if next.consec_following >= config.lag_confirm && state.phase != ControlPhase::Proceeding {
        transition(&mut next, ControlPhase::Proceeding);
        return Ok((
            next,
            RobotCommand {
                speed: config.cruise_speed,
                prompt: Prompt::None,
                terminate: false,
            },
        ));
    }

    match state.phase {
        ControlPhase::Proceeding => {
            if next.consec_lagging >= config.lag_confirm {
                transition(&mut next, ControlPhase::Slowed);
                return Ok((
                    next,
                    RobotCommand {
                        speed: config.slowed_speed,
                        prompt: Prompt::KeepUp,
                        terminate: false,
                    },
                ));
            }
            if next.consec_stopping >= config.stop_confirm {
                transition(&mut next, ControlPhase::Halted);
                return Ok((next, hold_command(ControlPhase::Halted, config)));
            }
        }
        ControlPhase::Slowed => {
            if next.consec_stopping >= config.stop_confirm {
                transition(&mut next, ControlPhase::Halted);
                return Ok((next, hold_command(ControlPhase::Halted, config)));
            }
        }
        ControlPhase::Halted => {
            if next.time_in_phase >= config.prompt_timeout {
                transition(&mut next, ControlPhase::Prompted);
                return Ok((
                    next,
                    RobotCommand {
                        speed: 0.0,
                        prompt: Prompt::PleaseProceed,
                        terminate: false,
                    },
                ));
            }
        }
        ControlPhase::Prompted => {
            if next.time_since_prompt >= config.abort_timeout {
                transition(&mut next, ControlPhase::Aborted);
                return Ok((
                    next,
                    RobotCommand {
                        speed: 0.0,
                        prompt: Prompt::None,
                        terminate: true,
                    },
                ));
            }
        }
        ControlPhase::Aborted => unreachable!("checked above"),
    }
    Ok((next, hold_command(next.phase, config)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_config() -> ControlConfig {
        ControlConfig {
            lag_confirm: 3,
            stop_confirm: 3,
            prompt_timeout: 1.0,
            abort_timeout: 2.0,
            ..ControlConfig::default()
        }
    }

    fn run(
        state: ControlState,
        obs: &[Option<ActionState>],
        dt: f64,
        config: &ControlConfig,
    ) -> (ControlState, Vec<RobotCommand>) {
        let mut s = state;
        let mut cmds = Vec::new();
        for o in obs {
            let (ns, cmd) = control_step(&s, *o, dt, config).unwrap();
            s = ns;
            cmds.push(cmd);
        }
        (s, cmds)
    }

    #[test]
    fn reset_is_proceeding_and_deterministic() {
        let config = quick_config();
        let a = reset(&config).unwrap();
        assert_eq!(a.phase, ControlPhase::Proceeding);
        assert_eq!(a, reset(&config).unwrap());
        let (s, _) = control_step(&a, Some(ActionState::Following), 0.1, &config).unwrap();
        assert_eq!(s.phase, ControlPhase::Proceeding);
    }

    #[test]
    fn confirmed_lagging_slows_with_keep_up_prompt() {
        let config = quick_config();
        let state = reset(&config).unwrap();
        let obs = vec![Some(ActionState::Lagging); 3];
        let (s, cmds) = run(state, &obs, 0.1, &config);
        assert_eq!(s.phase, ControlPhase::Slowed);
        let last = cmds.last().unwrap();
        assert_eq!(last.speed, config.slowed_speed);
        assert_eq!(last.prompt, Prompt::KeepUp);
    }

    #[test]
    fn halted_resumes_to_cruise_after_confirmed_following() {
        let config = quick_config();
        let state = reset(&config).unwrap();
        let mut obs = vec![Some(ActionState::Stopping); 3];
        obs.extend(vec![Some(ActionState::Following); 3]);
        let (s, cmds) = run(state, &obs, 0.1, &config);
        assert_eq!(s.phase, ControlPhase::Proceeding);
        let last = cmds.last().unwrap();
        assert_eq!(last.speed, config.cruise_speed);
    }

    #[test]
    fn prompt_then_abort_without_response() {
        let config = quick_config();
        let state = reset(&config).unwrap();
        // 3 stops to halt; prompt fires after 1 s halted; abort after 2 more
        // seconds prompted with no resume.
        let obs = vec![Some(ActionState::Stopping); 40];
        let mut s = state;
        let mut prompted = false;
        let mut aborted_cmd = None;
        for o in obs {
            let (ns, cmd) = control_step(&s, o, 0.1, &config).unwrap();
            if cmd.prompt == Prompt::PleaseProceed {
                prompted = true;
            }
            s = ns;
            if cmd.terminate {
                aborted_cmd = Some(cmd);
                break;
            }
        }
        assert!(prompted, "prompt must precede abort");
        let cmd = aborted_cmd.expect("machine should abort");
        assert_eq!(cmd.speed, 0.0);
        assert_eq!(s.phase, ControlPhase::Aborted);
        assert!(matches!(
            control_step(&s, Some(ActionState::Following), 0.1, &config),
            Err(ControlError::SteppedAborted)
        ));
    }

    #[test]
    fn single_noisy_observation_never_changes_state() {
        let config = quick_config();
        let state = reset(&config).unwrap();
        let obs = vec![
            Some(ActionState::Following),
            Some(ActionState::Lagging), // isolated
            Some(ActionState::Following),
            Some(ActionState::Stopping), // isolated
            Some(ActionState::Following),
        ];
        let (s, cmds) = run(state, &obs, 0.1, &config);
        assert_eq!(s.phase, ControlPhase::Proceeding);
        assert!(cmds.iter().all(|c| c.speed == config.cruise_speed));
    }

    #[test]
    fn absent_freezes_timers_and_holds_command() {
        let config = quick_config();
        let state = reset(&config).unwrap();
        // Halt, then feed Absent long past the prompt timeout.
        let mut obs = vec![Some(ActionState::Stopping); 3];
        obs.extend(vec![None; 50]);
        let (s, cmds) = run(state, &obs, 0.1, &config);
        assert_eq!(
            s.phase,
            ControlPhase::Halted,
            "absent must not advance the prompt clock"
        );
        assert_eq!(s.time_in_phase, 0.0);
        assert!(cmds[3..].iter().all(|c| c.speed == 0.0 && c.prompt == Prompt::None));
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = quick_config();
        c.slowed_speed = 2.0; // >= cruise
        assert!(reset(&c).is_err());
        let mut c = quick_config();
        c.lag_confirm = 0;
        assert!(reset(&c).is_err());
        let mut c = quick_config();
        c.abort_timeout = 0.0;
        assert!(reset(&c).is_err());
    }

    #[test]
    fn same_observations_same_trace() {
        let config = quick_config();
        let obs: Vec<Option<ActionState>> = (0..60)
            .map(|i| match i % 7 {
                0 | 1 => Some(ActionState::Following),
                2 | 3 => Some(ActionState::Lagging),
                4 => None,
                _ => Some(ActionState::Stopping),
            })
            .collect();
        let a = run(reset(&config).unwrap(), &obs, 1.0 / 30.0, &config);
        let b = run(reset(&config).unwrap(), &obs, 1.0 / 30.0, &config);
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }
}
