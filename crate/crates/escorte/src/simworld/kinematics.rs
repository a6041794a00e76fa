use crate::action::ActionState;
use crate::numcore::Rng;

use super::{GapBand, WorldState};

/// Escortee speed below this for [`STATIONARY_FRAMES`] consecutive frames
/// marks the frame as Stopping.
pub const STATIONARY_SPEED: f64 = 0.05;
pub const STATIONARY_FRAMES: u32 = 5;
/// Hysteresis band around the nominal 2 m following/lagging boundary.
pub const GAP_NEAR: f64 = 1.8;
pub const GAP_FAR: f64 = 2.2;
pub const GAP_NOMINAL: f64 = 2.0;

/// Gap the following controller regulates toward.
const FOLLOW_TARGET_GAP: f64 = 1.2;
const FOLLOW_GAIN: f64 = 0.8;
const SPEED_JITTER: f64 = 0.05;
const MAX_WALK_SPEED: f64 = 2.2;
/// Beyond this gap a lagging escortee matches the robot speed again, so
/// the subject never shrinks to nothing in the image.
const LAG_GAP_CAP: f64 = 5.0;
/// The escortee never closes within this distance of the robot.
const MIN_GAP: f64 = 0.5;

/// Distractor wander band, relative to the robot: depth behind the camera
/// and lateral extent, with a velocity random walk.
const DISTRACTOR_DEPTH: (f64, f64) = (0.8, 11.0);
const DISTRACTOR_LATERAL: f64 = 4.0;
const DISTRACTOR_ACCEL: f64 = 0.6;
const DISTRACTOR_MAX_SPEED: f64 = 1.8;

/// Advance the world by `dt` under the scripted action.
///
/// The robot holds its commanded speed. The escortee follows the script:
/// Following regulates the gap toward a point well inside the near band
/// (with speed jitter), Lagging walks at a reduced fraction of robot speed
/// so the gap grows past the boundary, Stopping pins the velocity to zero.
/// Distractors follow a seeded random walk reflected into the camera's
/// view band. The labeling context (stationary counter, gap band) is
/// updated here, after motion.
pub fn kinematics_step(state: &mut WorldState, script: ActionState, dt: f64, rng: &mut Rng) {
    debug_assert!(dt > 0.0);
    state.time += dt;
    state.robot_pos += state.robot_speed * dt;

    // Escortee velocity per scripted action.
    let gap = state.gap();
    match script {
        ActionState::Stopping => {
            state.escortee.vel = [0.0, 0.0];
        }
        ActionState::Following => {
            let v = state.robot_speed
                + FOLLOW_GAIN * (gap - FOLLOW_TARGET_GAP)
                + SPEED_JITTER * rng.gaussian();
            state.escortee.vel[0] = v.clamp(0.0, MAX_WALK_SPEED);
            state.escortee.vel[1] =
                (-0.5 * state.escortee.pos[1] + 0.02 * rng.gaussian()).clamp(-0.3, 0.3);
        }
        ActionState::Lagging => {
            let v = if gap < LAG_GAP_CAP {
                state.lag_factor * state.robot_speed + 0.02 * rng.gaussian()
            } else {
                state.robot_speed + 0.02 * rng.gaussian()
            };
            state.escortee.vel[0] = v.clamp(0.0, MAX_WALK_SPEED);
            state.escortee.vel[1] =
                (-0.5 * state.escortee.pos[1] + 0.02 * rng.gaussian()).clamp(-0.3, 0.3);
        }
    }
    state.escortee.pos[0] += state.escortee.vel[0] * dt;
    state.escortee.pos[1] += state.escortee.vel[1] * dt;
    if state.escortee.pos[0] > state.robot_pos - MIN_GAP {
        state.escortee.pos[0] = state.robot_pos - MIN_GAP;
    }

    // Distractors: random-walk velocities, positions reflected into the
    // moving view band behind the robot.
    let sqrt_dt = dt.sqrt();
    for p in &mut state.distractors {
        p.vel[0] += DISTRACTOR_ACCEL * sqrt_dt * rng.gaussian();
        p.vel[1] += DISTRACTOR_ACCEL * sqrt_dt * rng.gaussian();
        let speed = p.speed();
        if speed > DISTRACTOR_MAX_SPEED {
            let k = DISTRACTOR_MAX_SPEED / speed;
            p.vel[0] *= k;
            p.vel[1] *= k;
        }
        p.pos[0] += p.vel[0] * dt;
        p.pos[1] += p.vel[1] * dt;

        let near = state.robot_pos - DISTRACTOR_DEPTH.0;
        let far = state.robot_pos - DISTRACTOR_DEPTH.1;
        if p.pos[0] > near {
            p.pos[0] = near;
            p.vel[0] = -p.vel[0].abs();
        } else if p.pos[0] < far {
            p.pos[0] = far;
            p.vel[0] = p.vel[0].abs();
        }
        if p.pos[1] > DISTRACTOR_LATERAL {
            p.pos[1] = DISTRACTOR_LATERAL;
            p.vel[1] = -p.vel[1].abs();
        } else if p.pos[1] < -DISTRACTOR_LATERAL {
            p.pos[1] = -DISTRACTOR_LATERAL;
            p.vel[1] = p.vel[1].abs();
        }
    }

    // Labeling context.
    if state.escortee.speed() < STATIONARY_SPEED {
        state.stationary_frames = state.stationary_frames.saturating_add(1);
    } else {
        state.stationary_frames = 0;
    }
    let gap = state.gap();
    state.gap_band = match state.gap_band {
        GapBand::Near if gap >= GAP_FAR => GapBand::Far,
        GapBand::Far if gap <= GAP_NEAR => GapBand::Near,
        band => band,
    };
}

/// Fresh world state: robot at the origin moving at `robot_speed`, escortee
/// `initial_gap` behind it, laterally near the path axis.
pub fn initial_state(
    robot_speed: f64,
    initial_gap: f64,
    escortee: super::Person,
    distractors: Vec<super::Person>,
) -> WorldState {
    let band = if initial_gap < GAP_NOMINAL {
        GapBand::Near
    } else {
        GapBand::Far
    };
    let stationary = if escortee.speed() < STATIONARY_SPEED {
        1
    } else {
        0
    };
    WorldState {
        time: 0.0,
        robot_pos: 0.0,
        robot_speed,
        escortee,
        distractors,
        lag_factor: 0.5,
        stationary_frames: stationary,
        gap_band: band,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::Person;

    fn person_at(gap: f64, vx: f64) -> Person {
        Person {
            pos: [-gap, 0.0],
            vel: [vx, 0.0],
            identity: 0,
            latent: vec![1.0],
        }
    }

    #[test]
    fn stopping_keeps_escortee_stationary() {
        let mut rng = Rng::seed_from(1);
        let mut state = initial_state(1.0, 1.2, person_at(1.2, 1.0), vec![]);
        let pos = state.escortee.pos;
        for _ in 0..30 {
            kinematics_step(&mut state, ActionState::Stopping, 1.0 / 30.0, &mut rng);
        }
        assert_eq!(state.escortee.pos, pos);
    }

    #[test]
    fn following_keeps_gap_under_two_meters() {
        let mut rng = Rng::seed_from(2);
        let mut state = initial_state(1.0, 1.4, person_at(1.4, 1.0), vec![]);
        for _ in 0..300 {
            kinematics_step(&mut state, ActionState::Following, 1.0 / 30.0, &mut rng);
            assert!(state.gap() < 2.0, "gap {} exceeded 2 m", state.gap());
        }
    }

    #[test]
    fn lagging_crosses_two_meters_within_segment() {
        let mut rng = Rng::seed_from(3);
        let mut state = initial_state(1.0, 1.5, person_at(1.5, 1.0), vec![]);
        let mut crossed = false;
        for _ in 0..120 {
            kinematics_step(&mut state, ActionState::Lagging, 1.0 / 30.0, &mut rng);
            if state.gap() > 2.0 {
                crossed = true;
            }
        }
        assert!(crossed, "gap never crossed 2 m: {}", state.gap());
    }

    #[test]
    fn distractors_stay_in_view_band() {
        let mut rng = Rng::seed_from(4);
        let distractors = (0..3)
            .map(|i| Person {
                pos: [-2.0 - i as f64, 0.5 * i as f64],
                vel: [0.0, 0.0],
                identity: i,
                latent: vec![1.0],
            })
            .collect();
        let mut state = initial_state(1.0, 1.2, person_at(1.2, 1.0), distractors);
        for _ in 0..600 {
            kinematics_step(&mut state, ActionState::Following, 1.0 / 30.0, &mut rng);
            for p in &state.distractors {
                let depth = state.robot_pos - p.pos[0];
                assert!((DISTRACTOR_DEPTH.0 - 1e-9..=DISTRACTOR_DEPTH.1 + 1e-9).contains(&depth));
                assert!(p.pos[1].abs() <= DISTRACTOR_LATERAL + 1e-9);
            }
        }
    }
}
