use crate::numcore::Rng;

use super::{Detection, Person, WorldState};

/// Image geometry: 720p frame with a 90° horizontal field of view, so the
/// focal length in pixels equals half the image width.
pub const IMAGE_W: f64 = 1280.0;
pub const IMAGE_H: f64 = 720.0;
pub const FOCAL_X: f64 = 640.0;

/// Calibration: a person 2 m from the camera projects to a 360 px box, so
/// box height = 720 px·m / depth.
const HEIGHT_AT_UNIT_DEPTH: f64 = 720.0;
/// Box aspect (width / height).
const BBOX_ASPECT: f64 = 0.4;
/// Anything closer than this to the camera is out of frame.
const MIN_DEPTH: f64 = 0.3;
/// A person is an occlusion candidate when someone nearer stands within
/// this lateral distance of them.
const OCCLUSION_LATERAL: f64 = 0.5;

/// Who to project.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PersonRef {
    Escortee,
    Distractor(usize),
}

fn person<'a>(state: &'a WorldState, who: PersonRef) -> &'a Person {
    match who {
        PersonRef::Escortee => &state.escortee,
        PersonRef::Distractor(i) => &state.distractors[i],
    }
}

/// Depth behind the camera and lateral offset of a person in camera
/// coordinates.
fn camera_coords(state: &WorldState, p: &Person) -> (f64, f64) {
    (state.robot_pos - p.pos[0], p.pos[1])
}

/// Pinhole projection of one person through the rear-facing camera.
///
/// Returns `None` when the person is out of the field of view, projects to
/// an empty box after clipping, or is occluded: someone nearer within the
/// lateral threshold hides them with probability `occlusion_prob` (drawn
/// from `rng`). The feature is `normalize(latent + sigma * gaussian)`; with
/// `sigma = 0` it is exactly the latent identity vector.
pub fn project_detection(
    state: &WorldState,
    who: PersonRef,
    sigma: f64,
    occlusion_prob: f64,
    rng: &mut Rng,
) -> Option<Detection> {
    let p = person(state, who);
    let (depth, lateral) = camera_coords(state, p);
    if depth < MIN_DEPTH || lateral.abs() > depth {
        return None;
    }

    // Occlusion: another person strictly nearer, laterally close.
    let mut occluder = false;
    let all = std::iter::once(&state.escortee).chain(state.distractors.iter());
    for (i, q) in all.enumerate() {
        let is_self = match who {
            PersonRef::Escortee => i == 0,
            PersonRef::Distractor(d) => i == d + 1,
        };
        if is_self {
            continue;
        }
        let (qd, ql) = camera_coords(state, q);
        if qd >= MIN_DEPTH && qd < depth && (ql - lateral).abs() < OCCLUSION_LATERAL {
            occluder = true;
            break;
        }
    }
    if occluder && rng.next_f64() < occlusion_prob {
        return None;
    }

    let h = (HEIGHT_AT_UNIT_DEPTH / depth).min(IMAGE_H);
    let w = BBOX_ASPECT * h;
    let u = FOCAL_X + FOCAL_X * lateral / depth;
    let v = IMAGE_H / 2.0;
    let x0 = (u - w / 2.0).max(0.0);
    let x1 = (u + w / 2.0).min(IMAGE_W);
    let y0 = (v - h / 2.0).max(0.0);
    let y1 = (v + h / 2.0).min(IMAGE_H);
    if x1 <= x0 || y1 <= y0 {
        return None;
    }

    let feature = if sigma > 0.0 {
        let noisy: Vec<f64> = p.latent.iter().map(|z| z + sigma * rng.gaussian()).collect();
        let norm = noisy.iter().map(|x| x * x).sum::<f64>().sqrt();
        noisy.into_iter().map(|x| x / norm).collect()
    } else {
        p.latent.clone()
    };

    Some(Detection {
        bbox: [x0, y0, x1 - x0, y1 - y0],
        feature,
        is_subject: who == PersonRef::Escortee,
    })
}

/// Project every person in a fixed order (escortee first, then distractors
/// by index), collecting the visible detections.
pub fn project_frame(
    state: &WorldState,
    sigma: f64,
    occlusion_prob: f64,
    rng: &mut Rng,
) -> Vec<Detection> {
    let mut out = Vec::new();
    if let Some(d) = project_detection(state, PersonRef::Escortee, sigma, occlusion_prob, rng) {
        out.push(d);
    }
    for i in 0..state.distractors.len() {
        if let Some(d) = project_detection(state, PersonRef::Distractor(i), sigma, occlusion_prob, rng)
        {
            out.push(d);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::kinematics::initial_state;

    fn unit(dim: usize, axis: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        v
    }

    fn world_with(escortee_gap: f64, distractors: Vec<Person>) -> WorldState {
        let escortee = Person {
            pos: [-escortee_gap, 0.0],
            vel: [1.0, 0.0],
            identity: 0,
            latent: unit(4, 0),
        };
        initial_state(1.0, escortee_gap, escortee, distractors)
    }

    #[test]
    fn person_at_two_meters_centered() {
        let state = world_with(2.0, vec![]);
        let mut rng = Rng::seed_from(1);
        let det = project_detection(&state, PersonRef::Escortee, 0.0, 0.0, &mut rng).unwrap();
        let [x, y, w, h] = det.bbox;
        assert!((h - 360.0).abs() < 1e-9);
        assert!((w - 144.0).abs() < 1e-9);
        assert!((x + w / 2.0 - 640.0).abs() < 1e-9, "horizontally centered");
        assert!((y + h / 2.0 - 360.0).abs() < 1e-9);
    }

    #[test]
    fn zero_sigma_feature_is_exactly_the_latent() {
        let state = world_with(2.0, vec![]);
        let mut rng = Rng::seed_from(2);
        let det = project_detection(&state, PersonRef::Escortee, 0.0, 0.1, &mut rng).unwrap();
        assert_eq!(det.feature, state.escortee.latent);
        assert!(det.is_subject);
    }

    #[test]
    fn occluded_person_with_probability_one_emits_nothing() {
        // Distractor directly between camera and escortee, same lateral.
        let distractor = Person {
            pos: [-1.0, 0.0],
            vel: [0.0, 0.0],
            identity: 1,
            latent: unit(4, 1),
        };
        let state = world_with(2.5, vec![distractor]);
        let mut rng = Rng::seed_from(3);
        assert!(project_detection(&state, PersonRef::Escortee, 0.0, 1.0, &mut rng).is_none());
        // The nearer person is unoccluded.
        assert!(project_detection(&state, PersonRef::Distractor(0), 0.0, 1.0, &mut rng).is_some());
    }

    #[test]
    fn behind_robot_person_is_excluded() {
        let state = world_with(0.1, vec![]);
        let mut rng = Rng::seed_from(4);
        assert!(project_detection(&state, PersonRef::Escortee, 0.0, 0.0, &mut rng).is_none());
    }

    #[test]
    fn out_of_fov_person_is_excluded() {
        let distractor = Person {
            pos: [-2.0, 3.0], // lateral 3 m at 2 m depth: outside the 90° cone
            vel: [0.0, 0.0],
            identity: 1,
            latent: unit(4, 1),
        };
        let state = world_with(1.5, vec![distractor]);
        let mut rng = Rng::seed_from(5);
        assert!(project_detection(&state, PersonRef::Distractor(0), 0.0, 0.0, &mut rng).is_none());
    }

    #[test]
    fn boxes_stay_inside_the_image() {
        let mut rng = Rng::seed_from(6);
        for _ in 0..200 {
            let gap = rng.uniform(0.4, 10.0);
            let lateral = rng.uniform(-4.0, 4.0);
            let person = Person {
                pos: [-gap, lateral],
                vel: [0.0, 0.0],
                identity: 0,
                latent: unit(4, 0),
            };
            let state = initial_state(1.0, gap, person, vec![]);
            if let Some(det) =
                project_detection(&state, PersonRef::Escortee, 0.1, 0.0, &mut rng)
            {
                let [x, y, w, h] = det.bbox;
                assert!(x >= 0.0 && y >= 0.0);
                assert!(x + w <= IMAGE_W + 1e-9);
                assert!(y + h <= IMAGE_H + 1e-9);
                assert!(w > 0.0 && h > 0.0);
            }
        }
    }
}
