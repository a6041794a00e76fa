use crate::action::ActionState;
use crate::numcore::Rng;

use super::camera::project_frame;
use super::kinematics::{initial_state, kinematics_step};
use super::label::label_frame;
use super::{Corpus, FrameRecord, Person, Sequence, SimError, Split, WorldState};

/// Corpus template: everything that varies per sequence (duration, script,
/// distractor count, subject identity) is randomized from the generation
/// seed within these bounds.
#[derive(Debug, Clone)]
pub struct CorpusSpec {
    pub fps: f64,
    /// Feature dimension of the synthetic backbone.
    pub dim: usize,
    /// Size of the shared identity pool.
    pub identities: usize,
    /// Feature noise before re-normalization.
    pub sigma: f64,
    pub occlusion_prob: f64,
    pub max_distractors: usize,
    pub duration_range: (f64, f64),
    /// Train/dev/test fractions; test takes the remainder.
    pub split_fractions: (f64, f64, f64),
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            fps: 30.0,
            dim: 64,
            identities: 10,
            sigma: 0.1,
            occlusion_prob: 0.1,
            max_distractors: 4,
            duration_range: (10.0, 14.0),
            split_fractions: (0.70, 0.135, 0.165),
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.fps <= 0.0 {
            return Err(SimError::InvalidSpec("fps must be positive".into()));
        }
        if self.dim == 0 {
            return Err(SimError::InvalidSpec("dim must be positive".into()));
        }
        if self.identities < 2 {
            return Err(SimError::InvalidSpec(
                "need at least 2 identities for re-identification".into(),
            ));
        }
        if self.sigma < 0.0 {
            return Err(SimError::InvalidSpec("sigma must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.occlusion_prob) {
            return Err(SimError::InvalidSpec(
                "occlusion probability must lie in [0, 1]".into(),
            ));
        }
        let (lo, hi) = self.duration_range;
        if lo < 10.0 || hi < lo {
            return Err(SimError::InvalidSpec(
                "sequence duration must be at least 10 s".into(),
            ));
        }
        let (tr, dv, te) = self.split_fractions;
        if tr < 0.0 || dv < 0.0 || te < 0.0 || (tr + dv + te - 1.0).abs() > 1e-9 {
            return Err(SimError::InvalidSpec(
                "split fractions must be nonnegative and sum to 1".into(),
            ));
        }
        Ok(())
    }
}

/// Fully resolved plan for one sequence.
#[derive(Debug, Clone)]
pub struct SequencePlan {
    pub seq_id: usize,
    pub fps: f64,
    pub dim: usize,
    pub sigma: f64,
    pub occlusion_prob: f64,
    pub distractors: usize,
    pub subject_identity: usize,
    /// (action, duration in seconds) segments.
    pub script: Vec<(ActionState, f64)>,
}

/// Deterministic pool of unit-norm latent identity vectors shared by every
/// sequence of a corpus.
pub fn identity_pool(count: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = Rng::seed_from(seed).derive(0x1D);
    (0..count).map(|_| rng.unit_vector(dim)).collect()
}

/// Sample an action script: a single action, a pair, all three in random
/// order, or several repeated segments. Durations fill the sequence length.
fn sample_script(total: f64, rng: &mut Rng) -> Vec<(ActionState, f64)> {
    let pick = |rng: &mut Rng| ActionState::from_index(rng.index(3)).unwrap();
    let actions: Vec<ActionState> = match rng.index(4) {
        0 => vec![pick(rng)],
        1 => vec![pick(rng), pick(rng)],
        2 => {
            let mut all = ActionState::ALL.to_vec();
            // Fisher–Yates with the seeded stream.
            for i in (1..all.len()).rev() {
                all.swap(i, rng.index(i + 1));
            }
            all
        }
        _ => {
            let n = 4 + rng.index(3);
            (0..n).map(|_| pick(rng)).collect()
        }
    };
    // Random positive weights, each segment at least 2 s.
    let weights: Vec<f64> = actions.iter().map(|_| rng.uniform(0.5, 1.5)).collect();
    let wsum: f64 = weights.iter().sum();
    let min_seg = 2.0_f64.min(total / actions.len() as f64);
    let spare = total - min_seg * actions.len() as f64;
    actions
        .iter()
        .zip(&weights)
        .map(|(a, w)| (*a, min_seg + spare * w / wsum))
        .collect()
}

/// Generate one sequence from a plan, using the shared identity pool and a
/// dedicated random stream. Also returns the per-frame world states so
/// tests can re-derive labels from the trace.
pub fn generate_sequence_with_trace(
    plan: &SequencePlan,
    pool: &[Vec<f64>],
    split: Split,
    rng: &mut Rng,
) -> (Sequence, Vec<WorldState>) {
    let dt = 1.0 / plan.fps;
    let total: f64 = plan.script.iter().map(|(_, d)| d).sum();
    let n_frames = (total * plan.fps).round() as usize;

    // Subject starts inside the near band; distractors scatter behind.
    let initial_gap = rng.uniform(0.8, 1.6);
    let first_action = plan.script[0].0;
    let escortee = Person {
        pos: [-initial_gap, rng.uniform(-0.3, 0.3)],
        vel: match first_action {
            ActionState::Stopping => [0.0, 0.0],
            _ => [1.0, 0.0],
        },
        identity: plan.subject_identity,
        latent: pool[plan.subject_identity].clone(),
    };
    let distractors: Vec<Person> = (0..plan.distractors)
        .map(|_| {
            let mut identity = rng.index(pool.len());
            if identity == plan.subject_identity {
                identity = (identity + 1) % pool.len();
            }
            Person {
                pos: [-rng.uniform(1.0, 10.0), rng.uniform(-3.0, 3.0)],
                vel: [rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)],
                identity,
                latent: pool[identity].clone(),
            }
        })
        .collect();
    let mut state = initial_state(1.0, initial_gap, escortee, distractors);
    state.lag_factor = rng.uniform(0.35, 0.65);

    let script_at = |t: f64| -> ActionState {
        let mut acc = 0.0;
        for (a, d) in &plan.script {
            acc += d;
            if t < acc {
                return *a;
            }
        }
        plan.script.last().unwrap().0
    };

    let mut frames = Vec::with_capacity(n_frames);
    let mut trace = Vec::with_capacity(n_frames);
    let mut prev_action = first_action;
    for f in 0..n_frames {
        let t = f as f64 * dt;
        if f > 0 {
            let scripted = script_at(t - 0.5 * dt);
            if scripted == ActionState::Lagging && prev_action != ActionState::Lagging {
                state.lag_factor = rng.uniform(0.35, 0.65);
            }
            prev_action = scripted;
            kinematics_step(&mut state, scripted, dt, rng);
        }
        let action = label_frame(&state);
        let detections = project_frame(&state, plan.sigma, plan.occlusion_prob, rng);
        frames.push(FrameRecord {
            frame: f,
            t,
            action,
            gap_m: state.gap(),
            detections,
        });
        trace.push(state.clone());
    }
    (
        Sequence {
            seq_id: plan.seq_id,
            fps: plan.fps,
            dim: plan.dim,
            split,
            frames,
        },
        trace,
    )
}

pub fn generate_sequence(
    plan: &SequencePlan,
    pool: &[Vec<f64>],
    split: Split,
    rng: &mut Rng,
) -> Sequence {
    generate_sequence_with_trace(plan, pool, split, rng).0
}

/// Generate a corpus: `sequences` independent sequences planned from the
/// template, with split assignment by index per the configured fractions.
/// Each sequence derives its own random stream from the seed, so the result
/// is reproducible and sequences are independent.
pub fn generate_corpus(
    spec: &CorpusSpec,
    sequences: usize,
    seed: u64,
) -> Result<Corpus, SimError> {
    spec.validate()?;
    if sequences == 0 {
        return Err(SimError::InvalidSpec("sequence count must be positive".into()));
    }
    let pool = identity_pool(spec.identities, spec.dim, seed);
    let base = Rng::seed_from(seed);

    let n_train = (spec.split_fractions.0 * sequences as f64).round() as usize;
    let n_dev = (spec.split_fractions.1 * sequences as f64).round() as usize;
    let split_of = |i: usize| {
        if i < n_train {
            Split::Train
        } else if i < n_train + n_dev {
            Split::Dev
        } else {
            Split::Test
        }
    };

    let out = (0..sequences)
        .map(|i| {
            let mut rng = base.derive(i as u64 + 1);
            let duration = rng.uniform(spec.duration_range.0, spec.duration_range.1);
            let plan = SequencePlan {
                seq_id: i,
                fps: spec.fps,
                dim: spec.dim,
                sigma: spec.sigma,
                occlusion_prob: spec.occlusion_prob,
                distractors: rng.index(spec.max_distractors + 1),
                subject_identity: rng.index(spec.identities),
                script: sample_script(duration, &mut rng),
            };
            generate_sequence(&plan, &pool, split_of(i), &mut rng)
        })
        .collect();
    Ok(Corpus { sequences: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::kinematics::{GAP_FAR, GAP_NEAR};

    fn small_spec() -> CorpusSpec {
        CorpusSpec {
            dim: 8,
            duration_range: (10.0, 12.0),
            ..CorpusSpec::default()
        }
    }

    #[test]
    fn fixed_seed_reproduces_corpus_exactly() {
        let spec = small_spec();
        let a = generate_corpus(&spec, 5, 99).unwrap();
        let b = generate_corpus(&spec, 5, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn all_classes_well_represented() {
        let spec = small_spec();
        let corpus = generate_corpus(&spec, 100, 7).unwrap();
        let mut counts = [0usize; 3];
        let mut total = 0usize;
        for s in &corpus.sequences {
            for f in &s.frames {
                counts[f.action.index()] += 1;
                total += 1;
            }
        }
        for (i, c) in counts.iter().enumerate() {
            let share = *c as f64 / total as f64;
            assert!(
                share >= 0.10,
                "class {i} underrepresented: {share:.3} ({counts:?})"
            );
        }
    }

    #[test]
    fn at_most_one_subject_per_frame_and_boxes_in_bounds() {
        let spec = small_spec();
        let corpus = generate_corpus(&spec, 10, 11).unwrap();
        for s in &corpus.sequences {
            assert!(s.frames.len() >= 300, "sequence shorter than 10 s");
            for f in &s.frames {
                let subjects = f.detections.iter().filter(|d| d.is_subject).count();
                assert!(subjects <= 1);
                for d in &f.detections {
                    let [x, y, w, h] = d.bbox;
                    assert!(x >= 0.0 && y >= 0.0 && w > 0.0 && h > 0.0);
                    assert!(x + w <= 1280.0 + 1e-9 && y + h <= 720.0 + 1e-9);
                }
            }
        }
    }

    #[test]
    fn labels_respect_the_hysteresis_band() {
        let spec = small_spec();
        let corpus = generate_corpus(&spec, 30, 13).unwrap();
        for s in &corpus.sequences {
            for f in &s.frames {
                match f.action {
                    ActionState::Following => {
                        assert!(f.gap_m < GAP_FAR, "Following at gap {}", f.gap_m)
                    }
                    ActionState::Lagging => {
                        assert!(f.gap_m > GAP_NEAR, "Lagging at gap {}", f.gap_m)
                    }
                    ActionState::Stopping => {}
                }
            }
        }
    }

    #[test]
    fn relabeling_the_trace_reproduces_stored_labels() {
        let pool = identity_pool(4, 8, 3);
        let plan = SequencePlan {
            seq_id: 0,
            fps: 30.0,
            dim: 8,
            sigma: 0.1,
            occlusion_prob: 0.1,
            distractors: 2,
            subject_identity: 1,
            script: vec![
                (ActionState::Following, 4.0),
                (ActionState::Stopping, 3.0),
                (ActionState::Following, 4.0),
            ],
        };
        let mut rng = Rng::seed_from(17);
        let (seq, trace) = generate_sequence_with_trace(&plan, &pool, Split::Train, &mut rng);
        for (f, state) in seq.frames.iter().zip(&trace) {
            assert_eq!(f.action, label_frame(state));
            assert!((f.gap_m - state.gap()).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_sigma_features_are_exact_latents() {
        let spec = CorpusSpec {
            sigma: 0.0,
            occlusion_prob: 0.0,
            dim: 8,
            ..small_spec()
        };
        let corpus = generate_corpus(&spec, 8, 23).unwrap();
        let pool = identity_pool(spec.identities, spec.dim, 23);
        for s in &corpus.sequences {
            let mut subject_feature: Option<&Vec<f64>> = None;
            for f in &s.frames {
                for d in &f.detections {
                    // Every feature is exactly one of the pool latents.
                    assert!(
                        pool.iter().any(|z| z == &d.feature),
                        "feature is not a pool latent"
                    );
                    if d.is_subject {
                        match subject_feature {
                            Some(prev) => assert_eq!(prev, &d.feature),
                            None => subject_feature = Some(&d.feature),
                        }
                    }
                }
            }
        }
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn identification_difficulty_grows_with_sigma() {
        let accuracy = |sigma: f64| -> f64 {
            let spec = CorpusSpec {
                sigma,
                occlusion_prob: 0.0,
                dim: 16,
                max_distractors: 4,
                ..small_spec()
            };
            let corpus = generate_corpus(&spec, 20, 31).unwrap();
            let mut correct = 0usize;
            let mut total = 0usize;
            for s in &corpus.sequences {
                // Anchor: the subject's first observed feature.
                let Some(anchor) = s
                    .frames
                    .iter()
                    .find_map(|f| f.detections.iter().find(|d| d.is_subject))
                    .map(|d| d.feature.clone())
                else {
                    continue;
                };
                for f in &s.frames {
                    let Some(subject_idx) = f.subject_index() else {
                        continue;
                    };
                    if f.detections.len() < 2 {
                        continue;
                    }
                    let nearest = f
                        .detections
                        .iter()
                        .enumerate()
                        .min_by(|(_, a), (_, b)| {
                            dist(&a.feature, &anchor)
                                .partial_cmp(&dist(&b.feature, &anchor))
                                .unwrap()
                        })
                        .map(|(i, _)| i)
                        .unwrap();
                    if nearest == subject_idx {
                        correct += 1;
                    }
                    total += 1;
                }
            }
            correct as f64 / total as f64
        };
        let a0 = accuracy(0.0);
        let a1 = accuracy(0.3);
        let a2 = accuracy(0.8);
        assert_eq!(a0, 1.0, "zero noise must identify perfectly");
        assert!(a1 >= a2 - 0.02, "difficulty not monotone: {a1} vs {a2}");
        assert!(a0 > a2, "extreme noise should hurt: {a0} vs {a2}");
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = small_spec();
        spec.fps = 0.0;
        assert!(generate_corpus(&spec, 3, 1).is_err());
        let mut spec = small_spec();
        spec.occlusion_prob = 1.5;
        assert!(generate_corpus(&spec, 3, 1).is_err());
        assert!(generate_corpus(&small_spec(), 0, 1).is_err());
    }
}
