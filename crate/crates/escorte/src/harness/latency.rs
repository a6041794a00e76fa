use std::time::Instant;

use crate::action::{ActionModel, WindowBuffer};
use crate::numcore::{Matrix, Rng};
use crate::reid::{match_subject, EmbeddingModel, ReferenceAnchor, DEFAULT_MATCH_THRESHOLD};

/// Inputs to the inference-time model: window length, per-frame
/// re-identification time, inter-frame gap (1/fps), and per-window action
/// recognition time. All times in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyInputs {
    pub window: usize,
    pub t_r: f64,
    pub t_f: f64,
    pub t_a: f64,
}

/// Composite inference time:
///
/// `t_i = α·[(w−1)·t_r] − t_f + t_r + t_a` with `α = 0` if `t_r > t_f`,
/// else `1` — when re-identification keeps up with the frame rate, the
/// window's worth of re-ID work rides along with capture; the formula is
/// evaluated exactly as written.
pub fn inference_time(inputs: &LatencyInputs) -> f64 {
    inference_time_gated(inputs, false)
}

/// Same model with the α gate flipped to its prose reading (`α = 1` when
/// `t_r > t_f`), for sensitivity analysis. `alpha_as_prose = false` is the
/// printed-formula default.
pub fn inference_time_gated(inputs: &LatencyInputs, alpha_as_prose: bool) -> f64 {
    let fast = inputs.t_r <= inputs.t_f;
    let alpha: f64 = if alpha_as_prose {
        if fast {
            0.0
        } else {
            1.0
        }
    } else if fast {
        1.0
    } else {
        0.0
    };
    alpha * ((inputs.window as f64 - 1.0) * inputs.t_r) - inputs.t_f + inputs.t_r + inputs.t_a
}

/// Wall-clock measurement of the two pipeline stages plus the composite
/// model value.
#[derive(Debug, Clone, Copy)]
pub struct LatencyMeasurement {
    /// Median per-frame embed+match time over synthetic 4-candidate frames.
    pub t_r: f64,
    /// Median single-window forward time.
    pub t_a: f64,
    /// Inter-frame gap used (1/fps).
    pub t_f: f64,
    /// Composite time per [`inference_time`].
    pub t_i: f64,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Benchmark the loaded models: `frames` synthetic frames with 4 candidates
/// each for the re-ID stage, and one full-window forward pass for the
/// action stage. Runs single-threaded; medians keep stray scheduler noise
/// out of the report.
pub fn measure_latency(
    reid: &EmbeddingModel,
    action: &ActionModel,
    frames: usize,
    fps: f64,
    rng: &mut Rng,
) -> LatencyMeasurement {
    let candidates = 4usize;
    let anchor_feature = rng.uniform_matrix(1, reid.in_dim(), -1.0, 1.0);
    let anchor = ReferenceAnchor {
        embedding: reid.embed_batch(&anchor_feature).expect("anchor"),
        source_frame: 0,
        model_fingerprint: reid.fingerprint(),
    };

    let frame_features: Vec<Matrix> = (0..frames)
        .map(|_| rng.uniform_matrix(candidates, reid.in_dim(), -1.0, 1.0))
        .collect();
    let mut reid_times = Vec::with_capacity(frames);
    for features in &frame_features {
        let start = Instant::now();
        let embedded = reid.embed_batch(features).expect("embed");
        let cands: Vec<Matrix> = (0..candidates)
            .map(|i| Matrix::row(embedded.row_slice(i)).expect("row"))
            .collect();
        let result = match_subject(&anchor, &cands, DEFAULT_MATCH_THRESHOLD);
        std::hint::black_box(result);
        reid_times.push(start.elapsed().as_secs_f64());
    }

    let reps = (frames / 4).max(10);
    let mut buffer = WindowBuffer::new(action.window, action.dim);
    for _ in 0..action.window {
        let v: Vec<f64> = (0..action.dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
        buffer.push(Some(&v)).expect("push");
    }
    let mut action_times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        let pred = action.predict(&buffer, 0).expect("forward");
        std::hint::black_box(pred);
        action_times.push(start.elapsed().as_secs_f64());
    }

    let t_r = median(reid_times);
    let t_a = median(action_times);
    let t_f = 1.0 / fps;
    let t_i = inference_time(&LatencyInputs {
        window: action.window,
        t_r,
        t_f,
        t_a,
    });
    LatencyMeasurement { t_r, t_a, t_f, t_i }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_substitution_fast_branch() {
        // w=60, t_r=0.01 <= t_f: alpha = 1.
        let t = inference_time(&LatencyInputs {
            window: 60,
            t_r: 0.01,
            t_f: 1.0 / 30.0,
            t_a: 0.05,
        });
        assert!((t - (59.0 * 0.01 - 1.0 / 30.0 + 0.01 + 0.05)).abs() < 1e-15);
        assert!((t - 0.616667).abs() < 1e-6);
    }

    #[test]
    fn direct_substitution_slow_branch() {
        // t_r=0.05 > t_f: alpha = 0.
        let t = inference_time(&LatencyInputs {
            window: 60,
            t_r: 0.05,
            t_f: 1.0 / 30.0,
            t_a: 0.05,
        });
        assert!((t - (-1.0 / 30.0 + 0.05 + 0.05)).abs() < 1e-15);
        assert!((t - 0.066667).abs() < 1e-6);
    }

    #[test]
    fn window_of_one_drops_the_alpha_term() {
        let t = inference_time(&LatencyInputs {
            window: 1,
            t_r: 0.01,
            t_f: 1.0 / 30.0,
            t_a: 0.02,
        });
        assert!((t - (0.01 + 0.02 - 1.0 / 30.0)).abs() < 1e-15);
    }

    #[test]
    fn prose_gate_is_the_flip() {
        let inp = LatencyInputs {
            window: 10,
            t_r: 0.05,
            t_f: 1.0 / 30.0,
            t_a: 0.01,
        };
        let printed = inference_time_gated(&inp, false);
        let prose = inference_time_gated(&inp, true);
        // Slow re-ID: printed drops the window term, prose keeps it.
        assert!(prose > printed);
        assert!((prose - printed - 9.0 * 0.05).abs() < 1e-12);
    }

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
