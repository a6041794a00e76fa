//! Deterministic synthetic scenario generator.
//!
//! Stands in for the camera, person detector, and feature backbone: a robot
//! drives a planar path at cruise speed while the escortee follows behind
//! it per a scripted action sequence and distractors wander through the
//! rear-facing camera's view. Every frame yields pinhole-projected bounding
//! boxes, identity features, a ground-truth action label, and the
//! robot–escortee gap.
//!
//! All randomness flows through an explicit [`crate::numcore::Rng`]; the
//! same seed reproduces a corpus byte for byte.

mod camera;
mod corpus;
mod kinematics;
mod label;

pub use camera::{project_detection, project_frame, PersonRef, FOCAL_X, IMAGE_H, IMAGE_W};
pub use corpus::{generate_corpus, generate_sequence, identity_pool, CorpusSpec, SequencePlan};
pub use kinematics::kinematics_step;
pub use label::label_frame;

use thiserror::Error;

use crate::action::ActionState;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
}

/// One projected person detection: pixel bounding box, identity feature,
/// and the subject flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// Bounding box (x, y, w, h) in pixels, clipped to the image.
    pub bbox: [f64; 4],
    /// Feature vector: the person's latent identity plus re-normalized noise.
    pub feature: Vec<f64>,
    pub is_subject: bool,
}

/// One annotated frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame: usize,
    pub t: f64,
    pub action: ActionState,
    pub gap_m: f64,
    pub detections: Vec<Detection>,
}

impl FrameRecord {
    pub fn subject_visible(&self) -> bool {
        self.detections.iter().any(|d| d.is_subject)
    }

    pub fn subject_index(&self) -> Option<usize> {
        self.detections.iter().position(|d| d.is_subject)
    }
}

/// Corpus split assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }

    pub fn from_name(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "dev" => Some(Split::Dev),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// One generated sequence with its split assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub seq_id: usize,
    pub fps: f64,
    pub dim: usize,
    pub split: Split,
    pub frames: Vec<FrameRecord>,
}

/// A corpus of sequences with disjoint train/dev/test splits.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub sequences: Vec<Sequence>,
}

impl Corpus {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &Sequence> {
        self.sequences.iter().filter(move |s| s.split == split)
    }
}

/// A person in the world: position and velocity on the ground plane, plus
/// the unit-norm latent identity vector the feature channel observes.
#[derive(Debug, Clone)]
pub struct Person {
    /// (along-path, lateral) position in meters.
    pub pos: [f64; 2],
    /// (along-path, lateral) velocity in m/s.
    pub vel: [f64; 2],
    pub identity: usize,
    pub latent: Vec<f64>,
}

impl Person {
    pub fn speed(&self) -> f64 {
        (self.vel[0] * self.vel[0] + self.vel[1] * self.vel[1]).sqrt()
    }
}

/// Latched gap-band state for the 1.8 m / 2.2 m hysteresis around the
/// nominal 2 m rule, so labels do not flicker at the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapBand {
    /// Inside the near band: labeled Following.
    Near,
    /// Past the far band: labeled Lagging.
    Far,
}

/// Full world state at one instant. The labeling context (stationary-frame
/// counter and gap band) lives here so the frame label is a pure function
/// of the state.
#[derive(Debug, Clone)]
pub struct WorldState {
    pub time: f64,
    /// Robot position along the path; its rear camera is the sensor.
    pub robot_pos: f64,
    pub robot_speed: f64,
    pub escortee: Person,
    pub distractors: Vec<Person>,
    /// Speed reduction factor for the current lagging segment.
    pub lag_factor: f64,
    /// Consecutive frames with escortee speed below the stationary cutoff.
    pub stationary_frames: u32,
    pub gap_band: GapBand,
}

impl WorldState {
    /// Robot–escortee gap along the path, in meters.
    pub fn gap(&self) -> f64 {
        self.robot_pos - self.escortee.pos[0]
    }
}
