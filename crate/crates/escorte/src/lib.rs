//! Joint person re-identification and online action detection for robotic
//! escorting.
//!
//! An escort robot guides a person (the *escortee*) through a crowded space
//! while watching them through a rear-facing camera. Every frame it must
//! answer two questions: *which* of the detected people is the escortee, and
//! *what* are they doing — keeping up, falling behind, or standing still.
//! This crate implements that perception stack end to end at desk scale:
//!
//! - [`numcore`] — dense f64 matrices, tape-based reverse-mode gradients, an
//!   adaptive-moment optimizer, a finite-difference gradient checker, and the
//!   checkpoint file format.
//! - [`reid`] — the embedding head trained with triplet margin loss, and the
//!   L2 matcher that re-identifies the subject against a reference anchor.
//! - [`action`] — the windowed transformer classifier: a ring buffer of
//!   subject vectors, four encoder layers, attention pooling, and a
//!   three-way classifier trained with cross-entropy.
//! - [`simworld`] — a deterministic synthetic scenario generator standing in
//!   for a camera, detector, and feature backbone: robot/escortee/distractor
//!   kinematics, pinhole bounding-box projection, per-frame labels, and
//!   corpus generation.
//! - [`escortctl`] — the finite state machine that turns the detected action
//!   stream into speed commands, prompts, and resume/abort decisions.
//! - [`harness`] — dataset IO, evaluation metrics (AP, mAP, confusion
//!   matrices, joint precision), the inference-latency model, wall-clock
//!   benchmarking, and the plumbing behind the `escorte` CLI.
//!
//! The guide under `book/` walks through each concept; its code snippets are
//! compiled and run as doctests (see `booktests.rs`).

pub mod action;
pub mod escortctl;
pub mod harness;
pub mod numcore;
pub mod reid;
pub mod simworld;

mod booktests;

pub use action::ActionState;
pub use numcore::{Matrix, NumError, Rng};
