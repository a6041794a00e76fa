//! Person re-identification: embed detection features, train with triplet
//! margin loss, and match candidates against a reference anchor by L2
//! distance under a fixed threshold.

mod loss;
mod matcher;
mod model;
mod sampler;
mod train;

pub use loss::{triplet_loss, triplet_loss_batch};
pub use matcher::{match_subject, MatchResult, ReferenceAnchor, DEFAULT_MATCH_THRESHOLD};
pub use model::EmbeddingModel;
pub use sampler::{sample_triplets, TripletBatch, TripletDomain};
pub use train::{train_reid, ReidConfig, ReidError, TrainedReid};
