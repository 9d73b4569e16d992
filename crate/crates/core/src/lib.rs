//! Cosine-margin metric learning for speaker-style embeddings.
//!
//! The crate learns a linear projection of fixed-dimensional embeddings by
//! minimizing a triplet hinge loss on cosine similarity, trains a Fisher LDA
//! baseline, scores verification trials by cosine after a chain of
//! projections, fuses score sets and evaluates them (EER, DET).

pub mod dataset;
pub mod error;
pub mod eval;
pub mod lda;
pub mod linalg;
pub mod mmml;
pub mod projection;
pub mod sampler;
pub mod scoring;

pub use dataset::{Dataset, Embedding, EmbeddingFormat, SynthConfig, Trial, TrialLabel};
pub use error::{Error, Result};
pub use eval::{det_points, eer, error_curve, probit, EerResult, ErrorRates};
pub use lda::{train_lda, LdaConfig};
pub use linalg::{Matrix, Vector};
pub use mmml::{cosine, Init, TrainConfig, TrainReport};
pub use projection::Projection;
pub use sampler::{SamplerConfig, Triplet};
pub use scoring::{fuse, score_trials, FusionConfig, ScoreEntry, ScoreSet};
