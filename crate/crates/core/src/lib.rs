//! Emoji prediction for tweets, end to end at desk scale: Twitter-aware text
//! preprocessing with corpus-driven hashtag segmentation and spell
//! correction, skip-gram embedding pretraining, a BiLSTM classifier with
//! context-aware self-attention, bag-of-words SVM baselines, and evaluation
//! reports with attention heatmaps.

pub mod baselines;
pub mod data;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod model;
pub mod preprocess;
pub mod segment;
pub mod train;

pub use error::CoreError;

pub type Result<T> = std::result::Result<T, CoreError>;
