//! Synthetic fribble dataset and the training and categorization
//! experiments run on it.

mod dataset;
mod experiment;
mod report;

use std::io;

use thiserror::Error;

use crate::grammar::GrammarError;
use crate::haptics::HapticsError;
use crate::inference::InferenceError;
use crate::object::ObjectError;
use crate::vision::VisionError;

pub use dataset::{slot_derivation, synthesize_dataset, Exemplar, FribbleDataset};
pub use experiment::{
    categorize_haptic, categorize_vision, chain_seeds, haptic_sweep, train_category, vision_sweep, CategoryModel,
    ChainReport, ConfusionMatrix, Perturbation, Prototype, TestOutcome, TrainSettings,
};
pub use report::{emit_report, Report};

pub const CATEGORIES: usize = 4;
pub const EXEMPLARS: usize = 10;
pub const TRAIN_PER_CATEGORY: usize = 6;
pub const DATASET_SCALE: f64 = 0.3;
pub const DEFAULT_SHARPNESS: f64 = 1000.0;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Object(#[from] ObjectError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Vision(#[from] VisionError),
    #[error(transparent)]
    Haptics(#[from] HapticsError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
