//! Metropolis-Hastings over derivations, and an exact oracle for small
//! grammars.

mod enumerate;
mod likelihood;
mod mcmc;
mod summary;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::GrammarError;
use crate::object::ObjectError;

pub use enumerate::{count_derivations, enumerate_derivations, enumerate_posterior, ExactPosterior, ENUMERATION_BUDGET};
pub use likelihood::{
    ChannelScores, FlatLikelihood, FnLikelihood, Likelihood, Modality, SensoryLikelihood, SensoryObservation,
    SyntheticLikelihood,
};
pub use mcmc::{
    accept_probability, clamp_acceptance, log_posterior_unnorm, parse_trace_csv, propose_subtree, run_chain, trace_csv,
    ChainConfig, ChainRun, ChainState, Proposal, Scored, TraceRow, CHECKPOINT_EVERY,
};
pub use summary::{extract_prototype, tv_distance, PosteriorSummary};

/// Which posterior the acceptance rule targets.
///
/// `Full` targets rational-rules prior × parts prior × likelihood. `Paper`
/// drops the parts prior from the ratio. Both correct for the regeneration
/// proposal. `Literal` is the bare ratio with neither the parts prior nor
/// the proposal correction, kept for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AcceptanceMode {
    Paper,
    #[default]
    Full,
    Literal,
}

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Object(#[from] ObjectError),
    #[error("cached scores drifted from recomputation at iteration {iteration}")]
    CacheMismatch { iteration: usize },
    #[error("derivation language has {count} members, over the budget of {budget}")]
    BudgetExceeded { count: u128, budget: u128 },
    #[error("every derivation has zero posterior")]
    Degenerate,
}

#[cfg(test)]
mod tests;
