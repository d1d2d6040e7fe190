use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AcceptanceMode, InferenceError, Likelihood, PosteriorSummary};
use crate::grammar::{joint_prior, sample_derivation, sample_subtree, Derivation, Grammar, JointPrior, DEFAULT_MAX_DEPTH};

/// Cached values are checked against a fresh recomputation this often.
pub const CHECKPOINT_EVERY: usize = 1000;
const CHECKPOINT_TOL: f64 = 1e-9;

/// A subtree-regeneration move: the node at preorder `index` was replaced by
/// a fresh draw from the grammar.
#[derive(Debug, Clone)]
pub struct Proposal {
    pub derivation: Derivation,
    pub index: usize,
    /// `ln τ` of the removed subtree.
    pub old_subtree_log_prob: f64,
    /// `ln τ` of the regenerated subtree.
    pub new_subtree_log_prob: f64,
}

/// Picks a production node uniformly (the root included) and regrows the
/// subtree below it from its symbol, keeping the whole derivation within
/// `max_depth`. Everything outside the chosen subtree is kept as is.
pub fn propose_subtree<R: Rng + ?Sized>(
    d: &Derivation,
    g: &Grammar,
    rng: &mut R,
    max_depth: usize,
) -> Result<Proposal, InferenceError> {
    let n = d.nonterminal_count();
    let index = rng.gen_range(0..n);
    let (node, depth) = d.node_at(index).expect("index below node count");
    let budget = max_depth
        .checked_sub(depth - 1)
        .filter(|&b| b > 0)
        .ok_or_else(|| InferenceError::Config(format!("derivation deeper than max depth {max_depth}")))?;
    let fresh = sample_subtree(g, node.lhs(g), rng, budget)?;
    Ok(Proposal {
        old_subtree_log_prob: node.log_prob(g),
        new_subtree_log_prob: fresh.log_prob(g),
        derivation: d.replace_at(index, fresh),
        index,
    })
}

/// Prior, likelihood and size of one derivation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub prior: JointPrior,
    pub log_likelihood: f64,
    pub nonterminals: usize,
}

impl Scored {
    pub fn new(d: &Derivation, g: &Grammar, lik: &mut impl Likelihood) -> Self {
        Scored {
            prior: joint_prior(d, g),
            log_likelihood: lik.log_likelihood(d, g),
            nonterminals: d.nonterminal_count(),
        }
    }

    /// Unnormalized log posterior targeted by `mode`.
    pub fn log_posterior(&self, mode: AcceptanceMode) -> f64 {
        match mode {
            AcceptanceMode::Full => self.prior.log_rational + self.prior.log_parts + self.log_likelihood,
            AcceptanceMode::Paper | AcceptanceMode::Literal => {
                self.prior.log_rational + self.log_likelihood
            }
        }
    }
}

/// Unnormalized log posterior: joint prior plus log likelihood.
pub fn log_posterior_unnorm(d: &Derivation, g: &Grammar, lik: &mut impl Likelihood) -> f64 {
    joint_prior(d, g).log() + lik.log_likelihood(d, g)
}

/// `min(1, exp(log_ratio))`, with NaN mapped to 0.
pub fn clamp_acceptance(log_ratio: f64) -> f64 {
    if log_ratio.is_nan() {
        0.0
    } else if log_ratio >= 0.0 {
        1.0
    } else {
        log_ratio.exp()
    }
}

/// Metropolis-Hastings acceptance probability of moving from `current` to
/// the proposed state.
///
/// The log ratio is the likelihood ratio, the rational-rules prior ratio
/// and the node-count ratio `|N_D| / |N_D'|`. `Full` adds the parts-prior
/// ratio. `Paper` and `Full` also include the regeneration proposal ratio
/// `τ(old subtree) / τ(new subtree)`; `Literal` leaves it out and does not
/// leave the prior invariant.
///
/// An impossible current state is always left; an impossible proposal is
/// never taken.
pub fn accept_probability(current: &Scored, proposed: &Scored, p: &Proposal, mode: AcceptanceMode) -> f64 {
    let cur = current.log_posterior(mode);
    let new = proposed.log_posterior(mode);
    if cur == f64::NEG_INFINITY {
        return 1.0;
    }
    if new == f64::NEG_INFINITY {
        return 0.0;
    }
    let mut log_a = (proposed.log_likelihood - current.log_likelihood)
        + (proposed.prior.log_rational - current.prior.log_rational)
        + ((current.nonterminals as f64).ln() - (proposed.nonterminals as f64).ln());
    if mode != AcceptanceMode::Literal {
        log_a += p.old_subtree_log_prob - p.new_subtree_log_prob;
    }
    if mode == AcceptanceMode::Full {
        log_a += proposed.prior.log_parts - current.prior.log_parts;
    }
    clamp_acceptance(log_a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub mode: AcceptanceMode,
    pub max_depth: usize,
    /// Keep a per-iteration trace of the post-burn-in states.
    pub trace: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            iterations: 10_000,
            burn_in: 1_000,
            seed: 0,
            mode: AcceptanceMode::Full,
            max_depth: DEFAULT_MAX_DEPTH,
            trace: false,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<(), InferenceError> {
        if self.iterations <= self.burn_in {
            return Err(InferenceError::Config(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.max_depth == 0 {
            return Err(InferenceError::Config("max depth must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub derivation_id: String,
    pub log_prior: f64,
    pub log_likelihood: f64,
    pub accepted: bool,
}

pub struct ChainState {
    pub current: Derivation,
    pub current_id: String,
    pub score: Scored,
    pub rng: ChaCha8Rng,
    pub trace: Vec<TraceRow>,
    pub accepted_count: usize,
    pub proposed_count: usize,
}

impl ChainState {
    /// Starts from a prior sample drawn with the chain's own generator.
    pub fn init(
        g: &Grammar,
        lik: &mut impl Likelihood,
        seed: u64,
        max_depth: usize,
    ) -> Result<Self, InferenceError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let current = sample_derivation(g, &mut rng, max_depth)?;
        Ok(ChainState::starting_at(current, g, lik, rng))
    }

    pub fn starting_at(current: Derivation, g: &Grammar, lik: &mut impl Likelihood, rng: ChaCha8Rng) -> Self {
        ChainState {
            score: Scored::new(&current, g, lik),
            current_id: current.canonical_id(),
            current,
            rng,
            trace: Vec::new(),
            accepted_count: 0,
            proposed_count: 0,
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed_count == 0 {
            0.0
        } else {
            self.accepted_count as f64 / self.proposed_count as f64
        }
    }

    /// One propose/accept step; returns whether the proposal was taken.
    /// A regeneration that cannot fit the depth cap counts as a rejection.
    pub fn step(
        &mut self,
        g: &Grammar,
        lik: &mut impl Likelihood,
        mode: AcceptanceMode,
        max_depth: usize,
    ) -> Result<bool, InferenceError> {
        self.proposed_count += 1;
        let p = match propose_subtree(&self.current, g, &mut self.rng, max_depth) {
            Ok(p) => p,
            Err(InferenceError::Grammar(_)) => return Ok(false),
            Err(e) => return Err(e),
        };
        let scored = Scored::new(&p.derivation, g, lik);
        let a = accept_probability(&self.score, &scored, &p, mode);
        let u: f64 = self.rng.gen();
        if u < a {
            self.accepted_count += 1;
            self.current_id = p.derivation.canonical_id();
            self.current = p.derivation;
            self.score = scored;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    /// Recomputes the cached values from scratch.
    pub fn check_cache(&self, g: &Grammar, lik: &mut impl Likelihood, iteration: usize) -> Result<(), InferenceError> {
        let fresh = Scored::new(&self.current, g, lik);
        let close = |a: f64, b: f64| a == b || (a - b).abs() <= CHECKPOINT_TOL;
        if !(close(fresh.prior.log_rational, self.score.prior.log_rational)
            && close(fresh.prior.log_parts, self.score.prior.log_parts)
            && close(fresh.log_likelihood, self.score.log_likelihood)
            && fresh.nonterminals == self.score.nonterminals)
        {
            return Err(InferenceError::CacheMismatch { iteration });
        }
        Ok(())
    }
}

pub struct ChainRun {
    pub state: ChainState,
    pub summary: PosteriorSummary,
}

/// Runs one chain: prior initialization, `iterations` MH steps, and a
/// summary of the states visited after the first `burn_in` steps.
pub fn run_chain(g: &Grammar, lik: &mut impl Likelihood, config: &ChainConfig) -> Result<ChainRun, InferenceError> {
    config.validate()?;
    let mut state = ChainState::init(g, lik, config.seed, config.max_depth)?;
    let mut summary = PosteriorSummary::default();
    for it in 0..config.iterations {
        let accepted = state.step(g, lik, config.mode, config.max_depth)?;
        if (it + 1) % CHECKPOINT_EVERY == 0 {
            state.check_cache(g, lik, it + 1)?;
        }
        if it >= config.burn_in {
            summary.record(&state.current_id, &state.current, g);
            if config.trace {
                state.trace.push(TraceRow {
                    iteration: it + 1,
                    derivation_id: state.current_id.clone(),
                    log_prior: state.score.prior.log(),
                    log_likelihood: state.score.log_likelihood,
                    accepted,
                });
            }
        }
    }
    Ok(ChainRun { state, summary })
}

/// Trace rows as CSV.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("iteration,derivation_id,log_prior,log_likelihood,accepted\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:?},{:?},{}\n",
            r.iteration, r.derivation_id, r.log_prior, r.log_likelihood, r.accepted as u8
        ));
    }
    out
}

/// Reads rows written by [`trace_csv`].
pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceRow>, InferenceError> {
    let bad = |n: usize| InferenceError::Config(format!("malformed trace line {n}"));
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad(n + 1));
        }
        rows.push(TraceRow {
            iteration: f[0].parse().map_err(|_| bad(n + 1))?,
            derivation_id: f[1].to_string(),
            log_prior: f[2].parse().map_err(|_| bad(n + 1))?,
            log_likelihood: f[3].parse().map_err(|_| bad(n + 1))?,
            accepted: match f[4] {
                "0" => false,
                "1" => true,
                _ => return Err(bad(n + 1)),
            },
        });
    }
    Ok(rows)
}
