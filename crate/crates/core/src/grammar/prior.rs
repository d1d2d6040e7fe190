//! Prior probabilities over derivations.
//!
//! Three terms are provided:
//!
//! * [`derivation_prob`]: the product of rule probabilities along the
//!   derivation. Kept for diagnostics; the posterior does not use it.
//! * [`rational_rules_prior`]: the rule probabilities integrated out under a
//!   uniform Dirichlet, giving a ratio of multinomial beta functions of the
//!   per-nonterminal rule-use counts.
//! * [`parts_prior`]: a factor `1/|preterminals|` for every use of a
//!   preterminal beyond its first.
//!
//! Everything is computed in log space. The plain-space parts prior is an
//! exact power so small reuse counts give exact values.

use super::{Derivation, Grammar, SymbolId};

/// Rule-use counts per expandable symbol. `counts[s][i]` is the number of
/// times the `i`-th alternative of symbol `s` appears in the derivation;
/// terminals have empty vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductionCounts {
    counts: Vec<Vec<u32>>,
}

impl ProductionCounts {
    pub fn of(d: &Derivation, g: &Grammar) -> Self {
        let mut counts: Vec<Vec<u32>> = g
            .symbols()
            .iter()
            .enumerate()
            .map(|(i, _)| vec![0; g.alternatives(SymbolId(i as u32)).len()])
            .collect();
        d.root().visit(&mut |n| {
            let lhs = n.lhs(g);
            counts[lhs.index()][g.local_index(n.production)] += 1;
        });
        ProductionCounts { counts }
    }

    pub fn for_symbol(&self, s: SymbolId) -> &[u32] {
        &self.counts[s.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (SymbolId, &[u32])> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_empty())
            .map(|(i, c)| (SymbolId(i as u32), c.as_slice()))
    }
}

/// Log of the multinomial beta function `prod Γ(a_i) / Γ(sum a_i)`.
pub fn ln_multinomial_beta(alpha: &[f64]) -> f64 {
    let total: f64 = alpha.iter().sum();
    alpha.iter().map(|&a| libm::lgamma(a)).sum::<f64>() - libm::lgamma(total)
}

/// `ln( β(counts + 1) / β(1) )` for one nonterminal.
pub fn ln_dirichlet_marginal(counts: &[u32]) -> f64 {
    if counts.len() <= 1 {
        return 0.0;
    }
    let shifted: Vec<f64> = counts.iter().map(|&c| c as f64 + 1.0).collect();
    let ones = vec![1.0; counts.len()];
    ln_multinomial_beta(&shifted) - ln_multinomial_beta(&ones)
}

pub fn derivation_log_prob(d: &Derivation, g: &Grammar) -> f64 {
    d.root().log_prob(g)
}

pub fn derivation_prob(d: &Derivation, g: &Grammar) -> f64 {
    derivation_log_prob(d, g).exp()
}

pub fn rational_rules_log_prior(d: &Derivation, g: &Grammar) -> f64 {
    ProductionCounts::of(d, g)
        .iter()
        .map(|(_, c)| ln_dirichlet_marginal(c))
        .sum()
}

pub fn rational_rules_prior(d: &Derivation, g: &Grammar) -> f64 {
    rational_rules_log_prior(d, g).exp()
}

/// Number of preterminal uses beyond the first, summed over preterminals.
pub fn preterminal_reuse(d: &Derivation, g: &Grammar) -> u32 {
    let expansions = d.expansion_counts(g);
    g.preterminals()
        .iter()
        .map(|s| expansions[s.index()].saturating_sub(1))
        .sum()
}

pub fn parts_log_prior(d: &Derivation, g: &Grammar) -> f64 {
    let n_pre = g.preterminals().len();
    if n_pre == 0 {
        return 0.0;
    }
    -(preterminal_reuse(d, g) as f64) * (n_pre as f64).ln()
}

/// Plain-space parts prior, computed as an exact power rather than through
/// the log.
pub fn parts_prior(d: &Derivation, g: &Grammar) -> f64 {
    let n_pre = g.preterminals().len();
    if n_pre == 0 {
        return 1.0;
    }
    (1.0 / n_pre as f64).powi(preterminal_reuse(d, g) as i32)
}

/// Rational-rules prior times parts prior, kept as separate log terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointPrior {
    pub log_rational: f64,
    pub log_parts: f64,
}

impl JointPrior {
    pub fn log(&self) -> f64 {
        self.log_rational + self.log_parts
    }

    pub fn value(&self) -> f64 {
        self.log().exp()
    }
}

pub fn joint_prior(d: &Derivation, g: &Grammar) -> JointPrior {
    JointPrior {
        log_rational: rational_rules_log_prior(d, g),
        log_parts: parts_log_prior(d, g),
    }
}
