use std::collections::{BTreeMap, HashMap};

use super::{AcceptanceMode, InferenceError, Likelihood, Scored};
use crate::grammar::{Derivation, Grammar, Node, SymbolId, Tree};

/// Largest derivation language the exact oracle will enumerate.
pub const ENUMERATION_BUDGET: u128 = 10_000;

/// Number of derivations of height at most `max_depth`, saturating.
pub fn count_derivations(g: &Grammar, max_depth: usize) -> u128 {
    let mut memo = HashMap::new();
    count_from(g, g.start(), max_depth, &mut memo)
}

fn count_from(g: &Grammar, sym: SymbolId, budget: usize, memo: &mut HashMap<(SymbolId, usize), u128>) -> u128 {
    if g.is_terminal(sym) {
        return 1;
    }
    if budget == 0 {
        return 0;
    }
    if let Some(&c) = memo.get(&(sym, budget)) {
        return c;
    }
    let mut total: u128 = 0;
    for &p in g.alternatives(sym) {
        let mut ways: u128 = 1;
        for &s in &g.production(p).rhs {
            ways = ways.saturating_mul(count_from(g, s, budget - 1, memo));
            if ways == 0 {
                break;
            }
        }
        total = total.saturating_add(ways);
    }
    memo.insert((sym, budget), total);
    total
}

/// Every derivation of height at most `max_depth`, refusing languages larger
/// than [`ENUMERATION_BUDGET`].
pub fn enumerate_derivations(g: &Grammar, max_depth: usize) -> Result<Vec<Derivation>, InferenceError> {
    let count = count_derivations(g, max_depth);
    if count > ENUMERATION_BUDGET {
        return Err(InferenceError::BudgetExceeded {
            count,
            budget: ENUMERATION_BUDGET,
        });
    }
    let mut memo = HashMap::new();
    Ok(subtrees(g, g.start(), max_depth, &mut memo)
        .into_iter()
        .map(|root| Derivation::new(root, g).expect("enumerated tree is valid"))
        .collect())
}

fn subtrees(g: &Grammar, sym: SymbolId, budget: usize, memo: &mut HashMap<(SymbolId, usize), Vec<Node>>) -> Vec<Node> {
    if budget == 0 {
        return Vec::new();
    }
    if let Some(v) = memo.get(&(sym, budget)) {
        return v.clone();
    }
    let mut out = Vec::new();
    for &p in g.alternatives(sym) {
        let mut partial: Vec<Vec<Tree>> = vec![Vec::new()];
        for &s in &g.production(p).rhs {
            let options: Vec<Tree> = if g.is_terminal(s) {
                vec![Tree::Leaf(s)]
            } else {
                subtrees(g, s, budget - 1, memo).into_iter().map(Tree::Node).collect()
            };
            partial = partial
                .iter()
                .flat_map(|prefix| {
                    options.iter().map(move |o| {
                        let mut v = prefix.clone();
                        v.push(o.clone());
                        v
                    })
                })
                .collect();
        }
        out.extend(partial.into_iter().map(|children| Node { production: p, children }));
    }
    memo.insert((sym, budget), out.clone());
    out
}

/// Normalized posterior over a finite derivation language.
#[derive(Debug, Clone)]
pub struct ExactPosterior {
    pub entries: Vec<(Derivation, f64)>,
}

impl ExactPosterior {
    pub fn by_id(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for (d, p) in &self.entries {
            *out.entry(d.canonical_id()).or_insert(0.0) += p;
        }
        out
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }
}

/// Exact posterior over all derivations within `max_depth`, for the prior
/// targeted by `mode` (`Full` includes the parts prior).
pub fn enumerate_posterior(
    g: &Grammar,
    lik: &mut impl Likelihood,
    max_depth: usize,
    mode: AcceptanceMode,
) -> Result<ExactPosterior, InferenceError> {
    let ds = enumerate_derivations(g, max_depth)?;
    let logs: Vec<f64> = ds
        .iter()
        .map(|d| Scored::new(d, g, lik).log_posterior(mode))
        .collect();
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Err(InferenceError::Degenerate);
    }
    let z = m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
    Ok(ExactPosterior {
        entries: ds.into_iter().zip(logs).map(|(d, l)| (d, (l - z).exp())).collect(),
    })
}
