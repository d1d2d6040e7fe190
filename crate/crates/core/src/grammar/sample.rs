use rand::Rng;

use super::{Derivation, Grammar, GrammarError, Node, ProductionId, SymbolId, Tree};

/// Depth cap for top-down sampling; the fribble grammar is recursive in `N`.
pub const DEFAULT_MAX_DEPTH: usize = 12;
pub const DEFAULT_SAMPLE_RETRIES: usize = 100;

/// Draws a derivation top-down, each nonterminal rewritten by a production
/// drawn from its rule probabilities.
///
/// Attempts that still have nonterminals left at `max_depth` are discarded
/// and redrawn, up to [`DEFAULT_SAMPLE_RETRIES`] times, so the result is a
/// draw from the grammar conditioned on fitting within `max_depth`.
pub fn sample_derivation<R: Rng + ?Sized>(
    g: &Grammar,
    rng: &mut R,
    max_depth: usize,
) -> Result<Derivation, GrammarError> {
    let root = sample_subtree(g, g.start(), rng, max_depth)?;
    Ok(Derivation::from_root_unchecked(root))
}

/// Samples a subtree rooted at `sym` of height at most `budget`, with the
/// same retry policy as [`sample_derivation`].
pub fn sample_subtree<R: Rng + ?Sized>(
    g: &Grammar,
    sym: SymbolId,
    rng: &mut R,
    budget: usize,
) -> Result<Node, GrammarError> {
    for _ in 0..DEFAULT_SAMPLE_RETRIES {
        if let Some(node) = try_expand(g, sym, rng, budget) {
            return Ok(node);
        }
    }
    Err(GrammarError::DepthExceeded {
        max_depth: budget,
        attempts: DEFAULT_SAMPLE_RETRIES,
    })
}

fn try_expand<R: Rng + ?Sized>(
    g: &Grammar,
    sym: SymbolId,
    rng: &mut R,
    budget: usize,
) -> Option<Node> {
    if budget == 0 {
        return None;
    }
    let production = choose(g, sym, rng);
    let rhs = &g.production(production).rhs;
    let mut children = Vec::with_capacity(rhs.len());
    for &s in rhs {
        if g.is_terminal(s) {
            children.push(Tree::Leaf(s));
        } else {
            children.push(Tree::Node(try_expand(g, s, rng, budget - 1)?));
        }
    }
    Some(Node {
        production,
        children,
    })
}

fn choose<R: Rng + ?Sized>(g: &Grammar, sym: SymbolId, rng: &mut R) -> ProductionId {
    let alts = g.alternatives(sym);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &p in alts {
        acc += g.production(p).probability;
        if u < acc {
            return p;
        }
    }
    // Rounding can leave the cumulative sum a hair under 1.
    *alts.last().expect("expandable symbol has productions")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{fribble_grammar, parse_grammar};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_rule_always_same() {
        let g = parse_grammar("S -> a").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let d = sample_derivation(&g, &mut rng, 5).unwrap();
            assert_eq!(d.canonical_id(), "0");
        }
    }

    #[test]
    fn binary_choice_frequency() {
        let g = parse_grammar("S -> a | b").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let a = (0..n)
            .filter(|_| sample_derivation(&g, &mut rng, 3).unwrap().canonical_id() == "0")
            .count();
        let freq = a as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.01, "freq {freq}");
    }

    #[test]
    fn deterministic_given_seed() {
        let g = fribble_grammar();
        let a = sample_derivation(&g, &mut ChaCha8Rng::seed_from_u64(42), DEFAULT_MAX_DEPTH).unwrap();
        let b = sample_derivation(&g, &mut ChaCha8Rng::seed_from_u64(42), DEFAULT_MAX_DEPTH).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn respects_depth_cap() {
        let g = fribble_grammar();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let d = sample_derivation(&g, &mut rng, 6).unwrap();
            assert!(d.height() <= 6);
            assert!(!d.terminal_yield().is_empty());
        }
    }

    #[test]
    fn depth_below_minimum_fails() {
        let g = fribble_grammar();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(matches!(
            sample_derivation(&g, &mut rng, 3),
            Err(GrammarError::DepthExceeded { .. })
        ));
    }
}
