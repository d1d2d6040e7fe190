use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::grammar::derivation::tests::four_slot;
use crate::grammar::{fribble_grammar, joint_prior, parse_grammar, Derivation, Grammar, Tree};

fn by_yield(values: &'static [(&'static str, f64)]) -> FnLikelihood<impl FnMut(&Derivation, &Grammar) -> f64> {
    FnLikelihood(move |d: &Derivation, g: &Grammar| {
        let y = d.yield_names(g).join(" ");
        values.iter().find(|(k, _)| *k == y).map_or(f64::NEG_INFINITY, |(_, v)| v.ln())
    })
}

/// Terminal yield with the leaves under preorder node `index` removed.
fn leaves_outside(d: &Derivation, index: usize) -> Vec<u32> {
    fn walk(t: &Tree, target: usize, k: &mut usize, inside: bool, out: &mut Vec<u32>) {
        match t {
            Tree::Leaf(s) => {
                if !inside {
                    out.push(s.0);
                }
            }
            Tree::Node(n) => {
                let here = *k == target;
                *k += 1;
                for c in &n.children {
                    walk(c, target, k, inside || here, out);
                }
            }
        }
    }
    let mut out = Vec::new();
    walk(&Tree::Node(d.root().clone()), index, &mut 0, false, &mut out);
    out
}

#[test]
fn single_node_always_chosen() {
    let g = parse_grammar("S -> a | b").unwrap();
    let d = Derivation::from_canonical(&g, "0").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut reach_b = 0;
    let n = 10_000;
    for _ in 0..n {
        let p = propose_subtree(&d, &g, &mut rng, 12).unwrap();
        assert_eq!(p.index, 0);
        if p.derivation.canonical_id() == "1" {
            reach_b += 1;
        }
    }
    let f = reach_b as f64 / n as f64;
    assert!((f - 0.5).abs() <= 0.02, "{f}");
}

#[test]
fn proposal_keeps_outside_of_subtree() {
    let g = fribble_grammar();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..300 {
        let d = crate::grammar::sample_derivation(&g, &mut rng, 12).unwrap();
        let p = propose_subtree(&d, &g, &mut rng, 12).unwrap();
        assert!(p.derivation.height() <= 12);
        let before = d.productions_preorder();
        let after = p.derivation.productions_preorder();
        assert_eq!(before[..p.index], after[..p.index]);
        let old_size = d.node_at(p.index).unwrap().0.node_count();
        let new_size = p.derivation.node_at(p.index).unwrap().0.node_count();
        assert_eq!(before[p.index + old_size..], after[p.index + new_size..]);
        assert_eq!(leaves_outside(&d, p.index), leaves_outside(&p.derivation, p.index));
    }
}

fn scored(lr: f64, ll: f64, parts: f64, n: usize) -> Scored {
    Scored {
        prior: crate::grammar::JointPrior {
            log_rational: lr,
            log_parts: parts,
        },
        log_likelihood: ll,
        nonterminals: n,
    }
}

fn dummy_proposal(old: f64, new: f64) -> Proposal {
    let g = parse_grammar("S -> a").unwrap();
    Proposal {
        derivation: Derivation::from_canonical(&g, "0").unwrap(),
        index: 0,
        old_subtree_log_prob: old,
        new_subtree_log_prob: new,
    }
}

#[test]
fn acceptance_arithmetic() {
    let a = clamp_acceptance(0.2f64.ln() + 0.5f64.ln() + 1.25f64.ln());
    assert!((a - 0.125).abs() < 1e-12);
    assert_eq!(clamp_acceptance(4f64.ln() + 0.5f64.ln()), 1.0);

    let p = dummy_proposal(-1.0, -1.0);
    for mode in [AcceptanceMode::Paper, AcceptanceMode::Full, AcceptanceMode::Literal] {
        let s = scored(-3.0, -2.0, -1.386, 7);
        assert_eq!(accept_probability(&s, &s, &p, mode), 1.0);
        // likelihood ratio 0.2, prior ratio 0.5, node ratio 5/4.
        let cur = scored(-3.0, -2.0, 0.0, 5);
        let new = scored(-3.0 + 0.5f64.ln(), -2.0 + 0.2f64.ln(), 0.0, 4);
        assert!((accept_probability(&cur, &new, &p, mode) - 0.125).abs() < 1e-12);
    }
}

#[test]
fn acceptance_modes_differ_where_expected() {
    let cur = scored(-3.0, -2.0, 0.0, 5);
    let new = scored(-3.0, -2.0, -(4f64.ln()), 5);
    let p = dummy_proposal(-2.0, -2.0 + 0.5f64.ln());
    let full = accept_probability(&cur, &new, &p, AcceptanceMode::Full);
    let paper = accept_probability(&cur, &new, &p, AcceptanceMode::Paper);
    let literal = accept_probability(&cur, &new, &p, AcceptanceMode::Literal);
    assert_eq!(paper, 1.0);
    assert!((full - 0.5).abs() < 1e-12);
    assert_eq!(literal, 1.0);
    let p = dummy_proposal(-2.0 + 0.5f64.ln(), -2.0);
    assert!((accept_probability(&cur, &cur, &p, AcceptanceMode::Paper) - 0.5).abs() < 1e-12);
    assert_eq!(accept_probability(&cur, &cur, &p, AcceptanceMode::Literal), 1.0);
}

#[test]
fn acceptance_with_impossible_states() {
    let p = dummy_proposal(-1.0, -2.0);
    let ninf = f64::NEG_INFINITY;
    for mode in [AcceptanceMode::Paper, AcceptanceMode::Full, AcceptanceMode::Literal] {
        let finite = scored(-3.0, -2.0, 0.0, 5);
        let dead = scored(-3.0, ninf, 0.0, 5);
        assert_eq!(accept_probability(&dead, &finite, &p, mode), 1.0);
        assert_eq!(accept_probability(&dead, &dead, &p, mode), 1.0);
        assert_eq!(accept_probability(&finite, &dead, &p, mode), 0.0);
        let weird = scored(-3.0, f64::INFINITY, 0.0, 5);
        let a = accept_probability(&weird, &weird, &p, mode);
        assert!(!a.is_nan() && (0.0..=1.0).contains(&a));
    }
}

#[test]
fn zero_likelihood_posterior_is_negative_infinity() {
    let g = parse_grammar("S -> a | b").unwrap();
    let d = Derivation::from_canonical(&g, "1").unwrap();
    let mut lik = by_yield(&[("a", 1.0)]);
    assert_eq!(log_posterior_unnorm(&d, &g, &mut lik), f64::NEG_INFINITY);
}

#[test]
fn toy_posterior_by_hand() {
    // S -> A B [0.7] | A [0.3]; the posterior ignores τ, so only counts
    // matter. Derivation "S -> A B, A -> a2, B -> b1":
    // S counts [1,0] -> 1/2; A counts [0,1,0] -> 1/3; B counts [1,0] -> 1/2.
    let g = parse_grammar(include_str!("../../data/toy_flat.grammar")).unwrap();
    let d = Derivation::from_canonical(&g, "0.3.5").unwrap();
    assert_eq!(d.yield_names(&g), ["a2", "b1"]);
    let mut lik = by_yield(&[("a2 b1", 0.4)]);
    let want = (0.5 * (1.0 / 3.0) * 0.5 * 0.4f64).ln();
    assert!((log_posterior_unnorm(&d, &g, &mut lik) - want).abs() < 1e-12);
}

#[test]
fn enumeration_symmetric_cases() {
    let g = parse_grammar("S -> a | b").unwrap();
    let post = enumerate_posterior(&g, &mut FlatLikelihood, 4, AcceptanceMode::Full).unwrap();
    let m = post.by_id();
    assert!((m["0"] - 0.5).abs() < 1e-12 && (m["1"] - 0.5).abs() < 1e-12);
    let mut lik = by_yield(&[("a", 0.9), ("b", 0.1)]);
    let m = enumerate_posterior(&g, &mut lik, 4, AcceptanceMode::Full).unwrap().by_id();
    assert!((m["0"] - 0.9).abs() < 1e-12 && (m["1"] - 0.1).abs() < 1e-12);
}

#[test]
fn enumeration_counts_and_budget() {
    let g = parse_grammar(include_str!("../../data/toy_reuse.grammar")).unwrap();
    for depth in 1..=6 {
        let n = count_derivations(&g, depth);
        if n <= ENUMERATION_BUDGET {
            let ds = enumerate_derivations(&g, depth).unwrap();
            assert_eq!(ds.len() as u128, n);
            let ids: std::collections::BTreeSet<String> = ds.iter().map(|d| d.canonical_id()).collect();
            assert_eq!(ids.len(), ds.len());
            assert!(ds.iter().all(|d| d.height() <= depth));
        }
    }
    let fg = fribble_grammar();
    assert!(matches!(
        enumerate_derivations(&fg, 12),
        Err(InferenceError::BudgetExceeded { .. })
    ));
    let post = enumerate_posterior(&g, &mut SyntheticLikelihood::new(2), 5, AcceptanceMode::Full).unwrap();
    assert!((post.total() - 1.0).abs() < 1e-10);
}

#[test]
fn single_derivation_chain() {
    let g = parse_grammar("S -> a").unwrap();
    let run = run_chain(
        &g,
        &mut FlatLikelihood,
        &ChainConfig {
            iterations: 500,
            burn_in: 100,
            seed: 3,
            ..ChainConfig::default()
        },
    )
    .unwrap();
    assert_eq!(run.summary.counts.len(), 1);
    assert_eq!(run.summary.frequency("0"), 1.0);
    assert_eq!(run.summary.total, 400);
}

#[test]
fn identical_seeds_identical_traces() {
    let g = fribble_grammar();
    let cfg = ChainConfig {
        iterations: 3000,
        burn_in: 1000,
        seed: 11,
        trace: true,
        ..ChainConfig::default()
    };
    let a = run_chain(&g, &mut SyntheticLikelihood::new(5), &cfg).unwrap();
    let b = run_chain(&g, &mut SyntheticLikelihood::new(5), &cfg).unwrap();
    assert_eq!(trace_csv(&a.state.trace), trace_csv(&b.state.trace));
    assert_eq!(a.summary, b.summary);
    assert!(a.state.accepted_count <= a.state.proposed_count);
    let c = run_chain(&g, &mut SyntheticLikelihood::new(5), &ChainConfig { seed: 12, ..cfg }).unwrap();
    assert_ne!(trace_csv(&a.state.trace), trace_csv(&c.state.trace));
}

#[test]
fn bad_config_rejected() {
    let g = parse_grammar("S -> a").unwrap();
    let cfg = ChainConfig {
        iterations: 100,
        burn_in: 200,
        ..ChainConfig::default()
    };
    assert!(matches!(run_chain(&g, &mut FlatLikelihood, &cfg), Err(InferenceError::Config(_))));
}

#[test]
fn cache_mismatch_detected() {
    let g = parse_grammar("S -> a | b").unwrap();
    let mut lik = SyntheticLikelihood::new(1);
    let mut st = ChainState::init(&g, &mut lik, 1, 4).unwrap();
    st.check_cache(&g, &mut lik, 0).unwrap();
    st.score.log_likelihood += 1e-6;
    assert!(st.check_cache(&g, &mut lik, 0).is_err());
}

/// Transition counts between the two states of `S -> a | b` balance.
#[test]
fn detailed_balance_two_states() {
    let g = parse_grammar("S -> a | b").unwrap();
    let mut lik = by_yield(&[("a", 0.8), ("b", 0.3)]);
    let mut st = ChainState::init(&g, &mut lik, 21, 4).unwrap();
    let (mut ab, mut ba) = (0u64, 0u64);
    let (batches, per) = (100, 2_000);
    let mut batch_rates = Vec::with_capacity(batches);
    for _ in 0..batches {
        let mut flow = 0u64;
        for _ in 0..per {
            let before = st.current_id.clone();
            st.step(&g, &mut lik, AcceptanceMode::Full, 4).unwrap();
            match (before.as_str(), st.current_id.as_str()) {
                ("0", "1") => {
                    ab += 1;
                    flow += 1;
                }
                ("1", "0") => ba += 1,
                _ => {}
            }
        }
        batch_rates.push(flow as f64 / per as f64);
    }
    assert!(ab.abs_diff(ba) <= 1);
    // π(a) = 8/11 and a→b happens with probability ½ · 3/8, so the a→b
    // flow is 3/22 per step; compare within 3 batch-means standard errors.
    let want = 3.0 / 22.0;
    let mean = batch_rates.iter().sum::<f64>() / batches as f64;
    let var = batch_rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    let se = (var / batches as f64).sqrt();
    assert!((mean - want).abs() < 3.0 * se, "{mean} vs {want} (se {se})");
}

#[test]
fn map_ties_break_lexicographically() {
    let g = parse_grammar("S -> b | a | c").unwrap();
    let mut s = PosteriorSummary::default();
    let db = Derivation::from_canonical(&g, "0").unwrap();
    let da = Derivation::from_canonical(&g, "1").unwrap();
    let dc = Derivation::from_canonical(&g, "2").unwrap();
    for d in [&db, &da, &dc, &db, &da] {
        s.record(&d.canonical_id(), d, &g);
    }
    assert_eq!(s.map_id(), Some("1"));
    s.record("2", &dc, &g);
    s.record("2", &dc, &g);
    assert_eq!(s.map_id(), Some("2"));
    let total: f64 = s.frequencies().values().sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn merge_pools_counts() {
    let g = parse_grammar("S -> a | b").unwrap();
    let da = Derivation::from_canonical(&g, "0").unwrap();
    let db = Derivation::from_canonical(&g, "1").unwrap();
    let mut x = PosteriorSummary::default();
    x.record("0", &da, &g);
    let mut y = PosteriorSummary::default();
    y.record("1", &db, &g);
    y.record("1", &db, &g);
    x.merge(&y);
    assert_eq!(x.total, 3);
    assert!((x.frequency("1") - 2.0 / 3.0).abs() < 1e-15);
    let sum: f64 = x.frequencies().values().sum();
    assert!((sum - 1.0).abs() < 1e-12);
}

#[test]
fn tv_distance_basic() {
    let p: BTreeMap<String, f64> = [("a".into(), 0.5), ("b".into(), 0.5)].into();
    let q: BTreeMap<String, f64> = [("a".into(), 0.25), ("c".into(), 0.75)].into();
    assert!((tv_distance(&p, &q) - 0.75).abs() < 1e-15);
    assert_eq!(tv_distance(&p, &p), 0.0);
}

#[test]
fn prototype_of_single_entry() {
    let g = fribble_grammar();
    let lib = crate::object::PartLibrary::shipped();
    let d = four_slot(&g, ["P4", "P1", "P2", "P3"]);
    let mut s = PosteriorSummary::default();
    s.record(&d.canonical_id(), &d, &g);
    let v = extract_prototype(&s, &lib, 0.3).unwrap();
    assert_eq!(v, crate::object::realize(&d.yield_names(&g), &lib, 0.3).unwrap());
    assert!(extract_prototype(&PosteriorSummary::default(), &lib, 0.3).is_err());
}

#[test]
fn paper_and_full_agree_without_reuse() {
    let g = fribble_grammar();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut lik = SyntheticLikelihood::new(8);
    let mut checked = 0;
    for _ in 0..500 {
        let d = crate::grammar::sample_derivation(&g, &mut rng, 12).unwrap();
        let p = propose_subtree(&d, &g, &mut rng, 12).unwrap();
        let (a, b) = (Scored::new(&d, &g, &mut lik), Scored::new(&p.derivation, &g, &mut lik));
        let reuse = crate::grammar::preterminal_reuse(&d, &g) + crate::grammar::preterminal_reuse(&p.derivation, &g);
        if reuse == 0 {
            checked += 1;
            assert_eq!(
                accept_probability(&a, &b, &p, AcceptanceMode::Paper),
                accept_probability(&a, &b, &p, AcceptanceMode::Full)
            );
        }
        assert_eq!(a.prior, joint_prior(&d, &g));
    }
    assert!(checked > 0);
}
