//! Helpers shared by the integration tests: a standalone brute-force
//! posterior for small grammars, written without the library's tree,
//! prior or enumeration code.

#![allow(dead_code)]

use std::collections::BTreeMap;

use fribble::grammar::{Derivation, Grammar};
use fribble::inference::FnLikelihood;

pub const TOY_FLAT: &str = include_str!("../../data/toy_flat.grammar");
pub const TOY_REUSE: &str = include_str!("../../data/toy_reuse.grammar");
pub const TOY_FRIBBLE: &str = include_str!("../../data/toy_fribble.grammar");

/// (name, source, max depth) for the oracle suite. Each language has at
/// most 200 derivations at its depth.
pub const TOY_GRAMMARS: [(&str, &str, usize); 3] = [
    ("toy_flat", TOY_FLAT, 3),
    ("toy_reuse", TOY_REUSE, 4),
    ("toy_fribble", TOY_FRIBBLE, 5),
];

/// Fixed pseudo-likelihood of a space-joined terminal yield, in [0.1, 1].
pub fn yield_likelihood(seed: u64, y: &str) -> f64 {
    let mut h: u64 = seed ^ 0x9e37_79b9_7f4a_7c15;
    for b in y.bytes() {
        h = h.rotate_left(5) ^ b as u64;
        h = h.wrapping_mul(0x2545_f491_4f6c_dd1d);
    }
    0.1 + 0.9 * ((h >> 11) as f64 / (1u64 << 53) as f64)
}

pub fn toy_likelihood(seed: u64) -> FnLikelihood<impl FnMut(&Derivation, &Grammar) -> f64> {
    FnLikelihood(move |d: &Derivation, g: &Grammar| yield_likelihood(seed, &d.yield_names(g).join(" ")).ln())
}

struct Rule {
    lhs: String,
    rhs: Vec<String>,
}

/// Line-based reader for the toy grammar files: one `LHS -> alt | alt`
/// rule per line, weights in brackets ignored.
fn read_rules(src: &str) -> Vec<Rule> {
    let mut rules = Vec::new();
    for line in src.lines() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (lhs, rhs) = line.split_once("->").unwrap();
        for alt in rhs.split('|') {
            let alt = alt.split('[').next().unwrap();
            rules.push(Rule {
                lhs: lhs.trim().to_string(),
                rhs: alt.split_whitespace().map(String::from).collect(),
            });
        }
    }
    rules
}

fn factorial(n: u64) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Posterior over all leftmost derivations of height at most `max_depth`,
/// keyed by the sequence of rule indices joined with '.'.
///
/// Prior: per left-hand side `Π c_i! (k−1)! / (n+k−1)!`, times
/// `(1/#preterminals)` per preterminal use beyond the first when
/// `with_parts` is set.
pub fn brute_posterior(src: &str, max_depth: usize, seed: u64, with_parts: bool) -> BTreeMap<String, f64> {
    let rules = read_rules(src);
    let lhss: Vec<String> = {
        let mut v: Vec<String> = Vec::new();
        for r in &rules {
            if !v.contains(&r.lhs) {
                v.push(r.lhs.clone());
            }
        }
        v
    };
    let is_nt = |s: &str| lhss.iter().any(|l| l == s);
    let preterminals: Vec<&String> = lhss
        .iter()
        .filter(|l| {
            rules
                .iter()
                .filter(|r| &r.lhs == *l)
                .all(|r| r.rhs.len() == 1 && !is_nt(&r.rhs[0]))
        })
        .collect();

    // Sentential form: (symbol, depth of the node that would expand it).
    let mut done: Vec<(Vec<usize>, Vec<String>)> = Vec::new();
    let mut stack: Vec<(Vec<(String, usize)>, Vec<usize>)> = vec![(vec![(lhss[0].clone(), 1)], vec![])];
    while let Some((form, used)) = stack.pop() {
        match form.iter().position(|(s, _)| is_nt(s)) {
            None => done.push((used, form.into_iter().map(|(s, _)| s).collect())),
            Some(i) => {
                let (sym, depth) = form[i].clone();
                if depth > max_depth {
                    continue;
                }
                for (ri, r) in rules.iter().enumerate().filter(|(_, r)| r.lhs == sym) {
                    let mut next = form[..i].to_vec();
                    next.extend(r.rhs.iter().map(|s| (s.clone(), depth + 1)));
                    next.extend_from_slice(&form[i + 1..]);
                    let mut u = used.clone();
                    u.push(ri);
                    stack.push((next, u));
                }
            }
        }
    }

    let mut weights = BTreeMap::new();
    for (used, leaves) in &done {
        let mut prior = 1.0;
        for l in &lhss {
            let alts: Vec<usize> = (0..rules.len()).filter(|&i| &rules[i].lhs == l).collect();
            let k = alts.len() as u64;
            let counts: Vec<u64> = alts.iter().map(|a| used.iter().filter(|&&u| u == *a).count() as u64).collect();
            let n: u64 = counts.iter().sum();
            prior *= counts.iter().map(|&c| factorial(c)).product::<f64>() * factorial(k - 1) / factorial(n + k - 1);
        }
        if with_parts {
            for p in &preterminals {
                let uses = used.iter().filter(|&&u| &&rules[u].lhs == p).count();
                prior *= (1.0 / preterminals.len() as f64).powi(uses.saturating_sub(1) as i32);
            }
        }
        let id = used.iter().map(|u| u.to_string()).collect::<Vec<_>>().join(".");
        weights.insert(id, prior * yield_likelihood(seed, &leaves.join(" ")));
    }
    let z: f64 = weights.values().sum();
    weights.values_mut().for_each(|w| *w /= z);
    weights
}
