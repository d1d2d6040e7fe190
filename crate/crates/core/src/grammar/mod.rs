//! Probabilistic context-free grammar over object parts.
//!
//! A [`Grammar`] is immutable once built. Hypotheses about an object are
//! [`Derivation`]s: parse trees rooted at the start symbol whose leaves are
//! terminal part symbols. The prior terms over derivations live in
//! [`prior`].

pub(crate) mod derivation;
mod parse;
pub mod prior;
mod sample;

use std::collections::HashMap;
use std::fmt;

pub use derivation::{Derivation, Node, Tree};
pub use parse::parse_grammar;
pub use prior::{
    derivation_log_prob, derivation_prob, joint_prior, parts_log_prior, parts_prior,
    preterminal_reuse, rational_rules_log_prior, rational_rules_prior, JointPrior, ProductionCounts,
};
pub use sample::{
    sample_derivation, sample_subtree, DEFAULT_MAX_DEPTH, DEFAULT_SAMPLE_RETRIES,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrammarError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("nonterminal `{0}` has no productions")]
    NoProductions(String),
    #[error("nonterminal `{0}` is unreachable from the start symbol")]
    Unreachable(String),
    #[error("nonterminal `{0}` cannot derive a terminal string")]
    Unproductive(String),
    #[error("production probabilities for `{lhs}` sum to {sum}, expected 1")]
    ProbabilitySum { lhs: String, sum: f64 },
    #[error("grammar source is empty")]
    Empty,
    #[error("no derivation within depth {max_depth} after {attempts} attempts")]
    DepthExceeded { max_depth: usize, attempts: usize },
    #[error("malformed derivation id `{0}`")]
    BadDerivationId(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymbolId(pub u32);

impl SymbolId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProductionId(pub u32);

impl ProductionId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SymbolKind {
    Start,
    Nonterminal,
    /// Nonterminal whose every production rewrites to exactly one terminal.
    Preterminal,
    Terminal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Symbol {
    pub name: String,
    pub kind: SymbolKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Production {
    pub lhs: SymbolId,
    pub rhs: Vec<SymbolId>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grammar {
    symbols: Vec<Symbol>,
    productions: Vec<Production>,
    start: SymbolId,
    /// Productions of each symbol, in source order (empty for terminals).
    by_lhs: Vec<Vec<ProductionId>>,
    /// Position of each production within its lhs's alternatives.
    local_index: Vec<usize>,
    /// Minimum derivation height per symbol (0 for terminals).
    min_height: Vec<usize>,
    names: HashMap<String, SymbolId>,
}

impl Grammar {
    /// Assembles a grammar from already-validated parts; `parse_grammar` is
    /// the public way in.
    pub(crate) fn from_parts(
        symbols: Vec<Symbol>,
        productions: Vec<Production>,
        start: SymbolId,
    ) -> Self {
        let mut by_lhs = vec![Vec::new(); symbols.len()];
        let mut local_index = Vec::with_capacity(productions.len());
        for (i, p) in productions.iter().enumerate() {
            let alts = &mut by_lhs[p.lhs.index()];
            local_index.push(alts.len());
            alts.push(ProductionId(i as u32));
        }
        let names = symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.name.clone(), SymbolId(i as u32)))
            .collect();
        let min_height = compute_min_heights(&symbols, &productions, &by_lhs);
        Grammar {
            symbols,
            productions,
            start,
            by_lhs,
            local_index,
            min_height,
            names,
        }
    }

    pub fn start(&self) -> SymbolId {
        self.start
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn symbol(&self, id: SymbolId) -> &Symbol {
        &self.symbols[id.index()]
    }

    pub fn name(&self, id: SymbolId) -> &str {
        &self.symbols[id.index()].name
    }

    pub fn kind(&self, id: SymbolId) -> SymbolKind {
        self.symbols[id.index()].kind
    }

    pub fn lookup(&self, name: &str) -> Option<SymbolId> {
        self.names.get(name).copied()
    }

    pub fn productions(&self) -> &[Production] {
        &self.productions
    }

    pub fn production(&self, id: ProductionId) -> &Production {
        &self.productions[id.index()]
    }

    /// Alternatives for `lhs`, in source order.
    pub fn alternatives(&self, lhs: SymbolId) -> &[ProductionId] {
        &self.by_lhs[lhs.index()]
    }

    pub fn local_index(&self, id: ProductionId) -> usize {
        self.local_index[id.index()]
    }

    pub fn is_terminal(&self, id: SymbolId) -> bool {
        self.kind(id) == SymbolKind::Terminal
    }

    /// Symbols with productions, start included, in declaration order.
    pub fn expandable(&self) -> impl Iterator<Item = SymbolId> + '_ {
        (0..self.symbols.len() as u32)
            .map(SymbolId)
            .filter(|&s| !self.by_lhs[s.index()].is_empty())
    }

    /// Nonterminals other than the start symbol (preterminals included).
    pub fn nonterminals(&self) -> Vec<SymbolId> {
        self.of_kind(|k| matches!(k, SymbolKind::Nonterminal | SymbolKind::Preterminal))
    }

    pub fn preterminals(&self) -> Vec<SymbolId> {
        self.of_kind(|k| k == SymbolKind::Preterminal)
    }

    pub fn terminals(&self) -> Vec<SymbolId> {
        self.of_kind(|k| k == SymbolKind::Terminal)
    }

    fn of_kind(&self, pred: impl Fn(SymbolKind) -> bool) -> Vec<SymbolId> {
        self.symbols
            .iter()
            .enumerate()
            .filter(|(_, s)| pred(s.kind))
            .map(|(i, _)| SymbolId(i as u32))
            .collect()
    }

    /// Smallest height of any derivation rooted at `sym`; terminals are 0.
    pub fn min_height(&self, sym: SymbolId) -> usize {
        self.min_height[sym.index()]
    }

    /// Smallest `max_depth` for which a full derivation exists.
    pub fn min_derivation_depth(&self) -> usize {
        self.min_height(self.start)
    }

    /// Finds the production `lhs -> rhs` if it exists.
    pub fn find_production(&self, lhs: SymbolId, rhs: &[SymbolId]) -> Option<ProductionId> {
        self.alternatives(lhs)
            .iter()
            .copied()
            .find(|&p| self.production(p).rhs == rhs)
    }
}

fn compute_min_heights(
    symbols: &[Symbol],
    productions: &[Production],
    by_lhs: &[Vec<ProductionId>],
) -> Vec<usize> {
    let mut h: Vec<usize> = symbols
        .iter()
        .map(|s| if s.kind == SymbolKind::Terminal { 0 } else { usize::MAX })
        .collect();
    loop {
        let mut changed = false;
        for (s, alts) in by_lhs.iter().enumerate() {
            for p in alts {
                let rhs = &productions[p.index()].rhs;
                let child = rhs.iter().map(|c| h[c.index()]).max().unwrap_or(0);
                if child != usize::MAX && child + 1 < h[s] {
                    h[s] = child + 1;
                    changed = true;
                }
            }
        }
        if !changed {
            return h;
        }
    }
}

/// Writes the grammar back in source syntax with explicit weights.
impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut order: Vec<SymbolId> = vec![self.start];
        order.extend(self.expandable().filter(|&s| s != self.start));
        for lhs in order {
            write!(f, "{} ->", self.name(lhs))?;
            for (i, &p) in self.alternatives(lhs).iter().enumerate() {
                if i > 0 {
                    write!(f, " |")?;
                }
                let prod = self.production(p);
                for s in &prod.rhs {
                    write!(f, " {}", self.name(*s))?;
                }
                write!(f, " [{:?}]", prod.probability)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// The shipped fribble grammar source.
pub const FRIBBLE_GRAMMAR: &str = include_str!("../../data/fribble.grammar");

pub fn fribble_grammar() -> Grammar {
    parse_grammar(FRIBBLE_GRAMMAR).expect("shipped grammar parses")
}
