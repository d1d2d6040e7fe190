use std::fmt;

use super::{Grammar, GrammarError, ProductionId, SymbolId};

/// A child slot of a derivation node: either a terminal leaf or a further
/// production application.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Tree {
    Leaf(SymbolId),
    Node(Node),
}

/// One production application with its children, in rhs order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Node {
    pub production: ProductionId,
    pub children: Vec<Tree>,
}

impl Node {
    pub fn lhs(&self, g: &Grammar) -> SymbolId {
        g.production(self.production).lhs
    }

    /// Number of production applications in this subtree, itself included.
    pub fn node_count(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(|c| match c {
                Tree::Node(n) => n.node_count(),
                Tree::Leaf(_) => 0,
            })
            .sum::<usize>()
    }

    /// Height counted in production levels; a node with only leaves is 1.
    pub fn height(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(|c| match c {
                Tree::Node(n) => n.height(),
                Tree::Leaf(_) => 0,
            })
            .max()
            .unwrap_or(0)
    }

    /// Sum of log rule probabilities over the subtree.
    pub fn log_prob(&self, g: &Grammar) -> f64 {
        let mut acc = 0.0;
        self.visit(&mut |n| acc += g.production(n.production).probability.ln());
        acc
    }

    /// Preorder walk over production nodes.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Node)) {
        f(self);
        for c in &self.children {
            if let Tree::Node(n) = c {
                n.visit(f);
            }
        }
    }

    pub(crate) fn push_yield(&self, out: &mut Vec<SymbolId>) {
        for c in &self.children {
            match c {
                Tree::Leaf(s) => out.push(*s),
                Tree::Node(n) => n.push_yield(out),
            }
        }
    }

    fn check(&self, g: &Grammar) -> Result<(), String> {
        let prod = g.production(self.production);
        if prod.rhs.len() != self.children.len() {
            return Err(format!(
                "production {} has {} children, expected {}",
                self.production.0,
                self.children.len(),
                prod.rhs.len()
            ));
        }
        for (want, child) in prod.rhs.iter().zip(&self.children) {
            match child {
                Tree::Leaf(s) if s == want && g.is_terminal(*s) => {}
                Tree::Node(n) if n.lhs(g) == *want => n.check(g)?,
                _ => {
                    return Err(format!(
                        "child does not match `{}` in production {}",
                        g.name(*want),
                        self.production.0
                    ))
                }
            }
        }
        Ok(())
    }
}

/// A complete derivation from the start symbol.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Derivation {
    root: Node,
}

impl Derivation {
    /// Wraps a root node, checking it against the grammar.
    pub fn new(root: Node, g: &Grammar) -> Result<Self, GrammarError> {
        if root.lhs(g) != g.start() {
            return Err(GrammarError::BadDerivationId(
                "root does not expand the start symbol".into(),
            ));
        }
        root.check(g).map_err(GrammarError::BadDerivationId)?;
        Ok(Derivation { root })
    }

    pub(crate) fn from_root_unchecked(root: Node) -> Self {
        Derivation { root }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Number of nonterminal (production) nodes, root included.
    pub fn nonterminal_count(&self) -> usize {
        self.root.node_count()
    }

    pub fn height(&self) -> usize {
        self.root.height()
    }

    /// Left-to-right terminal leaves.
    pub fn terminal_yield(&self) -> Vec<SymbolId> {
        let mut out = Vec::new();
        self.root.push_yield(&mut out);
        out
    }

    pub fn yield_names(&self, g: &Grammar) -> Vec<String> {
        self.terminal_yield()
            .into_iter()
            .map(|s| g.name(s).to_string())
            .collect()
    }

    /// Production ids in preorder.
    pub fn productions_preorder(&self) -> Vec<ProductionId> {
        let mut out = Vec::new();
        self.root.visit(&mut |n| out.push(n.production));
        out
    }

    /// Canonical identifier: the preorder production-index sequence.
    pub fn canonical_id(&self) -> String {
        let mut s = String::new();
        for (i, p) in self.productions_preorder().iter().enumerate() {
            if i > 0 {
                s.push('.');
            }
            s.push_str(&p.0.to_string());
        }
        s
    }

    /// Rebuilds a derivation from its canonical identifier.
    pub fn from_canonical(g: &Grammar, id: &str) -> Result<Self, GrammarError> {
        let bad = || GrammarError::BadDerivationId(id.to_string());
        let seq: Vec<ProductionId> = id
            .split('.')
            .map(|t| t.parse::<u32>().map(ProductionId).map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        if seq.iter().any(|p| p.index() >= g.productions().len()) {
            return Err(bad());
        }
        let mut pos = 0;
        let root = build_preorder(g, g.start(), &seq, &mut pos).ok_or_else(bad)?;
        if pos != seq.len() {
            return Err(bad());
        }
        Ok(Derivation { root })
    }

    /// The `index`-th production node in preorder and its depth (root = 1).
    pub fn node_at(&self, index: usize) -> Option<(&Node, usize)> {
        fn go<'a>(n: &'a Node, depth: usize, k: &mut usize) -> Option<(&'a Node, usize)> {
            if *k == 0 {
                return Some((n, depth));
            }
            *k -= 1;
            for c in &n.children {
                if let Tree::Node(child) = c {
                    if let Some(hit) = go(child, depth + 1, k) {
                        return Some(hit);
                    }
                }
            }
            None
        }
        let mut k = index;
        go(&self.root, 1, &mut k)
    }

    /// Copy of this derivation with the `index`-th preorder node replaced.
    /// The replacement must expand the same symbol.
    pub fn replace_at(&self, index: usize, replacement: Node) -> Derivation {
        fn go(n: &mut Node, k: &mut usize, rep: &mut Option<Node>) -> bool {
            if *k == 0 {
                *n = rep.take().expect("replacement used once");
                return true;
            }
            *k -= 1;
            for c in n.children.iter_mut() {
                if let Tree::Node(child) = c {
                    if go(child, k, rep) {
                        return true;
                    }
                }
            }
            false
        }
        let mut out = self.clone();
        let mut k = index;
        let mut rep = Some(replacement);
        let found = go(&mut out.root, &mut k, &mut rep);
        assert!(found, "node index {index} out of range");
        out
    }

    /// Number of times each symbol is expanded in the derivation.
    pub fn expansion_counts(&self, g: &Grammar) -> Vec<u32> {
        let mut counts = vec![0u32; g.symbols().len()];
        self.root.visit(&mut |n| counts[n.lhs(g).index()] += 1);
        counts
    }

    pub fn display<'a>(&'a self, g: &'a Grammar) -> DisplayDerivation<'a> {
        DisplayDerivation { d: self, g }
    }
}

fn build_preorder(g: &Grammar, sym: SymbolId, seq: &[ProductionId], pos: &mut usize) -> Option<Node> {
    let prod_id = *seq.get(*pos)?;
    let prod = g.production(prod_id);
    if prod.lhs != sym {
        return None;
    }
    *pos += 1;
    let mut children = Vec::with_capacity(prod.rhs.len());
    for &s in &prod.rhs {
        if g.is_terminal(s) {
            children.push(Tree::Leaf(s));
        } else {
            children.push(Tree::Node(build_preorder(g, s, seq, pos)?));
        }
    }
    Some(Node {
        production: prod_id,
        children,
    })
}

/// Bracketed rendering, e.g. `(F (N (M (M1 P4)) ...) P5)`.
pub struct DisplayDerivation<'a> {
    d: &'a Derivation,
    g: &'a Grammar,
}

impl fmt::Display for DisplayDerivation<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(n: &Node, g: &Grammar, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            write!(f, "({}", g.name(n.lhs(g)))?;
            for c in &n.children {
                match c {
                    Tree::Leaf(s) => write!(f, " {}", g.name(*s))?,
                    Tree::Node(child) => {
                        write!(f, " ")?;
                        go(child, g, f)?;
                    }
                }
            }
            write!(f, ")")
        }
        go(&self.d.root, self.g, f)
    }
}
