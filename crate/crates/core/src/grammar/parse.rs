use std::collections::{HashMap, HashSet};

use super::{Grammar, GrammarError, Production, Symbol, SymbolId, SymbolKind};

/// Sums within this distance of 1 are taken as-is.
const EXACT_SUM_TOL: f64 = 1e-12;
/// Sums within this distance of 1 are renormalized; beyond it they are errors.
const LOOSE_SUM_TOL: f64 = 1e-6;

struct RawRule {
    line: usize,
    alternatives: Vec<(Vec<String>, Option<f64>)>,
}

/// Parses grammar source text.
///
/// One rule per line: `LHS -> A B | C [0.3] | ...`, `#` starts a comment.
/// The first left-hand side is the start symbol. Symbols that never appear
/// on a left-hand side are terminals. A rule may list weights in brackets
/// after every alternative; otherwise its alternatives are uniform. Rules
/// for the same left-hand side on several lines are merged.
pub fn parse_grammar(text: &str) -> Result<Grammar, GrammarError> {
    let mut order: Vec<String> = Vec::new();
    let mut rules: HashMap<String, RawRule> = HashMap::new();

    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (lhs, rhs) = line.split_once("->").ok_or_else(|| GrammarError::Syntax {
            line: line_no,
            message: "expected `->`".into(),
        })?;
        let lhs = lhs.trim();
        if !is_identifier(lhs) {
            return Err(GrammarError::Syntax {
                line: line_no,
                message: format!("bad left-hand side `{lhs}`"),
            });
        }
        let rhs = rhs.trim();
        if rhs.is_empty() {
            return Err(GrammarError::NoProductions(lhs.to_string()));
        }
        let mut alts = Vec::new();
        for alt in rhs.split('|') {
            alts.push(parse_alternative(alt, line_no)?);
        }
        match rules.get_mut(lhs) {
            Some(rule) => rule.alternatives.extend(alts),
            None => {
                order.push(lhs.to_string());
                rules.insert(
                    lhs.to_string(),
                    RawRule {
                        line: line_no,
                        alternatives: alts,
                    },
                );
            }
        }
    }
    if order.is_empty() {
        return Err(GrammarError::Empty);
    }

    // Left-hand sides take the first ids, in order of appearance, then the
    // remaining symbols in order of first use within the merged rules.
    let mut symbols: Vec<Symbol> = Vec::new();
    let mut ids: HashMap<String, SymbolId> = HashMap::new();
    for name in &order {
        ids.insert(name.clone(), SymbolId(symbols.len() as u32));
        symbols.push(Symbol {
            name: name.clone(),
            kind: SymbolKind::Nonterminal,
        });
    }
    for name in &order {
        for (rhs, _) in &rules[name].alternatives {
            for sym in rhs {
                if !ids.contains_key(sym) {
                    ids.insert(sym.clone(), SymbolId(symbols.len() as u32));
                    symbols.push(Symbol {
                        name: sym.clone(),
                        kind: SymbolKind::Terminal,
                    });
                }
            }
        }
    }
    symbols[0].kind = SymbolKind::Start;

    let mut productions = Vec::new();
    for name in &order {
        let rule = &rules[name];
        let lhs = ids[name];
        let weighted = rule.alternatives.iter().filter(|(_, w)| w.is_some()).count();
        let n = rule.alternatives.len();
        let probs: Vec<f64> = if weighted == 0 {
            vec![1.0 / n as f64; n]
        } else if weighted == n {
            let ws: Vec<f64> = rule.alternatives.iter().map(|(_, w)| w.unwrap()).collect();
            let sum: f64 = ws.iter().sum();
            if (sum - 1.0).abs() <= EXACT_SUM_TOL {
                ws
            } else if (sum - 1.0).abs() <= LOOSE_SUM_TOL {
                ws.iter().map(|w| w / sum).collect()
            } else {
                return Err(GrammarError::ProbabilitySum {
                    lhs: name.clone(),
                    sum,
                });
            }
        } else {
            return Err(GrammarError::Syntax {
                line: rule.line,
                message: format!("`{name}` mixes weighted and unweighted alternatives"),
            });
        };
        for ((rhs, _), p) in rule.alternatives.iter().zip(probs) {
            productions.push(Production {
                lhs,
                rhs: rhs.iter().map(|s| ids[s]).collect(),
                probability: p,
            });
        }
    }

    // Preterminals: every alternative is a single terminal.
    for name in order.iter().skip(1) {
        let lhs = ids[name];
        let all_single_terminal = productions.iter().filter(|p| p.lhs == lhs).all(|p| {
            p.rhs.len() == 1 && symbols[p.rhs[0].index()].kind == SymbolKind::Terminal
        });
        if all_single_terminal {
            symbols[lhs.index()].kind = SymbolKind::Preterminal;
        }
    }

    check_reachable(&symbols, &productions)?;
    let g = Grammar::from_parts(symbols, productions, SymbolId(0));
    for s in g.expandable() {
        if g.min_height(s) == usize::MAX {
            return Err(GrammarError::Unproductive(g.name(s).to_string()));
        }
    }
    Ok(g)
}

fn parse_alternative(alt: &str, line: usize) -> Result<(Vec<String>, Option<f64>), GrammarError> {
    let alt = alt.trim();
    let (body, weight) = match alt.find('[') {
        Some(open) => {
            let close = alt.rfind(']').filter(|&c| c > open && alt[c + 1..].trim().is_empty());
            let close = close.ok_or_else(|| GrammarError::Syntax {
                line,
                message: format!("unterminated weight in `{alt}`"),
            })?;
            let w: f64 = alt[open + 1..close].trim().parse().map_err(|_| GrammarError::Syntax {
                line,
                message: format!("bad weight in `{alt}`"),
            })?;
            if !(w > 0.0 && w <= 1.0) {
                return Err(GrammarError::Syntax {
                    line,
                    message: format!("weight {w} outside (0, 1]"),
                });
            }
            (&alt[..open], Some(w))
        }
        None => (alt, None),
    };
    let syms: Vec<String> = body.split_whitespace().map(str::to_string).collect();
    if syms.is_empty() {
        return Err(GrammarError::Syntax {
            line,
            message: "empty alternative".into(),
        });
    }
    if let Some(bad) = syms.iter().find(|s| !is_identifier(s)) {
        return Err(GrammarError::Syntax {
            line,
            message: format!("bad symbol `{bad}`"),
        });
    }
    Ok((syms, weight))
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty()
        && s
            .chars()
            .all(|c| c.is_alphanumeric() || c == '_' || c == '\'' || c == '.')
        && !s.starts_with('.')
}

fn check_reachable(symbols: &[Symbol], productions: &[Production]) -> Result<(), GrammarError> {
    let mut seen: HashSet<SymbolId> = HashSet::new();
    let mut stack = vec![SymbolId(0)];
    while let Some(s) = stack.pop() {
        if !seen.insert(s) {
            continue;
        }
        for p in productions.iter().filter(|p| p.lhs == s) {
            stack.extend(p.rhs.iter().copied());
        }
    }
    for (i, sym) in symbols.iter().enumerate() {
        if sym.kind != SymbolKind::Terminal && !seen.contains(&SymbolId(i as u32)) {
            return Err(GrammarError::Unreachable(sym.name.clone()));
        }
    }
    Ok(())
}
