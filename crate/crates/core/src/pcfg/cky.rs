//! Max-derivation CKY with unary closure.
//!
//! Ties at exactly equal scores break on (global rule index, split point),
//! ascending, which makes the chart independent of hash-map iteration
//! order and of thread scheduling.

use std::collections::HashMap;

use crate::tree::{Node, ParseTree};

use super::{Grammar, Symbol, SymbolId};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChartStats {
    /// Chart cells holding at least one symbol.
    pub cells: usize,
    /// Symbol entries summed over all cells.
    pub entries: usize,
}

#[derive(Debug, Clone)]
pub struct ParseResult {
    pub tree: Option<ParseTree>,
    pub log_probability: Option<f64>,
    pub stats: ChartStats,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    score: f64,
    rule: usize,
    split: usize,
    kind: BackKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BackKind {
    Lex,
    Unary,
    Binary,
}

type Cell = HashMap<SymbolId, Entry>;

fn consider(cell: &mut Cell, sym: SymbolId, cand: Entry) -> bool {
    match cell.get(&sym) {
        None => {
            cell.insert(sym, cand);
            true
        }
        Some(cur) => {
            let better = cand.score > cur.score
                || (cand.score == cur.score && (cand.rule, cand.split) < (cur.rule, cur.split));
            if better {
                cell.insert(sym, cand);
            }
            better
        }
    }
}

// Relaxes unary rules to a fixed point. Scores only rise, and rule-index
// ties replace strictly by the tie-break order, so this terminates.
fn unary_closure(grammar: &Grammar, cell: &mut Cell) {
    let base = grammar.binary.len();
    loop {
        let mut changed = false;
        for (uidx, rule) in grammar.unary.iter().enumerate() {
            if let Some(child) = cell.get(&rule.child).copied() {
                let cand = Entry {
                    score: child.score + rule.logp,
                    rule: base + uidx,
                    split: 0,
                    kind: BackKind::Unary,
                };
                if consider(cell, rule.lhs, cand) {
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
}

pub fn cky_parse(grammar: &Grammar, tokens: &[String]) -> ParseResult {
    let n = tokens.len();
    if n == 0 {
        return ParseResult { tree: None, log_probability: None, stats: ChartStats::default() };
    }
    let lex_rule = grammar.lexical_rule_index();
    // chart[len - 1][start]
    let mut chart: Vec<Vec<Cell>> =
        (1..=n).map(|len| vec![Cell::new(); n - len + 1]).collect();

    for (i, token) in tokens.iter().enumerate() {
        let cell = &mut chart[0][i];
        match grammar.lexicon.get(token) {
            Some(entries) => {
                for &(preterm, logp) in entries {
                    consider(
                        cell,
                        preterm,
                        Entry { score: logp, rule: lex_rule, split: 0, kind: BackKind::Lex },
                    );
                }
            }
            None => {
                if let Some(logp) = grammar.unknown_logp {
                    for &preterm in &grammar.preterms {
                        consider(
                            cell,
                            preterm,
                            Entry { score: logp, rule: lex_rule, split: 0, kind: BackKind::Lex },
                        );
                    }
                }
            }
        }
        unary_closure(grammar, cell);
    }

    for len in 2..=n {
        for start in 0..=(n - len) {
            let mut cell = Cell::new();
            for split in 1..len {
                let left_cell = &chart[split - 1][start];
                let right_cell = &chart[len - split - 1][start + split];
                if left_cell.is_empty() || right_cell.is_empty() {
                    continue;
                }
                for (&left_sym, left_entry) in left_cell {
                    let Some(rule_ids) = grammar.binary_by_left.get(&left_sym) else {
                        continue;
                    };
                    for &ridx in rule_ids {
                        let rule = &grammar.binary[ridx];
                        if let Some(right_entry) = right_cell.get(&rule.right) {
                            consider(
                                &mut cell,
                                rule.lhs,
                                Entry {
                                    score: left_entry.score + right_entry.score + rule.logp,
                                    rule: ridx,
                                    split,
                                    kind: BackKind::Binary,
                                },
                            );
                        }
                    }
                }
            }
            unary_closure(grammar, &mut cell);
            chart[len - 1][start] = cell;
        }
    }

    let mut stats = ChartStats::default();
    for row in &chart {
        for cell in row {
            if !cell.is_empty() {
                stats.cells += 1;
                stats.entries += cell.len();
            }
        }
    }

    let goal = chart[n - 1][0].get(&grammar.root).copied();
    match goal {
        Some(entry) => {
            let nodes = extract(grammar, &chart, tokens, 0, n, grammar.root);
            debug_assert_eq!(nodes.len(), 1, "root extraction yields a single tree");
            let tree = ParseTree::from_node(nodes.into_iter().next().expect("root node"))
                .expect("debinarized chart tree satisfies all invariants");
            debug_assert_eq!(tree.utterance(), tokens);
            ParseResult { tree: Some(tree), log_probability: Some(entry.score), stats }
        }
        None => ParseResult { tree: None, log_probability: None, stats },
    }
}

// Follows backpointers, splicing out intermediates and the synthetic root.
fn extract(
    grammar: &Grammar,
    chart: &[Vec<Cell>],
    tokens: &[String],
    start: usize,
    len: usize,
    sym: SymbolId,
) -> Vec<Node> {
    let entry = chart[len - 1][start][&sym];
    let children = match entry.kind {
        BackKind::Lex => return vec![Node::Token(tokens[start].clone())],
        BackKind::Unary => {
            let rule = &grammar.unary[entry.rule - grammar.binary.len()];
            extract(grammar, chart, tokens, start, len, rule.child)
        }
        BackKind::Binary => {
            let rule = &grammar.binary[entry.rule];
            let mut kids = extract(grammar, chart, tokens, start, entry.split, rule.left);
            kids.extend(extract(
                grammar,
                chart,
                tokens,
                start + entry.split,
                len - entry.split,
                rule.right,
            ));
            kids
        }
    };
    match &grammar.symbols[sym] {
        Symbol::Label(label) => {
            vec![Node::NonTerminal { label: label.clone(), children }]
        }
        Symbol::Root | Symbol::Inter { .. } => children,
        Symbol::Preterm { .. } => children,
    }
}
