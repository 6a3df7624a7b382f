//! Grammar induction by counting binarized productions.

use std::collections::{BTreeMap, HashMap};

use crate::corpus::Corpus;
use crate::tree::Node;

use super::{
    BinaryRule, Grammar, PcfgError, PositionClass, SmoothingConfig, Symbol, SymbolId, UnaryRule,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Rhs {
    One(SymbolId),
    Two(SymbolId, SymbolId),
}

#[derive(Default)]
struct Interner {
    symbols: Vec<Symbol>,
    index: HashMap<Symbol, SymbolId>,
}

impl Interner {
    fn intern(&mut self, sym: Symbol) -> SymbolId {
        if let Some(&id) = self.index.get(&sym) {
            return id;
        }
        let id = self.symbols.len();
        self.symbols.push(sym.clone());
        self.index.insert(sym, id);
        id
    }
}

fn position_class(index: usize, arity: usize) -> PositionClass {
    if arity == 1 {
        PositionClass::Sole
    } else if index == 0 {
        PositionClass::First
    } else if index == arity - 1 {
        PositionClass::Last
    } else {
        PositionClass::Middle
    }
}

struct Counter {
    interner: Interner,
    rules: HashMap<(SymbolId, Rhs), u64>,
    emissions: BTreeMap<SymbolId, BTreeMap<String, u64>>,
}

impl Counter {
    fn count_rule(&mut self, lhs: SymbolId, rhs: Rhs) {
        *self.rules.entry((lhs, rhs)).or_insert(0) += 1;
    }

    fn walk(&mut self, node: &Node) -> SymbolId {
        let (label, children) = match node {
            Node::NonTerminal { label, children } => (label, children),
            _ => unreachable!("walk visits non-terminals only"),
        };
        let lhs = self.interner.intern(Symbol::Label(label.clone()));
        let arity = children.len();
        let child_syms: Vec<SymbolId> = children
            .iter()
            .enumerate()
            .map(|(i, child)| match child {
                Node::NonTerminal { .. } => self.walk(child),
                Node::Token(text) => {
                    let preterm = self.interner.intern(Symbol::Preterm {
                        parent: label.clone(),
                        class: position_class(i, arity),
                    });
                    *self
                        .emissions
                        .entry(preterm)
                        .or_default()
                        .entry(text.clone())
                        .or_insert(0) += 1;
                    preterm
                }
                Node::Mask => unreachable!("annotation trees carry no masks"),
            })
            .collect();
        match *child_syms.as_slice() {
            [only] => self.count_rule(lhs, Rhs::One(only)),
            [left, right] => self.count_rule(lhs, Rhs::Two(left, right)),
            _ => {
                // Left-factored chain: lhs -> c0 I(c0); I(c_j) -> c_{j+1}
                // I(c_{j+1}); the last intermediate takes the final pair.
                let mut cur = lhs;
                for &child in &child_syms[..arity - 2] {
                    let inter = self
                        .interner
                        .intern(Symbol::Inter { parent: label.clone(), prev: child });
                    self.count_rule(cur, Rhs::Two(child, inter));
                    cur = inter;
                }
                self.count_rule(cur, Rhs::Two(child_syms[arity - 2], child_syms[arity - 1]));
            }
        }
        lhs
    }
}

/// Counts binarized productions over the corpus and normalizes with
/// additive smoothing: p(rule) = (count + alpha) / (total + alpha * types)
/// within each LHS. Emissions are MLE scaled by (1 - unknown_mass).
pub fn induce_grammar(corpus: &Corpus, smoothing: SmoothingConfig) -> Result<Grammar, PcfgError> {
    if corpus.is_empty() {
        return Err(PcfgError::EmptyCorpus);
    }
    if !(smoothing.rule_alpha >= 0.0 && smoothing.rule_alpha.is_finite()) {
        return Err(PcfgError::BadConfig(format!(
            "rule_alpha {} must be finite and non-negative",
            smoothing.rule_alpha
        )));
    }
    if !(0.0..1.0).contains(&smoothing.unknown_mass) {
        return Err(PcfgError::BadConfig(format!(
            "unknown_mass {} outside [0, 1)",
            smoothing.unknown_mass
        )));
    }

    let mut counter = Counter {
        interner: Interner::default(),
        rules: HashMap::new(),
        emissions: BTreeMap::new(),
    };
    let root_id = counter.interner.intern(Symbol::Root);
    for item in &corpus.items {
        let top = counter.walk(item.tree.root());
        counter.count_rule(root_id, Rhs::One(top));
    }

    // Deterministic rule order: sort by (lhs, rhs); unary variants sort
    // before binary for the same LHS.
    let mut counted: Vec<((SymbolId, Rhs), u64)> = counter.rules.into_iter().collect();
    counted.sort_by_key(|((lhs, rhs), _)| (*lhs, *rhs));
    let mut lhs_totals: HashMap<SymbolId, (u64, u64)> = HashMap::new();
    for ((lhs, _), count) in &counted {
        let slot = lhs_totals.entry(*lhs).or_insert((0, 0));
        slot.0 += count;
        slot.1 += 1;
    }
    let alpha = smoothing.rule_alpha;
    let mut binary = Vec::new();
    let mut unary = Vec::new();
    for ((lhs, rhs), count) in counted {
        let (total, types) = lhs_totals[&lhs];
        let prob = (count as f64 + alpha) / (total as f64 + alpha * types as f64);
        let logp = prob.ln();
        match rhs {
            Rhs::One(child) => unary.push(UnaryRule { lhs, child, logp }),
            Rhs::Two(left, right) => binary.push(BinaryRule { lhs, left, right, logp }),
        }
    }

    let keep = 1.0 - smoothing.unknown_mass;
    let mut lexicon: BTreeMap<String, Vec<(SymbolId, f64)>> = BTreeMap::new();
    let mut preterms = Vec::new();
    for (preterm, tokens) in &counter.emissions {
        preterms.push(*preterm);
        let total: u64 = tokens.values().sum();
        for (token, count) in tokens {
            let prob = (*count as f64 / total as f64) * keep;
            lexicon.entry(token.clone()).or_default().push((*preterm, prob.ln()));
        }
    }

    let mut grammar = Grammar {
        symbols: counter.interner.symbols,
        root: root_id,
        binary,
        unary,
        lexicon,
        preterms,
        unknown_logp: (smoothing.unknown_mass > 0.0).then(|| smoothing.unknown_mass.ln()),
        smoothing,
        binary_by_left: HashMap::new(),
    };
    grammar.build_indices();
    Ok(grammar)
}
