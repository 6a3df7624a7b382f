//! Exhaustive derivation-enumeration oracle for the CKY parser.
//!
//! The oracle recomputes the best parse score top-down by trying every rule
//! and split point, with a unary budget to bound chain length. A second
//! oracle re-scores the returned tree by replaying the binarization scheme.
//! Both must agree with the parser to the last few ulps.

use std::collections::HashMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use topaug::corpus::{AnnotatedUtterance, Corpus, Split};
use topaug::pcfg::{
    cky_parse, induce_grammar, Grammar, PositionClass, SmoothingConfig, Symbol, SymbolId,
};
use topaug::toy::{sample_corpus, ToyConfig};
use topaug::tree::{parse_annotation, Node, ParseTree};

fn corpus_from(trees: &[&str]) -> Corpus {
    let items = trees
        .iter()
        .map(|t| {
            let tree = parse_annotation(t).expect("fixture parses");
            AnnotatedUtterance::from_tree(tree.utterance().join(" "), tree)
        })
        .collect();
    Corpus::new(Split::Train, items)
}

/// Best derivation score for `sym` over `tokens[i..j]`, searching every
/// rule application. `budget` bounds unary chain length; it refreshes after
/// each binary step because binary rules strictly shrink spans.
fn best_score(
    g: &Grammar,
    tokens: &[String],
    sym: SymbolId,
    i: usize,
    j: usize,
    budget: usize,
    memo: &mut HashMap<(SymbolId, usize, usize, usize), Option<f64>>,
) -> Option<f64> {
    let key = (sym, i, j, budget);
    if let Some(&cached) = memo.get(&key) {
        return cached;
    }
    let mut best: Option<f64> = None;
    let offer = |cand: Option<f64>, best: &mut Option<f64>| {
        if let Some(s) = cand {
            if best.is_none_or(|b| s > b) {
                *best = Some(s);
            }
        }
    };
    if j - i == 1 {
        offer(g.emission_logp(sym, &tokens[i]), &mut best);
    }
    let full = g.symbol_count();
    for rule in g.binary_rules().iter().filter(|r| r.lhs == sym) {
        for split in i + 1..j {
            let l = best_score(g, tokens, rule.left, i, split, full, memo);
            let r = best_score(g, tokens, rule.right, split, j, full, memo);
            if let (Some(l), Some(r)) = (l, r) {
                offer(Some(rule.logp + l + r), &mut best);
            }
        }
    }
    if budget > 0 {
        for rule in g.unary_rules().iter().filter(|r| r.lhs == sym) {
            let c = best_score(g, tokens, rule.child, i, j, budget - 1, memo);
            if let Some(c) = c {
                offer(Some(rule.logp + c), &mut best);
            }
        }
    }
    memo.insert(key, best);
    best
}

fn oracle_parse_score(g: &Grammar, tokens: &[String]) -> Option<f64> {
    if tokens.is_empty() {
        return None;
    }
    let mut memo = HashMap::new();
    best_score(
        g,
        tokens,
        g.root(),
        0,
        tokens.len(),
        g.symbol_count(),
        &mut memo,
    )
}

fn find_symbol(g: &Grammar, sym: &Symbol) -> Option<SymbolId> {
    (0..g.symbol_count()).find(|&id| g.symbol(id) == sym)
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

/// Re-scores a tree by replaying the induction-time binarization: the same
/// preterminal classes, the same left-factored intermediate chain.
fn score_node(g: &Grammar, node: &Node) -> Option<(SymbolId, f64)> {
    let (label, children) = match node {
        Node::NonTerminal { label, children } => (label, children),
        _ => return None,
    };
    let lhs = find_symbol(g, &Symbol::Label(label.clone()))?;
    let arity = children.len();
    let mut syms = Vec::with_capacity(arity);
    let mut inner = 0.0;
    for (idx, child) in children.iter().enumerate() {
        match child {
            Node::NonTerminal { .. } => {
                let (sym, score) = score_node(g, child)?;
                syms.push(sym);
                inner += score;
            }
            Node::Token(text) => {
                let preterm = find_symbol(
                    g,
                    &Symbol::Preterm { parent: label.clone(), class: position_class(idx, arity) },
                )?;
                syms.push(preterm);
                inner += g.emission_logp(preterm, text)?;
            }
            Node::Mask => return None,
        }
    }
    let structural = match *syms.as_slice() {
        [only] => g.unary_logp(lhs, only)?,
        [left, right] => g.binary_logp(lhs, left, right)?,
        _ => {
            let mut total = 0.0;
            let mut cur = lhs;
            for &child in &syms[..arity - 2] {
                let inter = find_symbol(g, &Symbol::Inter { parent: label.clone(), prev: child })?;
                total += g.binary_logp(cur, child, inter)?;
                cur = inter;
            }
            total + g.binary_logp(cur, syms[arity - 2], syms[arity - 1])?
        }
    };
    Some((lhs, structural + inner))
}

fn score_tree(g: &Grammar, tree: &ParseTree) -> Option<f64> {
    let (top, score) = score_node(g, tree.root())?;
    Some(g.unary_logp(g.root(), top)? + score)
}

fn check_against_oracle(g: &Grammar, tokens: &[String]) {
    let res = cky_parse(g, tokens);
    let want = oracle_parse_score(g, tokens);
    match (&res.tree, res.log_probability, want) {
        (None, None, None) => {}
        (Some(tree), Some(reported), Some(score)) => {
            assert!(
                (reported - score).abs() < 1e-9,
                "parser {reported} vs oracle {score} on {tokens:?}"
            );
            let rescored =
                score_tree(g, tree).expect("returned tree scores under the grammar");
            assert!(
                (rescored - reported).abs() < 1e-9,
                "tree rescore {rescored} vs reported {reported} on {tokens:?}"
            );
            assert_eq!(tree.utterance(), tokens, "parse must cover the input");
        }
        (tree, reported, want) => panic!(
            "parser (tree {:?}, score {:?}) vs oracle {:?} on {:?}",
            tree.is_some(),
            reported,
            want,
            tokens
        ),
    }
}

#[test]
fn training_sentences_match_enumeration() {
    let corpus = corpus_from(&[
        "[IN:GET_INFO [SL:TOPIC weather ] today ]",
        "[IN:GET_INFO [SL:TOPIC traffic report ] now ]",
        "[IN:GET_INFO tell me [SL:TOPIC news ] ]",
        "[IN:SET_ALARM wake me [SL:TIME at six ] ]",
        "[IN:SET_ALARM [SL:TIME six ] alarm please ]",
        "[IN:GET_INFO [SL:TOPIC weather [IN:GET_INFO nested query ] ] ]",
    ]);
    let g = induce_grammar(&corpus, SmoothingConfig::default()).unwrap();
    for item in &corpus.items {
        check_against_oracle(&g, &item.tokens);
    }
}

#[test]
fn ambiguous_and_unknown_inputs_match_enumeration() {
    let corpus = corpus_from(&[
        "[IN:A [SL:X w ] [SL:Y w ] ]",
        "[IN:A [SL:X w w ] [SL:Y w ] ]",
        "[IN:A [SL:X w ] [SL:Y w w ] ]",
        "[IN:A [SL:Y q ] [SL:X q ] ]",
    ]);
    let g = induce_grammar(&corpus, SmoothingConfig::default()).unwrap();
    let sentences: Vec<Vec<String>> = vec![
        vec!["w"; 2],
        vec!["w"; 3],
        vec!["w"; 4],
        vec!["w"; 5],
        vec!["w", "q"],
        vec!["q", "q", "w"],
        vec!["unknown", "w"],
        vec!["w", "unknown", "w"],
        vec!["unknown", "unknown"],
    ]
    .into_iter()
    .map(|s| s.into_iter().map(String::from).collect())
    .collect();
    for s in &sentences {
        check_against_oracle(&g, s);
    }
}

#[test]
fn zero_unknown_mass_matches_enumeration_on_oov() {
    let corpus = corpus_from(&["[IN:A [SL:X w ] ]", "[IN:A [SL:X w v ] ]"]);
    let cfg = SmoothingConfig { unknown_mass: 0.0, ..SmoothingConfig::default() };
    let g = induce_grammar(&corpus, cfg).unwrap();
    let known: Vec<String> = vec!["w".into(), "v".into()];
    check_against_oracle(&g, &known);
    let oov: Vec<String> = vec!["w".into(), "zzz".into()];
    assert!(cky_parse(&g, &oov).tree.is_none());
    assert!(oracle_parse_score(&g, &oov).is_none());
}

#[test]
fn random_toy_grammars_match_enumeration_on_short_inputs() {
    let cfg = ToyConfig { intents: 4, slots: 5, pool_size: 60, ..ToyConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for round in 0..6 {
        let train = sample_corpus(&cfg, 100 + round, 80, Split::Train);
        let g = induce_grammar(&train, SmoothingConfig::default()).unwrap();
        let probe = sample_corpus(&cfg, 9000 + round, 60, Split::Test);
        let mut checked = 0;
        for item in probe.items.iter().filter(|it| it.tokens.len() <= 6) {
            check_against_oracle(&g, &item.tokens);
            checked += 1;
            if checked == 12 {
                break;
            }
        }
        assert!(checked > 0, "toy corpus produced no short sentences");
        // A few scrambled inputs exercise non-training-shaped spans.
        for _ in 0..4 {
            let vocab: Vec<&String> =
                train.items.iter().flat_map(|it| it.tokens.iter()).collect();
            let n = rng.gen_range(1..=4);
            let tokens: Vec<String> =
                (0..n).map(|_| (*vocab.choose(&mut rng).unwrap()).clone()).collect();
            check_against_oracle(&g, &tokens);
        }
    }
}

#[test]
fn single_token_unary_chains_match_enumeration() {
    // Deep sole-child nesting forces long unary chains over one token.
    let corpus = corpus_from(&[
        "[IN:A [SL:B [IN:C [SL:D x ] ] ] ]",
        "[IN:A [SL:B [IN:C [SL:D y ] ] ] ]",
        "[IN:C [SL:D x ] ]",
    ]);
    let g = induce_grammar(&corpus, SmoothingConfig::default()).unwrap();
    for tok in ["x", "y", "oov"] {
        check_against_oracle(&g, &[tok.to_string()]);
    }
}
