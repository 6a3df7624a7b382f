//! Self-contained synthetic world for tests and demos: a fixed template
//! pool with Zipf-distributed usage, intent carrier phrases, slot lexicons
//! with deliberate cross-slot word overlap (so parsing stays ambiguous
//! enough to leave headroom), and a generic random-tree fuzzer.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{AnnotatedUtterance, Corpus, Split};
use crate::tree::{Label, LabelKind, Node, ParseTree, Template};

#[derive(Debug, Clone)]
pub struct ToyConfig {
    pub intents: usize,
    pub slots: usize,
    /// Template pool size; the pool is fixed by `pool_seed`, independent
    /// of the corpus seed.
    pub pool_size: usize,
    pub zipf_exponent: f64,
    /// Carrier words per intent.
    pub carrier_words: usize,
    /// Own words per slot lexicon.
    pub slot_words: usize,
    /// Probability that a slot word is borrowed from the next slot's
    /// lexicon, which creates genuinely ambiguous utterances.
    pub slot_borrow_prob: f64,
    /// Shared function words usable in any carrier span.
    pub shared_fillers: usize,
    pub pool_seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            intents: 12,
            slots: 15,
            pool_size: 400,
            zipf_exponent: 1.0,
            carrier_words: 6,
            slot_words: 8,
            slot_borrow_prob: 0.2,
            shared_fillers: 4,
            pool_seed: 0,
        }
    }
}

fn intent_label(i: usize) -> Label {
    Label::intent(format!("REQ{i:02}"))
}

fn slot_label(j: usize) -> Label {
    Label::slot(format!("ARG{j:02}"))
}

fn carrier_word(i: usize, w: usize) -> String {
    format!("c{i}w{w}")
}

fn slot_word(j: usize, w: usize) -> String {
    format!("s{j}w{w}")
}

fn filler_word(w: usize) -> String {
    format!("f{w}")
}

/// The template pool: shapes enumerated per intent, shuffled once with
/// `pool_seed`, truncated to `pool_size`. Index order is the Zipf rank.
pub fn template_pool(cfg: &ToyConfig) -> Vec<Template> {
    let mut nodes: Vec<Node> = Vec::new();
    let slot_with_mask =
        |j: usize| Node::NonTerminal { label: slot_label(j), children: vec![Node::Mask] };
    for i in 0..cfg.intents {
        let in_label = intent_label(i);
        // Each intent draws on a window of four slots.
        let window: Vec<usize> = (0..4.min(cfg.slots)).map(|m| (i + m) % cfg.slots).collect();
        let mut push = |children: Vec<Node>| {
            nodes.push(Node::NonTerminal { label: in_label.clone(), children });
        };
        push(vec![Node::Mask]);
        for &a in &window {
            push(vec![Node::Mask, slot_with_mask(a)]);
            push(vec![slot_with_mask(a), Node::Mask]);
            push(vec![Node::Mask, slot_with_mask(a), Node::Mask]);
        }
        for &a in &window {
            for &b in &window {
                if a != b {
                    push(vec![
                        Node::Mask,
                        slot_with_mask(a),
                        Node::Mask,
                        slot_with_mask(b),
                        Node::Mask,
                    ]);
                    push(vec![Node::Mask, slot_with_mask(a), slot_with_mask(b)]);
                }
            }
        }
        // One nested shape per window slot: the slot holds a sub-request.
        let inner = intent_label((i + 1) % cfg.intents);
        for &a in &window {
            let nested = Node::NonTerminal {
                label: slot_label(a),
                children: vec![Node::NonTerminal {
                    label: inner.clone(),
                    children: vec![Node::Mask, slot_with_mask((a + 1) % cfg.slots)],
                }],
            };
            push(vec![Node::Mask, nested]);
        }
    }
    let mut templates: Vec<Template> = nodes
        .into_iter()
        .map(|n| Template::from_node(n).expect("enumerated toy shapes are valid"))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.pool_seed);
    // Fisher-Yates; the pool must be identical across all corpus draws.
    for i in (1..templates.len()).rev() {
        let j = rng.gen_range(0..=i);
        templates.swap(i, j);
    }
    templates.truncate(cfg.pool_size);
    templates
}

fn zipf_cumulative(len: usize, exponent: f64) -> Vec<f64> {
    let mut cum = Vec::with_capacity(len);
    let mut total = 0.0;
    for rank in 0..len {
        total += 1.0 / ((rank + 1) as f64).powf(exponent);
        cum.push(total);
    }
    for c in cum.iter_mut() {
        *c /= total;
    }
    cum
}

fn draw_index(cum: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    match cum.binary_search_by(|c| c.partial_cmp(&u).expect("finite")) {
        Ok(i) => i + 1,
        Err(i) => i,
    }
    .min(cum.len() - 1)
}

fn fill_mask_span(cfg: &ToyConfig, parent: &Label, rng: &mut impl Rng) -> Vec<String> {
    match parent.kind {
        LabelKind::Intent => {
            let i: usize = parent.name[3..].parse().expect("toy intent names end in digits");
            let len = match rng.gen::<f64>() {
                u if u < 0.50 => 1,
                u if u < 0.85 => 2,
                _ => 3,
            };
            (0..len)
                .map(|_| {
                    if rng.gen::<f64>() < 0.25 && cfg.shared_fillers > 0 {
                        filler_word(rng.gen_range(0..cfg.shared_fillers))
                    } else {
                        carrier_word(i, rng.gen_range(0..cfg.carrier_words))
                    }
                })
                .collect()
        }
        LabelKind::Slot => {
            let j: usize = parent.name[3..].parse().expect("toy slot names end in digits");
            let len = if rng.gen::<f64>() < 0.7 { 1 } else { 2 };
            (0..len)
                .map(|_| {
                    let source = if rng.gen::<f64>() < cfg.slot_borrow_prob {
                        (j + 1) % cfg.slots
                    } else {
                        j
                    };
                    slot_word(source, rng.gen_range(0..cfg.slot_words))
                })
                .collect()
        }
    }
}

fn realize(cfg: &ToyConfig, template: &Template, rng: &mut impl Rng) -> ParseTree {
    let contexts = crate::infill::mask_contexts(template);
    let spans: Vec<Vec<String>> =
        contexts.iter().map(|ctx| fill_mask_span(cfg, ctx.parent(), rng)).collect();
    template.fill(&spans).expect("toy spans are non-empty tokens")
}

/// Draws `n` annotated utterances: template by Zipf rank, spans from the
/// ground-truth filler model. Fully determined by (cfg, seed, n).
pub fn sample_corpus(cfg: &ToyConfig, seed: u64, n: usize, split: Split) -> Corpus {
    let pool = template_pool(cfg);
    let cum = zipf_cumulative(pool.len(), cfg.zipf_exponent);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items = (0..n)
        .map(|_| {
            let template = &pool[draw_index(&cum, &mut rng)];
            let tree = realize(cfg, template, &mut rng);
            let raw = tree.utterance().join(" ");
            AnnotatedUtterance::from_tree(raw, tree)
        })
        .collect();
    Corpus::new(split, items)
}

/// Standard three-column TSV: raw, tokens, tree.
pub fn write_corpus_tsv(corpus: &Corpus, mut w: impl Write) -> std::io::Result<()> {
    for item in &corpus.items {
        writeln!(w, "{}\t{}\t{}", item.raw, item.tokens.join(" "), item.tree.canonical())?;
    }
    Ok(())
}

/// Knobs for the structural fuzzer.
#[derive(Debug, Clone)]
pub struct FuzzParams {
    pub max_depth: usize,
    pub max_children: usize,
}

impl Default for FuzzParams {
    fn default() -> Self {
        FuzzParams { max_depth: 4, max_children: 4 }
    }
}

const FUZZ_INTENTS: [&str; 6] = ["GET_THING", "SET_ALARM", "Q", "A1_B", "UNSUPPORTED_X", "LOOP"];
const FUZZ_SLOTS: [&str; 6] = ["PLACE", "TIME_OF_DAY", "Z9", "NAME", "X_1", "R"];
const FUZZ_TOKENS: [&str; 14] = [
    "how", "far", "boston", "5:00", ",", "don't", "a.b", "x-y_z", "?", "caf\u{e9}", "w", "''",
    "100%", "at&t",
];

fn random_node(rng: &mut impl Rng, kind: LabelKind, depth: usize, params: &FuzzParams) -> Node {
    let label = match kind {
        LabelKind::Intent => Label::intent(FUZZ_INTENTS[rng.gen_range(0..FUZZ_INTENTS.len())]),
        LabelKind::Slot => Label::slot(FUZZ_SLOTS[rng.gen_range(0..FUZZ_SLOTS.len())]),
    };
    let n_children = rng.gen_range(1..=params.max_children);
    let children = (0..n_children)
        .map(|_| {
            if depth > 0 && rng.gen::<f64>() < 0.4 {
                let child_kind = match kind {
                    LabelKind::Intent => LabelKind::Slot,
                    LabelKind::Slot => LabelKind::Intent,
                };
                random_node(rng, child_kind, depth - 1, params)
            } else {
                Node::Token(FUZZ_TOKENS[rng.gen_range(0..FUZZ_TOKENS.len())].to_string())
            }
        })
        .collect();
    Node::NonTerminal { label, children }
}

/// A structurally valid random annotation tree, for round-trip fuzzing.
pub fn random_tree(rng: &mut impl Rng, params: &FuzzParams) -> ParseTree {
    ParseTree::from_node(random_node(rng, LabelKind::Intent, params.max_depth, params))
        .expect("fuzzer builds only valid trees")
}
