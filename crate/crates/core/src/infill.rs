//! Span-infill generator over template masks.
//!
//! Each mask in a template gets a context (the label path from root to its
//! parent plus its ordinal among that parent's masks). Span distributions
//! are tallied per context from training data, with backoff to coarser
//! tables, truncated by nucleus sampling, and sampled with a per-template
//! ChaCha8 stream so generation is reproducible and order-independent.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adapter::{AdapterClient, AdapterErrorKind, GenRequest, GenResponse};
use crate::corpus::Corpus;
use crate::tree::{from_generator_output, Label, Node, ParseTree, RejectReason, Template};

/// Where a mask sits: the non-terminal label path from the root to the
/// mask's parent (inclusive) and the mask's ordinal among that parent's
/// mask children.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MaskContext {
    pub path: Vec<Label>,
    pub slot_index: usize,
}

impl MaskContext {
    pub fn parent(&self) -> &Label {
        self.path.last().expect("mask context path is never empty")
    }
}

/// Mask contexts of a template in document order.
pub fn mask_contexts(template: &Template) -> Vec<MaskContext> {
    fn walk(node: &Node, path: &mut Vec<Label>, out: &mut Vec<MaskContext>) {
        if let Node::NonTerminal { label, children } = node {
            path.push(label.clone());
            let mut mask_ord = 0;
            for child in children {
                match child {
                    Node::Mask => {
                        out.push(MaskContext { path: path.clone(), slot_index: mask_ord });
                        mask_ord += 1;
                    }
                    _ => walk(child, path, out),
                }
            }
            path.pop();
        }
    }
    let mut out = Vec::new();
    let mut path = Vec::new();
    walk(template.root(), &mut path, &mut out);
    out
}

/// Mask contexts of a tree paired with the token spans that fill them:
/// each maximal run of token siblings is one mask occurrence.
pub fn mask_spans(tree: &ParseTree) -> Vec<(MaskContext, Vec<String>)> {
    fn walk(node: &Node, path: &mut Vec<Label>, out: &mut Vec<(MaskContext, Vec<String>)>) {
        if let Node::NonTerminal { label, children } = node {
            path.push(label.clone());
            let mut mask_ord = 0;
            let mut run: Vec<String> = Vec::new();
            for child in children {
                match child {
                    Node::Token(t) => run.push(t.clone()),
                    _ => {
                        if !run.is_empty() {
                            out.push((
                                MaskContext { path: path.clone(), slot_index: mask_ord },
                                std::mem::take(&mut run),
                            ));
                            mask_ord += 1;
                        }
                        walk(child, path, out);
                    }
                }
            }
            if !run.is_empty() {
                out.push((MaskContext { path: path.clone(), slot_index: mask_ord }, run));
            }
            path.pop();
        }
    }
    let mut out = Vec::new();
    let mut path = Vec::new();
    walk(tree.root(), &mut path, &mut out);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum InfillError {
    #[error("cannot fit an infiller on an empty corpus")]
    EmptyCorpus,
    #[error("span distribution has empty support")]
    DegenerateDistribution,
}

/// A normalized distribution over token spans, kept sorted by probability
/// descending with lexicographic span order breaking ties.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanDist {
    entries: Vec<(Vec<String>, f64)>,
}

impl SpanDist {
    pub fn from_counts(counts: &BTreeMap<Vec<String>, u64>) -> SpanDist {
        SpanDist::from_weights(counts.iter().map(|(s, c)| (s.clone(), *c as f64)))
            .unwrap_or(SpanDist { entries: Vec::new() })
    }

    /// Normalizes arbitrary non-negative weights. Returns `None` when the
    /// weight sum is zero.
    pub fn from_weights(weights: impl IntoIterator<Item = (Vec<String>, f64)>) -> Option<SpanDist> {
        let mut entries: Vec<(Vec<String>, f64)> = weights.into_iter().collect();
        let sum: f64 = entries.iter().map(|(_, w)| w).sum();
        if sum <= 0.0 {
            return None;
        }
        for (_, w) in entries.iter_mut() {
            *w /= sum;
        }
        entries.sort_by(|a, b| {
            b.1.partial_cmp(&a.1).expect("probabilities are comparable").then_with(|| a.0.cmp(&b.0))
        });
        Some(SpanDist { entries })
    }

    pub fn entries(&self) -> &[(Vec<String>, f64)] {
        &self.entries
    }

    pub fn support_size(&self) -> usize {
        self.entries.len()
    }

    /// Nucleus truncation: keeps the smallest probability-sorted prefix
    /// whose cumulative mass reaches `p`, then renormalizes. If rounding
    /// keeps the cumulative mass below `p`, the whole support is kept.
    pub fn top_p_truncate(&self, p: f64) -> Result<SpanDist, InfillError> {
        debug_assert!(p > 0.0 && p <= 1.0, "nucleus mass must be in (0, 1]");
        if self.entries.is_empty() {
            return Err(InfillError::DegenerateDistribution);
        }
        let mut cut = self.entries.len();
        let mut cum = 0.0;
        for (i, (_, prob)) in self.entries.iter().enumerate() {
            cum += prob;
            if cum >= p - 1e-12 {
                cut = i + 1;
                break;
            }
        }
        let kept = &self.entries[..cut];
        let mass: f64 = kept.iter().map(|(_, pr)| pr).sum();
        Ok(SpanDist {
            entries: kept.iter().map(|(s, pr)| (s.clone(), pr / mass)).collect(),
        })
    }

    pub fn sample<'a>(&'a self, rng: &mut impl Rng) -> &'a [String] {
        let u: f64 = rng.gen();
        let mut cum = 0.0;
        for (span, prob) in &self.entries {
            cum += prob;
            if u < cum {
                return span;
            }
        }
        // Rounding shortfall; the last entry absorbs it.
        &self.entries.last().expect("non-empty distribution").0
    }
}

/// Coarse-to-fine table used for a mask, most specific first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackoffLevel {
    FullContext = 0,
    ParentSlot = 1,
    Parent = 2,
    Global = 3,
}

/// Span tables at four backoff levels plus the seen vocabulary.
#[derive(Debug, Clone)]
pub struct InfillerModel {
    by_context: BTreeMap<MaskContext, SpanDist>,
    by_parent_slot: BTreeMap<(Label, usize), SpanDist>,
    by_parent: BTreeMap<Label, SpanDist>,
    global: SpanDist,
    labels: BTreeSet<Label>,
    vocab: BTreeSet<String>,
}

impl InfillerModel {
    /// Most specific table available for a context; the global table makes
    /// this total.
    pub fn dist_for(&self, ctx: &MaskContext) -> (&SpanDist, BackoffLevel) {
        if let Some(d) = self.by_context.get(ctx) {
            return (d, BackoffLevel::FullContext);
        }
        let key = (ctx.parent().clone(), ctx.slot_index);
        if let Some(d) = self.by_parent_slot.get(&key) {
            return (d, BackoffLevel::ParentSlot);
        }
        if let Some(d) = self.by_parent.get(ctx.parent()) {
            return (d, BackoffLevel::Parent);
        }
        (&self.global, BackoffLevel::Global)
    }

    pub fn labels(&self) -> &BTreeSet<Label> {
        &self.labels
    }

    pub fn vocab(&self) -> &BTreeSet<String> {
        &self.vocab
    }

    pub fn context_count(&self) -> usize {
        self.by_context.len()
    }
}

pub fn fit_infiller(corpus: &Corpus) -> Result<InfillerModel, InfillError> {
    if corpus.is_empty() {
        return Err(InfillError::EmptyCorpus);
    }
    type Counts = BTreeMap<Vec<String>, u64>;
    let mut by_context: BTreeMap<MaskContext, Counts> = BTreeMap::new();
    let mut by_parent_slot: BTreeMap<(Label, usize), Counts> = BTreeMap::new();
    let mut by_parent: BTreeMap<Label, Counts> = BTreeMap::new();
    let mut global: Counts = BTreeMap::new();
    let mut labels = BTreeSet::new();
    let mut vocab = BTreeSet::new();

    for item in &corpus.items {
        labels.extend(item.tree.labels());
        vocab.extend(item.tokens.iter().cloned());
        for (ctx, span) in mask_spans(&item.tree) {
            *by_parent_slot
                .entry((ctx.parent().clone(), ctx.slot_index))
                .or_default()
                .entry(span.clone())
                .or_insert(0) += 1;
            *by_parent.entry(ctx.parent().clone()).or_default().entry(span.clone()).or_insert(0) +=
                1;
            *global.entry(span.clone()).or_insert(0) += 1;
            *by_context.entry(ctx).or_default().entry(span).or_insert(0) += 1;
        }
    }

    Ok(InfillerModel {
        by_context: by_context.iter().map(|(k, v)| (k.clone(), SpanDist::from_counts(v))).collect(),
        by_parent_slot: by_parent_slot
            .iter()
            .map(|(k, v)| (k.clone(), SpanDist::from_counts(v)))
            .collect(),
        by_parent: by_parent.iter().map(|(k, v)| (k.clone(), SpanDist::from_counts(v))).collect(),
        global: SpanDist::from_counts(&global),
        labels,
        vocab,
    })
}

/// Seed for one template's sample stream: SHA-256 over the run seed's
/// little-endian bytes followed by the template key's UTF-8 bytes. The full
/// digest seeds the stream; the first eight bytes, little-endian, are the
/// reportable form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamSeed {
    pub bytes: [u8; 32],
    pub as_u64: u64,
}

pub fn stream_seed(run_seed: u64, template_key: &str) -> StreamSeed {
    let mut hasher = Sha256::new();
    hasher.update(run_seed.to_le_bytes());
    hasher.update(template_key.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&digest);
    let as_u64 = u64::from_le_bytes(bytes[..8].try_into().expect("digest has 32 bytes"));
    StreamSeed { bytes, as_u64 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterVerdict {
    Pending,
    Kept,
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Validity {
    Valid,
    Rejected { reason: RejectReason, detail: String },
}

/// One generated candidate, before or after filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub template_key: String,
    pub source: String,
    /// `None` exactly when `validity` is `Rejected`.
    pub tree: Option<ParseTree>,
    pub generator_id: String,
    /// The per-template stream seed (reportable u64 form).
    pub seed: u64,
    /// Deepest backoff level used across this sample's masks; `None` for
    /// external generators.
    pub backoff_level: Option<BackoffLevel>,
    pub validity: Validity,
    pub verdict: FilterVerdict,
}

impl SyntheticSample {
    pub fn is_valid(&self) -> bool {
        matches!(self.validity, Validity::Valid)
    }

    pub fn utterance(&self) -> Option<Vec<String>> {
        self.tree.as_ref().map(|t| t.utterance())
    }
}

/// JSONL row for a [`SyntheticSample`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleRecord {
    pub template_key: String,
    pub source: String,
    pub tree: Option<String>,
    pub validity: Validity,
    pub verdict: FilterVerdict,
    pub seed: u64,
    pub generator_id: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub backoff_level: Option<BackoffLevel>,
}

impl From<&SyntheticSample> for SampleRecord {
    fn from(s: &SyntheticSample) -> Self {
        SampleRecord {
            template_key: s.template_key.clone(),
            source: s.source.clone(),
            tree: s.tree.as_ref().map(|t| t.canonical()),
            validity: s.validity.clone(),
            verdict: s.verdict,
            seed: s.seed,
            generator_id: s.generator_id.clone(),
            backoff_level: s.backoff_level,
        }
    }
}

impl TryFrom<SampleRecord> for SyntheticSample {
    type Error = crate::tree::TreeParseError;

    fn try_from(r: SampleRecord) -> Result<Self, Self::Error> {
        let tree = match r.tree {
            Some(text) => Some(crate::tree::parse_annotation(&text)?),
            None => None,
        };
        Ok(SyntheticSample {
            template_key: r.template_key,
            source: r.source,
            tree,
            generator_id: r.generator_id,
            seed: r.seed,
            backoff_level: r.backoff_level,
            validity: r.validity,
            verdict: r.verdict,
        })
    }
}

#[derive(Debug, Clone)]
pub struct GenerateOptions {
    /// Samples attempted per template.
    pub k: usize,
    /// Nucleus mass.
    pub p: f64,
    pub seed: u64,
    /// Drop samples that repeat a (template, utterance) pair already
    /// emitted for the template or present in `exclusion`.
    pub dedup: bool,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions { k: 5, p: 0.9, seed: 0, dedup: true }
    }
}

/// `(template_key, utterance)` pairs of a real corpus, for exclusion.
pub fn exclusion_pairs(corpus: &Corpus) -> HashSet<(String, String)> {
    corpus
        .items
        .iter()
        .map(|it| (it.template_key.clone(), it.tokens.join(" ")))
        .collect()
}

fn dedup_templates(templates: &[Template]) -> Vec<&Template> {
    let mut seen = BTreeSet::new();
    templates.iter().filter(|t| seen.insert(t.key())).collect()
}

/// Samples `k` candidates for every distinct template. Each template gets
/// its own RNG stream, so output is independent of scheduling and of which
/// other templates are present.
pub fn generate(
    model: &InfillerModel,
    templates: &[Template],
    opts: &GenerateOptions,
    exclusion: &HashSet<(String, String)>,
) -> Result<Vec<SyntheticSample>, InfillError> {
    let distinct = dedup_templates(templates);
    let per_template: Result<Vec<Vec<SyntheticSample>>, InfillError> = distinct
        .par_iter()
        .map(|template| generate_for_template(model, template, opts.k, opts, exclusion))
        .collect();
    Ok(per_template?.into_iter().flatten().collect())
}

/// Draws `n` templates uniformly with replacement and fills each draw once,
/// the alternative to enumerating every template `k` times. Counts depend
/// only on the template set and seed (distinct templates are ordered by
/// key before drawing), and fillings reuse the per-template streams, so
/// output is again scheduling-independent. `opts.k` is ignored.
pub fn generate_with_replacement(
    model: &InfillerModel,
    templates: &[Template],
    n: usize,
    opts: &GenerateOptions,
    exclusion: &HashSet<(String, String)>,
) -> Result<Vec<SyntheticSample>, InfillError> {
    let mut distinct = dedup_templates(templates);
    if distinct.is_empty() {
        return Ok(Vec::new());
    }
    distinct.sort_by_key(|t| t.key());
    // Domain string cannot collide with a template key: keys start with '['.
    let stream = stream_seed(opts.seed, "uniform-template-draw");
    let mut rng = ChaCha8Rng::from_seed(stream.bytes);
    let mut counts = vec![0usize; distinct.len()];
    for _ in 0..n {
        counts[rng.gen_range(0..distinct.len())] += 1;
    }
    let per_template: Result<Vec<Vec<SyntheticSample>>, InfillError> = distinct
        .par_iter()
        .zip(&counts)
        .map(|(template, &count)| generate_for_template(model, template, count, opts, exclusion))
        .collect();
    Ok(per_template?.into_iter().flatten().collect())
}

fn generate_for_template(
    model: &InfillerModel,
    template: &Template,
    count: usize,
    opts: &GenerateOptions,
    exclusion: &HashSet<(String, String)>,
) -> Result<Vec<SyntheticSample>, InfillError> {
    let key = template.key();
    let source = template.generator_source();
    let contexts = mask_contexts(template);
    let mut tables = Vec::with_capacity(contexts.len());
    let mut deepest = BackoffLevel::FullContext;
    for ctx in &contexts {
        let (dist, level) = model.dist_for(ctx);
        deepest = deepest.max(level);
        tables.push(dist.top_p_truncate(opts.p)?);
    }
    let stream = stream_seed(opts.seed, &key);
    let mut rng = ChaCha8Rng::from_seed(stream.bytes);
    let mut seen_utterances: HashSet<String> = HashSet::new();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let spans: Vec<Vec<String>> =
            tables.iter().map(|t| t.sample(&mut rng).to_vec()).collect();
        let tree = template.fill(&spans).expect("spans from training data fill cleanly");
        let utterance = tree.utterance().join(" ");
        if opts.dedup {
            if seen_utterances.contains(&utterance)
                || exclusion.contains(&(key.clone(), utterance.clone()))
            {
                continue;
            }
            seen_utterances.insert(utterance);
        }
        out.push(SyntheticSample {
            template_key: key.clone(),
            source: source.clone(),
            tree: Some(tree),
            generator_id: "builtin".to_string(),
            seed: stream.as_u64,
            backoff_level: Some(deepest),
            validity: Validity::Valid,
            verdict: FilterVerdict::Pending,
        });
    }
    Ok(out)
}

/// Result of a generation run that may have been cut short by an adapter
/// failure; `samples` holds everything produced before the failure.
#[derive(Debug)]
pub struct GenerateOutcome {
    pub samples: Vec<SyntheticSample>,
    pub failure: Option<AdapterErrorKind>,
}

/// Drives an external generator over the line-delimited JSON protocol:
/// one request per template, `k` response lines each. Candidates pass
/// through [`from_generator_output`]; failures abort with partial results.
pub fn external_generate(
    cmd: &[String],
    templates: &[Template],
    known_labels: &BTreeSet<Label>,
    opts: &GenerateOptions,
    timeout: Duration,
) -> GenerateOutcome {
    let generator_id = format!("external:{}", cmd.join(" "));
    let mut client = match AdapterClient::spawn(cmd, timeout) {
        Ok(c) => c,
        Err(kind) => return GenerateOutcome { samples: Vec::new(), failure: Some(kind) },
    };
    let mut samples = Vec::new();
    for (id, template) in dedup_templates(templates).into_iter().enumerate() {
        let id = id as u64;
        let key = template.key();
        let source = template.generator_source();
        let stream = stream_seed(opts.seed, &key);
        let request = GenRequest {
            id,
            source: &source,
            k: opts.k as u64,
            p: opts.p,
            seed: stream.as_u64,
        };
        let line = serde_json::to_string(&request).expect("request serializes");
        if let Err(kind) = client.send_line(&line) {
            return GenerateOutcome { samples, failure: Some(kind) };
        }
        let mut seen_utterances: HashSet<String> = HashSet::new();
        for got in 0..opts.k {
            let line = match client.recv_line(&format!(
                "request {id}: expected {} candidates, got {got}",
                opts.k
            )) {
                Ok(line) => line,
                Err(kind) => return GenerateOutcome { samples, failure: Some(kind) },
            };
            let response: GenResponse = match serde_json::from_str(&line) {
                Ok(r) => r,
                Err(e) => {
                    return GenerateOutcome {
                        samples,
                        failure: Some(AdapterErrorKind::ProtocolViolation(format!(
                            "request {id}: malformed response line: {e}"
                        ))),
                    }
                }
            };
            if response.id != id {
                return GenerateOutcome {
                    samples,
                    failure: Some(AdapterErrorKind::ProtocolViolation(format!(
                        "request {id}: response carries id {}",
                        response.id
                    ))),
                };
            }
            let (tree, validity) = match from_generator_output(&response.candidate, known_labels) {
                Ok(tree) => (Some(tree), Validity::Valid),
                Err(rej) => {
                    (None, Validity::Rejected { reason: rej.reason, detail: rej.detail })
                }
            };
            if opts.dedup {
                if let Some(t) = &tree {
                    let utterance = t.utterance().join(" ");
                    if seen_utterances.contains(&utterance) {
                        continue;
                    }
                    seen_utterances.insert(utterance);
                }
            }
            samples.push(SyntheticSample {
                template_key: key.clone(),
                source: source.clone(),
                tree,
                generator_id: generator_id.clone(),
                seed: stream.as_u64,
                backoff_level: None,
                validity,
                verdict: FilterVerdict::Pending,
            });
        }
    }
    client.finish();
    GenerateOutcome { samples, failure: None }
}

/// Drops samples whose (template, utterance) pair repeats an earlier
/// sample or an exclusion pair; rejected samples pass through.
pub fn dedup_samples(
    samples: Vec<SyntheticSample>,
    exclusion: &HashSet<(String, String)>,
) -> Vec<SyntheticSample> {
    let mut seen: HashSet<(String, String)> = HashSet::new();
    samples
        .into_iter()
        .filter(|s| match s.utterance() {
            Some(tokens) => {
                let pair = (s.template_key.clone(), tokens.join(" "));
                !exclusion.contains(&pair) && seen.insert(pair)
            }
            None => true,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AnnotatedUtterance, Split};
    use crate::tree::{parse_annotation, parse_template};

    fn span(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    fn dist(pairs: &[(&[&str], f64)]) -> SpanDist {
        SpanDist::from_weights(pairs.iter().map(|(s, w)| (span(s), *w))).unwrap()
    }

    #[test]
    fn contexts_of_nested_template() {
        let t = parse_template(
            "[IN:GET_DIRECTIONS [mask] [SL:DESTINATION [IN:GET_EVENT [mask] [SL:NAME [mask] ] ] ] [mask] ]",
        )
        .unwrap();
        let ctxs = mask_contexts(&t);
        let in_dir = Label::intent("GET_DIRECTIONS");
        let sl_dest = Label::slot("DESTINATION");
        let in_ev = Label::intent("GET_EVENT");
        let sl_name = Label::slot("NAME");
        assert_eq!(
            ctxs,
            vec![
                MaskContext { path: vec![in_dir.clone()], slot_index: 0 },
                MaskContext {
                    path: vec![in_dir.clone(), sl_dest.clone(), in_ev.clone()],
                    slot_index: 0
                },
                MaskContext {
                    path: vec![in_dir.clone(), sl_dest, in_ev, sl_name],
                    slot_index: 0
                },
                MaskContext { path: vec![in_dir], slot_index: 1 },
            ]
        );
    }

    #[test]
    fn tree_spans_align_with_template_contexts() {
        let tree = parse_annotation(
            "[IN:GET_DISTANCE how far is [SL:DESTINATION boston ] from here ]",
        )
        .unwrap();
        let spans = mask_spans(&tree);
        let ctxs = mask_contexts(&tree.extract_template());
        assert_eq!(spans.len(), ctxs.len());
        for ((got_ctx, _), want_ctx) in spans.iter().zip(&ctxs) {
            assert_eq!(got_ctx, want_ctx);
        }
        assert_eq!(spans[0].1, span(&["how", "far", "is"]));
        assert_eq!(spans[1].1, span(&["boston"]));
        assert_eq!(spans[2].1, span(&["from", "here"]));
    }

    #[test]
    fn top_p_worked_example() {
        let d = dist(&[(&["a"], 0.5), (&["b"], 0.3), (&["c"], 0.15), (&["d"], 0.05)]);
        let t = d.top_p_truncate(0.9).unwrap();
        assert_eq!(t.support_size(), 3);
        let expect = [10.0 / 19.0, 6.0 / 19.0, 3.0 / 19.0];
        for ((span_words, prob), want) in t.entries().iter().zip(expect) {
            assert!((prob - want).abs() < 1e-12, "span {span_words:?}");
        }
    }

    #[test]
    fn top_p_one_keeps_everything() {
        let d = dist(&[(&["a"], 0.5), (&["b"], 0.3), (&["c"], 0.2)]);
        let t = d.top_p_truncate(1.0).unwrap();
        assert_eq!(t.support_size(), 3);
        let sum: f64 = t.entries().iter().map(|(_, p)| p).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn top_p_ties_break_lexicographically() {
        let d = dist(&[(&["d"], 1.0), (&["b"], 1.0), (&["c"], 1.0), (&["a"], 1.0)]);
        let t = d.top_p_truncate(0.5).unwrap();
        let kept: Vec<&str> =
            t.entries().iter().map(|(s, _)| s[0].as_str()).collect();
        assert_eq!(kept, vec!["a", "b"]);
        assert!(t.entries().iter().all(|(_, p)| (p - 0.5).abs() < 1e-12));
    }

    #[test]
    fn top_p_tiny_p_keeps_argmax() {
        let d = dist(&[(&["a"], 0.6), (&["b"], 0.4)]);
        let t = d.top_p_truncate(0.05).unwrap();
        assert_eq!(t.support_size(), 1);
        assert_eq!(t.entries()[0].0, span(&["a"]));
        assert!((t.entries()[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_support_is_degenerate() {
        let d = SpanDist { entries: Vec::new() };
        assert_eq!(d.top_p_truncate(0.9).unwrap_err(), InfillError::DegenerateDistribution);
    }

    fn tiny_corpus() -> Corpus {
        let lines = [
            "[IN:GET_DISTANCE how far is [SL:DESTINATION boston ] ]",
            "[IN:GET_DISTANCE how far is [SL:DESTINATION new york ] ]",
            "[IN:GET_DISTANCE distance to [SL:DESTINATION boston ] ]",
            "[IN:GET_DIRECTIONS directions to [SL:DESTINATION the office ] ]",
        ];
        let items = lines
            .iter()
            .map(|l| AnnotatedUtterance::from_tree(*l, parse_annotation(l).unwrap()))
            .collect();
        Corpus::new(Split::Train, items)
    }

    #[test]
    fn fit_tallies_all_levels() {
        let model = fit_infiller(&tiny_corpus()).unwrap();
        let ctx = MaskContext {
            path: vec![Label::intent("GET_DISTANCE"), Label::slot("DESTINATION")],
            slot_index: 0,
        };
        let (d, level) = model.dist_for(&ctx);
        assert_eq!(level, BackoffLevel::FullContext);
        // boston twice, new york once.
        assert_eq!(d.entries()[0].0, span(&["boston"]));
        assert!((d.entries()[0].1 - 2.0 / 3.0).abs() < 1e-12);

        let unseen_parent = MaskContext {
            path: vec![Label::intent("GET_DIRECTIONS"), Label::slot("NOWHERE")],
            slot_index: 0,
        };
        let (_, level) = model.dist_for(&unseen_parent);
        assert_eq!(level, BackoffLevel::Global);

        let unseen_path = MaskContext {
            path: vec![
                Label::intent("GET_DIRECTIONS"),
                Label::slot("DESTINATION"),
            ],
            slot_index: 0,
        };
        // Seen under a different path at the same (parent, slot) pair.
        let (_, level) = model.dist_for(&unseen_path);
        assert_eq!(level, BackoffLevel::FullContext);
    }

    #[test]
    fn fit_rejects_empty_corpus() {
        let empty = Corpus::new(Split::Train, Vec::new());
        assert_eq!(fit_infiller(&empty).unwrap_err(), InfillError::EmptyCorpus);
    }

    #[test]
    fn stream_seed_is_stable_and_distinct() {
        let a = stream_seed(7, "[IN:A [mask] ]");
        let b = stream_seed(7, "[IN:B [mask] ]");
        let a2 = stream_seed(7, "[IN:A [mask] ]");
        assert_eq!(a, a2);
        assert_ne!(a.bytes, b.bytes);
        assert_ne!(stream_seed(8, "[IN:A [mask] ]").bytes, a.bytes);
        assert_eq!(a.as_u64, u64::from_le_bytes(a.bytes[..8].try_into().unwrap()));
    }

    #[test]
    fn generate_is_deterministic_and_order_independent() {
        let corpus = tiny_corpus();
        let model = fit_infiller(&corpus).unwrap();
        let mut templates = corpus.distinct_templates();
        let opts = GenerateOptions { k: 5, p: 1.0, seed: 42, dedup: false };
        let none = HashSet::new();
        let first = generate(&model, &templates, &opts, &none).unwrap();
        templates.reverse();
        let second = generate(&model, &templates, &opts, &none).unwrap();
        let key = |s: &SyntheticSample| {
            (s.template_key.clone(), s.tree.as_ref().unwrap().canonical())
        };
        let mut a: Vec<_> = first.iter().map(key).collect();
        let mut b: Vec<_> = second.iter().map(key).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        assert_eq!(first.len(), 10);
    }

    #[test]
    fn generate_emits_valid_samples_of_the_right_template() {
        let corpus = tiny_corpus();
        let model = fit_infiller(&corpus).unwrap();
        let templates = corpus.distinct_templates();
        let opts = GenerateOptions { k: 5, p: 0.9, seed: 1, dedup: true };
        let none = HashSet::new();
        let samples = generate(&model, &templates, &opts, &none).unwrap();
        assert!(!samples.is_empty());
        for s in &samples {
            assert!(s.is_valid());
            let tree = s.tree.as_ref().unwrap();
            assert_eq!(tree.extract_template().key(), s.template_key);
            assert_eq!(s.verdict, FilterVerdict::Pending);
            assert_eq!(s.seed, stream_seed(1, &s.template_key).as_u64);
        }
    }

    #[test]
    fn dedup_drops_repeats_and_exclusions() {
        let corpus = tiny_corpus();
        let model = fit_infiller(&corpus).unwrap();
        let templates = corpus.distinct_templates();
        let opts = GenerateOptions { k: 50, p: 1.0, seed: 3, dedup: true };
        let exclusion = exclusion_pairs(&corpus);
        let samples = generate(&model, &templates, &opts, &exclusion).unwrap();
        let mut seen = HashSet::new();
        for s in &samples {
            let pair = (s.template_key.clone(), s.utterance().unwrap().join(" "));
            assert!(!exclusion.contains(&pair), "sample repeats a training pair");
            assert!(seen.insert(pair), "duplicate sample emitted");
        }
    }

    #[test]
    fn without_dedup_k_samples_per_template() {
        let corpus = tiny_corpus();
        let model = fit_infiller(&corpus).unwrap();
        let templates = corpus.distinct_templates();
        let opts = GenerateOptions { k: 7, p: 1.0, seed: 3, dedup: false };
        let samples = generate(&model, &templates, &opts, &HashSet::new()).unwrap();
        assert_eq!(samples.len(), 7 * templates.len());
    }

    #[test]
    fn replacement_draws_n_total_and_ignores_input_order() {
        let corpus = tiny_corpus();
        let model = fit_infiller(&corpus).unwrap();
        let mut templates = corpus.distinct_templates();
        let opts = GenerateOptions { k: 999, p: 1.0, seed: 4, dedup: false };
        let none = HashSet::new();
        let n = 40;
        let first = generate_with_replacement(&model, &templates, n, &opts, &none).unwrap();
        assert_eq!(first.len(), n, "k must not shape the replacement regime");
        templates.reverse();
        let second = generate_with_replacement(&model, &templates, n, &opts, &none).unwrap();
        let render = |samples: &[SyntheticSample]| -> Vec<(String, String)> {
            samples
                .iter()
                .map(|s| (s.template_key.clone(), s.tree.as_ref().unwrap().canonical()))
                .collect()
        };
        assert_eq!(render(&first), render(&second));
        // Both templates get drawn at n >> |templates|, and each drawn
        // template replays the same stream the enumeration regime uses.
        let keys: HashSet<&str> = first.iter().map(|s| s.template_key.as_str()).collect();
        assert_eq!(keys.len(), templates.len());
        let enumerated = generate(
            &model,
            &templates,
            &GenerateOptions { k: n, ..opts },
            &none,
        )
        .unwrap();
        for key in &keys {
            let drawn: Vec<_> = render(&first).into_iter().filter(|(k, _)| k == key).collect();
            let replay: Vec<_> =
                render(&enumerated).into_iter().filter(|(k, _)| k == key).collect();
            assert_eq!(drawn[..], replay[..drawn.len()], "stream prefix mismatch for {key}");
        }
    }

    #[test]
    fn replacement_of_empty_template_set_is_empty() {
        let model = fit_infiller(&tiny_corpus()).unwrap();
        let opts = GenerateOptions::default();
        let out = generate_with_replacement(&model, &[], 10, &opts, &HashSet::new()).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn sample_record_round_trips() {
        let corpus = tiny_corpus();
        let model = fit_infiller(&corpus).unwrap();
        let templates = corpus.distinct_templates();
        let opts = GenerateOptions::default();
        let samples = generate(&model, &templates, &opts, &HashSet::new()).unwrap();
        for s in &samples {
            let record = SampleRecord::from(s);
            let line = serde_json::to_string(&record).unwrap();
            let back: SampleRecord = serde_json::from_str(&line).unwrap();
            let restored = SyntheticSample::try_from(back).unwrap();
            assert_eq!(&restored, s);
        }
    }
}
