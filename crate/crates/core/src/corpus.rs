//! Corpora of annotated utterances: TSV loading, template frequency
//! statistics, and the subsampling used for low-resource experiments.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::tree::{normalize_whitespace, parse_annotation, ParseTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        };
        f.write_str(text)
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "valid" | "eval" | "dev" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?} (expected train|valid|test)")),
        }
    }
}

/// One annotated utterance. `tokens` always equals the tree's in-order
/// terminals, and `template_key` its template's canonical serialization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedUtterance {
    pub raw: String,
    pub tokens: Vec<String>,
    pub tree: ParseTree,
    pub template_key: String,
}

impl AnnotatedUtterance {
    pub fn from_tree(raw: impl Into<String>, tree: ParseTree) -> Self {
        let tokens = tree.utterance();
        let template_key = tree.extract_template().key();
        AnnotatedUtterance { raw: raw.into(), tokens, tree, template_key }
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub split: Split,
    pub items: Vec<AnnotatedUtterance>,
}

impl Corpus {
    pub fn new(split: Split, items: Vec<AnnotatedUtterance>) -> Self {
        Corpus { split, items }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Drops utterances whose root intent name starts with `UNSUPPORTED`.
    pub fn without_unsupported(&self) -> Corpus {
        let items = self
            .items
            .iter()
            .filter(|it| !it.tree.root_label().name.starts_with("UNSUPPORTED"))
            .cloned()
            .collect();
        Corpus { split: self.split, items }
    }

    /// Distinct templates in first-occurrence order.
    pub fn distinct_templates(&self) -> Vec<crate::tree::Template> {
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::new();
        for item in &self.items {
            if seen.insert(item.template_key.clone()) {
                out.push(item.tree.extract_template());
            }
        }
        out
    }

    /// Keeps one uniformly chosen utterance per distinct template.
    ///
    /// Templates are visited in lexicographic key order with a single
    /// ChaCha8 stream seeded by `seed`, so the result depends only on
    /// (corpus, seed). With `cap`, a further uniform draw keeps at most
    /// `cap` of the selected utterances. Output preserves corpus order.
    pub fn subsample_one_per_template(&self, seed: u64, cap: Option<usize>) -> Corpus {
        let mut by_key: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (idx, item) in self.items.iter().enumerate() {
            by_key.entry(&item.template_key).or_default().push(idx);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut chosen: Vec<usize> = by_key
            .values()
            .map(|indices| indices[rng.gen_range(0..indices.len())])
            .collect();
        if let Some(cap) = cap {
            if chosen.len() > cap {
                // Partial Fisher-Yates: the first `cap` entries are a
                // uniform subset.
                for i in 0..cap {
                    let j = rng.gen_range(i..chosen.len());
                    chosen.swap(i, j);
                }
                chosen.truncate(cap);
            }
        }
        chosen.sort_unstable();
        let items = chosen.into_iter().map(|i| self.items[i].clone()).collect();
        Corpus { split: self.split, items }
    }
}

/// Template occurrence counts over one corpus.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    counts: BTreeMap<String, u64>,
    total: u64,
}

/// Accuracy-report bucket by training-set template frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Bucket {
    AtLeast5,
    Below5,
    Unseen,
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = match self {
            Bucket::AtLeast5 => "f>=5",
            Bucket::Below5 => "f<5",
            Bucket::Unseen => "f=0",
        };
        f.write_str(text)
    }
}

impl FrequencyTable {
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for item in &corpus.items {
            *counts.entry(item.template_key.clone()).or_insert(0) += 1;
        }
        let total = corpus.items.len() as u64;
        FrequencyTable { counts, total }
    }

    pub fn count_of(&self, key: &str) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    /// Frequency bucket of a template key: `f>=5`, `1<=f<5`, or unseen.
    pub fn bucket_of(&self, key: &str) -> Bucket {
        match self.count_of(key) {
            0 => Bucket::Unseen,
            1..=4 => Bucket::Below5,
            _ => Bucket::AtLeast5,
        }
    }

    /// Counts sorted by count descending, key ascending.
    pub fn sorted_counts(&self) -> Vec<(&str, u64)> {
        let mut out: Vec<(&str, u64)> =
            self.counts.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        out
    }

    /// Fraction of all utterances covered by the `k` most frequent
    /// templates.
    pub fn top_k_mass(&self, k: usize) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let covered: u64 = self.sorted_counts().iter().take(k).map(|(_, c)| c).sum();
        covered as f64 / self.total as f64
    }

    /// Fraction of distinct templates occurring exactly once.
    pub fn singleton_fraction(&self) -> f64 {
        if self.counts.is_empty() {
            return 0.0;
        }
        let singles = self.counts.values().filter(|&&c| c == 1).count();
        singles as f64 / self.counts.len() as f64
    }

    /// `(rank, count)` series for rank-frequency plots, rank starting at 1.
    pub fn rank_frequency(&self) -> Vec<(usize, u64)> {
        self.sorted_counts()
            .iter()
            .enumerate()
            .map(|(i, (_, c))| (i + 1, *c))
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Which tab-separated columns hold what. Column indexes are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnLayout {
    pub raw: Option<usize>,
    pub tokens: Option<usize>,
    pub tree: usize,
}

impl ColumnLayout {
    /// The released-data layout: raw utterance, tokenized utterance,
    /// linearized tree.
    pub fn standard() -> Self {
        ColumnLayout { raw: Some(0), tokens: Some(1), tree: 2 }
    }

    /// A bare file of linearized trees, one per line.
    pub fn tree_only() -> Self {
        ColumnLayout { raw: None, tokens: None, tree: 0 }
    }

    fn min_columns(&self) -> usize {
        let mut max = self.tree;
        if let Some(r) = self.raw {
            max = max.max(r);
        }
        if let Some(t) = self.tokens {
            max = max.max(t);
        }
        max + 1
    }
}

impl FromStr for ColumnLayout {
    type Err = String;

    /// `standard`, `tree-only`, or a comma list assigning roles to columns
    /// in order, e.g. `raw,tokens,tree` or `tree,raw`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => return Ok(ColumnLayout::standard()),
            "tree-only" => return Ok(ColumnLayout::tree_only()),
            _ => {}
        }
        let mut layout = ColumnLayout { raw: None, tokens: None, tree: usize::MAX };
        for (idx, role) in s.split(',').enumerate() {
            match role.trim() {
                "raw" => layout.raw = Some(idx),
                "tokens" => layout.tokens = Some(idx),
                "tree" => layout.tree = idx,
                "skip" | "" => {}
                other => return Err(format!("unknown column role {other:?}")),
            }
        }
        if layout.tree == usize::MAX {
            return Err("layout must assign a tree column".to_string());
        }
        Ok(layout)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strictness {
    /// First bad line aborts the load.
    Strict,
    /// Bad lines are skipped and reported.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct LineError {
    /// 1-based line number in the input file.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Line(LineError),
}

#[derive(Debug)]
pub struct LoadOutcome {
    pub corpus: Corpus,
    /// Skipped lines, only ever non-empty under [`Strictness::Lenient`].
    pub errors: Vec<LineError>,
}

pub fn load_tsv(
    path: impl AsRef<Path>,
    split: Split,
    layout: ColumnLayout,
    strictness: Strictness,
) -> Result<LoadOutcome, LoadError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_tsv_reader(file, split, layout, strictness)
}

pub fn load_tsv_reader(
    reader: impl Read,
    split: Split,
    layout: ColumnLayout,
    strictness: Strictness,
) -> Result<LoadOutcome, LoadError> {
    let reader = BufReader::new(reader);
    let mut items = Vec::new();
    let mut errors = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|source| LoadError::Io {
            path: format!("line {lineno}"),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(&line, layout) {
            Ok(item) => items.push(item),
            Err(message) => {
                let err = LineError { line: lineno, message };
                match strictness {
                    Strictness::Strict => return Err(LoadError::Line(err)),
                    Strictness::Lenient => errors.push(err),
                }
            }
        }
    }
    Ok(LoadOutcome { corpus: Corpus::new(split, items), errors })
}

fn parse_line(line: &str, layout: ColumnLayout) -> Result<AnnotatedUtterance, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() < layout.min_columns() {
        return Err(format!(
            "expected at least {} tab-separated columns, found {}",
            layout.min_columns(),
            cols.len()
        ));
    }
    let tree_text = cols[layout.tree];
    let tree = parse_annotation(tree_text).map_err(|e| format!("bad tree: {e}"))?;
    if tree.canonical() != normalize_whitespace(tree_text) {
        // Unreachable for well-formed input; guards the round-trip contract.
        return Err("tree does not round-trip canonically".to_string());
    }
    let tokens = tree.utterance();
    if let Some(col) = layout.tokens {
        let given: Vec<&str> = cols[col].split_whitespace().collect();
        if given != tokens.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(format!(
                "token column disagrees with tree terminals ({} vs {})",
                cols[col].trim(),
                tokens.join(" ")
            ));
        }
    }
    let raw = match layout.raw {
        Some(col) => cols[col].to_string(),
        None => tokens.join(" "),
    };
    Ok(AnnotatedUtterance::from_tree(raw, tree))
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINES: &str = "\
how far is boston\thow far is boston\t[IN:GET_DISTANCE how far is [SL:DESTINATION boston ] ]
how far is nyc\thow far is nyc\t[IN:GET_DISTANCE how far is [SL:DESTINATION nyc ] ]
call mom\tcall mom\t[IN:UNSUPPORTED_CALLING call mom ]
";

    fn load(text: &str, strictness: Strictness) -> Result<LoadOutcome, LoadError> {
        load_tsv_reader(text.as_bytes(), Split::Train, ColumnLayout::standard(), strictness)
    }

    #[test]
    fn loads_standard_layout() {
        let out = load(LINES, Strictness::Strict).unwrap();
        assert_eq!(out.corpus.len(), 3);
        assert!(out.errors.is_empty());
        let first = &out.corpus.items[0];
        assert_eq!(first.raw, "how far is boston");
        assert_eq!(first.tokens, vec!["how", "far", "is", "boston"]);
        assert_eq!(first.template_key, "[IN:GET_DISTANCE [mask] [SL:DESTINATION [mask] ] ]");
    }

    #[test]
    fn lenient_skips_and_reports_malformed_lines() {
        let text = "\
a\ta\t[IN:FOO a ]
b\tb\t[IN:FOO b
c\tc\t[IN:FOO c ]
";
        let out = load(text, Strictness::Lenient).unwrap();
        assert_eq!(out.corpus.len(), 2);
        assert_eq!(out.errors.len(), 1);
        assert_eq!(out.errors[0].line, 2);
        assert!(out.errors[0].message.contains("unbalanced brackets"));
    }

    #[test]
    fn strict_aborts_on_first_malformed_line() {
        let text = "a\ta\t[IN:FOO a\n";
        let err = load(text, Strictness::Strict).unwrap_err();
        assert!(matches!(err, LoadError::Line(LineError { line: 1, .. })));
    }

    #[test]
    fn token_column_mismatch_is_an_error() {
        let text = "a b\twrong tokens\t[IN:FOO a b ]\n";
        let out = load(text, Strictness::Lenient).unwrap();
        assert_eq!(out.corpus.len(), 0);
        assert_eq!(out.errors.len(), 1);
        assert!(out.errors[0].message.contains("disagrees"));
    }

    #[test]
    fn tree_only_layout_derives_tokens_and_raw() {
        let text = "[IN:FOO a b ]\n\n[IN:FOO c ]\n";
        let out = load_tsv_reader(
            text.as_bytes(),
            Split::Test,
            ColumnLayout::tree_only(),
            Strictness::Strict,
        )
        .unwrap();
        assert_eq!(out.corpus.len(), 2);
        assert_eq!(out.corpus.items[0].raw, "a b");
    }

    #[test]
    fn layout_parses_from_string() {
        assert_eq!("raw,tokens,tree".parse::<ColumnLayout>().unwrap(), ColumnLayout::standard());
        assert_eq!("tree".parse::<ColumnLayout>().unwrap(), ColumnLayout::tree_only());
        let custom: ColumnLayout = "tree,raw".parse().unwrap();
        assert_eq!(custom, ColumnLayout { raw: Some(1), tokens: None, tree: 0 });
        assert!("raw,tokens".parse::<ColumnLayout>().is_err());
    }

    #[test]
    fn unsupported_filter_drops_only_unsupported_roots() {
        let corpus = load(LINES, Strictness::Strict).unwrap().corpus;
        let filtered = corpus.without_unsupported();
        assert_eq!(filtered.len(), 2);
        assert_eq!(corpus.len() - filtered.len(), 1);
        assert!(filtered
            .items
            .iter()
            .all(|it| !it.tree.root_label().name.starts_with("UNSUPPORTED")));
    }

    #[test]
    fn frequency_table_counts_and_buckets() {
        let corpus = load(LINES, Strictness::Strict).unwrap().corpus;
        let table = FrequencyTable::from_corpus(&corpus);
        assert_eq!(table.total(), 3);
        assert_eq!(table.distinct(), 2);
        let key = "[IN:GET_DISTANCE [mask] [SL:DESTINATION [mask] ] ]";
        assert_eq!(table.count_of(key), 2);
        assert_eq!(table.bucket_of(key), Bucket::Below5);
        assert_eq!(table.bucket_of("[IN:NOPE [mask] ]"), Bucket::Unseen);
        assert_eq!(table.singleton_fraction(), 0.5);
        assert!((table.top_k_mass(1) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(table.top_k_mass(10), 1.0);
        assert_eq!(table.rank_frequency(), vec![(1, 2), (2, 1)]);
    }

    #[test]
    fn bucket_boundaries_sit_at_one_and_five() {
        let mut items = Vec::new();
        for (count, name) in [(5, "FIVE"), (4, "FOUR"), (1, "ONE")] {
            for i in 0..count {
                let tree = parse_annotation(&format!("[IN:{name} w{i} ]")).unwrap();
                items.push(AnnotatedUtterance::from_tree(format!("w{i}"), tree));
            }
        }
        let table = FrequencyTable::from_corpus(&Corpus::new(Split::Train, items));
        assert_eq!(table.bucket_of("[IN:FIVE [mask] ]"), Bucket::AtLeast5);
        assert_eq!(table.bucket_of("[IN:FOUR [mask] ]"), Bucket::Below5);
        assert_eq!(table.bucket_of("[IN:ONE [mask] ]"), Bucket::Below5);
        assert_eq!(table.bucket_of("[IN:ZERO [mask] ]"), Bucket::Unseen);
    }

    #[test]
    fn subsample_keeps_one_per_template() {
        let corpus = load(LINES, Strictness::Strict).unwrap().corpus;
        let sub = corpus.subsample_one_per_template(7, None);
        assert_eq!(sub.len(), 2);
        let table = FrequencyTable::from_corpus(&sub);
        assert!(table.iter().all(|(_, c)| c == 1));
        // Same seed, same pick; replay must be byte-identical.
        let again = corpus.subsample_one_per_template(7, None);
        assert_eq!(
            sub.items.iter().map(|i| i.tree.canonical()).collect::<Vec<_>>(),
            again.items.iter().map(|i| i.tree.canonical()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn subsample_cap_limits_output() {
        let corpus = load(LINES, Strictness::Strict).unwrap().corpus;
        let sub = corpus.subsample_one_per_template(7, Some(1));
        assert_eq!(sub.len(), 1);
    }

    #[test]
    fn subsample_varies_with_seed() {
        // 40 copies of one template; some pair of seeds must pick
        // different representatives.
        let mut items = Vec::new();
        for i in 0..40 {
            let tree = parse_annotation(&format!("[IN:FOO word{i} ]")).unwrap();
            items.push(AnnotatedUtterance::from_tree(format!("word{i}"), tree));
        }
        let corpus = Corpus::new(Split::Train, items);
        let picks: std::collections::BTreeSet<String> = (0..10)
            .map(|seed| corpus.subsample_one_per_template(seed, None).items[0].raw.clone())
            .collect();
        assert!(picks.len() > 1);
    }
}
