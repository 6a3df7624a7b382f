//! Auxiliary parser: a PCFG induced from annotation trees, parsed with
//! CKY, used both to filter synthetic candidates and as the target parser
//! in end-to-end runs.
//!
//! Binarization is left-factored with horizontal markovization of order 1:
//! an intermediate symbol remembers only its parent label and the most
//! recently generated child. Terminals are emitted through preterminals
//! keyed by (parent label, position class), so token distributions are
//! shared across templates with the same local shape.

pub mod cky;
pub mod filter;
mod induce;

pub use cky::{cky_parse, ChartStats, ParseResult};
pub use filter::{filter_synthetic, verify_filter_soundness, FilterReport, KeepRate};
pub use induce::induce_grammar;

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adapter::AdapterErrorKind;
use crate::tree::{Label, ParseTree};

pub type SymbolId = usize;

/// Position of a token among its parent's children.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionClass {
    Sole,
    First,
    Middle,
    Last,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Symbol {
    Root,
    Label(Label),
    Preterm { parent: Label, class: PositionClass },
    /// Binarization intermediate: parent label plus the previous sibling
    /// symbol (markovization order 1).
    Inter { parent: Label, prev: SymbolId },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingConfig {
    /// Additive smoothing over the observed expansions of each LHS.
    pub rule_alpha: f64,
    /// Probability reserved by every preterminal for unknown tokens;
    /// zero makes unknown words unparseable.
    pub unknown_mass: f64,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig { rule_alpha: 0.01, unknown_mass: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryRule {
    pub lhs: SymbolId,
    pub left: SymbolId,
    pub right: SymbolId,
    pub logp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnaryRule {
    pub lhs: SymbolId,
    pub child: SymbolId,
    pub logp: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum PcfgError {
    #[error("cannot induce a grammar from an empty corpus")]
    EmptyCorpus,
    #[error("bad smoothing config: {0}")]
    BadConfig(String),
    #[error("bad grammar file: {0}")]
    Format(String),
    #[error("grammar i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("grammar json failed: {0}")]
    Json(#[from] serde_json::Error),
}

/// A binarized PCFG in log space. Rules live in fixed vectors; a rule's
/// global index (binary first, then unary, then one shared lexical slot)
/// is the deterministic tie-breaker during parsing.
#[derive(Debug, Clone)]
pub struct Grammar {
    pub(crate) symbols: Vec<Symbol>,
    pub(crate) root: SymbolId,
    pub(crate) binary: Vec<BinaryRule>,
    pub(crate) unary: Vec<UnaryRule>,
    pub(crate) lexicon: BTreeMap<String, Vec<(SymbolId, f64)>>,
    pub(crate) preterms: Vec<SymbolId>,
    pub(crate) unknown_logp: Option<f64>,
    pub(crate) smoothing: SmoothingConfig,
    pub(crate) binary_by_left: HashMap<SymbolId, Vec<usize>>,
}

impl Grammar {
    pub(crate) fn build_indices(&mut self) {
        let mut by_left: HashMap<SymbolId, Vec<usize>> = HashMap::new();
        for (idx, rule) in self.binary.iter().enumerate() {
            by_left.entry(rule.left).or_default().push(idx);
        }
        self.binary_by_left = by_left;
    }

    pub fn root(&self) -> SymbolId {
        self.root
    }

    pub fn symbol(&self, id: SymbolId) -> &Symbol {
        &self.symbols[id]
    }

    pub fn symbol_count(&self) -> usize {
        self.symbols.len()
    }

    pub fn binary_rules(&self) -> &[BinaryRule] {
        &self.binary
    }

    pub fn unary_rules(&self) -> &[UnaryRule] {
        &self.unary
    }

    pub fn preterminals(&self) -> &[SymbolId] {
        &self.preterms
    }

    pub fn smoothing(&self) -> SmoothingConfig {
        self.smoothing
    }

    pub fn unknown_logp(&self) -> Option<f64> {
        self.unknown_logp
    }

    pub fn lexicon_entries(&self, token: &str) -> Option<&[(SymbolId, f64)]> {
        self.lexicon.get(token).map(Vec::as_slice)
    }

    pub fn vocab_size(&self) -> usize {
        self.lexicon.len()
    }

    pub(crate) fn lexical_rule_index(&self) -> usize {
        self.binary.len() + self.unary.len()
    }

    pub fn binary_logp(&self, lhs: SymbolId, left: SymbolId, right: SymbolId) -> Option<f64> {
        self.binary
            .iter()
            .find(|r| r.lhs == lhs && r.left == left && r.right == right)
            .map(|r| r.logp)
    }

    pub fn unary_logp(&self, lhs: SymbolId, child: SymbolId) -> Option<f64> {
        self.unary.iter().find(|r| r.lhs == lhs && r.child == child).map(|r| r.logp)
    }

    /// Emission log-probability, falling back to the unknown-token mass
    /// for out-of-vocabulary tokens. Only preterminals emit.
    pub fn emission_logp(&self, preterm: SymbolId, token: &str) -> Option<f64> {
        if !matches!(self.symbols.get(preterm), Some(Symbol::Preterm { .. })) {
            return None;
        }
        match self.lexicon.get(token) {
            Some(entries) => entries.iter().find(|(pt, _)| *pt == preterm).map(|(_, lp)| *lp),
            None => self.unknown_logp,
        }
    }

    pub fn symbol_name(&self, id: SymbolId) -> String {
        match &self.symbols[id] {
            Symbol::Root => "ROOT".to_string(),
            Symbol::Label(l) => l.to_string(),
            Symbol::Preterm { parent, class } => format!("{parent}@{class:?}"),
            Symbol::Inter { parent, prev } => {
                format!("{parent}~{}", self.symbol_name(*prev))
            }
        }
    }

    pub fn save_json(&self, w: impl Write) -> Result<(), PcfgError> {
        let file = GrammarFile::from(self);
        serde_json::to_writer_pretty(w, &file)?;
        Ok(())
    }

    pub fn load_json(r: impl Read) -> Result<Grammar, PcfgError> {
        let file: GrammarFile = serde_json::from_reader(r)?;
        file.try_into()
    }
}

pub fn exact_match(predicted: Option<&ParseTree>, gold: &ParseTree) -> bool {
    match predicted {
        Some(tree) => tree.canonical() == gold.canonical(),
        None => false,
    }
}

/// A parser failure surfaced to filtering or evaluation; `partial` holds
/// the parses completed before the failure, in input order.
#[derive(Debug, thiserror::Error)]
#[error("{kind}")]
pub struct ParserError {
    pub kind: AdapterErrorKind,
    pub partial: Vec<Option<ParseTree>>,
}

/// Maps token sequences to trees, batch at a time. `None` means no parse.
pub trait BatchParser {
    fn parse_batch(&mut self, inputs: &[Vec<String>]) -> Result<Vec<Option<ParseTree>>, ParserError>;
}

impl<F> BatchParser for F
where
    F: FnMut(&[String]) -> Option<ParseTree>,
{
    fn parse_batch(&mut self, inputs: &[Vec<String>]) -> Result<Vec<Option<ParseTree>>, ParserError> {
        Ok(inputs.iter().map(|tokens| self(tokens)).collect())
    }
}

/// Batch CKY over a grammar; items parse in parallel and independently,
/// so output order equals input order.
pub struct CkyParser<'g> {
    grammar: &'g Grammar,
}

impl<'g> CkyParser<'g> {
    pub fn new(grammar: &'g Grammar) -> Self {
        CkyParser { grammar }
    }
}

impl BatchParser for CkyParser<'_> {
    fn parse_batch(&mut self, inputs: &[Vec<String>]) -> Result<Vec<Option<ParseTree>>, ParserError> {
        Ok(inputs.par_iter().map(|tokens| cky_parse(self.grammar, tokens).tree).collect())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SymbolSpec {
    Root,
    Label { label: String },
    Preterm { parent: String, class: PositionClass },
    Inter { parent: String, prev: usize },
}

#[derive(Serialize, Deserialize)]
struct GrammarFile {
    format: String,
    rule_alpha: f64,
    unknown_mass: f64,
    root: usize,
    symbols: Vec<SymbolSpec>,
    /// `[lhs, left, right, logp]` rows, in tie-break order.
    binary_rules: Vec<(usize, usize, usize, f64)>,
    /// `[lhs, child, logp]` rows, in tie-break order.
    unary_rules: Vec<(usize, usize, f64)>,
    lexicon: BTreeMap<String, Vec<(usize, f64)>>,
}

const GRAMMAR_FORMAT: &str = "pcfg-v1";

impl From<&Grammar> for GrammarFile {
    fn from(g: &Grammar) -> Self {
        let symbols = g
            .symbols
            .iter()
            .map(|s| match s {
                Symbol::Root => SymbolSpec::Root,
                Symbol::Label(l) => SymbolSpec::Label { label: l.to_string() },
                Symbol::Preterm { parent, class } => {
                    SymbolSpec::Preterm { parent: parent.to_string(), class: *class }
                }
                Symbol::Inter { parent, prev } => {
                    SymbolSpec::Inter { parent: parent.to_string(), prev: *prev }
                }
            })
            .collect();
        GrammarFile {
            format: GRAMMAR_FORMAT.to_string(),
            rule_alpha: g.smoothing.rule_alpha,
            unknown_mass: g.smoothing.unknown_mass,
            root: g.root,
            symbols,
            binary_rules: g.binary.iter().map(|r| (r.lhs, r.left, r.right, r.logp)).collect(),
            unary_rules: g.unary.iter().map(|r| (r.lhs, r.child, r.logp)).collect(),
            lexicon: g.lexicon.iter().map(|(t, e)| (t.clone(), e.clone())).collect(),
        }
    }
}

impl TryFrom<GrammarFile> for Grammar {
    type Error = PcfgError;

    fn try_from(file: GrammarFile) -> Result<Grammar, PcfgError> {
        if file.format != GRAMMAR_FORMAT {
            return Err(PcfgError::Format(format!(
                "unsupported format {:?}, expected {GRAMMAR_FORMAT:?}",
                file.format
            )));
        }
        let n = file.symbols.len();
        let check = |id: usize, what: &str| -> Result<usize, PcfgError> {
            if id < n {
                Ok(id)
            } else {
                Err(PcfgError::Format(format!("{what} references symbol {id} of {n}")))
            }
        };
        let mut symbols = Vec::with_capacity(n);
        for spec in &file.symbols {
            symbols.push(match spec {
                SymbolSpec::Root => Symbol::Root,
                SymbolSpec::Label { label } => Symbol::Label(parse_label_text(label)?),
                SymbolSpec::Preterm { parent, class } => {
                    Symbol::Preterm { parent: parse_label_text(parent)?, class: *class }
                }
                SymbolSpec::Inter { parent, prev } => Symbol::Inter {
                    parent: parse_label_text(parent)?,
                    prev: check(*prev, "intermediate")?,
                },
            });
        }
        let check_logp = |lp: f64, what: &str| -> Result<f64, PcfgError> {
            if lp.is_finite() && lp <= 0.0 {
                Ok(lp)
            } else {
                Err(PcfgError::Format(format!("{what} has log-probability {lp}")))
            }
        };
        let mut binary = Vec::with_capacity(file.binary_rules.len());
        for (lhs, left, right, lp) in file.binary_rules {
            binary.push(BinaryRule {
                lhs: check(lhs, "binary rule")?,
                left: check(left, "binary rule")?,
                right: check(right, "binary rule")?,
                logp: check_logp(lp, "binary rule")?,
            });
        }
        let mut unary = Vec::with_capacity(file.unary_rules.len());
        for (lhs, child, lp) in file.unary_rules {
            if lhs == child {
                return Err(PcfgError::Format(format!("unary self-loop on symbol {lhs}")));
            }
            unary.push(UnaryRule {
                lhs: check(lhs, "unary rule")?,
                child: check(child, "unary rule")?,
                logp: check_logp(lp, "unary rule")?,
            });
        }
        reject_zero_cost_unary_cycles(&unary, n)?;
        let mut lexicon: BTreeMap<String, Vec<(SymbolId, f64)>> = BTreeMap::new();
        let mut preterm_set = std::collections::BTreeSet::new();
        for (token, entries) in file.lexicon {
            let mut checked = Vec::with_capacity(entries.len());
            for (pt, lp) in entries {
                let pt = check(pt, "lexicon entry")?;
                if !matches!(symbols[pt], Symbol::Preterm { .. }) {
                    return Err(PcfgError::Format(format!(
                        "lexicon entry for {token:?} uses non-preterminal symbol {pt}"
                    )));
                }
                preterm_set.insert(pt);
                checked.push((pt, check_logp(lp, "lexicon entry")?));
            }
            lexicon.insert(token, checked);
        }
        for (id, sym) in symbols.iter().enumerate() {
            if matches!(sym, Symbol::Preterm { .. }) {
                preterm_set.insert(id);
            }
        }
        if !(0.0..1.0).contains(&file.unknown_mass) {
            return Err(PcfgError::Format(format!(
                "unknown_mass {} outside [0, 1)",
                file.unknown_mass
            )));
        }
        let mut grammar = Grammar {
            root: check(file.root, "root")?,
            symbols,
            binary,
            unary,
            lexicon,
            preterms: preterm_set.into_iter().collect(),
            unknown_logp: (file.unknown_mass > 0.0).then(|| file.unknown_mass.ln()),
            smoothing: SmoothingConfig {
                rule_alpha: file.rule_alpha,
                unknown_mass: file.unknown_mass,
            },
            binary_by_left: HashMap::new(),
        };
        grammar.build_indices();
        Ok(grammar)
    }
}

fn parse_label_text(text: &str) -> Result<Label, PcfgError> {
    use crate::tree::LabelKind;
    let (kind, name) = if let Some(rest) = text.strip_prefix("IN:") {
        (LabelKind::Intent, rest)
    } else if let Some(rest) = text.strip_prefix("SL:") {
        (LabelKind::Slot, rest)
    } else {
        return Err(PcfgError::Format(format!("bad label {text:?}")));
    };
    if !Label::is_valid_name(name) {
        return Err(PcfgError::Format(format!("bad label {text:?}")));
    }
    Ok(Label { kind, name: name.to_string() })
}

// A cycle of zero-cost unary rules would let best-score extraction loop
// forever. Induced grammars cannot contain one (intent/slot alternation
// breaks any cycle), so this only guards hand-written grammar files.
fn reject_zero_cost_unary_cycles(unary: &[UnaryRule], n: usize) -> Result<(), PcfgError> {
    let mut edges: HashMap<SymbolId, Vec<SymbolId>> = HashMap::new();
    for rule in unary {
        if rule.logp == 0.0 {
            edges.entry(rule.lhs).or_default().push(rule.child);
        }
    }
    // Colors: 0 unvisited, 1 on stack, 2 done.
    let mut color = vec![0u8; n];
    fn dfs(
        node: SymbolId,
        edges: &HashMap<SymbolId, Vec<SymbolId>>,
        color: &mut [u8],
    ) -> Result<(), PcfgError> {
        color[node] = 1;
        for &next in edges.get(&node).map(Vec::as_slice).unwrap_or(&[]) {
            match color[next] {
                0 => dfs(next, edges, color)?,
                1 => {
                    return Err(PcfgError::Format(format!(
                        "zero-cost unary cycle through symbol {next}"
                    )))
                }
                _ => {}
            }
        }
        color[node] = 2;
        Ok(())
    }
    for &start in edges.keys() {
        if color[start] == 0 {
            dfs(start, &edges, &mut color)?;
        }
    }
    Ok(())
}
