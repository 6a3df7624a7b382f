//! Inverse of the generator target form.
//!
//! Generator output is whitespace-tokenized: openers look like
//! `[in:get_distance`, closers like `sl:destination]`, everything else is a
//! word. Recovering a tree can fail three ways, checked in this order per
//! token: a label outside the known alphabet, a closer that does not match
//! the innermost open non-terminal, or anything structurally ill-formed.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{parse_annotation, Label, LabelKind, ParseTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    UnknownLabel,
    MismatchedClosing,
    Structural,
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let text = match self {
            RejectReason::UnknownLabel => "unknown_label",
            RejectReason::MismatchedClosing => "mismatched_closing",
            RejectReason::Structural => "structural",
        };
        f.write_str(text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{reason}: {detail}")]
pub struct Rejection {
    pub reason: RejectReason,
    pub detail: String,
}

impl Rejection {
    fn new(reason: RejectReason, detail: impl Into<String>) -> Self {
        Rejection { reason, detail: detail.into() }
    }
}

/// Source/target string pair for one annotation, as fed to a
/// sequence-to-sequence generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorPair {
    pub source: String,
    pub target: String,
}

/// Template source plus filled target for one tree.
pub fn generator_pair(tree: &ParseTree) -> GeneratorPair {
    GeneratorPair {
        source: tree.extract_template().generator_source(),
        target: tree.generator_target(),
    }
}

/// Recovers a [`ParseTree`] from generator output, restoring uppercase
/// labels, or rejects it. `known_labels` is the label alphabet observed in
/// training; any label outside it is an [`RejectReason::UnknownLabel`].
pub fn from_generator_output(
    text: &str,
    known_labels: &BTreeSet<Label>,
) -> Result<ParseTree, Rejection> {
    use RejectReason::*;
    let mut stack: Vec<Label> = Vec::new();
    // Canonical-form lexemes, reassembled and reparsed at the end so the
    // result passes every tree invariant.
    let mut pieces: Vec<String> = Vec::new();

    for tok in text.split_whitespace() {
        if tok == "[mask]" {
            return Err(Rejection::new(Structural, "unfilled [mask] in output"));
        }
        if let Some(rest) = tok.strip_prefix('[') {
            let label = parse_lowercase_label(rest).ok_or_else(|| {
                Rejection::new(Structural, format!("malformed opener {tok:?}"))
            })?;
            if !known_labels.contains(&label) {
                return Err(Rejection::new(UnknownLabel, format!("label {label}")));
            }
            pieces.push(format!("[{label}"));
            stack.push(label);
        } else if let Some(rest) = tok.strip_suffix(']') {
            let label = parse_lowercase_label(rest).ok_or_else(|| {
                Rejection::new(Structural, format!("malformed closer {tok:?}"))
            })?;
            match stack.pop() {
                None => {
                    return Err(Rejection::new(
                        Structural,
                        format!("closer {label} with no open non-terminal"),
                    ))
                }
                Some(open) if open != label => {
                    return Err(Rejection::new(
                        MismatchedClosing,
                        format!("closer {label} against open {open}"),
                    ))
                }
                Some(_) => {}
            }
            pieces.push("]".to_string());
        } else if tok.contains('[') || tok.contains(']') {
            return Err(Rejection::new(Structural, format!("stray bracket in {tok:?}")));
        } else {
            pieces.push(tok.to_string());
        }
    }

    if let Some(open) = stack.last() {
        return Err(Rejection::new(Structural, format!("unclosed non-terminal {open}")));
    }
    let canonical = pieces.join(" ");
    parse_annotation(&canonical)
        .map_err(|e| Rejection::new(Structural, e.to_string()))
}

// Accepts `in:name` / `sl:name` case-insensitively; the name must uppercase
// to a valid label name and contain no brackets.
fn parse_lowercase_label(text: &str) -> Option<Label> {
    if text.contains('[') || text.contains(']') {
        return None;
    }
    let upper = text.to_ascii_uppercase();
    let (kind, name) = if let Some(rest) = upper.strip_prefix("IN:") {
        (LabelKind::Intent, rest)
    } else {
        (LabelKind::Slot, upper.strip_prefix("SL:")?)
    };
    if !Label::is_valid_name(name) {
        return None;
    }
    Some(Label { kind, name: name.to_string() })
}

/// True when the maximal filler spans of `target` collapse back onto the
/// masks of `source` (i.e. the pair is self-consistent).
pub fn pair_is_consistent(pair: &GeneratorPair, known_labels: &BTreeSet<Label>) -> bool {
    match from_generator_output(&pair.target, known_labels) {
        Ok(tree) => tree.extract_template().generator_source() == pair.source,
        Err(_) => false,
    }
}
