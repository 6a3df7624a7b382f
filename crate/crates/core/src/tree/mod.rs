//! Tree data model for hierarchical intent/slot annotations.
//!
//! An annotation is an ordered labeled tree: intent and slot non-terminals
//! over word terminals, written in the linearized bracket style
//! `[IN:GET_DISTANCE how far is [SL:DESTINATION boston ] ]`. A template is
//! the same skeleton with every maximal terminal span collapsed to a single
//! `[mask]` node.

mod generator;
mod parse;

pub use generator::{
    from_generator_output, generator_pair, pair_is_consistent, GeneratorPair, RejectReason,
    Rejection,
};
pub use parse::{parse_annotation, parse_template, TreeParseError, TreeParseErrorKind};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Non-terminal kind: intents nest slots, slots nest intents or words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LabelKind {
    Intent,
    Slot,
}

/// A non-terminal label such as `IN:GET_DISTANCE` or `SL:DESTINATION`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Label {
    pub kind: LabelKind,
    pub name: String,
}

impl Label {
    pub fn intent(name: impl Into<String>) -> Self {
        Label { kind: LabelKind::Intent, name: name.into() }
    }

    pub fn slot(name: impl Into<String>) -> Self {
        Label { kind: LabelKind::Slot, name: name.into() }
    }

    /// Label names are uppercase identifiers: `[A-Z0-9_]+`, non-empty.
    pub fn is_valid_name(name: &str) -> bool {
        !name.is_empty()
            && name
                .chars()
                .all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
    }

    /// Lowercase rendering used in generator source/target strings,
    /// e.g. `in:get_distance`.
    pub fn lowercase(&self) -> String {
        self.to_string().to_ascii_lowercase()
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LabelKind::Intent => write!(f, "IN:{}", self.name),
            LabelKind::Slot => write!(f, "SL:{}", self.name),
        }
    }
}

/// A node of an annotation or template tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    NonTerminal { label: Label, children: Vec<Node> },
    Token(String),
    Mask,
}

impl Node {
    pub fn label(&self) -> Option<&Label> {
        match self {
            Node::NonTerminal { label, .. } => Some(label),
            _ => None,
        }
    }
}

/// Output form for [`serialize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SerializeForm {
    /// `[IN:LABEL child ... ]` — uppercase labels, bare closing brackets.
    Canonical,
    /// Template side of a generator pair: lowercase labels, labeled closers.
    GeneratorSource,
    /// Annotation side of a generator pair: lowercase labels, labeled closers.
    GeneratorTarget,
}

/// Structural validation failures when assembling a tree from nodes.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TreeError {
    #[error("root must be an intent non-terminal")]
    RootNotIntent,
    #[error("non-terminal {0} has no children")]
    EmptyNonTerminal(String),
    #[error("illegal child under {0}: {1}")]
    IllegalChild(String, String),
    #[error("bad label name {0:?}")]
    BadLabelName(String),
    #[error("empty token text")]
    EmptyToken,
    #[error("token {0:?} contains whitespace or brackets")]
    BadTokenText(String),
    #[error("adjacent mask siblings under {0}")]
    AdjacentMasks(String),
    #[error("template contains no mask node")]
    NoMask,
}

/// A validated annotation tree: intent root, alternating intent/slot
/// nesting, word terminals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParseTree(Node);

/// A validated template: same shape as [`ParseTree`] but terminals are
/// mask nodes, with no two masks adjacent.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Template(Node);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TerminalKind {
    Token,
    Mask,
}

fn validate(node: &Node, terminals: TerminalKind) -> Result<(), TreeError> {
    let root_label = match node.label() {
        Some(l) if l.kind == LabelKind::Intent => l,
        _ => return Err(TreeError::RootNotIntent),
    };
    let _ = root_label;
    validate_nt(node, terminals)
}

fn validate_nt(node: &Node, terminals: TerminalKind) -> Result<(), TreeError> {
    let (label, children) = match node {
        Node::NonTerminal { label, children } => (label, children),
        _ => unreachable!("validate_nt called on terminal"),
    };
    if !Label::is_valid_name(&label.name) {
        return Err(TreeError::BadLabelName(label.name.clone()));
    }
    if children.is_empty() {
        return Err(TreeError::EmptyNonTerminal(label.to_string()));
    }
    let mut prev_was_mask = false;
    for child in children {
        match child {
            Node::NonTerminal { label: cl, .. } => {
                if cl.kind == label.kind {
                    return Err(TreeError::IllegalChild(label.to_string(), cl.to_string()));
                }
                validate_nt(child, terminals)?;
                prev_was_mask = false;
            }
            Node::Token(text) => {
                if terminals != TerminalKind::Token {
                    return Err(TreeError::IllegalChild(
                        label.to_string(),
                        format!("token {text:?}"),
                    ));
                }
                if text.is_empty() {
                    return Err(TreeError::EmptyToken);
                }
                if text.contains(|c: char| c.is_whitespace() || c == '[' || c == ']') {
                    return Err(TreeError::BadTokenText(text.clone()));
                }
                prev_was_mask = false;
            }
            Node::Mask => {
                if terminals != TerminalKind::Mask {
                    return Err(TreeError::IllegalChild(label.to_string(), "mask".into()));
                }
                if prev_was_mask {
                    return Err(TreeError::AdjacentMasks(label.to_string()));
                }
                prev_was_mask = true;
            }
        }
    }
    Ok(())
}

fn write_node(node: &Node, form: SerializeForm, out: &mut String) {
    match node {
        Node::NonTerminal { label, children } => {
            out.push('[');
            let rendered = match form {
                SerializeForm::Canonical => label.to_string(),
                _ => label.lowercase(),
            };
            out.push_str(&rendered);
            for child in children {
                out.push(' ');
                write_node(child, form, out);
            }
            out.push(' ');
            match form {
                SerializeForm::Canonical => out.push(']'),
                _ => {
                    out.push_str(&rendered);
                    out.push(']');
                }
            }
        }
        Node::Token(text) => out.push_str(text),
        Node::Mask => out.push_str("[mask]"),
    }
}

fn serialize_node(node: &Node, form: SerializeForm) -> String {
    let mut out = String::new();
    write_node(node, form, &mut out);
    out
}

fn collect_labels(node: &Node, into: &mut BTreeSet<Label>) {
    if let Node::NonTerminal { label, children } = node {
        into.insert(label.clone());
        for child in children {
            collect_labels(child, into);
        }
    }
}

impl ParseTree {
    /// Validates every invariant: intent root, alternation, non-empty
    /// non-terminals, word terminals only.
    pub fn from_node(node: Node) -> Result<Self, TreeError> {
        validate(&node, TerminalKind::Token)?;
        Ok(ParseTree(node))
    }

    pub fn root(&self) -> &Node {
        &self.0
    }

    pub fn root_label(&self) -> &Label {
        self.0.label().expect("parse tree root is a non-terminal")
    }

    pub fn serialize(&self, form: SerializeForm) -> String {
        serialize_node(&self.0, form)
    }

    pub fn canonical(&self) -> String {
        self.serialize(SerializeForm::Canonical)
    }

    pub fn generator_target(&self) -> String {
        self.serialize(SerializeForm::GeneratorTarget)
    }

    /// In-order terminal tokens, left to right.
    pub fn utterance(&self) -> Vec<String> {
        fn walk(node: &Node, out: &mut Vec<String>) {
            match node {
                Node::NonTerminal { children, .. } => {
                    for c in children {
                        walk(c, out);
                    }
                }
                Node::Token(t) => out.push(t.clone()),
                Node::Mask => {}
            }
        }
        let mut out = Vec::new();
        walk(&self.0, &mut out);
        out
    }

    /// Collapses each maximal run of consecutive token siblings into one
    /// mask node, leaving the non-terminal skeleton unchanged.
    pub fn extract_template(&self) -> Template {
        fn convert(node: &Node) -> Node {
            match node {
                Node::NonTerminal { label, children } => {
                    let mut out = Vec::with_capacity(children.len());
                    let mut in_run = false;
                    for child in children {
                        match child {
                            Node::Token(_) => {
                                if !in_run {
                                    out.push(Node::Mask);
                                    in_run = true;
                                }
                            }
                            _ => {
                                out.push(convert(child));
                                in_run = false;
                            }
                        }
                    }
                    Node::NonTerminal { label: label.clone(), children: out }
                }
                Node::Token(_) | Node::Mask => unreachable!("convert called on terminal"),
            }
        }
        Template(convert(&self.0))
    }

    /// All labels appearing anywhere in the tree.
    pub fn labels(&self) -> BTreeSet<Label> {
        let mut set = BTreeSet::new();
        collect_labels(&self.0, &mut set);
        set
    }
}

impl Template {
    pub fn from_node(node: Node) -> Result<Self, TreeError> {
        validate(&node, TerminalKind::Mask)?;
        if Template::count_masks(&node) == 0 {
            return Err(TreeError::NoMask);
        }
        Ok(Template(node))
    }

    fn count_masks(node: &Node) -> usize {
        match node {
            Node::NonTerminal { children, .. } => children.iter().map(Template::count_masks).sum(),
            Node::Mask => 1,
            Node::Token(_) => 0,
        }
    }

    pub fn root(&self) -> &Node {
        &self.0
    }

    pub fn root_label(&self) -> &Label {
        self.0.label().expect("template root is a non-terminal")
    }

    pub fn serialize(&self, form: SerializeForm) -> String {
        serialize_node(&self.0, form)
    }

    pub fn canonical(&self) -> String {
        self.serialize(SerializeForm::Canonical)
    }

    pub fn generator_source(&self) -> String {
        self.serialize(SerializeForm::GeneratorSource)
    }

    /// Canonical serialization; equal templates have equal keys.
    pub fn key(&self) -> String {
        self.canonical()
    }

    pub fn mask_count(&self) -> usize {
        Template::count_masks(&self.0)
    }

    pub fn labels(&self) -> BTreeSet<Label> {
        let mut set = BTreeSet::new();
        collect_labels(&self.0, &mut set);
        set
    }

    /// Substitutes the masks, left to right, with the given non-empty
    /// token spans. `spans.len()` must equal [`Template::mask_count`].
    pub fn fill(&self, spans: &[Vec<String>]) -> Result<ParseTree, TreeError> {
        fn convert(node: &Node, spans: &[Vec<String>], next: &mut usize) -> Node {
            match node {
                Node::NonTerminal { label, children } => {
                    let mut out = Vec::new();
                    for child in children {
                        match child {
                            Node::Mask => {
                                let span = &spans[*next];
                                *next += 1;
                                out.extend(span.iter().map(|t| Node::Token(t.clone())));
                            }
                            _ => out.push(convert(child, spans, next)),
                        }
                    }
                    Node::NonTerminal { label: label.clone(), children: out }
                }
                Node::Token(_) | Node::Mask => unreachable!("convert called on terminal"),
            }
        }
        assert_eq!(spans.len(), self.mask_count(), "span count must match mask count");
        let mut next = 0;
        ParseTree::from_node(convert(&self.0, spans, &mut next))
    }
}

impl fmt::Display for ParseTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

/// Collapses whitespace runs to single spaces and trims the ends; the
/// canonical serialization of a parsed line equals the line after this
/// normalization.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}
