//! Parser for the linearized bracket syntax.
//!
//! Brackets and whitespace delimit tokens; anything else is terminal text.
//! Non-terminals open with `[IN:` or `[SL:`; in template mode the exact
//! sequence `[mask]` is a terminal.

use super::{Label, LabelKind, Node, ParseTree, Template, TreeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeParseErrorKind {
    UnbalancedBrackets,
    EmptyNonTerminal,
    RootNotIntent,
    IllegalChildKind,
    BadLabelSyntax,
}

impl std::fmt::Display for TreeParseErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let text = match self {
            TreeParseErrorKind::UnbalancedBrackets => "unbalanced brackets",
            TreeParseErrorKind::EmptyNonTerminal => "empty non-terminal",
            TreeParseErrorKind::RootNotIntent => "root is not an intent",
            TreeParseErrorKind::IllegalChildKind => "illegal child kind",
            TreeParseErrorKind::BadLabelSyntax => "bad label syntax",
        };
        f.write_str(text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{kind} at byte {offset}")]
pub struct TreeParseError {
    pub kind: TreeParseErrorKind,
    pub offset: usize,
}

impl TreeParseError {
    fn new(kind: TreeParseErrorKind, offset: usize) -> Self {
        TreeParseError { kind, offset }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Annotation,
    Template,
}

/// Parses an annotation such as `[IN:GET_DISTANCE how far ... ]`.
pub fn parse_annotation(text: &str) -> Result<ParseTree, TreeParseError> {
    let node = parse_node(text, Mode::Annotation)?;
    ParseTree::from_node(node).map_err(|e| promote(e, text))
}

/// Parses a template such as `[IN:GET_DISTANCE [mask] ]`.
pub fn parse_template(text: &str) -> Result<Template, TreeParseError> {
    let node = parse_node(text, Mode::Template)?;
    Template::from_node(node).map_err(|e| promote(e, text))
}

// Structural checks run during parsing with exact offsets; this maps the
// few residual constructor errors (reachable only through from_node, not
// through text) onto parse-error kinds for a uniform surface.
fn promote(err: TreeError, text: &str) -> TreeParseError {
    let kind = match err {
        TreeError::RootNotIntent => TreeParseErrorKind::RootNotIntent,
        TreeError::EmptyNonTerminal(_) | TreeError::NoMask => TreeParseErrorKind::EmptyNonTerminal,
        TreeError::BadLabelName(_) => TreeParseErrorKind::BadLabelSyntax,
        _ => TreeParseErrorKind::IllegalChildKind,
    };
    TreeParseError::new(kind, text.len())
}

struct Frame {
    label: Label,
    open_offset: usize,
    children: Vec<Node>,
}

fn parse_node(text: &str, mode: Mode) -> Result<Node, TreeParseError> {
    use TreeParseErrorKind::*;
    let bytes = text.as_bytes();
    let mut pos = 0usize;
    let mut stack: Vec<Frame> = Vec::new();
    let mut root: Option<Node> = None;

    while pos < bytes.len() {
        let b = bytes[pos];
        if b.is_ascii_whitespace() {
            pos += 1;
            continue;
        }
        if root.is_some() {
            // Anything after the root closes means a second root or stray text.
            return Err(TreeParseError::new(UnbalancedBrackets, pos));
        }
        if b == b'[' {
            if mode == Mode::Template && text[pos..].starts_with("[mask]") {
                push_terminal(&mut stack, Node::Mask, pos, mode)?;
                pos += "[mask]".len();
                continue;
            }
            let start = pos + 1;
            let mut end = start;
            while end < bytes.len()
                && !bytes[end].is_ascii_whitespace()
                && bytes[end] != b'['
                && bytes[end] != b']'
            {
                end += 1;
            }
            let label = parse_label(&text[start..end])
                .ok_or_else(|| TreeParseError::new(BadLabelSyntax, pos))?;
            if let Some(parent) = stack.last() {
                if parent.label.kind == label.kind {
                    return Err(TreeParseError::new(IllegalChildKind, pos));
                }
            }
            stack.push(Frame { label, open_offset: pos, children: Vec::new() });
            pos = end;
        } else if b == b']' {
            let frame = stack
                .pop()
                .ok_or_else(|| TreeParseError::new(UnbalancedBrackets, pos))?;
            if frame.children.is_empty() {
                return Err(TreeParseError::new(EmptyNonTerminal, frame.open_offset));
            }
            let node = Node::NonTerminal { label: frame.label, children: frame.children };
            match stack.last_mut() {
                Some(parent) => parent.children.push(node),
                None => root = Some(node),
            }
            pos += 1;
        } else {
            let start = pos;
            let mut end = pos;
            while end < bytes.len()
                && !bytes[end].is_ascii_whitespace()
                && bytes[end] != b'['
                && bytes[end] != b']'
            {
                end += 1;
            }
            push_terminal(&mut stack, Node::Token(text[start..end].to_string()), start, mode)?;
            pos = end;
        }
    }

    if let Some(frame) = stack.last() {
        return Err(TreeParseError::new(UnbalancedBrackets, frame.open_offset));
    }
    match root {
        Some(node) => {
            if node.label().map(|l| l.kind) != Some(LabelKind::Intent) {
                return Err(TreeParseError::new(RootNotIntent, 0));
            }
            Ok(node)
        }
        None => Err(TreeParseError::new(UnbalancedBrackets, text.len())),
    }
}

fn push_terminal(
    stack: &mut [Frame],
    node: Node,
    offset: usize,
    mode: Mode,
) -> Result<(), TreeParseError> {
    use TreeParseErrorKind::*;
    let frame = match stack.last_mut() {
        Some(f) => f,
        // Terminal text outside any bracket.
        None => return Err(TreeParseError::new(UnbalancedBrackets, offset)),
    };
    match (&node, mode) {
        (Node::Token(_), Mode::Template) => {
            return Err(TreeParseError::new(IllegalChildKind, offset))
        }
        (Node::Mask, Mode::Template) => {
            if matches!(frame.children.last(), Some(Node::Mask)) {
                return Err(TreeParseError::new(IllegalChildKind, offset));
            }
        }
        _ => {}
    }
    frame.children.push(node);
    Ok(())
}

fn parse_label(text: &str) -> Option<Label> {
    let (kind, name) = if let Some(rest) = text.strip_prefix("IN:") {
        (LabelKind::Intent, rest)
    } else {
        (LabelKind::Slot, text.strip_prefix("SL:")?)
    };
    if !Label::is_valid_name(name) {
        return None;
    }
    Some(Label { kind, name: name.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use TreeParseErrorKind::*;

    fn kind_of(res: Result<ParseTree, TreeParseError>) -> TreeParseErrorKind {
        res.unwrap_err().kind
    }

    #[test]
    fn parses_nested_annotation() {
        let tree = parse_annotation(
            "[IN:GET_DIRECTIONS directions to [SL:DESTINATION [IN:GET_EVENT the [SL:NAME_EVENT game ] ] ] ]",
        )
        .unwrap();
        assert_eq!(tree.utterance(), vec!["directions", "to", "the", "game"]);
    }

    #[test]
    fn accepts_tight_brackets() {
        // Bracket characters self-delimit, so missing spaces still parse.
        let tree = parse_annotation("[IN:FOO hi [SL:BAR x]]").unwrap();
        assert_eq!(tree.canonical(), "[IN:FOO hi [SL:BAR x ] ]");
    }

    #[test]
    fn tokens_may_contain_colons_and_punctuation() {
        let tree = parse_annotation("[IN:FOO wake me at 5:00 , please ]").unwrap();
        assert_eq!(tree.utterance(), vec!["wake", "me", "at", "5:00", ",", "please"]);
    }

    #[test]
    fn missing_closer_is_unbalanced() {
        let err = parse_annotation("[IN:FOO hi").unwrap_err();
        assert_eq!(err.kind, UnbalancedBrackets);
        assert_eq!(err.offset, 0);
    }

    #[test]
    fn stray_closer_is_unbalanced() {
        let err = parse_annotation("[IN:FOO hi ] ]").unwrap_err();
        assert_eq!(err.kind, UnbalancedBrackets);
        assert_eq!(err.offset, 13);
    }

    #[test]
    fn second_root_is_unbalanced() {
        assert_eq!(kind_of(parse_annotation("[IN:FOO hi ] [IN:BAR yo ]")), UnbalancedBrackets);
    }

    #[test]
    fn trailing_text_is_unbalanced() {
        assert_eq!(kind_of(parse_annotation("[IN:FOO hi ] extra")), UnbalancedBrackets);
    }

    #[test]
    fn empty_input_is_unbalanced() {
        assert_eq!(kind_of(parse_annotation("")), UnbalancedBrackets);
        assert_eq!(kind_of(parse_annotation("   ")), UnbalancedBrackets);
    }

    #[test]
    fn empty_non_terminal_reports_open_offset() {
        let err = parse_annotation("[IN:FOO hi [SL:BAR ] ]").unwrap_err();
        assert_eq!(err.kind, EmptyNonTerminal);
        assert_eq!(err.offset, 11);
    }

    #[test]
    fn slot_root_rejected() {
        assert_eq!(kind_of(parse_annotation("[SL:FOO hi ]")), RootNotIntent);
    }

    #[test]
    fn intent_under_intent_rejected() {
        assert_eq!(
            kind_of(parse_annotation("[IN:FOO [IN:BAR hi ] ]")),
            IllegalChildKind
        );
    }

    #[test]
    fn slot_under_slot_rejected() {
        assert_eq!(
            kind_of(parse_annotation("[IN:FOO [SL:A [SL:B hi ] ] ]")),
            IllegalChildKind
        );
    }

    #[test]
    fn bad_label_syntax() {
        assert_eq!(kind_of(parse_annotation("[FOO hi ]")), BadLabelSyntax);
        assert_eq!(kind_of(parse_annotation("[IN: hi ]")), BadLabelSyntax);
        assert_eq!(kind_of(parse_annotation("[IN:foo hi ]")), BadLabelSyntax);
        assert_eq!(kind_of(parse_annotation("[in:FOO hi ]")), BadLabelSyntax);
        assert_eq!(kind_of(parse_annotation("[] hi")), BadLabelSyntax);
    }

    #[test]
    fn mask_is_bad_label_in_annotation_mode() {
        // `[mask]` lexes as an opener with label text `mask]`-prefix `mask`,
        // which is not an IN:/SL: label.
        assert_eq!(kind_of(parse_annotation("[IN:FOO [mask] ]")), BadLabelSyntax);
    }

    #[test]
    fn template_mode_accepts_masks_and_rejects_tokens() {
        let t = parse_template("[IN:GET_DISTANCE [mask] [SL:DESTINATION [mask] ] ]").unwrap();
        assert_eq!(t.mask_count(), 2);
        let err = parse_template("[IN:GET_DISTANCE hi [mask] ]").unwrap_err();
        assert_eq!(err.kind, IllegalChildKind);
        assert_eq!(err.offset, 17);
    }

    #[test]
    fn template_mode_rejects_adjacent_masks() {
        let err = parse_template("[IN:FOO [mask] [mask] ]").unwrap_err();
        assert_eq!(err.kind, IllegalChildKind);
        assert_eq!(err.offset, 15);
    }

    #[test]
    fn canonical_round_trip_normalizes_whitespace() {
        let messy = "  [IN:FOO   hi [SL:BAR x ]   ]  ";
        let tree = parse_annotation(messy).unwrap();
        assert_eq!(tree.canonical(), super::super::normalize_whitespace(messy));
    }
}
