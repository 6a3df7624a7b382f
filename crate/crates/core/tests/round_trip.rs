//! Round-trip and structural properties over randomly generated trees.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use topaug::toy::{random_tree, FuzzParams};
use topaug::tree::{
    from_generator_output, generator_pair, normalize_whitespace, pair_is_consistent,
    parse_annotation, parse_template, Node, ParseTree,
};

fn tree_from_seed(seed: u64) -> ParseTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_tree(&mut rng, &FuzzParams::default())
}

fn skeleton(node: &Node) -> String {
    match node {
        Node::NonTerminal { label, children } => {
            let inner: Vec<String> = children.iter().filter_map(|c| match c {
                Node::NonTerminal { .. } => Some(skeleton(c)),
                _ => None,
            }).collect();
            format!("({label} {})", inner.join(" "))
        }
        _ => String::new(),
    }
}

proptest! {
    #[test]
    fn canonical_parse_is_inverse_of_serialize(seed in any::<u64>()) {
        let tree = tree_from_seed(seed);
        let text = tree.canonical();
        let reparsed = parse_annotation(&text).expect("canonical form parses");
        prop_assert_eq!(reparsed.canonical(), text.clone());
        prop_assert_eq!(&reparsed, &tree);
        // Whitespace noise does not change the parse.
        let noisy = text.replace(' ', "   ");
        let renoised = parse_annotation(&noisy).expect("extra whitespace is harmless");
        prop_assert_eq!(renoised.canonical(), normalize_whitespace(&noisy));
        prop_assert_eq!(&renoised, &tree);
    }

    #[test]
    fn generator_target_inverts(seed in any::<u64>()) {
        let tree = tree_from_seed(seed);
        let labels = tree.labels();
        let back = from_generator_output(&tree.generator_target(), &labels)
            .expect("own target form converts back");
        prop_assert_eq!(back, tree);
    }

    #[test]
    fn template_extraction_properties(seed in any::<u64>()) {
        let tree = tree_from_seed(seed);
        let template = tree.extract_template();
        // Masking never changes the non-terminal skeleton.
        prop_assert_eq!(skeleton(tree.root()), skeleton(template.root()));
        // The template's canonical form parses back to itself.
        let reparsed = parse_template(&template.key()).expect("template key parses");
        prop_assert_eq!(reparsed.key(), template.key());
        // Masking is idempotent: filling with single tokens and re-extracting
        // yields the same key.
        let spans: Vec<Vec<String>> =
            (0..template.mask_count()).map(|i| vec![format!("tok{i}")]).collect();
        let refilled = template.fill(&spans).expect("unit spans fill");
        prop_assert_eq!(refilled.extract_template().key(), template.key());
    }

    #[test]
    fn utterance_matches_serialized_terminals(seed in any::<u64>()) {
        let tree = tree_from_seed(seed);
        // Strip bracketed structure from the canonical form; what is left
        // must be the utterance.
        let mut leftover: Vec<String> = Vec::new();
        for tok in tree.canonical().split_whitespace() {
            if tok.starts_with("[IN:") || tok.starts_with("[SL:") || tok == "]" {
                continue;
            }
            leftover.push(tok.to_string());
        }
        prop_assert_eq!(tree.utterance(), leftover);
    }

    #[test]
    fn generator_pairs_are_self_consistent(seed in any::<u64>()) {
        let tree = tree_from_seed(seed);
        let labels = tree.labels();
        let pair = generator_pair(&tree);
        prop_assert!(pair_is_consistent(&pair, &labels));
        // Source and target share the same lowercase skeleton.
        prop_assert_eq!(
            pair.source.matches('[').count() - pair.source.matches("[mask]").count(),
            pair.target.matches('[').count()
        );
    }

    #[test]
    fn corrupting_canonical_text_never_panics(seed in any::<u64>(), cut in 0usize..200) {
        let tree = tree_from_seed(seed);
        let text = tree.canonical();
        // Truncations and bracket swaps must fail cleanly, not panic.
        let mut cut = cut.min(text.len());
        while !text.is_char_boundary(cut) {
            cut -= 1;
        }
        let _ = parse_annotation(&text[..cut]);
        let swapped: String = text.chars().rev().collect();
        let _ = parse_annotation(&swapped);
    }
}
