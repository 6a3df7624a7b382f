//! Keeps a synthetic candidate only when the auxiliary parser maps its
//! utterance back to exactly the candidate's own tree.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::corpus::FrequencyTable;
use crate::infill::{FilterVerdict, SyntheticSample};

use super::{exact_match, BatchParser, ParserError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct KeepRate {
    pub kept: usize,
    pub total: usize,
}

impl KeepRate {
    /// `None` for 0-of-0.
    pub fn rate(&self) -> Option<f64> {
        (self.total > 0).then(|| self.kept as f64 / self.total as f64)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FilterReport {
    pub overall: KeepRate,
    /// Candidates that were already rejected at generation time; they
    /// count toward totals and are always dropped.
    pub invalid: usize,
    /// Keyed by training-frequency bucket of the candidate's template;
    /// present when training stats were supplied.
    pub per_bucket: Option<BTreeMap<String, KeepRate>>,
}

/// Parses every valid candidate and sets verdicts in place: `Kept` when
/// the parse equals the candidate tree canonically, `Dropped` otherwise.
/// On parser failure the verdicts set so far stand and the error carries
/// through.
pub fn filter_synthetic(
    parser: &mut dyn BatchParser,
    samples: &mut [SyntheticSample],
    train_stats: Option<&FrequencyTable>,
) -> Result<FilterReport, ParserError> {
    let valid_idx: Vec<usize> = samples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_valid())
        .map(|(i, _)| i)
        .collect();
    let inputs: Vec<Vec<String>> = valid_idx
        .iter()
        .map(|&i| samples[i].utterance().expect("valid samples carry trees"))
        .collect();

    let parses = match parser.parse_batch(&inputs) {
        Ok(parses) => parses,
        Err(err) => {
            for (&idx, parse) in valid_idx.iter().zip(&err.partial) {
                apply_verdict(&mut samples[idx], parse.as_ref());
            }
            return Err(err);
        }
    };
    for (&idx, parse) in valid_idx.iter().zip(&parses) {
        apply_verdict(&mut samples[idx], parse.as_ref());
    }

    let mut overall = KeepRate::default();
    let mut invalid = 0;
    let mut per_bucket: BTreeMap<String, KeepRate> = BTreeMap::new();
    for sample in samples.iter_mut() {
        if !sample.is_valid() {
            sample.verdict = FilterVerdict::Dropped;
            invalid += 1;
        }
        let kept = sample.verdict == FilterVerdict::Kept;
        overall.total += 1;
        overall.kept += kept as usize;
        if let Some(stats) = train_stats {
            let slot = per_bucket
                .entry(stats.bucket_of(&sample.template_key).to_string())
                .or_default();
            slot.total += 1;
            slot.kept += kept as usize;
        }
    }
    Ok(FilterReport {
        overall,
        invalid,
        per_bucket: train_stats.map(|_| per_bucket),
    })
}

fn apply_verdict(sample: &mut SyntheticSample, parse: Option<&crate::tree::ParseTree>) {
    let gold = sample.tree.as_ref().expect("only valid samples are parsed");
    sample.verdict =
        if exact_match(parse, gold) { FilterVerdict::Kept } else { FilterVerdict::Dropped };
}

/// Re-parses every `Kept` sample and counts those the parser no longer
/// reproduces. A deterministic parser always yields zero.
pub fn verify_filter_soundness(
    parser: &mut dyn BatchParser,
    samples: &[SyntheticSample],
) -> Result<usize, ParserError> {
    let kept: Vec<&SyntheticSample> =
        samples.iter().filter(|s| s.verdict == FilterVerdict::Kept).collect();
    let inputs: Vec<Vec<String>> =
        kept.iter().map(|s| s.utterance().expect("kept samples carry trees")).collect();
    let parses = parser.parse_batch(&inputs)?;
    Ok(kept
        .iter()
        .zip(&parses)
        .filter(|(s, parse)| !exact_match(parse.as_ref(), s.tree.as_ref().unwrap()))
        .count())
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::super::tests::corpus_of;
    use super::super::{induce_grammar, CkyParser, SmoothingConfig};
    use super::*;
    use crate::corpus::FrequencyTable;
    use crate::infill::{fit_infiller, generate, GenerateOptions};
    use crate::tree::{parse_annotation, ParseTree};

    fn synthetic_batch() -> Vec<SyntheticSample> {
        let corpus = corpus_of(&[
            "[IN:GET_DISTANCE how far is [SL:DESTINATION boston ] ]",
            "[IN:GET_DISTANCE how close is [SL:DESTINATION chicago ] ]",
            "[IN:GET_DIRECTIONS directions to [SL:DESTINATION boston ] ]",
        ]);
        let model = fit_infiller(&corpus).unwrap();
        let opts = GenerateOptions { k: 4, p: 1.0, seed: 9, dedup: true };
        generate(&model, &corpus.distinct_templates(), &opts, &HashSet::new()).unwrap()
    }

    #[test]
    fn trusting_parser_keeps_everything() {
        let mut samples = synthetic_batch();
        let mut oracle = |tokens: &[String]| -> Option<ParseTree> {
            // Cheating parser: look the answer up in the samples.
            synthetic_batch()
                .iter()
                .find(|s| s.utterance().unwrap() == tokens)
                .map(|s| s.tree.clone().unwrap())
        };
        let report = filter_synthetic(&mut oracle, &mut samples, None).unwrap();
        assert_eq!(report.overall.kept, report.overall.total);
        assert_eq!(report.invalid, 0);
        assert!(samples.iter().all(|s| s.verdict == FilterVerdict::Kept));
        assert_eq!(report.per_bucket, None);
    }

    #[test]
    fn refusing_parser_drops_everything() {
        let mut samples = synthetic_batch();
        let mut refuse = |_: &[String]| -> Option<ParseTree> { None };
        let report = filter_synthetic(&mut refuse, &mut samples, None).unwrap();
        assert_eq!(report.overall.kept, 0);
        assert!(samples.iter().all(|s| s.verdict == FilterVerdict::Dropped));
        assert_eq!(report.overall.rate(), Some(0.0));
    }

    #[test]
    fn wrong_tree_is_dropped_even_when_parse_exists() {
        let mut samples = synthetic_batch();
        let wrong = parse_annotation("[IN:GET_DISTANCE nope ]").unwrap();
        let mut constant = move |_: &[String]| -> Option<ParseTree> { Some(wrong.clone()) };
        let report = filter_synthetic(&mut constant, &mut samples, None).unwrap();
        assert_eq!(report.overall.kept, 0);
    }

    #[test]
    fn cky_filter_is_sound() {
        let corpus = corpus_of(&[
            "[IN:GET_DISTANCE how far is [SL:DESTINATION boston ] ]",
            "[IN:GET_DISTANCE how close is [SL:DESTINATION chicago ] ]",
            "[IN:GET_DIRECTIONS directions to [SL:DESTINATION boston ] ]",
        ]);
        let grammar = induce_grammar(&corpus, SmoothingConfig::default()).unwrap();
        let mut samples = synthetic_batch();
        let stats = FrequencyTable::from_corpus(&corpus);
        let report = {
            let mut parser = CkyParser::new(&grammar);
            filter_synthetic(&mut parser, &mut samples, Some(&stats)).unwrap()
        };
        assert!(report.overall.kept > 0, "in-distribution samples must survive");
        let buckets = report.per_bucket.as_ref().unwrap();
        let bucket_total: usize = buckets.values().map(|k| k.total).sum();
        assert_eq!(bucket_total, report.overall.total);
        let mut parser = CkyParser::new(&grammar);
        assert_eq!(verify_filter_soundness(&mut parser, &samples).unwrap(), 0);
    }

    #[test]
    fn invalid_samples_count_and_drop() {
        let mut samples = synthetic_batch();
        samples[0].tree = None;
        samples[0].validity = crate::infill::Validity::Rejected {
            reason: crate::tree::RejectReason::Structural,
            detail: "synthesized for the test".into(),
        };
        let mut refuse = |_: &[String]| -> Option<ParseTree> { None };
        let report = filter_synthetic(&mut refuse, &mut samples, None).unwrap();
        assert_eq!(report.invalid, 1);
        assert_eq!(samples[0].verdict, FilterVerdict::Dropped);
        assert_eq!(report.overall.total, samples.len());
    }
}
