//! Auxiliary-parser filtering: keep a candidate only when the parser's
//! tree for its utterance equals the candidate's own tree exactly.

use clap::Args;
use serde::Serialize;

use topaug::adapter::ExternalParser;
use topaug::corpus::{FrequencyTable, Split};
use topaug::infill::SyntheticSample;
use topaug::pcfg::{filter_synthetic, BatchParser, CkyParser, FilterReport};

use crate::common::{
    adapter_timeout, read_samples_jsonl, split_command, write_json_pretty, write_samples_jsonl,
    LoadArgs,
};
use crate::commands::stats::read_stats;
use crate::commands::train_parser::load_grammar;
use crate::failure::{Failure, Stage, StageFailure, StageResult};
use crate::manifest::Manifest;

#[derive(Debug, Args, Serialize)]
pub struct FilterArgs {
    /// Candidates JSONL from `generate`.
    #[arg(long)]
    pub candidates: String,
    /// Grammar JSON for the built-in CKY auxiliary parser.
    #[arg(long, conflicts_with = "adapter")]
    pub grammar: Option<String>,
    /// External parser command (line-delimited JSON protocol).
    #[arg(long)]
    pub adapter: Option<String>,
    #[arg(long, default_value_t = 30)]
    pub timeout_secs: u64,
    /// Training corpus TSV for per-bucket keep rates (optional).
    #[arg(long)]
    pub train: Option<String>,
    /// Stats JSON from `stats`, an alternative bucket source.
    #[arg(long, conflicts_with = "train")]
    pub train_stats: Option<String>,
    #[command(flatten)]
    pub load: LoadArgs,
    /// Verdict-annotated candidates JSONL.
    #[arg(long)]
    pub output: String,
    /// Keep-rate report JSON.
    #[arg(long)]
    pub report: String,
}

/// Applies the filter in place. On adapter failure, verdicts settled before
/// the failure are quarantined at `<output>.partial`.
pub fn run_filter(
    parser: &mut dyn BatchParser,
    samples: &mut [SyntheticSample],
    stats: Option<&FrequencyTable>,
    output: &str,
) -> StageResult<FilterReport> {
    match filter_synthetic(parser, samples, stats) {
        Ok(report) => Ok(report),
        Err(err) => {
            let quarantine = format!("{output}.partial");
            write_samples_jsonl(&quarantine, samples)?;
            Err(StageFailure::new(Failure::from(err), "filter")
                .with_quarantine(vec![quarantine]))
        }
    }
}

pub fn run(args: &FilterArgs) -> StageResult<()> {
    let mut samples = read_samples_jsonl(&args.candidates)?;
    let stats = match (&args.train, &args.train_stats) {
        (Some(path), _) => {
            let corpus = args.load.load(path, Split::Train)?;
            Some(FrequencyTable::from_corpus(&corpus))
        }
        (None, Some(path)) => Some(read_stats(path)?.frequency_table),
        (None, None) => None,
    };

    let report = match (&args.grammar, &args.adapter) {
        (Some(path), None) => {
            let grammar = load_grammar(path)?;
            let mut parser = CkyParser::new(&grammar);
            run_filter(&mut parser, &mut samples, stats.as_ref(), &args.output)?
        }
        (None, Some(cmd)) => {
            let argv = split_command(cmd).map_err(|f| StageFailure::new(f, "filter"))?;
            let mut parser = ExternalParser::spawn(&argv, adapter_timeout(args.timeout_secs))
                .stage("filter")?;
            run_filter(&mut parser, &mut samples, stats.as_ref(), &args.output)?
        }
        _ => {
            return Err(StageFailure::new(
                Failure::Usage("exactly one of --grammar or --adapter is required".to_string()),
                "config",
            ))
        }
    };

    write_samples_jsonl(&args.output, &samples)?;
    write_json_pretty(&args.report, &report)?;
    let mut manifest = Manifest::new("filter", args)?;
    manifest.record_input(&args.candidates)?;
    if let Some(path) = &args.grammar {
        manifest.record_input(path)?;
    }
    if let Some(path) = &args.train {
        manifest.record_input(path)?;
    }
    if let Some(path) = &args.train_stats {
        manifest.record_input(path)?;
    }
    manifest.record_output(&args.output)?;
    manifest.record_output(&args.report)?;
    manifest.write(&format!("{}.manifest.json", args.output))?;
    println!(
        "{}: kept {} of {} ({} malformed)",
        args.output, report.overall.kept, report.overall.total, report.invalid
    );
    Ok(())
}
