//! Exact-match evaluation of a parser over a test corpus, reported overall
//! and by training-frequency bucket.

use clap::Args;
use serde::Serialize;

use topaug::adapter::ExternalParser;
use topaug::corpus::{FrequencyTable, Split};
use topaug::eval::{evaluate, render_table, EvalReport, TrainCounts};
use topaug::pcfg::{BatchParser, CkyParser};

use crate::commands::stats::read_stats;
use crate::commands::train_parser::load_grammar;
use crate::common::{adapter_timeout, split_command, write_json_pretty, LoadArgs};
use crate::failure::{Failure, Stage, StageFailure, StageResult};
use crate::manifest::Manifest;

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Test corpus TSV.
    #[arg(long)]
    pub test: String,
    /// Grammar JSON for the built-in CKY parser.
    #[arg(long, conflicts_with = "adapter")]
    pub grammar: Option<String>,
    /// External parser command.
    #[arg(long)]
    pub adapter: Option<String>,
    #[arg(long, default_value_t = 30)]
    pub timeout_secs: u64,
    /// Training corpus TSV; buckets come from its template frequencies.
    #[arg(long)]
    pub train: Option<String>,
    /// Stats JSON from `stats`, an alternative bucket source.
    #[arg(long, conflicts_with = "train")]
    pub train_stats: Option<String>,
    #[command(flatten)]
    pub load: LoadArgs,
    /// Row label in the report and rendered table.
    #[arg(long, default_value = "real only")]
    pub label: String,
    /// Training-set composition recorded in the report; `real` defaults to
    /// the --train corpus size.
    #[arg(long)]
    pub counts_real: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub counts_generated: u64,
    #[arg(long, default_value_t = 0)]
    pub counts_kept: u64,
    /// Report JSON path.
    #[arg(long)]
    pub output: String,
}

pub fn run(args: &EvalArgs) -> StageResult<()> {
    let test = args.load.load(&args.test, Split::Test)?;
    let (stats, train_size) = match (&args.train, &args.train_stats) {
        (Some(path), _) => {
            let corpus = args.load.load(path, Split::Train)?;
            (FrequencyTable::from_corpus(&corpus), corpus.len() as u64)
        }
        (None, Some(path)) => {
            let file = read_stats(path)?;
            let size = file.items as u64;
            (file.frequency_table, size)
        }
        (None, None) => {
            return Err(StageFailure::new(
                Failure::Usage("one of --train or --train-stats is required".to_string()),
                "config",
            ))
        }
    };

    let mut report = match (&args.grammar, &args.adapter) {
        (Some(path), None) => {
            let grammar = load_grammar(path)?;
            let mut parser = CkyParser::new(&grammar);
            run_eval(&mut parser, &test, &stats, &args.label)?
        }
        (None, Some(cmd)) => {
            let argv = split_command(cmd).map_err(|f| StageFailure::new(f, "evaluate"))?;
            let mut parser = ExternalParser::spawn(&argv, adapter_timeout(args.timeout_secs))
                .stage("evaluate")?;
            run_eval(&mut parser, &test, &stats, &args.label)?
        }
        _ => {
            return Err(StageFailure::new(
                Failure::Usage("exactly one of --grammar or --adapter is required".to_string()),
                "config",
            ))
        }
    };
    report.counts = TrainCounts {
        real: args.counts_real.unwrap_or(train_size),
        synthetic_generated: args.counts_generated,
        synthetic_kept: args.counts_kept,
    };

    write_json_pretty(&args.output, &report)?;
    let mut manifest = Manifest::new("eval", args)?;
    manifest.record_input(&args.test)?;
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
    manifest.write(&format!("{}.manifest.json", args.output))?;
    print!("{}", render_table(&[(&report, None)]));
    Ok(())
}

pub fn run_eval(
    parser: &mut dyn BatchParser,
    test: &topaug::corpus::Corpus,
    stats: &FrequencyTable,
    label: &str,
) -> StageResult<EvalReport> {
    evaluate(parser, test, stats, label).stage("evaluate")
}
