//! Grammar induction: counts productions off a training corpus and writes
//! the smoothed grammar as a reusable JSON artifact.

use std::fs::File;
use std::io::BufWriter;

use clap::Args;
use serde::Serialize;

use topaug::corpus::Split;
use topaug::pcfg::{induce_grammar, SmoothingConfig};

use crate::failure::{Failure, Stage, StageResult};
use crate::common::LoadArgs;
use crate::manifest::Manifest;

#[derive(Debug, Clone, Copy, Args, Serialize)]
pub struct SmoothingArgs {
    /// Additive smoothing over each symbol's observed expansions.
    #[arg(long, default_value_t = SmoothingConfig::default().rule_alpha)]
    pub rule_alpha: f64,
    /// Emission probability reserved for out-of-vocabulary tokens.
    #[arg(long, default_value_t = SmoothingConfig::default().unknown_mass)]
    pub unknown_mass: f64,
}

impl SmoothingArgs {
    pub fn config(&self) -> SmoothingConfig {
        SmoothingConfig { rule_alpha: self.rule_alpha, unknown_mass: self.unknown_mass }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TrainParserArgs {
    /// Training corpus TSV.
    #[arg(long)]
    pub train: String,
    #[command(flatten)]
    pub load: LoadArgs,
    #[command(flatten)]
    pub smoothing: SmoothingArgs,
    /// Grammar JSON path.
    #[arg(long)]
    pub output: String,
}

pub fn run(args: &TrainParserArgs) -> StageResult<()> {
    let corpus = args.load.load(&args.train, Split::Train)?;
    let grammar = induce_grammar(&corpus, args.smoothing.config()).stage("induce")?;
    let file = File::create(&args.output)
        .map_err(|e| Failure::Data(format!("cannot write {}: {e}", args.output)))
        .stage("write")?;
    grammar.save_json(BufWriter::new(file)).stage("write")?;
    let mut manifest = Manifest::new("train-parser", args)?;
    manifest.record_input(&args.train)?;
    manifest.record_output(&args.output)?;
    manifest.write(&format!("{}.manifest.json", args.output))?;
    println!(
        "{}: {} symbols, {} binary rules, {} unary rules",
        args.output,
        grammar.symbol_count(),
        grammar.binary_rules().len(),
        grammar.unary_rules().len()
    );
    Ok(())
}

/// Loads a grammar artifact for commands that consume one.
pub fn load_grammar(path: &str) -> StageResult<topaug::pcfg::Grammar> {
    let file = File::open(path)
        .map_err(|e| Failure::Data(format!("cannot read {path}: {e}")))
        .stage("load-grammar")?;
    topaug::pcfg::Grammar::load_json(std::io::BufReader::new(file)).stage("load-grammar")
}
