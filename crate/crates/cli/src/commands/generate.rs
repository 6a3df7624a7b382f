//! Candidate generation: k nucleus-sampled infills per distinct training
//! template, via the built-in infiller or an external generator process.

use clap::Args;
use serde::Serialize;
use std::collections::BTreeSet;

use topaug::corpus::{Corpus, Split};
use topaug::infill::{
    exclusion_pairs, external_generate, fit_infiller, generate, generate_with_replacement,
    GenerateOptions, SyntheticSample,
};
use topaug::tree::Label;

use crate::common::{
    adapter_timeout, split_command, write_samples_jsonl, LoadArgs,
};
use crate::failure::{Failure, Stage, StageFailure, StageResult};
use crate::manifest::Manifest;

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenOptionArgs {
    /// Candidates per distinct template.
    #[arg(short, long, default_value_t = 5)]
    pub k: usize,
    /// Nucleus sampling mass, in (0, 1].
    #[arg(short, long, default_value_t = 0.9)]
    pub p: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep samples that duplicate a training pair or an earlier sample.
    #[arg(long)]
    pub no_dedup: bool,
}

impl GenOptionArgs {
    pub fn validate(&self) -> Result<GenerateOptions, Failure> {
        if self.k < 1 {
            return Err(Failure::Usage("k must be at least 1".to_string()));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Failure::Usage(format!("p must be in (0, 1], got {}", self.p)));
        }
        Ok(GenerateOptions { k: self.k, p: self.p, seed: self.seed, dedup: !self.no_dedup })
    }
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    /// Training corpus TSV; supplies templates, span statistics, and the
    /// dedup exclusion set.
    #[arg(long)]
    pub train: String,
    #[command(flatten)]
    pub load: LoadArgs,
    #[command(flatten)]
    pub opts: GenOptionArgs,
    /// External generator command (line-delimited JSON protocol); the
    /// built-in infiller runs when absent.
    #[arg(long)]
    pub adapter: Option<String>,
    /// Seconds to wait for each adapter response line.
    #[arg(long, default_value_t = 30)]
    pub timeout_secs: u64,
    /// Draw this many templates uniformly with replacement, one filling
    /// each, instead of enumerating every template k times. Built-in
    /// infiller only; k is ignored.
    #[arg(long, conflicts_with = "adapter")]
    pub sample_templates: Option<usize>,
    /// Candidates JSONL path.
    #[arg(long)]
    pub output: String,
}

pub fn corpus_labels(corpus: &Corpus) -> BTreeSet<Label> {
    corpus.items.iter().flat_map(|it| it.tree.labels()).collect()
}

/// Runs generation and returns the samples. On adapter failure the partial
/// batch is quarantined at `<output>.partial` and the failure propagates.
pub fn run_generation(
    train: &Corpus,
    opts: &GenerateOptions,
    adapter: Option<&str>,
    timeout_secs: u64,
    output: &str,
) -> StageResult<Vec<SyntheticSample>> {
    let templates = train.distinct_templates();
    match adapter {
        None => {
            let model = fit_infiller(train).stage("generate")?;
            let excl = exclusion_pairs(train);
            generate(&model, &templates, opts, &excl).stage("generate")
        }
        Some(cmd) => {
            let argv = split_command(cmd).map_err(|f| StageFailure::new(f, "generate"))?;
            let labels = corpus_labels(train);
            let outcome =
                external_generate(&argv, &templates, &labels, opts, adapter_timeout(timeout_secs));
            match outcome.failure {
                None => Ok(outcome.samples),
                Some(kind) => {
                    let quarantine = format!("{output}.partial");
                    write_samples_jsonl(&quarantine, &outcome.samples)?;
                    Err(StageFailure::new(
                        Failure::Adapter(
                            kind,
                            format!("{} samples recovered", outcome.samples.len()),
                        ),
                        "generate",
                    )
                    .with_quarantine(vec![quarantine]))
                }
            }
        }
    }
}

pub fn run(args: &GenerateArgs) -> StageResult<()> {
    let opts = args.opts.validate().map_err(|f| StageFailure::new(f, "config"))?;
    let train = args.load.load(&args.train, Split::Train)?;
    let samples = match args.sample_templates {
        Some(n) => {
            let model = fit_infiller(&train).stage("generate")?;
            let excl = exclusion_pairs(&train);
            generate_with_replacement(&model, &train.distinct_templates(), n, &opts, &excl)
                .stage("generate")?
        }
        None => run_generation(
            &train,
            &opts,
            args.adapter.as_deref(),
            args.timeout_secs,
            &args.output,
        )?,
    };
    write_samples_jsonl(&args.output, &samples)?;
    let mut manifest = Manifest::new("generate", args)?;
    manifest.record_input(&args.train)?;
    manifest.record_output(&args.output)?;
    manifest.write(&format!("{}.manifest.json", args.output))?;
    let valid = samples.iter().filter(|s| s.is_valid()).count();
    println!(
        "{}: {} candidates ({} well-formed) from {} templates",
        args.output,
        samples.len(),
        valid,
        train.distinct_templates().len()
    );
    Ok(())
}
