//! The end-to-end augmentation workflow: induce an auxiliary parser, fit
//! the infiller, generate candidates, filter them, retrain on the union,
//! and evaluate against the real-data baseline.

use std::fs::File;
use std::io::BufWriter;

use clap::Args;
use serde::Serialize;

use topaug::adapter::ExternalParser;
use topaug::corpus::{AnnotatedUtterance, Corpus, FrequencyTable, Split};
use topaug::eval::{
    compare, multi_seed_summary, render_table, DeltaReport, EvalReport, SeedSummary, TrainCounts,
};
use topaug::infill::{FilterVerdict, GenerateOptions};
use topaug::pcfg::{induce_grammar, CkyParser, FilterReport, Grammar};

use crate::commands::eval::run_eval;
use crate::commands::filter::run_filter;
use crate::commands::generate::run_generation;
use crate::commands::train_parser::SmoothingArgs;
use crate::common::{
    adapter_timeout, split_command, write_corpus_tsv, write_json_pretty, write_samples_jsonl,
    LoadArgs,
};
use crate::failure::{Failure, Stage, StageFailure, StageResult};
use crate::manifest::Manifest;

#[derive(Debug, Args, Serialize)]
pub struct AugmentArgs {
    /// Training corpus TSV.
    #[arg(long)]
    pub train: String,
    /// Test corpus TSV.
    #[arg(long)]
    pub test: String,
    /// Validation corpus TSV; recorded in the manifest for provenance.
    #[arg(long)]
    pub valid: Option<String>,
    #[command(flatten)]
    pub load: LoadArgs,
    /// Candidates per distinct template.
    #[arg(short, long, default_value_t = 5)]
    pub k: usize,
    /// Nucleus sampling mass, in (0, 1].
    #[arg(short, long, default_value_t = 0.9)]
    pub p: f64,
    /// Run once per seed; two or more seeds add a mean +/- sd summary.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub no_dedup: bool,
    #[command(flatten)]
    pub smoothing: SmoothingArgs,
    /// External generator command; the built-in infiller runs when absent.
    #[arg(long)]
    pub generator_cmd: Option<String>,
    /// External auxiliary-parser command; built-in CKY when absent.
    #[arg(long)]
    pub parser_cmd: Option<String>,
    #[arg(long, default_value_t = 30)]
    pub timeout_secs: u64,
    /// Subsample one item per template before training anything.
    #[arg(long)]
    pub low_resource: bool,
    /// Template cap for --low-resource subsampling.
    #[arg(long)]
    pub cap: Option<usize>,
    /// Directory for all artifacts (per-seed subdirectories inside).
    #[arg(long, env = "TOPAUG_OUT_DIR")]
    pub out_dir: String,
}

impl AugmentArgs {
    fn validate(&self) -> Result<(), Failure> {
        if self.k < 1 {
            return Err(Failure::Usage("k must be at least 1".to_string()));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Failure::Usage(format!("p must be in (0, 1], got {}", self.p)));
        }
        if self.seeds.is_empty() {
            return Err(Failure::Usage("at least one seed is required".to_string()));
        }
        if self.cap.is_some() && !self.low_resource {
            return Err(Failure::Usage("--cap requires --low-resource".to_string()));
        }
        if self.cap == Some(0) {
            return Err(Failure::Usage("--cap must be at least 1".to_string()));
        }
        Ok(())
    }
}

/// Everything one seed produced, for the summary and the exit status.
#[derive(Debug, Serialize)]
pub struct SeedRun {
    pub seed: u64,
    pub train_items: usize,
    pub generated: usize,
    pub kept: usize,
    pub baseline: EvalReport,
    pub augmented: EvalReport,
    pub delta: DeltaReport,
}

#[derive(Debug, Serialize)]
pub struct AugmentSummary {
    pub seeds: Vec<u64>,
    pub runs: Vec<SeedRun>,
    /// Present with two or more seeds.
    pub baseline_overall: Option<SeedSummary>,
    pub augmented_overall: Option<SeedSummary>,
    pub baseline_display: Option<String>,
    pub augmented_display: Option<String>,
}

fn save_grammar(grammar: &Grammar, path: &str) -> StageResult<()> {
    crate::common::create_parent(path)?;
    let file = File::create(path)
        .map_err(|e| Failure::Data(format!("cannot write {path}: {e}")))
        .stage("write")?;
    grammar.save_json(BufWriter::new(file)).stage("write")
}

/// One full augmentation round. `train_full` is the corpus as loaded; the
/// low-resource protocol subsamples it per seed before anything trains.
#[allow(clippy::too_many_arguments)]
fn run_seed(
    args: &AugmentArgs,
    train_full: &Corpus,
    test: &Corpus,
    seed: u64,
    seed_dir: &str,
    outputs: &mut Vec<String>,
) -> StageResult<SeedRun> {
    fn record(path: String, outputs: &mut Vec<String>) -> String {
        outputs.push(path.clone());
        path
    }

    let train_used: Corpus = if args.low_resource {
        let sub = train_full.subsample_one_per_template(seed, args.cap);
        let path = record(format!("{seed_dir}/subsample.tsv"), outputs);
        write_corpus_tsv(&path, &sub)?;
        sub
    } else {
        train_full.clone()
    };
    let stats = FrequencyTable::from_corpus(&train_used);
    let smoothing = args.smoothing.config();

    // One grammar serves as both the baseline target parser and the
    // auxiliary parser: both are trained on exactly the real data.
    let baseline_grammar = induce_grammar(&train_used, smoothing).stage("induce")?;
    let path = record(format!("{seed_dir}/grammar_baseline.json"), outputs);
    save_grammar(&baseline_grammar, &path)?;

    let mut baseline = {
        let mut parser = CkyParser::new(&baseline_grammar);
        run_eval(&mut parser, test, &stats, "real only")?
    };
    baseline.counts = TrainCounts {
        real: train_used.len() as u64,
        synthetic_generated: 0,
        synthetic_kept: 0,
    };
    let path = record(format!("{seed_dir}/eval_baseline.json"), outputs);
    write_json_pretty(&path, &baseline)?;

    let opts = GenerateOptions { k: args.k, p: args.p, seed, dedup: !args.no_dedup };
    let samples_path = record(format!("{seed_dir}/samples.jsonl"), outputs);
    let mut samples = run_generation(
        &train_used,
        &opts,
        args.generator_cmd.as_deref(),
        args.timeout_secs,
        &samples_path,
    )?;
    let generated = samples.len();

    let report: FilterReport = match &args.parser_cmd {
        None => {
            let mut parser = CkyParser::new(&baseline_grammar);
            run_filter(&mut parser, &mut samples, Some(&stats), &samples_path)?
        }
        Some(cmd) => {
            let argv = split_command(cmd).map_err(|f| StageFailure::new(f, "filter"))?;
            let mut parser = ExternalParser::spawn(&argv, adapter_timeout(args.timeout_secs))
                .stage("filter")?;
            run_filter(&mut parser, &mut samples, Some(&stats), &samples_path)?
        }
    };
    write_samples_jsonl(&samples_path, &samples)?;
    let path = record(format!("{seed_dir}/filter_report.json"), outputs);
    write_json_pretty(&path, &report)?;

    let kept_items: Vec<AnnotatedUtterance> = samples
        .iter()
        .filter(|s| s.verdict == FilterVerdict::Kept)
        .map(|s| {
            let tree = s.tree.clone().expect("kept samples carry trees");
            AnnotatedUtterance::from_tree(tree.utterance().join(" "), tree)
        })
        .collect();
    let kept = kept_items.len();

    let mut union_items = train_used.items.clone();
    union_items.extend(kept_items);
    let union = Corpus::new(Split::Train, union_items);
    let augmented_grammar = induce_grammar(&union, smoothing).stage("retrain")?;
    let path = record(format!("{seed_dir}/grammar_augmented.json"), outputs);
    save_grammar(&augmented_grammar, &path)?;

    let mut augmented = {
        let mut parser = CkyParser::new(&augmented_grammar);
        run_eval(&mut parser, test, &stats, "real + synthetic")?
    };
    augmented.counts = TrainCounts {
        real: train_used.len() as u64,
        synthetic_generated: generated as u64,
        synthetic_kept: kept as u64,
    };
    let path = record(format!("{seed_dir}/eval_augmented.json"), outputs);
    write_json_pretty(&path, &augmented)?;

    let delta = compare(&baseline, &augmented).stage("compare")?;
    let path = record(format!("{seed_dir}/delta.json"), outputs);
    write_json_pretty(&path, &delta)?;

    Ok(SeedRun {
        seed,
        train_items: train_used.len(),
        generated,
        kept,
        baseline,
        augmented,
        delta,
    })
}

pub fn run(args: &AugmentArgs) -> StageResult<()> {
    args.validate().map_err(|f| StageFailure::new(f, "config"))?;
    let train_full = args.load.load(&args.train, Split::Train)?;
    let test = args.load.load(&args.test, Split::Test)?;

    let mut outputs: Vec<String> = Vec::new();
    let mut runs: Vec<SeedRun> = Vec::new();
    for &seed in &args.seeds {
        let seed_dir = format!("{}/seed-{seed}", args.out_dir);
        let run = run_seed(args, &train_full, &test, seed, &seed_dir, &mut outputs)?;
        println!("seed {seed}");
        print!(
            "{}",
            render_table(&[(&run.baseline, None), (&run.augmented, Some(&run.delta))])
        );
        println!();
        runs.push(run);
    }

    let (baseline_overall, augmented_overall, baseline_display, augmented_display) =
        if runs.len() >= 2 {
            let base_reports: Vec<EvalReport> = runs.iter().map(|r| r.baseline.clone()).collect();
            let aug_reports: Vec<EvalReport> = runs.iter().map(|r| r.augmented.clone()).collect();
            let base = multi_seed_summary(&base_reports).stage("summarize")?;
            let aug = multi_seed_summary(&aug_reports).stage("summarize")?;
            let bd = base.display_percent();
            let ad = aug.display_percent();
            println!("baseline overall:  {bd}");
            println!("augmented overall: {ad}");
            (Some(base), Some(aug), Some(bd), Some(ad))
        } else {
            (None, None, None, None)
        };

    let summary = AugmentSummary {
        seeds: args.seeds.clone(),
        runs,
        baseline_overall,
        augmented_overall,
        baseline_display,
        augmented_display,
    };
    let summary_path = format!("{}/summary.json", args.out_dir);
    write_json_pretty(&summary_path, &summary)?;
    outputs.push(summary_path);

    let mut manifest = Manifest::new("augment", args)?;
    manifest.record_input(&args.train)?;
    manifest.record_input(&args.test)?;
    if let Some(path) = &args.valid {
        manifest.record_input(path)?;
    }
    for path in &outputs {
        manifest.record_output(path)?;
    }
    manifest.write(&format!("{}/manifest.json", args.out_dir))?;
    Ok(())
}
