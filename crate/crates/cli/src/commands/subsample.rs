//! Low-resource subsampling: one uniformly chosen item per distinct
//! template, optionally capped.

use clap::Args;
use serde::Serialize;

use topaug::corpus::Split;

use crate::common::{write_corpus_tsv, LoadArgs};
use crate::failure::StageResult;
use crate::manifest::Manifest;

#[derive(Debug, Args, Serialize)]
pub struct SubsampleArgs {
    /// Corpus TSV to subsample.
    #[arg(long)]
    pub input: String,
    #[arg(long, default_value = "train")]
    pub split: Split,
    #[command(flatten)]
    pub load: LoadArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep at most this many templates (chosen by a seeded shuffle).
    #[arg(long)]
    pub cap: Option<usize>,
    /// Output TSV in standard layout.
    #[arg(long)]
    pub output: String,
}

pub fn run(args: &SubsampleArgs) -> StageResult<()> {
    let corpus = args.load.load(&args.input, args.split)?;
    let sub = corpus.subsample_one_per_template(args.seed, args.cap);
    write_corpus_tsv(&args.output, &sub)?;
    let mut manifest = Manifest::new("subsample", args)?;
    manifest.record_input(&args.input)?;
    manifest.record_output(&args.output)?;
    manifest.write(&format!("{}.manifest.json", args.output))?;
    println!("{}: {} of {} items kept", args.output, sub.len(), corpus.len());
    Ok(())
}
