//! Masked-source / full-target pairs for fine-tuning an external generator,
//! one pair per corpus item.

use clap::Args;
use serde::Serialize;

use topaug::corpus::Split;
use topaug::tree::generator_pair;

use crate::common::{write_bytes, LoadArgs};
use crate::failure::StageResult;
use crate::manifest::Manifest;

#[derive(Debug, Args, Serialize)]
pub struct MakePairsArgs {
    /// Corpus TSV to derive pairs from.
    #[arg(long)]
    pub input: String,
    #[arg(long, default_value = "train")]
    pub split: Split,
    #[command(flatten)]
    pub load: LoadArgs,
    /// Output TSV: one `source<TAB>target` line per item.
    #[arg(long)]
    pub output: String,
}

pub fn run(args: &MakePairsArgs) -> StageResult<()> {
    let corpus = args.load.load(&args.input, args.split)?;
    let mut buf = String::new();
    for item in &corpus.items {
        let pair = generator_pair(&item.tree);
        buf.push_str(&format!("{}\t{}\n", pair.source, pair.target));
    }
    write_bytes(&args.output, buf.as_bytes())?;
    let mut manifest = Manifest::new("make-pairs", args)?;
    manifest.record_input(&args.input)?;
    manifest.record_output(&args.output)?;
    manifest.write(&format!("{}.manifest.json", args.output))?;
    println!("{}: {} pairs", args.output, corpus.len());
    Ok(())
}
