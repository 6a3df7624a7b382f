//! Distinct templates with occurrence counts, most frequent first.

use clap::Args;
use serde::Serialize;

use topaug::corpus::{FrequencyTable, Split};

use crate::common::{write_bytes, LoadArgs};
use crate::failure::StageResult;
use crate::manifest::Manifest;

#[derive(Debug, Args, Serialize)]
pub struct TemplatesArgs {
    /// Corpus TSV to extract templates from.
    #[arg(long)]
    pub input: String,
    #[arg(long, default_value = "train")]
    pub split: Split,
    #[command(flatten)]
    pub load: LoadArgs,
    /// Output TSV: one `count<TAB>template` line, count descending.
    #[arg(long)]
    pub output: String,
}

pub fn run(args: &TemplatesArgs) -> StageResult<()> {
    let corpus = args.load.load(&args.input, args.split)?;
    let table = FrequencyTable::from_corpus(&corpus);
    let mut buf = String::new();
    for (key, count) in table.sorted_counts() {
        buf.push_str(&format!("{count}\t{key}\n"));
    }
    write_bytes(&args.output, buf.as_bytes())?;
    let mut manifest = Manifest::new("templates", args)?;
    manifest.record_input(&args.input)?;
    manifest.record_output(&args.output)?;
    manifest.write(&format!("{}.manifest.json", args.output))?;
    println!("{}: {} distinct templates", args.output, table.distinct());
    Ok(())
}
