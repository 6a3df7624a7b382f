//! Corpus statistics: split size, template counts, frequency skew, and the
//! full template frequency table for downstream bucket assignment.

use std::collections::BTreeMap;

use clap::Args;
use serde::{Deserialize, Serialize};

use topaug::corpus::{Bucket, FrequencyTable, Split};

use crate::common::{write_json_pretty, LoadArgs};
use crate::failure::{Stage, StageResult};
use crate::manifest::Manifest;

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    /// Corpus TSV to analyze.
    #[arg(long)]
    pub input: String,
    /// Which split the corpus represents.
    #[arg(long, default_value = "train")]
    pub split: Split,
    #[command(flatten)]
    pub load: LoadArgs,
    /// Stats JSON path.
    #[arg(long)]
    pub output: String,
    /// Also write the rank/count series as CSV, for log-log plots.
    #[arg(long)]
    pub rank_csv: Option<String>,
}

/// The stats artifact. `frequency_table` carries every template count so
/// other commands can rebuild buckets without the original corpus.
#[derive(Debug, Serialize, Deserialize)]
pub struct StatsFile {
    pub split: String,
    pub items: usize,
    pub distinct_templates: usize,
    pub top10_template_mass: f64,
    pub singleton_template_fraction: f64,
    /// Distinct templates per frequency bucket.
    pub bucket_template_types: BTreeMap<String, u64>,
    /// Items per frequency bucket.
    pub bucket_item_counts: BTreeMap<String, u64>,
    /// (rank, count) pairs, rank 1 = most frequent template.
    pub rank_frequency: Vec<(usize, u64)>,
    pub frequency_table: FrequencyTable,
}

pub fn build_stats(split: Split, corpus: &topaug::corpus::Corpus) -> StatsFile {
    let table = FrequencyTable::from_corpus(corpus);
    let mut bucket_types: BTreeMap<String, u64> = BTreeMap::new();
    let mut bucket_items: BTreeMap<String, u64> = BTreeMap::new();
    for (_, count) in table.iter() {
        let bucket = if count >= 5 { Bucket::AtLeast5 } else { Bucket::Below5 };
        *bucket_types.entry(bucket.to_string()).or_insert(0) += 1;
        *bucket_items.entry(bucket.to_string()).or_insert(0) += count;
    }
    StatsFile {
        split: split.to_string(),
        items: corpus.len(),
        distinct_templates: table.distinct(),
        top10_template_mass: table.top_k_mass(10),
        singleton_template_fraction: table.singleton_fraction(),
        bucket_template_types: bucket_types,
        bucket_item_counts: bucket_items,
        rank_frequency: table.rank_frequency(),
        frequency_table: table,
    }
}

pub fn run(args: &StatsArgs) -> StageResult<()> {
    let corpus = args.load.load(&args.input, args.split)?;
    let stats = build_stats(args.split, &corpus);
    write_json_pretty(&args.output, &stats)?;
    let mut manifest = Manifest::new("stats", args)?;
    manifest.record_input(&args.input)?;
    manifest.record_output(&args.output)?;
    if let Some(path) = &args.rank_csv {
        let mut csv = String::from("rank,count\n");
        for (rank, count) in &stats.rank_frequency {
            csv.push_str(&format!("{rank},{count}\n"));
        }
        crate::common::write_bytes(path, csv.as_bytes())?;
        manifest.record_output(path)?;
    }
    manifest.write(&format!("{}.manifest.json", args.output))?;
    println!(
        "{}: {} items, {} templates, top-10 mass {:.1}%, singletons {:.1}%",
        args.input,
        stats.items,
        stats.distinct_templates,
        stats.top10_template_mass * 100.0,
        stats.singleton_template_fraction * 100.0
    );
    Ok(())
}

/// Reads back a stats artifact, for commands that need its buckets.
pub fn read_stats(path: &str) -> StageResult<StatsFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| crate::failure::Failure::Data(format!("cannot read {path}: {e}")))
        .stage("read-stats")?;
    serde_json::from_str(&text)
        .map_err(|e| crate::failure::Failure::Data(format!("{path}: {e}")))
        .stage("read-stats")
}
