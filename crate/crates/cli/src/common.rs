//! Shared argument groups and artifact i/o helpers.

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::Duration;

use clap::Args;
use serde::Serialize;

use topaug::corpus::{load_tsv, ColumnLayout, Corpus, Split, Strictness};
use topaug::infill::{SampleRecord, SyntheticSample};

use crate::failure::{Failure, Stage, StageResult};

/// How to read a corpus TSV, shared by every command that loads one.
#[derive(Debug, Clone, Args, Serialize)]
pub struct LoadArgs {
    /// Column layout: `standard` (raw, tokens, tree), `tree-only`, or a
    /// comma list of roles like `raw,tokens,tree`.
    #[arg(long, default_value = "standard")]
    pub columns: String,
    /// Skip bad lines (reporting them on stderr) instead of aborting.
    #[arg(long)]
    pub lenient: bool,
    /// Keep trees rooted at UNSUPPORTED* intents instead of dropping them.
    #[arg(long)]
    pub keep_unsupported: bool,
}

impl LoadArgs {
    pub fn layout(&self) -> Result<ColumnLayout, Failure> {
        self.columns.parse::<ColumnLayout>().map_err(Failure::Usage)
    }

    pub fn load(&self, path: &str, split: Split) -> StageResult<Corpus> {
        let layout = self.layout().stage("load")?;
        let strictness = if self.lenient { Strictness::Lenient } else { Strictness::Strict };
        let outcome = load_tsv(path, split, layout, strictness).stage("load")?;
        for err in &outcome.errors {
            eprintln!("{path}: skipped {err}");
        }
        let corpus = if self.keep_unsupported {
            outcome.corpus
        } else {
            outcome.corpus.without_unsupported()
        };
        if corpus.is_empty() {
            return Err(Failure::Data(format!("{path}: no usable rows")))
                .stage("load");
        }
        Ok(corpus)
    }
}

/// Splits an adapter command string into argv on whitespace.
pub fn split_command(cmd: &str) -> Result<Vec<String>, Failure> {
    let argv: Vec<String> = cmd.split_whitespace().map(String::from).collect();
    if argv.is_empty() {
        return Err(Failure::Usage("adapter command is empty".to_string()));
    }
    Ok(argv)
}

pub fn adapter_timeout(secs: u64) -> Duration {
    Duration::from_secs(secs)
}

pub fn write_json_pretty(path: &str, value: &impl Serialize) -> StageResult<()> {
    let mut text = serde_json::to_string_pretty(value).stage("write")?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

/// Creates the directory a file will land in.
pub fn create_parent(path: &str) -> StageResult<()> {
    if let Some(parent) = Path::new(path).parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| Failure::Data(format!("cannot create {}: {e}", parent.display())))
                .stage("write")?;
        }
    }
    Ok(())
}

pub fn write_bytes(path: &str, bytes: &[u8]) -> StageResult<()> {
    create_parent(path)?;
    fs::write(path, bytes)
        .map_err(|e| Failure::Data(format!("cannot write {path}: {e}")))
        .stage("write")
}

pub fn write_samples_jsonl(path: &str, samples: &[SyntheticSample]) -> StageResult<()> {
    let mut buf = Vec::new();
    for sample in samples {
        let record = SampleRecord::from(sample);
        serde_json::to_writer(&mut buf, &record).stage("write")?;
        buf.push(b'\n');
    }
    write_bytes(path, &buf)
}

pub fn read_samples_jsonl(path: &str) -> StageResult<Vec<SyntheticSample>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Data(format!("cannot read {path}: {e}")))
        .stage("read")?;
    let mut samples = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: SampleRecord = serde_json::from_str(line)
            .map_err(|e| Failure::Data(format!("{path} line {}: {e}", idx + 1)))
            .stage("read")?;
        let sample = SyntheticSample::try_from(record)
            .map_err(|e| Failure::Data(format!("{path} line {}: bad tree: {e}", idx + 1)))
            .stage("read")?;
        samples.push(sample);
    }
    Ok(samples)
}

pub fn write_corpus_tsv(path: &str, corpus: &Corpus) -> StageResult<()> {
    let mut buf = Vec::new();
    for item in &corpus.items {
        writeln!(buf, "{}\t{}\t{}", item.raw, item.tokens.join(" "), item.tree.canonical())
            .expect("vec write cannot fail");
    }
    write_bytes(path, &buf)
}
