//! Exact-match evaluation with accuracy split by how often each test
//! item's template occurred in training.

use serde::{Deserialize, Serialize};

use crate::corpus::{Bucket, Corpus, FrequencyTable};
use crate::pcfg::{exact_match, BatchParser, ParserError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub matched: u64,
    pub total: u64,
}

impl Ratio {
    /// `None` when the bucket is empty.
    pub fn accuracy(&self) -> Option<f64> {
        (self.total > 0).then(|| self.matched as f64 / self.total as f64)
    }

    fn add(&mut self, hit: bool) {
        self.total += 1;
        self.matched += hit as u64;
    }
}

/// Composition of the training set behind a report.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainCounts {
    pub real: u64,
    pub synthetic_generated: u64,
    pub synthetic_kept: u64,
}

impl TrainCounts {
    pub fn training_size(&self) -> u64 {
        self.real + self.synthetic_kept
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub label: String,
    pub counts: TrainCounts,
    pub overall: Ratio,
    pub at_least5: Ratio,
    pub below5: Ratio,
    pub unseen: Ratio,
}

impl EvalReport {
    pub fn bucket(&self, bucket: Bucket) -> Ratio {
        match bucket {
            Bucket::AtLeast5 => self.at_least5,
            Bucket::Below5 => self.below5,
            Bucket::Unseen => self.unseen,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("{which} totals differ: baseline {baseline}, augmented {augmented}")]
    MismatchedTotals { which: &'static str, baseline: u64, augmented: u64 },
    #[error("need at least two runs to summarize, got {runs}")]
    TooFewRuns { runs: usize },
    #[error("run {0} has no defined overall accuracy")]
    UndefinedAccuracy(usize),
}

/// Parses the whole test split and folds exact-match hits into overall and
/// per-bucket ratios. Buckets come from the template frequencies of
/// whatever training set `train_stats` describes.
pub fn evaluate(
    parser: &mut dyn BatchParser,
    test: &Corpus,
    train_stats: &FrequencyTable,
    label: impl Into<String>,
) -> Result<EvalReport, ParserError> {
    let inputs: Vec<Vec<String>> = test.items.iter().map(|it| it.tokens.clone()).collect();
    let parses = parser.parse_batch(&inputs)?;
    let mut report = EvalReport {
        label: label.into(),
        counts: TrainCounts::default(),
        overall: Ratio::default(),
        at_least5: Ratio::default(),
        below5: Ratio::default(),
        unseen: Ratio::default(),
    };
    for (item, parse) in test.items.iter().zip(&parses) {
        let hit = exact_match(parse.as_ref(), &item.tree);
        report.overall.add(hit);
        match train_stats.bucket_of(&item.template_key) {
            Bucket::AtLeast5 => report.at_least5.add(hit),
            Bucket::Below5 => report.below5.add(hit),
            Bucket::Unseen => report.unseen.add(hit),
        }
    }
    Ok(report)
}

/// Accuracy movements in percentage points, augmented minus baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub overall_pp: Option<f64>,
    pub at_least5_pp: Option<f64>,
    pub below5_pp: Option<f64>,
    pub unseen_pp: Option<f64>,
}

/// Requires both reports to cover the same test set (equal totals overall
/// and per bucket).
pub fn compare(baseline: &EvalReport, augmented: &EvalReport) -> Result<DeltaReport, EvalError> {
    let pairs = [
        ("overall", baseline.overall, augmented.overall),
        ("f>=5", baseline.at_least5, augmented.at_least5),
        ("f<5", baseline.below5, augmented.below5),
        ("f=0", baseline.unseen, augmented.unseen),
    ];
    for (which, base, aug) in pairs {
        if base.total != aug.total {
            return Err(EvalError::MismatchedTotals {
                which,
                baseline: base.total,
                augmented: aug.total,
            });
        }
    }
    let pp = |base: Ratio, aug: Ratio| match (base.accuracy(), aug.accuracy()) {
        (Some(b), Some(a)) => Some((a - b) * 100.0),
        _ => None,
    };
    Ok(DeltaReport {
        overall_pp: pp(baseline.overall, augmented.overall),
        at_least5_pp: pp(baseline.at_least5, augmented.at_least5),
        below5_pp: pp(baseline.below5, augmented.below5),
        unseen_pp: pp(baseline.unseen, augmented.unseen),
    })
}

/// Mean and spread of overall accuracy across seeds. The headline form is
/// mean ± sample standard deviation; variance and standard error ride
/// along labeled so no one mistakes one spread measure for another.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub runs: usize,
    pub mean: f64,
    pub sd: f64,
    pub variance: f64,
    pub std_error: f64,
}

impl SeedSummary {
    /// Percent form with two decimals, e.g. `72.24 ± 0.31`.
    pub fn display_percent(&self) -> String {
        format!("{:.2} \u{b1} {:.2}", self.mean * 100.0, self.sd * 100.0)
    }
}

pub fn multi_seed_summary(reports: &[EvalReport]) -> Result<SeedSummary, EvalError> {
    if reports.len() < 2 {
        return Err(EvalError::TooFewRuns { runs: reports.len() });
    }
    let mut accs = Vec::with_capacity(reports.len());
    for (i, report) in reports.iter().enumerate() {
        accs.push(report.overall.accuracy().ok_or(EvalError::UndefinedAccuracy(i))?);
    }
    let n = accs.len() as f64;
    let mean = accs.iter().sum::<f64>() / n;
    let variance = accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = variance.sqrt();
    Ok(SeedSummary { runs: accs.len(), mean, sd, variance, std_error: sd / n.sqrt() })
}

fn fmt_acc(r: Ratio) -> String {
    match r.accuracy() {
        Some(a) => format!("{:.2}", a * 100.0),
        None => "-".to_string(),
    }
}

fn fmt_delta(d: Option<f64>) -> String {
    match d {
        Some(pp) => format!(" ({pp:+.2})"),
        None => String::new(),
    }
}

/// Plain-text accuracy table; each row is a training condition, columns
/// are overall and per-bucket accuracy with parenthesized deltas against
/// the first row.
pub fn render_table(rows: &[(&EvalReport, Option<&DeltaReport>)]) -> String {
    let mut cells: Vec<[String; 6]> = vec![[
        "training data".into(),
        "#train".into(),
        "overall".into(),
        "f>=5".into(),
        "f<5".into(),
        "f=0".into(),
    ]];
    for (report, delta) in rows {
        cells.push([
            report.label.clone(),
            report.counts.training_size().to_string(),
            format!("{}{}", fmt_acc(report.overall), fmt_delta(delta.and_then(|d| d.overall_pp))),
            format!(
                "{}{}",
                fmt_acc(report.at_least5),
                fmt_delta(delta.and_then(|d| d.at_least5_pp))
            ),
            format!("{}{}", fmt_acc(report.below5), fmt_delta(delta.and_then(|d| d.below5_pp))),
            format!("{}{}", fmt_acc(report.unseen), fmt_delta(delta.and_then(|d| d.unseen_pp))),
        ]);
    }
    let widths: Vec<usize> = (0..6)
        .map(|c| cells.iter().map(|row| row[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &cells {
        for (c, cell) in row.iter().enumerate() {
            if c > 0 {
                out.push_str("  ");
            }
            out.push_str(cell);
            // Pad all but the last column.
            if c < 5 {
                for _ in cell.len()..widths[c] {
                    out.push(' ');
                }
            }
        }
        out.push('\n');
    }
    out
}
