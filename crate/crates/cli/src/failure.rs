//! Error taxonomy mapped to process exit codes, plus the machine-readable
//! error record printed to stderr on failure.

use std::fmt;

use serde::Serialize;
use topaug::adapter::AdapterErrorKind;
use topaug::corpus::LoadError;
use topaug::eval::EvalError;
use topaug::infill::InfillError;
use topaug::pcfg::{ParserError, PcfgError};

/// Exit codes: 0 success, 1 usage, 2 data error, 3 adapter/protocol error.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Adapter(AdapterErrorKind, String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Adapter(..) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Usage(_) => "usage",
            Failure::Data(_) => "data",
            Failure::Adapter(..) => "adapter",
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) | Failure::Data(m) => m.clone(),
            Failure::Adapter(kind, m) => format!("{kind}: {m}"),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind(), self.message())
    }
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'static str,
    stage: &'a str,
    message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    quarantined: Vec<String>,
}

/// One JSON object on stderr describing the failure; `quarantined` lists
/// partial outputs preserved for inspection.
pub fn print_error_record(failure: &Failure, stage: &str, quarantined: &[String]) {
    let record = ErrorRecord {
        error: failure.kind(),
        stage,
        message: failure.message(),
        quarantined: quarantined.to_vec(),
    };
    eprintln!("{}", serde_json::to_string(&record).expect("error record serializes"));
}

/// A failure plus the pipeline stage it happened in and any quarantined
/// partial outputs.
#[derive(Debug)]
pub struct StageFailure {
    pub failure: Failure,
    pub stage: String,
    pub quarantined: Vec<String>,
}

impl StageFailure {
    pub fn new(failure: Failure, stage: impl Into<String>) -> Self {
        StageFailure { failure, stage: stage.into(), quarantined: Vec::new() }
    }

    pub fn with_quarantine(mut self, paths: Vec<String>) -> Self {
        self.quarantined = paths;
        self
    }
}

pub type StageResult<T> = Result<T, StageFailure>;

/// Tags an error with its stage name while converting to [`Failure`].
pub trait Stage<T> {
    fn stage(self, name: &str) -> StageResult<T>;
}

impl<T, E: Into<Failure>> Stage<T> for Result<T, E> {
    fn stage(self, name: &str) -> StageResult<T> {
        self.map_err(|e| StageFailure::new(e.into(), name))
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<PcfgError> for Failure {
    fn from(e: PcfgError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<InfillError> for Failure {
    fn from(e: InfillError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<AdapterErrorKind> for Failure {
    fn from(e: AdapterErrorKind) -> Self {
        Failure::Adapter(e, "adapter stage failed".to_string())
    }
}

impl From<ParserError> for Failure {
    fn from(e: ParserError) -> Self {
        Failure::Adapter(e.kind, format!("{} parses completed before failure", e.partial.len()))
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(format!("i/o: {e}"))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Data(format!("json: {e}"))
    }
}
