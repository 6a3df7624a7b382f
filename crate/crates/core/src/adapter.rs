//! Line-delimited JSON subprocess adapters.
//!
//! An adapter reads one JSON request per line on stdin and writes JSON
//! responses on stdout. Failures split three ways: the process died
//! (`AdapterCrashed`), it answered wrongly (`ProtocolViolation`), or it
//! answered too slowly (`Timeout`).

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::pcfg::{BatchParser, ParserError};
use crate::tree::{parse_annotation, ParseTree};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AdapterErrorKind {
    #[error("adapter crashed: {0}")]
    AdapterCrashed(String),
    #[error("adapter protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("adapter timed out: {0}")]
    Timeout(String),
}

/// Generation request: fill the masks of `source`, `k` candidates.
#[derive(Debug, Serialize, Deserialize)]
pub struct GenRequest<'a> {
    pub id: u64,
    pub source: &'a str,
    pub k: u64,
    pub p: f64,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GenResponse {
    pub id: u64,
    pub candidate: String,
}

/// Parse request: `utterance` is the space-joined token sequence.
#[derive(Debug, Serialize, Deserialize)]
pub struct ParseRequest<'a> {
    pub id: u64,
    pub utterance: &'a str,
}

/// `tree` is a canonical-form annotation, or empty when unparseable.
#[derive(Debug, Serialize, Deserialize)]
pub struct ParseResponse {
    pub id: u64,
    pub tree: String,
}

/// A running adapter subprocess. Stdout is drained on a reader thread so
/// reads can time out; the child is killed on drop.
pub struct AdapterClient {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
    desc: String,
}

impl AdapterClient {
    pub fn spawn(cmd: &[String], timeout: Duration) -> Result<Self, AdapterErrorKind> {
        let desc = cmd.join(" ");
        if cmd.is_empty() {
            return Err(AdapterErrorKind::AdapterCrashed("empty adapter command".into()));
        }
        let mut child = Command::new(&cmd[0])
            .args(&cmd[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| {
                AdapterErrorKind::AdapterCrashed(format!("failed to start {desc:?}: {e}"))
            })?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout was piped");
        let (tx, lines) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(AdapterClient { child, stdin, lines, timeout, desc })
    }

    pub fn send_line(&mut self, line: &str) -> Result<(), AdapterErrorKind> {
        let stdin = match self.stdin.as_mut() {
            Some(s) => s,
            None => return Err(self.classify_closed("stdin already closed")),
        };
        let result = stdin.write_all(line.as_bytes()).and_then(|_| {
            stdin.write_all(b"\n")?;
            stdin.flush()
        });
        result.map_err(|e| self.classify_closed(&format!("write failed: {e}")))
    }

    /// Next stdout line. `context` describes what was being waited for and
    /// is included in the error.
    pub fn recv_line(&mut self, context: &str) -> Result<String, AdapterErrorKind> {
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(self.classify_closed(&format!("{context}: read failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(AdapterErrorKind::Timeout(format!(
                "{context}: no response within {:?} from {:?}",
                self.timeout, self.desc
            ))),
            Err(RecvTimeoutError::Disconnected) => Err(self.classify_closed(context)),
        }
    }

    // Stdout closed or pipe broke: a clean zero exit means the adapter
    // chose to stop answering (protocol violation), anything else is a
    // crash.
    fn classify_closed(&mut self, context: &str) -> AdapterErrorKind {
        let deadline = Instant::now() + Duration::from_millis(200);
        let status = loop {
            match self.child.try_wait() {
                Ok(Some(status)) => break Some(status),
                Ok(None) if Instant::now() < deadline => {
                    std::thread::sleep(Duration::from_millis(10))
                }
                _ => break None,
            }
        };
        match status {
            Some(st) if st.success() => AdapterErrorKind::ProtocolViolation(format!(
                "{context}: adapter {:?} closed its stream and exited cleanly",
                self.desc
            )),
            Some(st) => AdapterErrorKind::AdapterCrashed(format!(
                "{context}: adapter {:?} exited with {st}",
                self.desc
            )),
            None => AdapterErrorKind::AdapterCrashed(format!(
                "{context}: adapter {:?} closed its stream while still running",
                self.desc
            )),
        }
    }

    /// Closes stdin and reaps the child.
    pub fn finish(mut self) {
        self.stdin.take();
        let deadline = Instant::now() + Duration::from_millis(500);
        while Instant::now() < deadline {
            match self.child.try_wait() {
                Ok(Some(_)) => return,
                _ => std::thread::sleep(Duration::from_millis(10)),
            }
        }
    }
}

impl Drop for AdapterClient {
    fn drop(&mut self) {
        self.stdin.take();
        if let Ok(None) = self.child.try_wait() {
            let _ = self.child.kill();
        }
        let _ = self.child.wait();
    }
}

/// External auxiliary parser over the parse request/response protocol.
pub struct ExternalParser {
    client: AdapterClient,
    next_id: u64,
}

impl ExternalParser {
    pub fn spawn(cmd: &[String], timeout: Duration) -> Result<Self, AdapterErrorKind> {
        Ok(ExternalParser { client: AdapterClient::spawn(cmd, timeout)?, next_id: 0 })
    }
}

impl BatchParser for ExternalParser {
    /// An empty or unparseable `tree` response is a non-parse (`None`);
    /// transport and framing failures abort with partial results.
    fn parse_batch(&mut self, inputs: &[Vec<String>]) -> Result<Vec<Option<ParseTree>>, ParserError> {
        let mut out: Vec<Option<ParseTree>> = Vec::with_capacity(inputs.len());
        for tokens in inputs {
            let id = self.next_id;
            self.next_id += 1;
            let utterance = tokens.join(" ");
            let request = ParseRequest { id, utterance: &utterance };
            let line = serde_json::to_string(&request).expect("request serializes");
            if let Err(kind) = self.client.send_line(&line) {
                return Err(ParserError { kind, partial: out });
            }
            let line = match self.client.recv_line(&format!("parse request {id}")) {
                Ok(l) => l,
                Err(kind) => return Err(ParserError { kind, partial: out }),
            };
            let response: ParseResponse = match serde_json::from_str(&line) {
                Ok(r) => r,
                Err(e) => {
                    return Err(ParserError {
                        kind: AdapterErrorKind::ProtocolViolation(format!(
                            "parse request {id}: malformed response line: {e}"
                        )),
                        partial: out,
                    })
                }
            };
            if response.id != id {
                return Err(ParserError {
                    kind: AdapterErrorKind::ProtocolViolation(format!(
                        "parse request {id}: response carries id {}",
                        response.id
                    )),
                    partial: out,
                });
            }
            if response.tree.trim().is_empty() {
                out.push(None);
            } else {
                out.push(parse_annotation(&response.tree).ok());
            }
        }
        Ok(out)
    }
}
