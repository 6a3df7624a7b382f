//! Reference adapter for the line-delimited JSON protocol, plus a set of
//! deliberately misbehaving modes for conformance testing.
//!
//! Generation requests ({"id", "source", "k", ...}) get k candidate lines
//! built by filling every "[mask]" in the source with a fixed token.
//! Parse requests ({"id", "utterance"}) get a flat single-intent tree.

use std::io::{self, BufRead, Write};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Conforming behavior.
    Echo,
    /// Emit one candidate too few, then exit cleanly.
    Short,
    /// Emit a line that is not JSON.
    BadJson,
    /// Answer with a different request id.
    WrongId,
    /// Exit with a nonzero status without answering.
    Crash,
    /// Exit cleanly without answering.
    CleanExit,
    /// Never answer.
    Hang,
    /// Answer with a label no grammar knows.
    UnknownLabel,
}

#[derive(Parser)]
#[command(name = "topaug-echo-adapter", about = "Reference protocol adapter")]
struct Cli {
    #[arg(long, value_enum, default_value_t = Mode::Echo)]
    mode: Mode,
    /// Token substituted for each [mask] in generation candidates.
    #[arg(long, default_value = "echo")]
    fill: String,
}

#[derive(Deserialize)]
struct Request {
    id: u64,
    #[serde(default)]
    source: Option<String>,
    #[serde(default)]
    k: Option<usize>,
    #[serde(default)]
    utterance: Option<String>,
}

#[derive(Serialize)]
struct GenResponse {
    id: u64,
    candidate: String,
}

#[derive(Serialize)]
struct ParseResponse {
    id: u64,
    tree: String,
}

fn main() {
    let cli = Cli::parse();
    let stdin = io::stdin();
    let stdout = io::stdout();
    let mut out = stdout.lock();

    for line in stdin.lock().lines() {
        let line = match line {
            Ok(l) => l,
            Err(_) => break,
        };
        if line.trim().is_empty() {
            continue;
        }
        let req: Request = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("echo-adapter: bad request: {e}");
                std::process::exit(64);
            }
        };
        match cli.mode {
            Mode::Crash => std::process::exit(42),
            Mode::CleanExit => std::process::exit(0),
            Mode::Hang => loop {
                std::thread::sleep(std::time::Duration::from_secs(3600));
            },
            _ => {}
        }
        let id = match cli.mode {
            Mode::WrongId => req.id + 1000,
            _ => req.id,
        };
        if let Some(source) = &req.source {
            let k = req.k.unwrap_or(1);
            let emit = if cli.mode == Mode::Short { k.saturating_sub(1) } else { k };
            for _ in 0..emit {
                let candidate = match cli.mode {
                    Mode::BadJson => {
                        writeln!(out, "this is not json").unwrap();
                        continue;
                    }
                    Mode::UnknownLabel => {
                        format!("[in:zzz_bogus {} in:zzz_bogus]", cli.fill)
                    }
                    _ => source.replace("[mask]", &cli.fill),
                };
                let line = serde_json::to_string(&GenResponse { id, candidate }).unwrap();
                writeln!(out, "{line}").unwrap();
            }
            out.flush().unwrap();
            if cli.mode == Mode::Short {
                std::process::exit(0);
            }
        } else if let Some(utterance) = &req.utterance {
            let tree = if cli.mode == Mode::BadJson {
                writeln!(out, "this is not json").unwrap();
                out.flush().unwrap();
                continue;
            } else if utterance.trim().is_empty() {
                String::new()
            } else {
                format!("[IN:ECHO {} ]", utterance.trim())
            };
            let line = serde_json::to_string(&ParseResponse { id, tree }).unwrap();
            writeln!(out, "{line}").unwrap();
            out.flush().unwrap();
            if cli.mode == Mode::Short {
                std::process::exit(0);
            }
        } else {
            eprintln!("echo-adapter: request has neither source nor utterance");
            std::process::exit(64);
        }
    }
}
