//! `topaug`: template-based synthetic data augmentation for hierarchical
//! semantic parsing, one subcommand per pipeline stage plus the end-to-end
//! `augment` workflow.

mod commands;
mod common;
mod failure;
mod manifest;

use clap::{Parser, Subcommand};

use failure::{print_error_record, Failure, StageResult};

#[derive(Parser)]
#[command(
    name = "topaug",
    version,
    about = "Synthetic data augmentation for hierarchical semantic parsing"
)]
struct Cli {
    /// Cap on worker threads for parallel stages.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Corpus statistics and the template frequency table.
    Stats(commands::stats::StatsArgs),
    /// Distinct templates with occurrence counts.
    Templates(commands::templates::TemplatesArgs),
    /// Masked-source / target pairs for generator fine-tuning.
    MakePairs(commands::make_pairs::MakePairsArgs),
    /// One item per distinct template, seeded.
    Subsample(commands::subsample::SubsampleArgs),
    /// Induce a PCFG and save it as a grammar JSON.
    TrainParser(commands::train_parser::TrainParserArgs),
    /// Sample candidate parses for every training template.
    Generate(commands::generate::GenerateArgs),
    /// Keep candidates the auxiliary parser reproduces exactly.
    Filter(commands::filter::FilterArgs),
    /// Exact-match accuracy, overall and by frequency bucket.
    Eval(commands::eval::EvalArgs),
    /// Full pipeline: induce, generate, filter, retrain, compare.
    Augment(commands::augment::AugmentArgs),
    /// Write a seeded synthetic benchmark corpus.
    MakeToy(commands::make_toy::MakeToyArgs),
}

fn dispatch(command: &Command) -> StageResult<()> {
    match command {
        Command::Stats(args) => commands::stats::run(args),
        Command::Templates(args) => commands::templates::run(args),
        Command::MakePairs(args) => commands::make_pairs::run(args),
        Command::Subsample(args) => commands::subsample::run(args),
        Command::TrainParser(args) => commands::train_parser::run(args),
        Command::Generate(args) => commands::generate::run(args),
        Command::Filter(args) => commands::filter::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Augment(args) => commands::augment::run(args),
        Command::MakeToy(args) => commands::make_toy::run(args),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{err}");
                std::process::exit(0);
            }
            eprint!("{err}");
            let failure = Failure::Usage(err.kind().to_string());
            print_error_record(&failure, "args", &[]);
            std::process::exit(failure.exit_code());
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            let failure = Failure::Usage("--jobs must be at least 1".to_string());
            print_error_record(&failure, "config", &[]);
            std::process::exit(failure.exit_code());
        }
        // Ignore failure: the pool can only be set once per process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    if let Err(sf) = dispatch(&cli.command) {
        print_error_record(&sf.failure, &sf.stage, &sf.quarantined);
        std::process::exit(sf.failure.exit_code());
    }
}
