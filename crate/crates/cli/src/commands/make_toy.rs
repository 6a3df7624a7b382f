//! Synthetic benchmark corpora: a seeded toy world with Zipf-distributed
//! templates, written as standard-layout TSVs.

use clap::Args;
use serde::Serialize;

use topaug::corpus::Split;
use topaug::toy::{sample_corpus, ToyConfig};

use crate::common::write_corpus_tsv;
use crate::failure::{Failure, StageFailure, StageResult};
use crate::manifest::Manifest;

#[derive(Debug, Args, Serialize)]
pub struct MakeToyArgs {
    /// Directory receiving train.tsv / valid.tsv / test.tsv.
    #[arg(long, env = "TOPAUG_OUT_DIR")]
    pub out_dir: String,
    /// Base seed; splits draw from seed, seed+1, seed+2 respectively.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2000)]
    pub train_items: usize,
    #[arg(long, default_value_t = 0)]
    pub valid_items: usize,
    #[arg(long, default_value_t = 500)]
    pub test_items: usize,
    #[arg(long, default_value_t = ToyConfig::default().intents)]
    pub intents: usize,
    #[arg(long, default_value_t = ToyConfig::default().slots)]
    pub slots: usize,
    #[arg(long, default_value_t = ToyConfig::default().pool_size)]
    pub pool_size: usize,
    /// Skew of the template distribution; higher concentrates mass.
    #[arg(long, default_value_t = ToyConfig::default().zipf_exponent)]
    pub zipf_exponent: f64,
    #[arg(long, default_value_t = ToyConfig::default().carrier_words)]
    pub carrier_words: usize,
    #[arg(long, default_value_t = ToyConfig::default().slot_words)]
    pub slot_words: usize,
    /// Chance a slot span borrows a word from the next slot's vocabulary,
    /// the toy world's source of parsing ambiguity.
    #[arg(long, default_value_t = ToyConfig::default().slot_borrow_prob)]
    pub slot_borrow_prob: f64,
    #[arg(long, default_value_t = ToyConfig::default().shared_fillers)]
    pub shared_fillers: usize,
    #[arg(long, default_value_t = ToyConfig::default().pool_seed)]
    pub pool_seed: u64,
}

impl MakeToyArgs {
    fn config(&self) -> ToyConfig {
        ToyConfig {
            intents: self.intents,
            slots: self.slots,
            pool_size: self.pool_size,
            zipf_exponent: self.zipf_exponent,
            carrier_words: self.carrier_words,
            slot_words: self.slot_words,
            slot_borrow_prob: self.slot_borrow_prob,
            shared_fillers: self.shared_fillers,
            pool_seed: self.pool_seed,
        }
    }
}

pub fn run(args: &MakeToyArgs) -> StageResult<()> {
    if args.train_items == 0 {
        return Err(StageFailure::new(
            Failure::Usage("--train-items must be at least 1".to_string()),
            "config",
        ));
    }
    if args.intents == 0 || args.slots == 0 || args.pool_size == 0 {
        return Err(StageFailure::new(
            Failure::Usage("intents, slots, and pool-size must all be positive".to_string()),
            "config",
        ));
    }
    let cfg = args.config();
    let mut manifest = Manifest::new("make-toy", args)?;
    let plan = [
        (Split::Train, args.train_items, args.seed),
        (Split::Valid, args.valid_items, args.seed + 1),
        (Split::Test, args.test_items, args.seed + 2),
    ];
    for (split, n, seed) in plan {
        if n == 0 {
            continue;
        }
        let corpus = sample_corpus(&cfg, seed, n, split);
        let path = format!("{}/{split}.tsv", args.out_dir);
        write_corpus_tsv(&path, &corpus)?;
        manifest.record_output(&path)?;
        println!("{path}: {n} items");
    }
    manifest.write(&format!("{}/manifest.json", args.out_dir))?;
    Ok(())
}
