pub mod augment;
pub mod eval;
pub mod filter;
pub mod generate;
pub mod make_pairs;
pub mod make_toy;
pub mod stats;
pub mod subsample;
pub mod templates;
pub mod train_parser;
