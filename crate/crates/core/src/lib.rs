//! Synthetic-data augmentation for hierarchical intent/slot parsing.
//!
//! The pipeline: load annotated utterances, extract templates, fit a
//! span-infill generator over mask contexts, sample synthetic annotations
//! with nucleus sampling, keep only candidates an auxiliary parser
//! reproduces exactly, then retrain and evaluate a target parser on the
//! union of real and kept synthetic data, with accuracy broken down by
//! template frequency.

pub mod adapter;
pub mod corpus;
pub mod eval;
pub mod infill;
pub mod pcfg;
pub mod toy;
pub mod tree;
