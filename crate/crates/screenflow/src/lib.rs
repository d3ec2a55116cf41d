//! Crowd-based multi-predicate screening for finite-pool classification.
//!
//! The crate models the screening of a fixed pool of items against a set of
//! exclusion criteria by a noisy crowd: a statistical crowd simulator, vote
//! aggregators (majority voting, Dawid-Skene EM, trust propagation), the
//! exclusion calculus that turns per-criterion posteriors into decisions,
//! three crowdsourcing strategies (a single-run baseline, a criteria-ordered
//! multi-run strategy, and an adaptive per-item short-run strategy), and a
//! replay engine over recorded vote datasets.

pub mod aggregate;
pub mod decision;
pub mod error;
pub mod model;

pub use error::{Error, Result};
