//! The three crowdsourcing strategies (single-run baseline, criteria-ordered
//! multi-run, and adaptive short-run), the vote-source abstraction they pull
//! votes from, and the per-item belief arithmetic of the adaptive strategy.

mod baseline;
mod belief;
mod m_runs;
mod sm_runs;

pub use baseline::{run_baseline, BaselineRun};
pub use belief::{
    compute_n_min, p_consecutive_out, p_next_vote_out, posterior_update, rank_items,
    should_give_up, BeliefState, N_MIN_CAP,
};
pub use m_runs::run_m_runs;
pub use sm_runs::run_sm_runs;

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aggregate::{Aggregator, DawidSkene, MajorityVote, TrustPropagation};
use crate::decision::{ItemDecision, RunMetrics};
use crate::error::{Error, Result};
use crate::model::{CriterionId, ItemId, TaskConfig, VoteRecord};

/// A request for `n_votes` fresh votes on one (item, criterion) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteRequest {
    pub item_id: ItemId,
    pub criterion_id: CriterionId,
    pub n_votes: usize,
    pub run_index: usize,
}

/// A request the source could not fully serve (replay exhaustion).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shortfall {
    pub item_id: ItemId,
    pub criterion_id: CriterionId,
    pub missing: usize,
}

#[derive(Debug, Clone, Default)]
pub struct VoteBatch {
    pub records: Vec<VoteRecord>,
    pub shortfalls: Vec<Shortfall>,
}

/// Where votes come from: a simulated crowd or a recorded-dataset replay.
///
/// A source returns exactly the requested multiplicity per (item, criterion)
/// unless exhausted, in which case the shortfall is reported explicitly.
/// One strategy execution per source instance.
pub trait VoteSource {
    fn request_votes(&mut self, requests: &[VoteRequest]) -> Result<VoteBatch>;
    /// Votes served so far, including any the configured policy later drops.
    fn votes_served(&self) -> u64;
    /// Money spent so far according to the source's own ledger.
    fn cost_accrued(&self) -> f64;
}

/// One iteration of a strategy's vote-collection loop, for the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceIteration {
    pub run_index: usize,
    pub votes_requested: u64,
    /// Power estimates after this iteration's update.
    pub power_estimates: BTreeMap<CriterionId, f64>,
    pub items_closed_out: usize,
    pub items_closed_in: usize,
    pub items_given_up: usize,
    /// (item, criterion) pairs that ran out of recorded votes this iteration.
    pub exhausted_pairs: usize,
}

/// Decisions, metrics, and the per-iteration log of one strategy execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyOutcome {
    pub decisions: BTreeMap<ItemId, ItemDecision>,
    pub metrics: RunMetrics,
    pub trace: Vec<TraceIteration>,
}

/// Aggregator selection for the baseline strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggregatorChoice {
    MajorityVote,
    DawidSkene,
    Trust,
}

impl AggregatorChoice {
    pub fn build(&self) -> Box<dyn Aggregator> {
        match self {
            AggregatorChoice::MajorityVote => Box::new(MajorityVote),
            AggregatorChoice::DawidSkene => Box::new(DawidSkene::self_primed()),
            AggregatorChoice::Trust => Box::new(TrustPropagation::default()),
        }
    }

    pub const ALL_NAMES: &'static [&'static str] = &["mv", "em", "trust"];
}

impl FromStr for AggregatorChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<AggregatorChoice> {
        match s.to_ascii_lowercase().as_str() {
            "mv" | "majority" | "majority-vote" => Ok(AggregatorChoice::MajorityVote),
            "em" | "ds" | "dawid-skene" => Ok(AggregatorChoice::DawidSkene),
            "trust" | "tf" | "truthfinder" | "trust-propagation" => Ok(AggregatorChoice::Trust),
            other => Err(Error::InvalidParameter(format!(
                "unknown aggregator '{other}' (valid: {})",
                AggregatorChoice::ALL_NAMES.join(", ")
            ))),
        }
    }
}

impl std::fmt::Display for AggregatorChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AggregatorChoice::MajorityVote => "mv",
            AggregatorChoice::DawidSkene => "em",
            AggregatorChoice::Trust => "trust",
        })
    }
}
