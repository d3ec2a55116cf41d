use crate::model::{CriterionId, ItemId, WorkerId};
use thiserror::Error;

/// Error type shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A value fell outside the domain an operation is defined on.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An aggregation or estimate was requested over an empty evidence set.
    #[error("no evidence: {0}")]
    NoEvidence(String),

    /// A vote with the same (worker, item, criterion, run) key was appended twice.
    #[error("duplicate vote: worker {worker} already voted on ({item}, {criterion}) in run {run_index}")]
    DuplicateVote {
        worker: WorkerId,
        item: ItemId,
        criterion: CriterionId,
        run_index: usize,
    },

    /// A vote source could not supply the votes a strategy requires to proceed.
    #[error("vote source fell short on {} item(s): {}", items.len(), format_ids(items))]
    PartialCoverage { items: Vec<ItemId> },

    /// Too many criteria to enumerate orderings exhaustively.
    #[error("permutation budget exceeded: {criteria} criteria (max {max})")]
    PermutationBudgetExceeded { criteria: usize, max: usize },

    #[error("unknown criterion: {0}")]
    UnknownCriterion(CriterionId),

    #[error("unknown item: {0}")]
    UnknownItem(ItemId),

    /// Ground truth required (metrics, simulation) but absent.
    #[error("missing gold label for item {item}{}", criterion.as_ref().map(|c| format!(", criterion {c}")).unwrap_or_default())]
    MissingGold {
        item: ItemId,
        criterion: Option<CriterionId>,
    },

    #[error("baseline of {baseline} items does not fit the pool of {pool}")]
    BaselineTooLarge { baseline: usize, pool: usize },

    /// Malformed dataset content, with a line number when one is known.
    #[error("dataset error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Dataset { line: Option<u64>, message: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Serialization / parsing failure tied to a file.
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

fn format_ids(ids: &[ItemId]) -> String {
    const SHOWN: usize = 8;
    let mut s = ids
        .iter()
        .take(SHOWN)
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    if ids.len() > SHOWN {
        s.push_str(", ...");
    }
    s
}

pub type Result<T> = std::result::Result<T, Error>;
