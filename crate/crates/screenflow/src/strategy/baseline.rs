//! Single-run baseline: J votes per (item, criterion), one aggregation pass,
//! one combined exclusion decision per item. Also provides the shared
//! baseline-iteration machinery the multi-run strategies estimate from.

use std::collections::BTreeMap;

use crate::aggregate::{
    estimate_criterion_accuracy, estimate_power, Aggregator, CriterionSlice, ACCURACY_CEIL,
    ACCURACY_FLOOR,
};
use crate::decision::{combine_exclusion, compute_metrics, decision_threshold, ItemDecision};
use crate::error::{Error, Result};
use crate::model::{CriterionId, Item, ItemId, TaskConfig, VoteStore};
use crate::strategy::{
    AggregatorChoice, StrategyOutcome, TraceIteration, VoteRequest, VoteSource,
};

/// Result of one baseline iteration: per-item combined decisions plus the
/// power and accuracy estimates the multi-run strategies feed on.
#[derive(Debug, Clone)]
pub struct BaselineRun {
    pub decisions: BTreeMap<ItemId, ItemDecision>,
    pub power: BTreeMap<CriterionId, f64>,
    pub accuracy: BTreeMap<CriterionId, f64>,
    pub votes_requested: u64,
}

/// Collect J votes on every (item, criterion), aggregate per criterion, and
/// classify each item through the combined exclusion rule.
///
/// A source shortfall (or an item left without usable evidence) is a
/// partial-coverage error naming the affected items.
pub fn baseline_iteration(
    items: &[Item],
    criteria: &[CriterionId],
    source: &mut dyn VoteSource,
    config: &TaskConfig,
    aggregator: &dyn Aggregator,
    run_index: usize,
) -> Result<BaselineRun> {
    if items.is_empty() {
        return Err(Error::InvalidParameter("no items to classify".into()));
    }
    if criteria.is_empty() {
        return Err(Error::InvalidParameter("no criteria defined".into()));
    }
    let j = config.votes_per_item;
    let requests: Vec<VoteRequest> = items
        .iter()
        .flat_map(|item| {
            criteria.iter().map(move |c| VoteRequest {
                item_id: item.id.clone(),
                criterion_id: c.clone(),
                n_votes: j,
                run_index,
            })
        })
        .collect();
    let batch = source.request_votes(&requests)?;
    if !batch.shortfalls.is_empty() {
        let mut short: Vec<ItemId> = batch.shortfalls.iter().map(|s| s.item_id.clone()).collect();
        short.sort();
        short.dedup();
        return Err(Error::PartialCoverage { items: short });
    }
    let votes_requested = batch.records.len() as u64;
    let mut store = VoteStore::new();
    store.append_all(batch.records)?;

    let policy = config.unclear_policy();
    let threshold = decision_threshold(config.loss_ratio)?;
    let mut p_in_by_item: BTreeMap<ItemId, Vec<f64>> = BTreeMap::new();
    let mut power = BTreeMap::new();
    let mut accuracy = BTreeMap::new();
    for criterion in criteria {
        let slice = CriterionSlice::from_store(&store, criterion, policy);
        // every item must carry evidence for every criterion
        if slice.items.len() != items.len() {
            let mut missing: Vec<ItemId> = items
                .iter()
                .map(|i| i.id.clone())
                .filter(|id| !slice.items.iter().any(|iv| &iv.item_id == id))
                .collect();
            missing.sort();
            return Err(Error::PartialCoverage { items: missing });
        }
        let result = aggregator.aggregate(&slice)?;
        power.insert(criterion.clone(), estimate_power(&result.posteriors)?);
        accuracy.insert(
            criterion.clone(),
            estimate_criterion_accuracy(&result.worker_accuracy, criterion)?,
        );
        for posterior in &result.posteriors {
            p_in_by_item
                .entry(posterior.item_id.clone())
                .or_default()
                .push(posterior.p_in);
        }
    }

    let mut decisions = BTreeMap::new();
    for item in items {
        let p_in = &p_in_by_item[&item.id];
        let p_out = combine_exclusion(p_in)?;
        let decision = if p_out >= threshold {
            ItemDecision::Out
        } else {
            ItemDecision::In
        };
        decisions.insert(item.id.clone(), decision);
    }
    Ok(BaselineRun {
        decisions,
        power,
        accuracy,
        votes_requested,
    })
}

/// The baseline single-run strategy: one fixed-J run over all items with the
/// chosen aggregator. Never emits LEFT_TO_EXPERT.
pub fn run_baseline(
    items: &[Item],
    criteria: &[CriterionId],
    source: &mut dyn VoteSource,
    config: &TaskConfig,
    aggregator_choice: AggregatorChoice,
) -> Result<StrategyOutcome> {
    config.validate()?;
    let votes_before = source.votes_served();
    let cost_before = source.cost_accrued();
    let aggregator = aggregator_choice.build();
    let run = baseline_iteration(items, criteria, source, config, aggregator.as_ref(), 0)?;
    let votes_used = source.votes_served() - votes_before;
    let mut metrics = compute_metrics(&run.decisions, items, config, votes_used)?;
    if config.price_from_ledger {
        metrics.price = source.cost_accrued() - cost_before;
    }
    let closed_out = run
        .decisions
        .values()
        .filter(|d| **d == ItemDecision::Out)
        .count();
    let trace = vec![TraceIteration {
        run_index: 0,
        votes_requested: run.votes_requested,
        power_estimates: run.power.clone(),
        items_closed_out: closed_out,
        items_closed_in: run.decisions.len() - closed_out,
        items_given_up: 0,
        exhausted_pairs: 0,
    }];
    Ok(StrategyOutcome {
        decisions: run.decisions,
        metrics,
        trace,
    })
}

/// Estimated accuracy with the configured sensitivity bias applied.
pub(crate) fn biased_accuracy(raw: f64, config: &TaskConfig) -> f64 {
    (raw + config.accuracy_estimate_bias).clamp(ACCURACY_FLOOR, ACCURACY_CEIL)
}
