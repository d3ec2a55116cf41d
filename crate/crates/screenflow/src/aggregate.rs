//! Vote aggregation: majority voting, Dawid-Skene expectation maximization,
//! and an iterative trust-propagation aggregator, plus the power and accuracy
//! estimators built on their outputs.
//!
//! All aggregators work on a [`CriterionSlice`] (the votes of one criterion,
//! grouped by item) and are interchangeable behind the [`Aggregator`] trait.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassAccuracy, CriterionId, ItemId, Label, UnclearPolicy, VoteStore, WorkerId};

/// Clamp bounds for worker-accuracy estimates; the model excludes
/// below-random workers.
pub const ACCURACY_FLOOR: f64 = 0.5;
pub const ACCURACY_CEIL: f64 = 1.0;

/// Default convergence settings for the iterative aggregators.
pub const DEFAULT_MAX_ITERS: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-6;
/// Default damping (fraction of the previous trust retained per update) for
/// the trust-propagation aggregator.
pub const DEFAULT_DAMPING: f64 = 0.3;

// Smoothing pseudo-observation for accuracy estimates: one extra observation
// centered on the admissible [0.5, 1] band, so zero-count cells never yield
// 0/1 accuracies and unidentifiable cells stay inside the model floor.
const PSEUDO_STRENGTH: f64 = 2.0;
const PSEUDO_MEAN: f64 = 0.75;

fn smoothed_accuracy(hit: f64, total: f64) -> f64 {
    ((PSEUDO_STRENGTH * PSEUDO_MEAN + hit) / (PSEUDO_STRENGTH + total))
        .clamp(ACCURACY_FLOOR, ACCURACY_CEIL)
}

/// Per-(item, criterion) inclusion/exclusion posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionPosterior {
    pub item_id: ItemId,
    pub criterion_id: CriterionId,
    pub p_in: f64,
    pub p_out: f64,
}

impl CriterionPosterior {
    pub fn new(item_id: ItemId, criterion_id: CriterionId, p_out: f64) -> CriterionPosterior {
        debug_assert!((0.0..=1.0).contains(&p_out));
        CriterionPosterior {
            item_id,
            criterion_id,
            p_in: 1.0 - p_out,
            p_out,
        }
    }
}

/// Estimated per-criterion accuracy of one worker, clamped to [0.5, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerAccuracyEstimate {
    pub worker_id: WorkerId,
    pub accuracy: BTreeMap<CriterionId, f64>,
}

/// Votes of one criterion grouped by item. Only binary labels remain;
/// UNCLEAR has already been resolved by the ingest policy.
#[derive(Debug, Clone)]
pub struct CriterionSlice {
    pub criterion_id: CriterionId,
    pub items: Vec<ItemVotes>,
}

#[derive(Debug, Clone)]
pub struct ItemVotes {
    pub item_id: ItemId,
    pub votes: Vec<(WorkerId, Label)>,
}

impl CriterionSlice {
    /// Extract the slice for `criterion` from a store. Items whose votes all
    /// resolve to abstentions are dropped.
    pub fn from_store(
        store: &VoteStore,
        criterion: &CriterionId,
        policy: UnclearPolicy,
    ) -> CriterionSlice {
        let mut by_item: BTreeMap<ItemId, Vec<(WorkerId, Label)>> = BTreeMap::new();
        for r in store.by_criterion(criterion) {
            if let Some(label) = policy.resolve(r.label) {
                by_item
                    .entry(r.item_id.clone())
                    .or_default()
                    .push((r.worker_id.clone(), label));
            }
        }
        CriterionSlice {
            criterion_id: criterion.clone(),
            items: by_item
                .into_iter()
                .map(|(item_id, votes)| ItemVotes { item_id, votes })
                .collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn worker_ids(&self) -> Vec<WorkerId> {
        let mut ids: Vec<WorkerId> = self
            .items
            .iter()
            .flat_map(|iv| iv.votes.iter().map(|(w, _)| w.clone()))
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }
}

/// Output contract shared by every aggregator.
#[derive(Debug, Clone)]
pub struct AggregateResult {
    pub posteriors: Vec<CriterionPosterior>,
    pub worker_accuracy: Vec<WorkerAccuracyEstimate>,
    pub converged: bool,
    pub iterations: usize,
}

pub trait Aggregator {
    fn aggregate(&self, slice: &CriterionSlice) -> Result<AggregateResult>;
    fn name(&self) -> &'static str;
}

/// Vote-fraction posterior for a single (item, criterion) vote set:
/// p_out = #OUT / (#IN + #OUT); ties yield 0.5.
pub fn majority_vote(
    item_id: &ItemId,
    criterion_id: &CriterionId,
    labels: &[Label],
) -> Result<CriterionPosterior> {
    let mut n_in = 0usize;
    let mut n_out = 0usize;
    for l in labels {
        match l {
            Label::In => n_in += 1,
            Label::Out => n_out += 1,
            Label::Unclear => {}
        }
    }
    let total = n_in + n_out;
    if total == 0 {
        return Err(Error::NoEvidence(format!(
            "no usable votes for ({item_id}, {criterion_id})"
        )));
    }
    Ok(CriterionPosterior::new(
        item_id.clone(),
        criterion_id.clone(),
        n_out as f64 / total as f64,
    ))
}

/// Majority voting behind the common aggregator interface. Worker accuracies
/// are agreement rates with the per-item vote fraction.
#[derive(Debug, Clone, Default)]
pub struct MajorityVote;

impl Aggregator for MajorityVote {
    fn aggregate(&self, slice: &CriterionSlice) -> Result<AggregateResult> {
        if slice.is_empty() {
            return Err(Error::NoEvidence(format!(
                "criterion {} has no votes",
                slice.criterion_id
            )));
        }
        let mut posteriors = Vec::with_capacity(slice.items.len());
        let mut correct_mass: BTreeMap<WorkerId, (f64, usize)> = BTreeMap::new();
        for iv in &slice.items {
            let labels: Vec<Label> = iv.votes.iter().map(|(_, l)| *l).collect();
            let post = majority_vote(&iv.item_id, &slice.criterion_id, &labels)?;
            for (w, l) in &iv.votes {
                let mass = match l {
                    Label::Out => post.p_out,
                    Label::In => post.p_in,
                    Label::Unclear => continue,
                };
                let e = correct_mass.entry(w.clone()).or_insert((0.0, 0));
                e.0 += mass;
                e.1 += 1;
            }
            posteriors.push(post);
        }
        let worker_accuracy = correct_mass
            .into_iter()
            .map(|(worker_id, (mass, n))| {
                let acc = smoothed_accuracy(mass, n as f64);
                WorkerAccuracyEstimate {
                    worker_id,
                    accuracy: BTreeMap::from([(slice.criterion_id.clone(), acc)]),
                }
            })
            .collect();
        Ok(AggregateResult {
            posteriors,
            worker_accuracy,
            converged: true,
            iterations: 1,
        })
    }

    fn name(&self) -> &'static str {
        "majority-vote"
    }
}

/// Class prior (power) used by the Dawid-Skene E-step.
#[derive(Debug, Clone)]
pub enum PriorPower {
    Fixed(f64),
    /// Mean of the majority-vote posteriors of the slice.
    FromMajorityVote,
}

/// Two-class Dawid-Skene EM.
///
/// Initialization comes from majority-vote posteriors. The E-step accepts
/// per-class worker accuracies (and frozen confusion matrices); the M-step
/// re-estimates one smoothed accuracy per worker. Non-convergence is
/// reported, not raised.
#[derive(Debug, Clone)]
pub struct DawidSkene {
    pub prior: PriorPower,
    pub max_iters: usize,
    pub tol: f64,
    /// When set, worker confusion stays frozen at the given values and the
    /// M-step is skipped: the result is the exact Bayes posterior.
    pub frozen_confusion: Option<BTreeMap<WorkerId, ClassAccuracy>>,
}

impl DawidSkene {
    pub fn with_prior(prior_power: f64) -> DawidSkene {
        DawidSkene {
            prior: PriorPower::Fixed(prior_power),
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
            frozen_confusion: None,
        }
    }

    pub fn self_primed() -> DawidSkene {
        DawidSkene {
            prior: PriorPower::FromMajorityVote,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
            frozen_confusion: None,
        }
    }

    pub fn frozen(prior_power: f64, confusion: BTreeMap<WorkerId, ClassAccuracy>) -> DawidSkene {
        DawidSkene {
            prior: PriorPower::Fixed(prior_power),
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
            frozen_confusion: Some(confusion),
        }
    }
}

impl Aggregator for DawidSkene {
    fn aggregate(&self, slice: &CriterionSlice) -> Result<AggregateResult> {
        if slice.is_empty() {
            return Err(Error::NoEvidence(format!(
                "criterion {} has no votes",
                slice.criterion_id
            )));
        }
        let workers = slice.worker_ids();
        let widx: BTreeMap<&WorkerId, usize> = workers.iter().zip(0..).collect();
        let n_items = slice.items.len();
        let n_workers = workers.len();

        // votes as (item, worker_idx, is_out)
        let mut votes: Vec<Vec<(usize, bool)>> = Vec::with_capacity(n_items);
        for iv in &slice.items {
            votes.push(
                iv.votes
                    .iter()
                    .map(|(w, l)| (widx[w], *l == Label::Out))
                    .collect(),
            );
        }

        // init from majority vote
        let mut p_out: Vec<f64> = slice
            .items
            .iter()
            .map(|iv| {
                let labels: Vec<Label> = iv.votes.iter().map(|(_, l)| *l).collect();
                majority_vote(&iv.item_id, &slice.criterion_id, &labels).map(|p| p.p_out)
            })
            .collect::<Result<_>>()?;

        let theta = match self.prior {
            PriorPower::Fixed(t) => {
                if !(t > 0.0 && t < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "prior power {t} must lie strictly between 0 and 1"
                    )));
                }
                t
            }
            PriorPower::FromMajorityVote => {
                (p_out.iter().sum::<f64>() / n_items as f64).clamp(0.01, 0.99)
            }
        };

        let mut acc_in = vec![0.75f64; n_workers];
        let mut acc_out = vec![0.75f64; n_workers];
        // M-step ties both classes to one accuracy per worker (the
        // single-value simplification); a free per-class split is
        // unidentifiable on slices without both classes present.
        let m_step = |p_out: &[f64], acc_in: &mut [f64], acc_out: &mut [f64]| {
            let mut hit = vec![0.0f64; n_workers];
            let mut tot = vec![0usize; n_workers];
            for (i, item_votes) in votes.iter().enumerate() {
                for &(w, is_out) in item_votes {
                    hit[w] += if is_out { p_out[i] } else { 1.0 - p_out[i] };
                    tot[w] += 1;
                }
            }
            for w in 0..n_workers {
                let a = smoothed_accuracy(hit[w], tot[w] as f64);
                acc_in[w] = a;
                acc_out[w] = a;
            }
        };

        if let Some(frozen) = &self.frozen_confusion {
            for (w, id) in workers.iter().enumerate() {
                let acc = frozen.get(id).ok_or_else(|| {
                    Error::InvalidParameter(format!("frozen confusion missing worker {id}"))
                })?;
                acc_in[w] = acc.on_in;
                acc_out[w] = acc.on_out;
            }
        } else {
            m_step(&p_out, &mut acc_in, &mut acc_out);
        }

        let mut converged = false;
        let mut iterations = 0;
        for it in 1..=self.max_iters {
            iterations = it;
            // E-step
            let mut delta = 0.0f64;
            for (i, item_votes) in votes.iter().enumerate() {
                let mut ll_out = theta.ln();
                let mut ll_in = (1.0 - theta).ln();
                for &(w, is_out) in item_votes {
                    if is_out {
                        ll_out += acc_out[w].ln();
                        ll_in += (1.0 - acc_in[w]).max(f64::MIN_POSITIVE).ln();
                    } else {
                        ll_out += (1.0 - acc_out[w]).max(f64::MIN_POSITIVE).ln();
                        ll_in += acc_in[w].ln();
                    }
                }
                let m = ll_out.max(ll_in);
                let eo = (ll_out - m).exp();
                let ei = (ll_in - m).exp();
                let new = eo / (eo + ei);
                delta = delta.max((new - p_out[i]).abs());
                p_out[i] = new;
            }
            if self.frozen_confusion.is_none() {
                m_step(&p_out, &mut acc_in, &mut acc_out);
            }
            if delta < self.tol {
                converged = true;
                break;
            }
        }

        let posteriors = slice
            .items
            .iter()
            .zip(&p_out)
            .map(|(iv, &po)| CriterionPosterior::new(iv.item_id.clone(), slice.criterion_id.clone(), po))
            .collect();
        let worker_accuracy =
            expected_correctness(&slice.criterion_id, &votes, &p_out, &workers);
        Ok(AggregateResult {
            posteriors,
            worker_accuracy,
            converged,
            iterations,
        })
    }

    fn name(&self) -> &'static str {
        "dawid-skene"
    }
}

/// Iterative fixed point between worker trustworthiness and label confidence.
///
/// Label confidence is the log-linear combination of the trust scores of the
/// supporting and opposing votes around the majority-vote prior; trust is the
/// posterior-weighted agreement of a worker's votes, relaxed by `damping`.
#[derive(Debug, Clone)]
pub struct TrustPropagation {
    pub damping: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub initial_trust: f64,
}

impl Default for TrustPropagation {
    fn default() -> TrustPropagation {
        TrustPropagation {
            damping: DEFAULT_DAMPING,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
            initial_trust: 0.8,
        }
    }
}

impl TrustPropagation {
    pub fn new(damping: f64, max_iters: usize, tol: f64) -> TrustPropagation {
        TrustPropagation {
            damping,
            max_iters,
            tol,
            ..TrustPropagation::default()
        }
    }
}

const TRUST_EPS: f64 = 1e-6;

impl Aggregator for TrustPropagation {
    fn aggregate(&self, slice: &CriterionSlice) -> Result<AggregateResult> {
        if slice.is_empty() {
            return Err(Error::NoEvidence(format!(
                "criterion {} has no votes",
                slice.criterion_id
            )));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::InvalidParameter(format!(
                "damping {} must lie in [0, 1)",
                self.damping
            )));
        }
        let workers = slice.worker_ids();
        let widx: BTreeMap<&WorkerId, usize> = workers.iter().zip(0..).collect();
        let n_items = slice.items.len();
        let n_workers = workers.len();
        let mut votes: Vec<Vec<(usize, bool)>> = Vec::with_capacity(n_items);
        for iv in &slice.items {
            votes.push(
                iv.votes
                    .iter()
                    .map(|(w, l)| (widx[w], *l == Label::Out))
                    .collect(),
            );
        }

        let mv_mean = slice
            .items
            .iter()
            .map(|iv| {
                let labels: Vec<Label> = iv.votes.iter().map(|(_, l)| *l).collect();
                majority_vote(&iv.item_id, &slice.criterion_id, &labels).map(|p| p.p_out)
            })
            .collect::<Result<Vec<_>>>()?
            .iter()
            .sum::<f64>()
            / n_items as f64;
        let prior_offset = logit(mv_mean.clamp(0.01, 0.99));

        let mut trust = vec![self.initial_trust; n_workers];
        let mut p_out = vec![0.5f64; n_items];
        let mut converged = false;
        let mut iterations = 0;
        for it in 1..=self.max_iters {
            iterations = it;
            // claim confidence from trust scores
            let mut delta = 0.0f64;
            for (i, item_votes) in votes.iter().enumerate() {
                let mut score = prior_offset;
                for &(w, is_out) in item_votes {
                    let tau = logit(trust[w].clamp(0.5 + TRUST_EPS, 1.0 - TRUST_EPS));
                    score += if is_out { tau } else { -tau };
                }
                let new = sigmoid(score);
                delta = delta.max((new - p_out[i]).abs());
                p_out[i] = new;
            }
            // trust from claim confidence, relaxed
            let mut mass = vec![0.0f64; n_workers];
            let mut count = vec![0usize; n_workers];
            for (i, item_votes) in votes.iter().enumerate() {
                for &(w, is_out) in item_votes {
                    mass[w] += if is_out { p_out[i] } else { 1.0 - p_out[i] };
                    count[w] += 1;
                }
            }
            for w in 0..n_workers {
                let raw = smoothed_accuracy(mass[w], count[w] as f64)
                    .clamp(0.5 + TRUST_EPS, 1.0 - TRUST_EPS);
                trust[w] = self.damping * trust[w] + (1.0 - self.damping) * raw;
            }
            if delta < self.tol {
                converged = true;
                break;
            }
        }

        let posteriors = slice
            .items
            .iter()
            .zip(&p_out)
            .map(|(iv, &po)| CriterionPosterior::new(iv.item_id.clone(), slice.criterion_id.clone(), po))
            .collect();
        let worker_accuracy = workers
            .iter()
            .zip(&trust)
            .map(|(id, &t)| WorkerAccuracyEstimate {
                worker_id: id.clone(),
                accuracy: BTreeMap::from([(
                    slice.criterion_id.clone(),
                    t.clamp(ACCURACY_FLOOR, ACCURACY_CEIL),
                )]),
            })
            .collect();
        Ok(AggregateResult {
            posteriors,
            worker_accuracy,
            converged,
            iterations,
        })
    }

    fn name(&self) -> &'static str {
        "trust-propagation"
    }
}

/// Posterior-weighted expected correctness per worker, add-one smoothed.
fn expected_correctness(
    criterion_id: &CriterionId,
    votes: &[Vec<(usize, bool)>],
    p_out: &[f64],
    workers: &[WorkerId],
) -> Vec<WorkerAccuracyEstimate> {
    let mut mass = vec![0.0f64; workers.len()];
    let mut count = vec![0usize; workers.len()];
    for (i, item_votes) in votes.iter().enumerate() {
        for &(w, is_out) in item_votes {
            mass[w] += if is_out { p_out[i] } else { 1.0 - p_out[i] };
            count[w] += 1;
        }
    }
    workers
        .iter()
        .enumerate()
        .map(|(w, id)| WorkerAccuracyEstimate {
            worker_id: id.clone(),
            accuracy: BTreeMap::from([(
                criterion_id.clone(),
                smoothed_accuracy(mass[w], count[w] as f64),
            )]),
        })
        .collect()
}

/// Estimated criterion power: mean exclusion posterior over items.
pub fn estimate_power(posteriors: &[CriterionPosterior]) -> Result<f64> {
    if posteriors.is_empty() {
        return Err(Error::NoEvidence("no posteriors to estimate power".into()));
    }
    Ok(posteriors.iter().map(|p| p.p_out).sum::<f64>() / posteriors.len() as f64)
}

/// Estimated criterion accuracy: mean per-worker estimate, clamped to [0.5, 1].
pub fn estimate_criterion_accuracy(
    estimates: &[WorkerAccuracyEstimate],
    criterion: &CriterionId,
) -> Result<f64> {
    let values: Vec<f64> = estimates
        .iter()
        .filter_map(|e| e.accuracy.get(criterion).copied())
        .collect();
    if values.is_empty() {
        return Err(Error::NoEvidence(format!(
            "no worker estimates for criterion {criterion}"
        )));
    }
    Ok((values.iter().sum::<f64>() / values.len() as f64).clamp(ACCURACY_FLOOR, ACCURACY_CEIL))
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
