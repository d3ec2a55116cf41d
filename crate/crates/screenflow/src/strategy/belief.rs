//! Per-item belief arithmetic for the adaptive strategy: Bayesian posterior
//! updates from vote counts, the minimal number of consecutive OUT votes
//! needed to cross the exclusion bar, and the value ranking built on both.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::decision::combine_exclusion;
use crate::error::{Error, Result};
use crate::model::{CriterionId, ItemId, TaskConfig};

/// Search cap for N-min; beyond this the threshold counts as unreachable.
pub const N_MIN_CAP: usize = 1000;

/// P(item IN for one criterion | votes), from the binomial vote likelihood
/// and the estimated power as prior.
///
/// Degenerate priors short-circuit: theta 0 returns 1, theta 1 returns 0.
pub fn posterior_update(theta: f64, j_in: usize, j_out: usize, accuracy: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidParameter(format!(
            "power {theta} not in [0, 1]"
        )));
    }
    if !(0.5..=1.0).contains(&accuracy) {
        return Err(Error::InvalidParameter(format!(
            "accuracy {accuracy} not in [0.5, 1]"
        )));
    }
    if theta == 0.0 {
        return Ok(1.0);
    }
    if theta == 1.0 {
        return Ok(0.0);
    }
    // binomial coefficients cancel between the two likelihoods
    let like_in = accuracy.powi(j_in as i32) * (1.0 - accuracy).powi(j_out as i32);
    let like_out = accuracy.powi(j_out as i32) * (1.0 - accuracy).powi(j_in as i32);
    let num = like_in * (1.0 - theta);
    let den = num + like_out * theta;
    if den == 0.0 {
        // contradictory certain evidence (accuracy 1 with both vote kinds)
        return Ok(1.0 - theta);
    }
    Ok(num / den)
}

/// Probability that the next vote is OUT given the current inclusion belief.
pub fn p_next_vote_out(p_in: f64, accuracy: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p_in));
    debug_assert!((0.5..=1.0).contains(&accuracy));
    accuracy * (1.0 - p_in) + (1.0 - accuracy) * p_in
}

/// Bayes update of the inclusion belief after observing one OUT vote.
fn update_after_out(p_in: f64, accuracy: f64) -> f64 {
    let num = p_in * (1.0 - accuracy);
    let den = num + (1.0 - p_in) * accuracy;
    if den == 0.0 {
        return p_in;
    }
    num / den
}

/// Probability of observing `n` consecutive OUT votes: the chained product of
/// `p_next_vote_out` with the belief re-updated after each hypothetical vote.
///
/// Algebraically equal to the marginal p_in (1-a)^n + (1-p_in) a^n.
pub fn p_consecutive_out(p_in: f64, accuracy: f64, n: usize) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidParameter(
            "p_consecutive_out requires n >= 1".into(),
        ));
    }
    let mut p = p_in;
    let mut prob = 1.0;
    for _ in 0..n {
        let step = p_next_vote_out(p, accuracy);
        prob *= step;
        if prob == 0.0 {
            break;
        }
        p = update_after_out(p, accuracy);
    }
    Ok(prob)
}

/// Minimal number of successive OUT votes on one criterion that pushes the
/// combined exclusion probability past `p_out_threshold`.
///
/// Returns 1 when the threshold is already crossed (the caller is expected to
/// close such items before ranking); `None` when no finite count up to
/// [`N_MIN_CAP`] reaches it, in particular at accuracy exactly 0.5.
pub fn compute_n_min(
    p_in_current: f64,
    other_p_in: &[f64],
    accuracy: f64,
    p_out_threshold: f64,
) -> Option<usize> {
    debug_assert!((0.0..=1.0).contains(&p_in_current));
    debug_assert!((0.5..=1.0).contains(&accuracy));
    let q_others: f64 = other_p_in.iter().product();
    let target = 1.0 - p_out_threshold;
    // n = 0: already decidable
    if p_in_current * q_others < target {
        return Some(1);
    }
    if accuracy <= 0.5 {
        return None; // uninformative likelihood, posterior never moves
    }
    if p_in_current >= 1.0 {
        return None; // degenerate certainty, no finite evidence flips it
    }
    // log-odds walk: each OUT vote adds ln((1-a)/a) < 0
    let step = ((1.0 - accuracy) / accuracy).ln();
    let mut log_odds = (p_in_current / (1.0 - p_in_current)).ln();
    for n in 1..=N_MIN_CAP {
        log_odds += step;
        let p_in_n = 1.0 / (1.0 + (-log_odds).exp());
        if p_in_n * q_others < target {
            return Some(n);
        }
    }
    None
}

/// True when polling the crowd further on an item is no longer worth it:
/// zero value, or expected votes per unit of exclusion probability beyond
/// the configured stop threshold.
pub fn should_give_up(value: f64, config: &TaskConfig) -> bool {
    debug_assert!(value >= 0.0);
    value <= 0.0 || 1.0 / value > config.stop_threshold
}

/// Everything the adaptive strategy believes about one undecided item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    pub item_id: ItemId,
    /// Per-criterion inclusion probabilities.
    pub p_in: BTreeMap<CriterionId, f64>,
    /// Combined exclusion probability (1 - prod p_in).
    pub p_out_combined: f64,
    /// Consecutive OUT votes needed per criterion, when reachable.
    pub n_min: BTreeMap<CriterionId, Option<usize>>,
    /// Probability of actually obtaining those consecutive OUT votes.
    pub p_success: BTreeMap<CriterionId, f64>,
    /// max over criteria of p_success / n_min.
    pub value: f64,
    pub chosen_criterion: Option<CriterionId>,
}

impl BeliefState {
    pub fn new(item_id: ItemId, p_in: BTreeMap<CriterionId, f64>) -> Result<BeliefState> {
        let ps: Vec<f64> = p_in.values().copied().collect();
        let p_out_combined = combine_exclusion(&ps)?;
        Ok(BeliefState {
            item_id,
            p_in,
            p_out_combined,
            n_min: BTreeMap::new(),
            p_success: BTreeMap::new(),
            value: 0.0,
            chosen_criterion: None,
        })
    }
}

/// Fill `n_min`, `p_success`, `value`, and `chosen_criterion` for every
/// belief state from its current posteriors.
///
/// Ties go to the lower N-min, then the lexicographically smaller criterion
/// id; items where no criterion can reach the bar keep value 0.
pub fn rank_items(
    states: &mut [BeliefState],
    accuracy: &BTreeMap<CriterionId, f64>,
    config: &TaskConfig,
) -> Result<()> {
    for state in states.iter_mut() {
        state.n_min.clear();
        state.p_success.clear();
        state.value = 0.0;
        state.chosen_criterion = None;
        let mut best: Option<(f64, usize, &CriterionId)> = None;
        for (criterion, &p_in) in &state.p_in {
            let acc = *accuracy.get(criterion).ok_or_else(|| {
                Error::UnknownCriterion(criterion.clone())
            })?;
            let others: Vec<f64> = state
                .p_in
                .iter()
                .filter(|(c, _)| *c != criterion)
                .map(|(_, p)| *p)
                .collect();
            let n_min = compute_n_min(p_in, &others, acc, config.p_out_threshold);
            state.n_min.insert(criterion.clone(), n_min);
            if let Some(n) = n_min {
                let p_success = p_consecutive_out(p_in, acc, n)?;
                state.p_success.insert(criterion.clone(), p_success);
                let value = p_success / n as f64;
                let better = match best {
                    None => true,
                    Some((bv, bn, bc)) => {
                        value > bv
                            || (value == bv && n < bn)
                            || (value == bv && n == bn && criterion < bc)
                    }
                };
                if better {
                    best = Some((value, n, criterion));
                }
            } else {
                state.p_success.insert(criterion.clone(), 0.0);
            }
        }
        if let Some((value, _, criterion)) = best {
            state.value = value;
            state.chosen_criterion = Some(criterion.clone());
        }
    }
    Ok(())
}
