//! The multi-predicate exclusion calculus: combining per-criterion
//! posteriors, the loss-ratio decision threshold, predictive per-criterion
//! outcome models and ordering costs, run metrics, and Pareto-frontier
//! extraction.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CriterionId, CriterionProfile, GoldLabel, Item, ItemId, TaskConfig};

/// Final state of one item after a strategy run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ItemDecision {
    In,
    Out,
    /// The crowd gave up; the item stays in and goes to expert screening.
    LeftToExpert,
}

impl fmt::Display for ItemDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ItemDecision::In => "IN",
            ItemDecision::Out => "OUT",
            ItemDecision::LeftToExpert => "LEFT_TO_EXPERT",
        })
    }
}

/// Price and quality of one strategy execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub price: f64,
    pub false_exclusions: usize,
    pub false_inclusions: usize,
    /// loss_ratio * FE + FI
    pub loss: f64,
    pub precision_out: f64,
    pub recall_out: f64,
    pub votes_used: u64,
    pub items_left_to_experts: usize,
}

/// Predicted classification behavior of a single criterion under the
/// fixed-J vote model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcomePrediction {
    pub criterion_id: CriterionId,
    /// P(classified OUT | true class IN) - the per-criterion false-exclusion rate.
    pub p_classified_out_given_in: f64,
    pub p_classified_in_given_in: f64,
    pub p_classified_out_given_out: f64,
    pub p_classified_in_given_out: f64,
    /// Votes spent per screened item (J for the fixed-J model).
    pub expected_votes: f64,
}

/// Probability that at least one criterion applies: 1 - prod(p_in).
pub fn combine_exclusion(p_in: &[f64]) -> Result<f64> {
    if p_in.is_empty() {
        return Err(Error::InvalidParameter(
            "combine_exclusion requires at least one criterion".into(),
        ));
    }
    let mut prod = 1.0;
    for &p in p_in {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "inclusion probability {p} not in [0, 1]"
            )));
        }
        prod *= p;
    }
    Ok(1.0 - prod)
}

/// Exclusion threshold implied by the loss ratio: lr / (lr + 1).
pub fn decision_threshold(loss_ratio: f64) -> Result<f64> {
    if !loss_ratio.is_finite() || loss_ratio <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "loss ratio {loss_ratio} must be > 0"
        )));
    }
    Ok(loss_ratio / (loss_ratio + 1.0))
}

/// Binomial pmf; exact enough in f64 for the small J used here.
fn binomial_pmf(k: usize, n: usize, p: f64) -> f64 {
    let mut coeff = 1.0f64;
    for i in 0..k {
        coeff *= (n - i) as f64 / (i + 1) as f64;
    }
    coeff * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

/// Enumerate the J+1 possible OUT-vote counts and classify each with the
/// Bayes posterior against lr/(lr+1); returns the four conditional
/// classification probabilities.
pub fn predict_criterion_outcome(
    criterion_id: &CriterionId,
    theta: f64,
    accuracy: f64,
    j: usize,
    loss_ratio: f64,
) -> Result<CriterionOutcomePrediction> {
    if !(0.5..=1.0).contains(&accuracy) {
        return Err(Error::InvalidParameter(format!(
            "accuracy {accuracy} not in [0.5, 1]"
        )));
    }
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidParameter(format!(
            "power {theta} not in [0, 1]"
        )));
    }
    if j < 1 {
        return Err(Error::InvalidParameter("J must be >= 1".into()));
    }
    let threshold = decision_threshold(loss_ratio)?;

    let mut out_given_in = 0.0;
    let mut out_given_out = 0.0;
    for k in 0..=j {
        // per-sequence likelihoods; the binomial coefficient cancels in the posterior
        let like_out = accuracy.powi(k as i32) * (1.0 - accuracy).powi((j - k) as i32);
        let like_in = (1.0 - accuracy).powi(k as i32) * accuracy.powi((j - k) as i32);
        let den = theta * like_out + (1.0 - theta) * like_in;
        if den == 0.0 {
            // unreachable vote count under both classes (accuracy exactly 1)
            continue;
        }
        let p_out = theta * like_out / den;
        if p_out >= threshold {
            out_given_in += binomial_pmf(k, j, 1.0 - accuracy);
            out_given_out += binomial_pmf(k, j, accuracy);
        }
    }
    Ok(CriterionOutcomePrediction {
        criterion_id: criterion_id.clone(),
        p_classified_out_given_in: out_given_in,
        p_classified_in_given_in: 1.0 - out_given_in,
        p_classified_out_given_out: out_given_out,
        p_classified_in_given_out: 1.0 - out_given_out,
        expected_votes: j as f64,
    })
}

/// Probability of false exclusion for an ordering, for an item that is truly
/// IN on every criterion: PFE_0 + sum_m PFE_m * prod_{j<m} PIN_j.
pub fn pfe_for_order(predictions: &[CriterionOutcomePrediction]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::InvalidParameter(
            "pfe_for_order requires at least one prediction".into(),
        ));
    }
    let mut pfe = 0.0;
    let mut pin_prod = 1.0;
    for pred in predictions {
        pfe += pred.p_classified_out_given_in * pin_prod;
        pin_prod *= pred.p_classified_in_given_in;
    }
    Ok(pfe)
}

/// Expected price and loss of screening criteria in the given order.
///
/// Survival into each stage marginalizes over the true-class composition
/// implied by the powers, assuming criteria apply independently.
pub fn predict_order_cost_loss(
    ordering: &[CriterionId],
    profiles: &[CriterionProfile],
    config: &TaskConfig,
    n_items: usize,
) -> Result<(f64, f64)> {
    let by_id: BTreeMap<&CriterionId, &CriterionProfile> =
        profiles.iter().map(|p| (&p.id, p)).collect();
    if ordering.len() != profiles.len() {
        return Err(Error::InvalidParameter(format!(
            "ordering covers {} criteria, task has {}",
            ordering.len(),
            profiles.len()
        )));
    }
    let mut seen = std::collections::BTreeSet::new();
    for c in ordering {
        if !by_id.contains_key(c) {
            return Err(Error::UnknownCriterion(c.clone()));
        }
        if !seen.insert(c) {
            return Err(Error::InvalidParameter(format!(
                "criterion {c} repeated in ordering"
            )));
        }
    }

    let ppl = config.price_per_label()?;
    let j = config.votes_per_item;

    let mut expected_screenings = 0.0;
    let mut survival = 1.0; // P(item classified IN by every stage so far)
    let mut pfe_given_all_in = 0.0;
    let mut pin_prod_given_in = 1.0;
    let mut survival_all_in = 1.0; // P(true IN everywhere AND classified IN so far)
    let mut prob_all_in = 1.0;
    for c in ordering {
        let profile = by_id[c];
        let pred = predict_criterion_outcome(
            c,
            profile.power,
            profile.accuracy_estimate,
            j,
            config.loss_ratio,
        )?;
        expected_screenings += survival;
        pfe_given_all_in += pred.p_classified_out_given_in * pin_prod_given_in;
        pin_prod_given_in *= pred.p_classified_in_given_in;
        survival *= (1.0 - profile.power) * pred.p_classified_in_given_in
            + profile.power * pred.p_classified_in_given_out;
        survival_all_in *= (1.0 - profile.power) * pred.p_classified_in_given_in;
        prob_all_in *= 1.0 - profile.power;
    }
    let expected_price = ppl * j as f64 * n_items as f64 * expected_screenings;
    let p_false_exclusion = prob_all_in * pfe_given_all_in;
    let p_false_inclusion = survival - survival_all_in;
    let expected_loss =
        n_items as f64 * (config.loss_ratio * p_false_exclusion + p_false_inclusion);
    Ok((expected_price, expected_loss))
}

/// One evaluated criteria ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingEvaluation {
    pub ordering: Vec<CriterionId>,
    pub expected_price: f64,
    pub expected_loss: f64,
    pub pareto_optimal: bool,
}

/// The largest criteria count whose orderings we enumerate exhaustively.
pub const MAX_PERMUTED_CRITERIA: usize = 8;

fn permutations<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(items.len());
    let mut used = vec![false; items.len()];
    fn rec<T: Clone>(
        items: &[T],
        used: &mut [bool],
        current: &mut Vec<T>,
        out: &mut Vec<Vec<T>>,
    ) {
        if current.len() == items.len() {
            out.push(current.clone());
            return;
        }
        for i in 0..items.len() {
            if !used[i] {
                used[i] = true;
                current.push(items[i].clone());
                rec(items, used, current, out);
                current.pop();
                used[i] = false;
            }
        }
    }
    rec(items, &mut used, &mut current, &mut out);
    out
}

/// Evaluate every permutation of the criteria; returns all orderings sorted
/// by expected loss then price, with Pareto-dominated ones flagged.
pub fn rank_orderings(
    profiles: &[CriterionProfile],
    config: &TaskConfig,
    n_items: usize,
) -> Result<Vec<OrderingEvaluation>> {
    if profiles.is_empty() {
        return Err(Error::InvalidParameter("no criteria to order".into()));
    }
    if profiles.len() > MAX_PERMUTED_CRITERIA {
        return Err(Error::PermutationBudgetExceeded {
            criteria: profiles.len(),
            max: MAX_PERMUTED_CRITERIA,
        });
    }
    let ids: Vec<CriterionId> = profiles.iter().map(|p| p.id.clone()).collect();
    let mut evaluated: Vec<OrderingEvaluation> = permutations(&ids)
        .into_iter()
        .map(|ordering| {
            let (expected_price, expected_loss) =
                predict_order_cost_loss(&ordering, profiles, config, n_items)?;
            Ok(OrderingEvaluation {
                ordering,
                expected_price,
                expected_loss,
                pareto_optimal: false,
            })
        })
        .collect::<Result<_>>()?;
    let points: Vec<(f64, f64)> = evaluated
        .iter()
        .map(|e| (e.expected_price, e.expected_loss))
        .collect();
    for idx in pareto_frontier_indices(&points) {
        evaluated[idx].pareto_optimal = true;
    }
    evaluated.sort_by(|a, b| {
        a.expected_loss
            .total_cmp(&b.expected_loss)
            .then(a.expected_price.total_cmp(&b.expected_price))
            .then(a.ordering.cmp(&b.ordering))
    });
    Ok(evaluated)
}

/// Score final decisions against gold. LEFT_TO_EXPERT counts as IN for loss
/// purposes but is also reported separately.
pub fn compute_metrics(
    decisions: &BTreeMap<ItemId, ItemDecision>,
    items: &[Item],
    config: &TaskConfig,
    votes_used: u64,
) -> Result<RunMetrics> {
    let gold: BTreeMap<&ItemId, GoldLabel> = items
        .iter()
        .filter_map(|i| i.gold_overall().map(|g| (&i.id, g)))
        .collect();
    let mut fe = 0usize;
    let mut fi = 0usize;
    let mut tp_out = 0usize;
    let mut left = 0usize;
    for (item_id, decision) in decisions {
        let truth = *gold.get(item_id).ok_or_else(|| Error::MissingGold {
            item: item_id.clone(),
            criterion: None,
        })?;
        if *decision == ItemDecision::LeftToExpert {
            left += 1;
        }
        let decided_out = *decision == ItemDecision::Out;
        match (decided_out, truth) {
            (true, GoldLabel::In) => fe += 1,
            (true, GoldLabel::Out) => tp_out += 1,
            (false, GoldLabel::Out) => fi += 1,
            (false, GoldLabel::In) => {}
        }
    }
    let loss = config.loss_ratio * fe as f64 + fi as f64;
    let precision_out = if tp_out + fe == 0 {
        1.0
    } else {
        tp_out as f64 / (tp_out + fe) as f64
    };
    let recall_out = if tp_out + fi == 0 {
        1.0
    } else {
        tp_out as f64 / (tp_out + fi) as f64
    };
    Ok(RunMetrics {
        price: config.price_per_label()? * votes_used as f64,
        false_exclusions: fe,
        false_inclusions: fi,
        loss,
        precision_out,
        recall_out,
        votes_used,
        items_left_to_experts: left,
    })
}

/// Indices of the points not dominated in both coordinates (lower is better
/// in each); input order is preserved in the returned indices.
pub fn pareto_frontier_indices(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .0
            .total_cmp(&points[b].0)
            .then(points[a].1.total_cmp(&points[b].1))
    });
    let mut keep = Vec::new();
    let mut best_loss = f64::INFINITY;
    let mut best_loss_price = f64::INFINITY;
    for idx in order {
        let (price, loss) = points[idx];
        let dominated = if loss > best_loss {
            true
        } else if loss == best_loss {
            best_loss_price < price
        } else {
            false
        };
        if !dominated {
            keep.push(idx);
        }
        if loss < best_loss {
            best_loss = loss;
            best_loss_price = price;
        }
    }
    keep.sort_unstable();
    keep
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    #[test]
    fn combine_exclusion_examples() {
        assert_eq!(combine_exclusion(&[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert!((combine_exclusion(&[0.8, 0.5]).unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(combine_exclusion(&[0.0, 0.7]).unwrap(), 1.0);
        assert!(combine_exclusion(&[]).is_err());
        assert!(combine_exclusion(&[1.2]).is_err());
    }

    #[test]
    fn combine_exclusion_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let mut ps: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..1.0)).collect();
            let a = combine_exclusion(&ps).unwrap();
            ps.shuffle(&mut rng);
            let b = combine_exclusion(&ps).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
        let p = 0.37;
        assert!((combine_exclusion(&[p]).unwrap() - (1.0 - p)).abs() < 1e-12);
    }

    #[test]
    fn decision_threshold_examples() {
        assert!((decision_threshold(5.0).unwrap() - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(decision_threshold(1.0).unwrap(), 0.5);
        assert!((decision_threshold(9.0).unwrap() - 0.9).abs() < 1e-12);
        assert!(decision_threshold(0.0).is_err());
        assert!(decision_threshold(-2.0).is_err());
        let mut prev = 0.0;
        for lr in [0.1, 0.5, 1.0, 2.0, 5.0, 20.0] {
            let t = decision_threshold(lr).unwrap();
            assert!(t > prev);
            prev = t;
        }
    }

    #[test]
    fn predict_outcome_perfect_workers() {
        let p = predict_criterion_outcome(&"c".into(), 0.5, 1.0, 3, 5.0).unwrap();
        assert_eq!(p.p_classified_out_given_out, 1.0);
        assert_eq!(p.p_classified_out_given_in, 0.0);
        assert_eq!(p.expected_votes, 3.0);
    }

    #[test]
    fn predict_outcome_single_vote() {
        // one wrong OUT vote flips a true-IN item past the symmetric threshold
        let p = predict_criterion_outcome(&"c".into(), 0.5, 0.8, 1, 1.0).unwrap();
        assert!((p.p_classified_out_given_in - 0.2).abs() < 1e-12);
        assert!((p.p_classified_out_given_out - 0.8).abs() < 1e-12);
    }

    #[test]
    fn predict_outcome_matches_sampling_oracle() {
        let (theta, accuracy, j, lr) = (0.28, 0.77, 5, 5.0);
        let pred = predict_criterion_outcome(&"c".into(), theta, accuracy, j, lr).unwrap();

        // independent sampling oracle with its own Bayes rule
        let threshold = lr / (lr + 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 1_000_000usize;
        let (mut n_in, mut n_out) = (0usize, 0usize);
        let (mut out_in, mut out_out) = (0usize, 0usize);
        for _ in 0..n {
            let truly_out = rng.random_bool(theta);
            let p_vote_out = if truly_out { accuracy } else { 1.0 - accuracy };
            let k = (0..j).filter(|_| rng.random_bool(p_vote_out)).count();
            let lo = accuracy.powi(k as i32) * (1.0 - accuracy).powi((j - k) as i32) * theta;
            let li = (1.0 - accuracy).powi(k as i32) * accuracy.powi((j - k) as i32) * (1.0 - theta);
            let classified_out = lo / (lo + li) >= threshold;
            if truly_out {
                n_out += 1;
                if classified_out {
                    out_out += 1;
                }
            } else {
                n_in += 1;
                if classified_out {
                    out_in += 1;
                }
            }
        }
        let emp_out_in = out_in as f64 / n_in as f64;
        let emp_out_out = out_out as f64 / n_out as f64;
        assert!(
            (emp_out_in - pred.p_classified_out_given_in).abs() < 0.005,
            "out|in: oracle {emp_out_in} vs predicted {}",
            pred.p_classified_out_given_in
        );
        assert!(
            (emp_out_out - pred.p_classified_out_given_out).abs() < 0.005,
            "out|out: oracle {emp_out_out} vs predicted {}",
            pred.p_classified_out_given_out
        );
        for v in [
            pred.p_classified_out_given_in,
            pred.p_classified_in_given_in,
            pred.p_classified_out_given_out,
            pred.p_classified_in_given_out,
        ] {
            assert!((0.0..=1.0).contains(&v));
        }
    }

    fn pred_with(pfe: f64, pin: f64) -> CriterionOutcomePrediction {
        CriterionOutcomePrediction {
            criterion_id: "c".into(),
            p_classified_out_given_in: pfe,
            p_classified_in_given_in: pin,
            p_classified_out_given_out: 0.9,
            p_classified_in_given_out: 0.1,
            expected_votes: 3.0,
        }
    }

    #[test]
    fn pfe_for_order_examples() {
        assert!((pfe_for_order(&[pred_with(0.1, 0.9)]).unwrap() - 0.1).abs() < 1e-12);
        let v = pfe_for_order(&[pred_with(0.1, 0.5), pred_with(0.2, 0.8)]).unwrap();
        assert!((v - 0.2).abs() < 1e-12);
        let zero = pfe_for_order(&[pred_with(0.0, 0.7), pred_with(0.0, 0.8), pred_with(0.0, 0.9)])
            .unwrap();
        assert_eq!(zero, 0.0);
        assert!(pfe_for_order(&[]).is_err());
    }

    #[test]
    fn pfe_reordering_properties() {
        // identical predictions: invariant under reordering
        let a = pred_with(0.05, 0.8);
        let one = pfe_for_order(&[a.clone(), a.clone(), a.clone()]).unwrap();
        let two = pfe_for_order(&[a.clone(), a.clone(), a.clone()]).unwrap();
        assert_eq!(one, two);
        // equal PFE, heterogeneous PIN: most-excluding stage (largest 1-PIN)
        // first never increases the value
        let strong = pred_with(0.05, 0.5);
        let weak = pred_with(0.05, 0.95);
        let strong_first = pfe_for_order(&[strong.clone(), weak.clone()]).unwrap();
        let weak_first = pfe_for_order(&[weak, strong]).unwrap();
        assert!(strong_first <= weak_first + 1e-12);
    }

    fn profile(id: &str, power: f64, acc: f64) -> CriterionProfile {
        CriterionProfile::new(id, power, 0.0, acc).unwrap()
    }

    fn config_with(j: usize, lr: f64) -> TaskConfig {
        TaskConfig {
            votes_per_item: j,
            loss_ratio: lr,
            ..TaskConfig::default()
        }
    }

    #[test]
    fn order_cost_single_criterion_price_identity() {
        let config = config_with(3, 5.0);
        let profiles = vec![profile("c1", 0.3, 0.8)];
        let (price, _) =
            predict_order_cost_loss(&["c1".into()], &profiles, &config, 1000).unwrap();
        let expected = config.price_per_label().unwrap() * 3.0 * 1000.0;
        assert!((price - expected).abs() < 1e-9);
    }

    #[test]
    fn order_cost_total_first_stage_exclusion() {
        // accuracy 1 with power 1: every item classified OUT at stage one
        let config = config_with(3, 5.0);
        let profiles = vec![profile("c1", 1.0, 1.0), profile("c2", 0.2, 0.8)];
        let (price, _) = predict_order_cost_loss(
            &["c1".into(), "c2".into()],
            &profiles,
            &config,
            100,
        )
        .unwrap();
        let stage1_only = config.price_per_label().unwrap() * 3.0 * 100.0;
        assert!((price - stage1_only).abs() < 1e-9, "second stage should cost 0");
    }

    #[test]
    fn order_cost_matches_staged_simulation() {
        let config = config_with(3, 5.0);
        let profiles = vec![profile("c1", 0.14, 0.8), profile("c2", 0.42, 0.8)];
        let ordering: Vec<CriterionId> = vec!["c1".into(), "c2".into()];
        let n_items = 1000usize;
        let (price, loss) =
            predict_order_cost_loss(&ordering, &profiles, &config, n_items).unwrap();

        // Monte-Carlo oracle over the staged process
        let mut rng = ChaCha8Rng::seed_from_u64(4242);
        let samples = 100_000usize;
        let threshold = 5.0 / 6.0;
        let mut votes = 0u64;
        let mut fe = 0u64;
        let mut fi = 0u64;
        for _ in 0..samples {
            let class_out: Vec<bool> = profiles
                .iter()
                .map(|p| rng.random_bool(p.power))
                .collect();
            let mut excluded = false;
            for (stage, p) in profiles.iter().enumerate() {
                votes += 3;
                let p_vote_out = if class_out[stage] { 0.8 } else { 0.2 };
                let k = (0..3).filter(|_| rng.random_bool(p_vote_out)).count();
                let lo = 0.8f64.powi(k as i32) * 0.2f64.powi(3 - k as i32) * p.power;
                let li = 0.2f64.powi(k as i32) * 0.8f64.powi(3 - k as i32) * (1.0 - p.power);
                if lo / (lo + li) >= threshold {
                    excluded = true;
                    break;
                }
            }
            let truly_out = class_out.iter().any(|&b| b);
            match (excluded, truly_out) {
                (true, false) => fe += 1,
                (false, true) => fi += 1,
                _ => {}
            }
        }
        let scale = n_items as f64 / samples as f64;
        let sim_price = config.price_per_label().unwrap() * votes as f64 * scale;
        let sim_loss = (5.0 * fe as f64 + fi as f64) * scale;
        assert!(
            (price - sim_price).abs() / sim_price < 0.02,
            "price {price} vs simulated {sim_price}"
        );
        assert!(
            (loss - sim_loss).abs() <= 0.1 * n_items as f64,
            "loss {loss} vs simulated {sim_loss}"
        );
    }

    #[test]
    fn order_cost_rejects_unknown_and_partial_orderings() {
        let config = config_with(3, 5.0);
        let profiles = vec![profile("c1", 0.3, 0.8), profile("c2", 0.2, 0.7)];
        assert!(matches!(
            predict_order_cost_loss(&["c1".into(), "zz".into()], &profiles, &config, 10),
            Err(Error::UnknownCriterion(_))
        ));
        assert!(predict_order_cost_loss(&["c1".into()], &profiles, &config, 10).is_err());
        assert!(
            predict_order_cost_loss(&["c1".into(), "c1".into()], &profiles, &config, 10).is_err()
        );
    }

    #[test]
    fn rank_orderings_single_criterion() {
        let config = config_with(3, 5.0);
        let ranked = rank_orderings(&[profile("c1", 0.3, 0.8)], &config, 100).unwrap();
        assert_eq!(ranked.len(), 1);
        assert!(ranked[0].pareto_optimal);
    }

    #[test]
    fn rank_orderings_dominant_criterion_first() {
        let config = config_with(3, 5.0);
        for (pa, pb) in [(0.42, 0.14), (0.5, 0.2), (0.35, 0.1)] {
            for (aa, ab) in [(0.85, 0.7), (0.8, 0.8), (0.9, 0.75)] {
                let profiles = vec![profile("a", pa, aa), profile("b", pb, ab)];
                let ranked = rank_orderings(&profiles, &config, 1000).unwrap();
                let a_first = ranked
                    .iter()
                    .find(|e| e.ordering[0].as_str() == "a")
                    .unwrap();
                let b_first = ranked
                    .iter()
                    .find(|e| e.ordering[0].as_str() == "b")
                    .unwrap();
                assert!(
                    a_first.expected_price < b_first.expected_price,
                    "higher power+accuracy first should be cheaper (pa={pa}, aa={aa})"
                );
                assert!(a_first.expected_loss <= b_first.expected_loss + 1e-9);
            }
        }
    }

    #[test]
    fn rank_orderings_paper_calibrated_table() {
        // profiles measured in the real experiments: use-of-tech dominates
        let profiles = vec![
            profile("intervention", 0.24, 0.60),
            profile("use-of-tech", 0.61, 0.77),
            profile("older-adults", 0.05, 0.75),
        ];
        let config = config_with(5, 5.0);
        let ranked = rank_orderings(&profiles, &config, 1000).unwrap();
        let cheapest = ranked
            .iter()
            .min_by(|a, b| a.expected_price.total_cmp(&b.expected_price))
            .unwrap();
        assert_eq!(cheapest.ordering[0].as_str(), "use-of-tech");
    }

    #[test]
    fn rank_orderings_budget() {
        let profiles: Vec<CriterionProfile> = (0..9)
            .map(|i| profile(&format!("c{i}"), 0.2, 0.8))
            .collect();
        assert!(matches!(
            rank_orderings(&profiles, &config_with(3, 5.0), 10),
            Err(Error::PermutationBudgetExceeded { criteria: 9, max: 8 })
        ));
    }

    fn item_with_overall(id: &str, out: bool) -> Item {
        let mut gold = BTreeMap::new();
        gold.insert(
            CriterionId::from("c1"),
            if out { GoldLabel::Out } else { GoldLabel::In },
        );
        Item::with_gold(id, gold)
    }

    #[test]
    fn compute_metrics_loss_substitution() {
        let config = config_with(3, 5.0);
        let mut items = Vec::new();
        let mut decisions = BTreeMap::new();
        // 2 false exclusions
        for i in 0..2 {
            let id = format!("fe{i}");
            items.push(item_with_overall(&id, false));
            decisions.insert(ItemId::from(id), ItemDecision::Out);
        }
        // 3 false inclusions
        for i in 0..3 {
            let id = format!("fi{i}");
            items.push(item_with_overall(&id, true));
            decisions.insert(ItemId::from(id), ItemDecision::In);
        }
        // 4 true exclusions
        for i in 0..4 {
            let id = format!("tp{i}");
            items.push(item_with_overall(&id, true));
            decisions.insert(ItemId::from(id), ItemDecision::Out);
        }
        let m = compute_metrics(&decisions, &items, &config, 27).unwrap();
        assert_eq!(m.false_exclusions, 2);
        assert_eq!(m.false_inclusions, 3);
        assert_eq!(m.loss, 13.0);
        assert_eq!(m.loss - config.loss_ratio * 2.0 - 3.0, 0.0);
        assert!((m.precision_out - 4.0 / 6.0).abs() < 1e-12);
        assert!((m.recall_out - 4.0 / 7.0).abs() < 1e-12);
        assert_eq!(m.votes_used, 27);
        assert!((m.price - 27.0 * config.price_per_label().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn compute_metrics_perfect_run() {
        let config = config_with(3, 5.0);
        let mut items = Vec::new();
        let mut decisions = BTreeMap::new();
        for i in 0..10 {
            let out = i % 3 == 0;
            let id = format!("i{i}");
            items.push(item_with_overall(&id, out));
            decisions.insert(
                ItemId::from(id),
                if out { ItemDecision::Out } else { ItemDecision::In },
            );
        }
        let m = compute_metrics(&decisions, &items, &config, 30).unwrap();
        assert_eq!(m.loss, 0.0);
        assert_eq!(m.precision_out, 1.0);
        assert_eq!(m.recall_out, 1.0);
    }

    #[test]
    fn compute_metrics_all_left_to_experts() {
        let config = config_with(3, 5.0);
        let mut items = Vec::new();
        let mut decisions = BTreeMap::new();
        for i in 0..1000 {
            let out = i < 300;
            let id = format!("i{i}");
            items.push(item_with_overall(&id, out));
            decisions.insert(ItemId::from(id), ItemDecision::LeftToExpert);
        }
        let m = compute_metrics(&decisions, &items, &config, 0).unwrap();
        assert_eq!(m.false_inclusions, 300);
        assert_eq!(m.false_exclusions, 0);
        assert_eq!(m.loss, 300.0);
        assert_eq!(m.items_left_to_experts, 1000);
    }

    #[test]
    fn compute_metrics_missing_gold() {
        let config = config_with(3, 5.0);
        let items = vec![Item::new("i1")];
        let decisions = BTreeMap::from([(ItemId::from("i1"), ItemDecision::In)]);
        assert!(matches!(
            compute_metrics(&decisions, &items, &config, 0),
            Err(Error::MissingGold { .. })
        ));
    }

    #[test]
    fn pareto_frontier_examples() {
        let pts = vec![(10.0, 5.0), (12.0, 4.0), (15.0, 4.0)];
        assert_eq!(pareto_frontier_indices(&pts), vec![0, 1]);
        assert_eq!(pareto_frontier_indices(&[(3.0, 3.0)]), vec![0]);
        assert_eq!(pareto_frontier_indices(&[]), Vec::<usize>::new());
        // duplicates both survive
        assert_eq!(
            pareto_frontier_indices(&[(1.0, 1.0), (1.0, 1.0)]),
            vec![0, 1]
        );
    }

    #[test]
    fn pareto_frontier_matches_quadratic_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let pts: Vec<(f64, f64)> = (0..100)
                .map(|_| {
                    (
                        (rng.random_range(0..40) as f64) * 0.5,
                        (rng.random_range(0..40) as f64) * 0.5,
                    )
                })
                .collect();
            let fast = pareto_frontier_indices(&pts);
            // O(n^2) pairwise-dominance oracle
            let slow: Vec<usize> = (0..pts.len())
                .filter(|&i| {
                    !(0..pts.len()).any(|j| {
                        j != i
                            && pts[j].0 <= pts[i].0
                            && pts[j].1 <= pts[i].1
                            && (pts[j].0 < pts[i].0 || pts[j].1 < pts[i].1)
                    })
                })
                .collect();
            assert_eq!(fast, slow);
        }
    }
}
