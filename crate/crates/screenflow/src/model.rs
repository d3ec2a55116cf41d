//! Domain vocabulary: items, criteria, workers, votes, labels, and the
//! closed-form worker-behavior formulas the rest of the crate consumes.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! id_newtype {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

id_newtype!(
    /// Opaque item (paper) identifier; real dataset ids pass through unchanged.
    ItemId
);
id_newtype!(
    /// Opaque exclusion-criterion identifier.
    CriterionId
);
id_newtype!(
    /// Opaque worker identifier.
    WorkerId
);

/// A crowd answer for one (item, criterion) question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Label {
    /// The criterion does not apply; the item stays in scope for this predicate.
    In,
    /// The criterion applies; the item should be excluded.
    Out,
    /// The worker could not tell. Appears only in ingested real datasets;
    /// the simulator never emits it.
    Unclear,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::In => "IN",
            Label::Out => "OUT",
            Label::Unclear => "UNCLEAR",
        }
    }

    pub fn from_token(token: &str) -> Option<Label> {
        match token.trim().to_ascii_uppercase().as_str() {
            "IN" => Some(Label::In),
            "OUT" => Some(Label::Out),
            "UNCLEAR" => Some(Label::Unclear),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ground-truth class of an (item, criterion) pair. Gold is always binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GoldLabel {
    In,
    Out,
}

impl GoldLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            GoldLabel::In => "IN",
            GoldLabel::Out => "OUT",
        }
    }

    pub fn from_token(token: &str) -> Option<GoldLabel> {
        match token.trim().to_ascii_uppercase().as_str() {
            "IN" => Some(GoldLabel::In),
            "OUT" => Some(GoldLabel::Out),
            _ => None,
        }
    }

    pub fn flipped(self) -> GoldLabel {
        match self {
            GoldLabel::In => GoldLabel::Out,
            GoldLabel::Out => GoldLabel::In,
        }
    }
}

impl From<GoldLabel> for Label {
    fn from(g: GoldLabel) -> Label {
        match g {
            GoldLabel::In => Label::In,
            GoldLabel::Out => Label::Out,
        }
    }
}

impl fmt::Display for GoldLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How ingested UNCLEAR votes enter the arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum UnclearPolicy {
    /// Drop the vote from counts and aggregation (the default).
    #[default]
    Abstain,
    /// Remap to IN, i.e. "not shown to apply".
    TreatAsIn,
}

impl UnclearPolicy {
    /// Resolve a raw label to the binary label aggregation works on.
    pub fn resolve(&self, label: Label) -> Option<Label> {
        match label {
            Label::Unclear => match self {
                UnclearPolicy::Abstain => None,
                UnclearPolicy::TreatAsIn => Some(Label::In),
            },
            other => Some(other),
        }
    }
}

/// An item (paper) to classify, optionally with per-criterion ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub id: ItemId,
    /// When present, must cover every criterion in the task.
    pub gold: Option<BTreeMap<CriterionId, GoldLabel>>,
}

impl Item {
    pub fn new(id: impl Into<ItemId>) -> Item {
        Item {
            id: id.into(),
            gold: None,
        }
    }

    pub fn with_gold(id: impl Into<ItemId>, gold: BTreeMap<CriterionId, GoldLabel>) -> Item {
        Item {
            id: id.into(),
            gold: Some(gold),
        }
    }

    pub fn gold_for(&self, criterion: &CriterionId) -> Option<GoldLabel> {
        self.gold.as_ref().and_then(|g| g.get(criterion)).copied()
    }

    /// Overall gold class: OUT iff at least one criterion applies.
    pub fn gold_overall(&self) -> Option<GoldLabel> {
        self.gold.as_ref().map(|g| {
            if g.values().any(|l| *l == GoldLabel::Out) {
                GoldLabel::Out
            } else {
                GoldLabel::In
            }
        })
    }

    /// Checks the "gold covers every criterion" invariant.
    pub fn validate_gold(&self, criteria: &[CriterionId]) -> Result<()> {
        if let Some(gold) = &self.gold {
            for c in criteria {
                if !gold.contains_key(c) {
                    return Err(Error::MissingGold {
                        item: self.id.clone(),
                        criterion: Some(c.clone()),
                    });
                }
            }
        }
        Ok(())
    }
}

/// A predicate's statistical profile: power (selectivity), difficulty, and
/// the crowd accuracy estimated for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionProfile {
    pub id: CriterionId,
    /// Fraction of the pool the criterion applies to.
    pub power: f64,
    /// Non-negative difficulty; shrinks worker accuracy toward 0.5.
    pub difficulty: f64,
    /// Estimated mean crowd accuracy on this criterion.
    pub accuracy_estimate: f64,
}

impl CriterionProfile {
    pub fn new(
        id: impl Into<CriterionId>,
        power: f64,
        difficulty: f64,
        accuracy_estimate: f64,
    ) -> Result<CriterionProfile> {
        let p = CriterionProfile {
            id: id.into(),
            power,
            difficulty,
            accuracy_estimate,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.power) {
            return Err(Error::InvalidParameter(format!(
                "criterion {}: power {} not in [0, 1]",
                self.id, self.power
            )));
        }
        if !self.difficulty.is_finite() || self.difficulty < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "criterion {}: difficulty {} must be a non-negative real",
                self.id, self.difficulty
            )));
        }
        if !(0.5..=1.0).contains(&self.accuracy_estimate) {
            return Err(Error::InvalidParameter(format!(
                "criterion {}: accuracy estimate {} not in [0.5, 1]",
                self.id, self.accuracy_estimate
            )));
        }
        Ok(())
    }
}

/// Per-class accuracy of a worker on one criterion: the two informative cells
/// of the confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    /// P(vote = IN | true class IN)
    pub on_in: f64,
    /// P(vote = OUT | true class OUT)
    pub on_out: f64,
}

impl ClassAccuracy {
    pub fn mean(&self) -> f64 {
        0.5 * (self.on_in + self.on_out)
    }
}

/// A simulated worker's latent accuracy parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerProfile {
    pub id: WorkerId,
    /// Expected accuracy before difficulty skew.
    pub base_accuracy: f64,
    /// Cheaters answer at random regardless of ground truth.
    pub is_cheater: bool,
    pub confusion: BTreeMap<CriterionId, ClassAccuracy>,
}

impl WorkerProfile {
    pub fn accuracy_for(&self, criterion: &CriterionId) -> Option<ClassAccuracy> {
        self.confusion.get(criterion).copied()
    }

    /// Average accuracy across classes and criteria; drives test-question
    /// correctness during screening.
    pub fn mean_accuracy(&self) -> f64 {
        if self.confusion.is_empty() {
            return self.base_accuracy;
        }
        self.confusion.values().map(ClassAccuracy::mean).sum::<f64>() / self.confusion.len() as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.5..=1.0).contains(&self.base_accuracy) {
            return Err(Error::InvalidParameter(format!(
                "worker {}: base accuracy {} not in [0.5, 1]",
                self.id, self.base_accuracy
            )));
        }
        for (c, acc) in &self.confusion {
            if self.is_cheater {
                if acc.on_in != 0.5 || acc.on_out != 0.5 {
                    return Err(Error::InvalidParameter(format!(
                        "worker {}: cheater must have 0.5 accuracy on {c}",
                        self.id
                    )));
                }
            } else {
                if !(0.5..=1.0).contains(&acc.on_in) || !(0.5..=1.0).contains(&acc.on_out) {
                    return Err(Error::InvalidParameter(format!(
                        "worker {}: accuracies on {c} not in [0.5, 1]",
                        self.id
                    )));
                }
                if acc.on_out < acc.on_in {
                    return Err(Error::InvalidParameter(format!(
                        "worker {}: accuracy_on_OUT < accuracy_on_IN on {c}",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One worker's label for one (item, criterion) pair within a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub worker_id: WorkerId,
    pub item_id: ItemId,
    pub criterion_id: CriterionId,
    pub label: Label,
    pub run_index: usize,
}

/// Append-only collection of votes with slice queries.
///
/// One writer per store; read-only snapshots are safe to share across
/// parallel replications.
#[derive(Debug, Clone, Default)]
pub struct VoteStore {
    records: Vec<VoteRecord>,
    seen: HashSet<(WorkerId, ItemId, CriterionId, usize)>,
}

impl VoteStore {
    pub fn new() -> VoteStore {
        VoteStore::default()
    }

    pub fn append(&mut self, record: VoteRecord) -> Result<()> {
        let key = (
            record.worker_id.clone(),
            record.item_id.clone(),
            record.criterion_id.clone(),
            record.run_index,
        );
        if !self.seen.insert(key) {
            return Err(Error::DuplicateVote {
                worker: record.worker_id,
                item: record.item_id,
                criterion: record.criterion_id,
                run_index: record.run_index,
            });
        }
        self.records.push(record);
        Ok(())
    }

    pub fn append_all(&mut self, records: impl IntoIterator<Item = VoteRecord>) -> Result<()> {
        for r in records {
            self.append(r)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[VoteRecord] {
        &self.records
    }

    pub fn by_item<'a>(&'a self, item: &'a ItemId) -> impl Iterator<Item = &'a VoteRecord> {
        self.records.iter().filter(move |r| &r.item_id == item)
    }

    pub fn by_criterion<'a>(
        &'a self,
        criterion: &'a CriterionId,
    ) -> impl Iterator<Item = &'a VoteRecord> {
        self.records
            .iter()
            .filter(move |r| &r.criterion_id == criterion)
    }

    pub fn by_worker<'a>(&'a self, worker: &'a WorkerId) -> impl Iterator<Item = &'a VoteRecord> {
        self.records.iter().filter(move |r| &r.worker_id == worker)
    }

    pub fn by_item_criterion<'a>(
        &'a self,
        item: &'a ItemId,
        criterion: &'a CriterionId,
    ) -> impl Iterator<Item = &'a VoteRecord> {
        self.records
            .iter()
            .filter(move |r| &r.item_id == item && &r.criterion_id == criterion)
    }

    pub fn count_item_criterion(&self, item: &ItemId, criterion: &CriterionId) -> usize {
        self.by_item_criterion(item, criterion).count()
    }
}

/// Task-level knobs shared by strategies, the simulator, and cost accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    /// Test questions per worker (N_t). Zero disables screening.
    pub n_tests: usize,
    /// Non-test labels a worker may provide (N_l).
    pub labels_per_worker: usize,
    /// Votes collected per (item, criterion) in fixed-J runs (J).
    pub votes_per_item: usize,
    /// Platform cost of one vote (UC).
    pub unit_cost: f64,
    /// How much more harmful a false exclusion is than a false inclusion (lr).
    pub loss_ratio: f64,
    /// Exclusion confidence bar for adaptive runs.
    pub p_out_threshold: f64,
    /// Inclusion confidence bar for adaptive runs.
    pub p_in_threshold: f64,
    /// Items per adaptive crowdsourcing batch.
    pub batch_size: usize,
    /// Give-up bar: stop polling an item once 1/value exceeds this.
    pub stop_threshold: f64,
    /// Crowd vote cost / expert decision cost; exposed for author tuning.
    pub cost_ratio: f64,
    pub rng_seed: u64,
    /// Items in the estimation run; strategies fall back to their own
    /// defaults (100 for criteria-ordered runs, 50 for adaptive runs).
    #[serde(default)]
    pub baseline_size: Option<usize>,
    /// Remap ingested UNCLEAR votes to IN instead of dropping them.
    #[serde(default)]
    pub unclear_as_in: bool,
    /// Re-estimate criterion accuracy every adaptive iteration instead of
    /// freezing it after the baseline.
    #[serde(default)]
    pub reestimate_accuracy: bool,
    /// Additive bias injected into estimated accuracies (sensitivity studies).
    #[serde(default)]
    pub accuracy_estimate_bias: f64,
    /// Price metrics from the source's cost ledger instead of votes x PPL.
    #[serde(default)]
    pub price_from_ledger: bool,
}

impl Default for TaskConfig {
    fn default() -> TaskConfig {
        TaskConfig {
            n_tests: 2,
            labels_per_worker: 10,
            votes_per_item: 3,
            unit_cost: 0.1,
            loss_ratio: 5.0,
            p_out_threshold: 0.99,
            p_in_threshold: 0.99,
            batch_size: 10,
            stop_threshold: 100.0,
            cost_ratio: 0.05,
            rng_seed: 42,
            baseline_size: None,
            unclear_as_in: false,
            reestimate_accuracy: false,
            accuracy_estimate_bias: 0.0,
            price_from_ledger: false,
        }
    }
}

impl TaskConfig {
    pub fn validate(&self) -> Result<()> {
        if self.labels_per_worker < 1 {
            return Err(Error::InvalidParameter(
                "labels_per_worker must be >= 1".into(),
            ));
        }
        if self.votes_per_item < 1 {
            return Err(Error::InvalidParameter(
                "votes_per_item must be >= 1".into(),
            ));
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidParameter("batch_size must be >= 1".into()));
        }
        if !self.unit_cost.is_finite() || self.unit_cost < 0.0 {
            return Err(Error::InvalidParameter(
                "unit_cost must be non-negative".into(),
            ));
        }
        if !self.loss_ratio.is_finite() || self.loss_ratio <= 0.0 {
            return Err(Error::InvalidParameter("loss_ratio must be > 0".into()));
        }
        for (name, v) in [
            ("p_out_threshold", self.p_out_threshold),
            ("p_in_threshold", self.p_in_threshold),
        ] {
            if !(v > 0.5 && v < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie strictly between 0.5 and 1"
                )));
            }
        }
        if !self.stop_threshold.is_finite() || self.stop_threshold <= 0.0 {
            return Err(Error::InvalidParameter("stop_threshold must be > 0".into()));
        }
        if !self.cost_ratio.is_finite() || self.cost_ratio <= 0.0 {
            return Err(Error::InvalidParameter("cost_ratio must be > 0".into()));
        }
        if let Some(b) = self.baseline_size {
            if b < 1 {
                return Err(Error::InvalidParameter("baseline_size must be >= 1".into()));
            }
        }
        Ok(())
    }

    pub fn unclear_policy(&self) -> UnclearPolicy {
        if self.unclear_as_in {
            UnclearPolicy::TreatAsIn
        } else {
            UnclearPolicy::Abstain
        }
    }

    /// The effective price per useful vote once paid tests are amortized.
    pub fn price_per_label(&self) -> Result<f64> {
        price_per_label(self.unit_cost, self.labels_per_worker, self.n_tests)
    }
}

/// Difficulty-skewed accuracy: 0.5 + (base - 0.5) * exp(-difficulty).
///
/// Equals `base_accuracy` at difficulty 0 and approaches 0.5 (random
/// selection) as difficulty grows.
pub fn skewed_accuracy(base_accuracy: f64, difficulty: f64) -> Result<f64> {
    if !(0.5..=1.0).contains(&base_accuracy) {
        return Err(Error::InvalidParameter(format!(
            "base accuracy {base_accuracy} not in [0.5, 1]"
        )));
    }
    if !difficulty.is_finite() || difficulty < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "difficulty {difficulty} must be a non-negative real"
        )));
    }
    Ok(0.5 + (base_accuracy - 0.5) * (-difficulty).exp())
}

/// Price per useful label: UC * (N_l + N_t) / N_l.
pub fn price_per_label(unit_cost: f64, n_labels: usize, n_tests: usize) -> Result<f64> {
    if n_labels == 0 {
        return Err(Error::InvalidParameter(
            "price_per_label requires n_labels >= 1".into(),
        ));
    }
    if !unit_cost.is_finite() || unit_cost < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "unit cost {unit_cost} must be non-negative"
        )));
    }
    Ok(unit_cost * (n_labels + n_tests) as f64 / n_labels as f64)
}

/// Deterministic seed derivation for independent RNG streams.
///
/// FNV-1a over the tag bytes mixed into the master seed, finalized with the
/// splitmix64 permutation; stable across platforms.
pub fn derive_seed(master: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    splitmix64(master ^ h)
}

/// Seed for a numbered stream (replication, sweep cell, ...).
pub fn derive_seed_indexed(master: u64, tag: &str, index: u64) -> u64 {
    splitmix64(derive_seed(master, tag) ^ splitmix64(index.wrapping_add(0x9e3779b97f4a7c15)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
