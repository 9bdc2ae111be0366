//! Core domain types: competences, samples, resource blocks, the assignment
//! ledger and the simulation configuration.
//!
//! Slots are 1-based (`1..=T`). Classifier ids are 0-based indices into the
//! competence list.

// `!(x > 0.0)` checks below are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default probability margin below 1 for configured competences.
pub const DEFAULT_RHO_FLOOR: f64 = 0.05;

pub type Slot = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SampleId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClassifierId(pub usize);

impl fmt::Display for SampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ClassifierId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("competence {p} outside (0.5, {upper})")]
    CompetenceOutOfRange { p: f64, upper: f64 },
    #[error("rho floor {0} outside (0, 0.5)")]
    RhoOutOfRange(f64),
    #[error("sample weight {0} must be positive")]
    NonPositiveWeight(f64),
    #[error("classifier {classifier} already holds a sample in slot {slot}")]
    BlockTaken {
        classifier: ClassifierId,
        slot: Slot,
    },
    #[error("sample {sample} was already labeled by classifier {classifier}")]
    AlreadyLabeled {
        sample: SampleId,
        classifier: ClassifierId,
    },
    #[error("slot must be >= 1")]
    ZeroSlot,
    #[error("sample {sample} exit slot {exit} precedes its assignment at slot {slot}")]
    ExitBeforeAssignment {
        sample: SampleId,
        exit: Slot,
        slot: Slot,
    },
    #[error("sample {0} exited twice")]
    DuplicateExit(SampleId),
    #[error("invalid config: {0}")]
    Config(String),
}

/// Probability that a classifier returns the correct label (one-coin model).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Competence {
    p: f64,
    rho_floor: f64,
}

impl Competence {
    /// Validates `1/2 < p < 1 - rho_floor`.
    pub fn new(p: f64, rho_floor: f64) -> Result<Self, ModelError> {
        if !(rho_floor > 0.0 && rho_floor < 0.5) {
            return Err(ModelError::RhoOutOfRange(rho_floor));
        }
        let upper = 1.0 - rho_floor;
        if !(p > 0.5 && p < upper) {
            return Err(ModelError::CompetenceOutOfRange { p, upper });
        }
        Ok(Competence { p, rho_floor })
    }

    pub fn with_default_floor(p: f64) -> Result<Self, ModelError> {
        Self::new(p, DEFAULT_RHO_FLOOR)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn rho_floor(&self) -> f64 {
        self.rho_floor
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Pos,
    Neg,
}

impl Label {
    pub fn sign(self) -> i8 {
        match self {
            Label::Pos => 1,
            Label::Neg => -1,
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }

    /// Dataset class id: `+1 -> 1`, `-1 -> 2`.
    pub fn class_id(self) -> u32 {
        match self {
            Label::Pos => 1,
            Label::Neg => 2,
        }
    }

    pub fn from_class_id(class: u32) -> Option<Label> {
        match class {
            1 => Some(Label::Pos),
            2 => Some(Label::Neg),
            _ => None,
        }
    }
}

/// An arriving item. The labels every classifier would return are fixed at
/// creation; `None` means the classifier cannot label this sample (replayed
/// datasets with partial coverage).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: SampleId,
    pub arrival: Slot,
    pub weight: f64,
    pub true_label: Label,
    drawn_labels: Vec<Option<Label>>,
    /// Dataset item this sample replays, if any.
    pub item: Option<usize>,
}

impl Sample {
    pub fn new(
        id: SampleId,
        arrival: Slot,
        weight: f64,
        true_label: Label,
        drawn_labels: Vec<Option<Label>>,
    ) -> Result<Self, ModelError> {
        if !(weight > 0.0) {
            return Err(ModelError::NonPositiveWeight(weight));
        }
        if arrival == 0 {
            return Err(ModelError::ZeroSlot);
        }
        Ok(Sample {
            id,
            arrival,
            weight,
            true_label,
            drawn_labels,
            item: None,
        })
    }

    pub fn with_item(mut self, item: usize) -> Self {
        self.item = Some(item);
        self
    }

    pub fn label_of(&self, classifier: ClassifierId) -> Option<Label> {
        self.drawn_labels.get(classifier.0).copied().flatten()
    }

    pub fn can_label(&self, classifier: ClassifierId) -> bool {
        self.label_of(classifier).is_some()
    }

    pub fn drawn_labels(&self) -> &[Option<Label>] {
        &self.drawn_labels
    }

    pub fn n_labelers(&self) -> usize {
        self.drawn_labels.iter().filter(|l| l.is_some()).count()
    }
}

/// Classifier `m` in slot `t`; holds at most one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ResourceBlock {
    pub classifier: ClassifierId,
    pub slot: Slot,
}

impl ResourceBlock {
    pub fn new(classifier: ClassifierId, slot: Slot) -> Self {
        ResourceBlock { classifier, slot }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub sample: SampleId,
    pub classifier: ClassifierId,
    pub slot: Slot,
}

/// Every (sample, classifier, slot) assignment made during a run, plus the
/// slot at which each sample left the system.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssignmentLedger {
    entries: Vec<Assignment>,
    exits: BTreeMap<SampleId, Slot>,
    taken_blocks: HashSet<(ClassifierId, Slot)>,
    labeled_pairs: HashSet<(SampleId, ClassifierId)>,
    last_slot: HashMap<SampleId, Slot>,
}

impl AssignmentLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an assignment, rejecting a second sample on the same block or a
    /// second label from the same classifier for one sample.
    pub fn assign(
        &mut self,
        sample: SampleId,
        classifier: ClassifierId,
        slot: Slot,
    ) -> Result<(), ModelError> {
        if slot == 0 {
            return Err(ModelError::ZeroSlot);
        }
        if self.taken_blocks.contains(&(classifier, slot)) {
            return Err(ModelError::BlockTaken { classifier, slot });
        }
        if self.labeled_pairs.contains(&(sample, classifier)) {
            return Err(ModelError::AlreadyLabeled { sample, classifier });
        }
        if let Some(&exit) = self.exits.get(&sample) {
            if slot > exit {
                return Err(ModelError::ExitBeforeAssignment { sample, exit, slot });
            }
        }
        self.taken_blocks.insert((classifier, slot));
        self.labeled_pairs.insert((sample, classifier));
        let last = self.last_slot.entry(sample).or_insert(slot);
        *last = (*last).max(slot);
        self.entries.push(Assignment {
            sample,
            classifier,
            slot,
        });
        Ok(())
    }

    pub fn record_exit(&mut self, sample: SampleId, slot: Slot) -> Result<(), ModelError> {
        if self.exits.contains_key(&sample) {
            return Err(ModelError::DuplicateExit(sample));
        }
        if let Some(&late) = self.last_slot.get(&sample).filter(|&&late| late > slot) {
            return Err(ModelError::ExitBeforeAssignment {
                sample,
                exit: slot,
                slot: late,
            });
        }
        self.exits.insert(sample, slot);
        Ok(())
    }

    pub fn entries(&self) -> &[Assignment] {
        &self.entries
    }

    pub fn exits(&self) -> &BTreeMap<SampleId, Slot> {
        &self.exits
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn blocks_of(&self, sample: SampleId) -> Vec<ResourceBlock> {
        self.entries
            .iter()
            .filter(|e| e.sample == sample)
            .map(|e| ResourceBlock::new(e.classifier, e.slot))
            .collect()
    }

    /// Classifiers that labeled `sample` at or before `upto_slot`.
    pub fn used_classifiers(&self, sample: SampleId, upto_slot: Slot) -> BTreeSet<ClassifierId> {
        self.entries
            .iter()
            .filter(|e| e.sample == sample && e.slot <= upto_slot)
            .map(|e| e.classifier)
            .collect()
    }

    /// Checks the temporal invariant against the samples' arrival slots.
    pub fn check_arrivals<'a>(
        &self,
        samples: impl IntoIterator<Item = &'a Sample>,
    ) -> Result<(), String> {
        let arrivals: BTreeMap<SampleId, Slot> =
            samples.into_iter().map(|s| (s.id, s.arrival)).collect();
        for e in &self.entries {
            let a = arrivals
                .get(&e.sample)
                .ok_or_else(|| format!("entry for unknown sample {}", e.sample))?;
            if e.slot < *a {
                return Err(format!(
                    "sample {} assigned at slot {} before arrival {}",
                    e.sample, e.slot, a
                ));
            }
        }
        Ok(())
    }
}

/// How samples arrive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ArrivalProcess {
    Poisson {
        rate: f64,
    },
    /// Items replayed from a dataset file of `item worker class` triples.
    Replay {
        path: String,
        #[serde(default)]
        club_classes: bool,
        #[serde(default)]
        max_workers: Option<usize>,
    },
}

/// Simulation parameters. Serialized as a flat TOML table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: Slot,
    pub n_classifiers: usize,
    pub competences: Vec<f64>,
    #[serde(default = "default_rho")]
    pub rho_floor: f64,
    pub arrival: ArrivalProcess,
    pub weight_support: Vec<f64>,
    #[serde(default = "default_c")]
    pub accuracy_scale: f64,
    pub seed: u64,
    /// Cap on arrivals per slot; `None` leaves the arrival process untruncated.
    #[serde(default)]
    pub max_arrivals_per_slot: Option<usize>,
}

fn default_rho() -> f64 {
    DEFAULT_RHO_FLOOR
}

fn default_c() -> f64 {
    1.0
}

impl SimConfig {
    /// The synthetic experiment: 30 classifiers with `p_m = 0.9 - 0.005 m`,
    /// Poisson(5) arrivals and weights uniform on `{3, ..., 10}`.
    pub fn synthetic(horizon: Slot, seed: u64) -> Self {
        SimConfig {
            horizon,
            n_classifiers: 30,
            competences: (1..=30).map(|m| 0.9 - 0.005 * m as f64).collect(),
            rho_floor: DEFAULT_RHO_FLOOR,
            arrival: ArrivalProcess::Poisson { rate: 5.0 },
            weight_support: (3..=10).map(f64::from).collect(),
            accuracy_scale: 1.0,
            seed,
            max_arrivals_per_slot: None,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.horizon == 0 {
            return Err(ModelError::Config("horizon must be >= 1".into()));
        }
        if self.weight_support.is_empty() || self.weight_support.iter().any(|w| !(*w > 0.0)) {
            return Err(ModelError::Config(
                "weight_support must be nonempty and positive".into(),
            ));
        }
        if !(self.accuracy_scale > 0.0) {
            return Err(ModelError::Config("accuracy_scale must be positive".into()));
        }
        if self.max_arrivals_per_slot == Some(0) {
            return Err(ModelError::Config(
                "max_arrivals_per_slot must be >= 1".into(),
            ));
        }
        match &self.arrival {
            ArrivalProcess::Poisson { rate } => {
                if !(*rate > 0.0) {
                    return Err(ModelError::Config("poisson rate must be positive".into()));
                }
                if self.competences.len() != self.n_classifiers {
                    return Err(ModelError::Config(format!(
                        "{} competences for {} classifiers",
                        self.competences.len(),
                        self.n_classifiers
                    )));
                }
                self.competence_list()?;
            }
            ArrivalProcess::Replay { .. } => {}
        }
        Ok(())
    }

    pub fn competence_list(&self) -> Result<Vec<Competence>, ModelError> {
        self.competences
            .iter()
            .map(|&p| Competence::new(p, self.rho_floor))
            .collect()
    }

    pub fn mean_weight(&self) -> f64 {
        self.weight_support.iter().sum::<f64>() / self.weight_support.len() as f64
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, ModelError> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| ModelError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}
