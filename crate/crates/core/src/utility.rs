//! Closed-form utility math: error mass, accuracy, the weighted-majority
//! decision, the per-sample utility `f` and its incremental gain `sigma`.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::model::{ClassifierId, Label, ResourceBlock, Sample, Slot};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UtilityError {
    #[error("competence {0} outside (0.5, 1)")]
    Domain(f64),
    #[error("classifier {0} appears twice in the block set")]
    DuplicateClassifier(ClassifierId),
    #[error("classifier {0} has no competence")]
    UnknownClassifier(ClassifierId),
    #[error("classifier {0} already labeled this sample")]
    Ineligible(ClassifierId),
    #[error("block at slot {slot} precedes slot {floor}")]
    SlotTooEarly { slot: Slot, floor: Slot },
}

/// Error mass `(p - 1/2) ln(p / (1 - p))` of one or more labels, in nats.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct ErrMass(pub f64);

impl ErrMass {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl std::ops::Add for ErrMass {
    type Output = ErrMass;
    fn add(self, rhs: ErrMass) -> ErrMass {
        ErrMass(self.0 + rhs.0)
    }
}

impl std::iter::Sum for ErrMass {
    fn sum<I: Iterator<Item = ErrMass>>(iter: I) -> ErrMass {
        iter.fold(ErrMass(0.0), |a, b| a + b)
    }
}

pub fn err_single(p: f64) -> Result<ErrMass, UtilityError> {
    if !(p > 0.5 && p < 1.0) {
        return Err(UtilityError::Domain(p));
    }
    Ok(ErrMass((p - 0.5) * (p / (1.0 - p)).ln()))
}

pub fn err_set(ps: &[f64]) -> Result<ErrMass, UtilityError> {
    ps.iter().map(|&p| err_single(p)).sum()
}

/// `1 - exp(-c err)`.
pub fn accuracy(err: ErrMass, c: f64) -> f64 {
    debug_assert!(err.0 >= 0.0 && c > 0.0);
    -(-c * err.0).exp_m1()
}

/// Log-odds vote weight `ln(p / (1 - p))`.
pub fn vote_weight(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Declares `+1` iff the log-odds mass of `+1` voters strictly exceeds that of
/// `-1` voters; everything else, including ties and the empty vote, is `-1`.
pub fn weighted_majority(
    labels: &[(ClassifierId, Label)],
    competences: &[f64],
) -> Result<Label, UtilityError> {
    let mut pos = 0.0;
    let mut neg = 0.0;
    for &(m, label) in labels {
        let p = *competences
            .get(m.0)
            .ok_or(UtilityError::UnknownClassifier(m))?;
        match label {
            Label::Pos => pos += vote_weight(p),
            Label::Neg => neg += vote_weight(p),
        }
    }
    Ok(if pos > neg { Label::Pos } else { Label::Neg })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityBreakdown {
    pub accuracy_term: f64,
    pub delay_term: f64,
    pub f_value: f64,
}

/// Latest slot of the block set; the arrival slot for the empty set.
pub fn completion_slot(blocks: &[ResourceBlock], arrival: Slot) -> Slot {
    blocks
        .iter()
        .map(|b| b.slot)
        .max()
        .unwrap_or(arrival)
        .max(arrival)
}

fn check_distinct(blocks: &[ResourceBlock]) -> Result<(), UtilityError> {
    let mut seen = BTreeSet::new();
    for b in blocks {
        if !seen.insert(b.classifier) {
            return Err(UtilityError::DuplicateClassifier(b.classifier));
        }
    }
    Ok(())
}

fn blocks_err(blocks: &[ResourceBlock], competences: &[f64]) -> Result<ErrMass, UtilityError> {
    blocks
        .iter()
        .map(|b| {
            let p = *competences
                .get(b.classifier.0)
                .ok_or(UtilityError::UnknownClassifier(b.classifier))?;
            err_single(p)
        })
        .sum()
}

/// `f_s(R) = w_s acc_s(R) - (D(R) - a_s)` with `D(empty) = a_s`.
pub fn f_value(
    blocks: &[ResourceBlock],
    competences: &[f64],
    sample: &Sample,
    c: f64,
) -> Result<UtilityBreakdown, UtilityError> {
    check_distinct(blocks)?;
    if let Some(b) = blocks.iter().find(|b| b.slot < sample.arrival) {
        return Err(UtilityError::SlotTooEarly {
            slot: b.slot,
            floor: sample.arrival,
        });
    }
    let err = blocks_err(blocks, competences)?;
    let accuracy_term = sample.weight * accuracy(err, c);
    let delay_term = (completion_slot(blocks, sample.arrival) - sample.arrival) as f64;
    Ok(UtilityBreakdown {
        accuracy_term,
        delay_term,
        f_value: accuracy_term - delay_term,
    })
}

/// Gain of the monotonized utility `u` when a block moving `f` from
/// `current_f` to `candidate_f` is offered.
pub fn u_increment(current_f: f64, candidate_f: f64) -> f64 {
    candidate_f.max(current_f) - current_f
}

/// Closed form of the incremental gain from the sample's cached state:
/// `w e^{-c err_held} (1 - e^{-c err_m}) - extra_delay`.
#[inline]
pub fn incremental_gain(weight: f64, err_held: f64, err_new: f64, extra_delay: f64, c: f64) -> f64 {
    weight * (-c * err_held).exp() * -(-c * err_new).exp_m1() - extra_delay
}

/// Gain in `f` from adding `new_block` to `assigned`; equals
/// `f(assigned + new) - f(assigned)`.
pub fn sigma(
    sample: &Sample,
    assigned: &[ResourceBlock],
    new_block: ResourceBlock,
    competences: &[f64],
    c: f64,
) -> Result<f64, UtilityError> {
    check_distinct(assigned)?;
    if assigned
        .iter()
        .any(|b| b.classifier == new_block.classifier)
    {
        return Err(UtilityError::Ineligible(new_block.classifier));
    }
    let done = completion_slot(assigned, sample.arrival);
    if new_block.slot < done {
        return Err(UtilityError::SlotTooEarly {
            slot: new_block.slot,
            floor: done,
        });
    }
    let held = blocks_err(assigned, competences)?;
    let p_new = *competences
        .get(new_block.classifier.0)
        .ok_or(UtilityError::UnknownClassifier(new_block.classifier))?;
    let err_new = err_single(p_new)?;
    let extra = (new_block.slot - done) as f64;
    Ok(incremental_gain(sample.weight, held.0, err_new.0, extra, c))
}

/// Per-classifier error masses plus the scan order used by the greedy
/// matcher: decreasing competence, ties by ascending id.
#[derive(Debug, Clone, PartialEq)]
pub struct CompetenceProfile {
    p: Vec<f64>,
    err: Vec<f64>,
    order: Vec<ClassifierId>,
}

impl CompetenceProfile {
    pub fn new(p: &[f64]) -> Result<Self, UtilityError> {
        let err = p
            .iter()
            .map(|&q| err_single(q).map(ErrMass::value))
            .collect::<Result<Vec<_>, _>>()?;
        let mut order: Vec<ClassifierId> = (0..p.len()).map(ClassifierId).collect();
        order.sort_by(|a, b| p[b.0].total_cmp(&p[a.0]).then(a.cmp(b)));
        Ok(CompetenceProfile {
            p: p.to_vec(),
            err,
            order,
        })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn err(&self, m: ClassifierId) -> f64 {
        self.err[m.0]
    }

    pub fn order(&self) -> &[ClassifierId] {
        &self.order
    }
}
