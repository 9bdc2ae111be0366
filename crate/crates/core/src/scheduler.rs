//! Learn-then-match: slots `1..=T_L` label one random arrival per slot with
//! every classifier and feed the labels to the learner; slots `T_L+1..=T` run
//! the greedy matcher with the learned competences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::ArrivalStream;
use crate::greedy::{ledger_utility, GreedyMatcher, GreedyRun};
use crate::learn::{online_learn, LabelMatrix, LearnError, LearnOptions, LearnedCompetences};
use crate::model::{AssignmentLedger, SampleId, Slot};
use crate::utility::{CompetenceProfile, UtilityError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchedulerError {
    #[error("learning interval {t_learn} must satisfy 1 <= T_L < T = {horizon}")]
    InvalidPlan { t_learn: Slot, horizon: Slot },
    #[error("online learning failed: {0}")]
    Learn(#[from] LearnError),
    #[error("learned competences unusable: {0}")]
    Competence(#[from] UtilityError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhasePlan {
    t_learn: Slot,
    horizon: Slot,
}

impl PhasePlan {
    pub fn new(t_learn: Slot, horizon: Slot) -> Result<Self, SchedulerError> {
        if t_learn == 0 || t_learn >= horizon {
            return Err(SchedulerError::InvalidPlan { t_learn, horizon });
        }
        Ok(PhasePlan { t_learn, horizon })
    }

    pub fn t_learn(&self) -> Slot {
        self.t_learn
    }

    pub fn horizon(&self) -> Slot {
        self.horizon
    }
}

#[derive(Debug, Clone)]
pub struct LearningPhase {
    pub labels: LabelMatrix,
    /// The sample sent to the classifiers in each learning slot.
    pub selected: Vec<(Slot, SampleId)>,
}

/// Picks one arrival uniformly at random in each learning slot and records
/// the labels every classifier gives it. Empty slots contribute nothing.
pub fn learning_phase(
    stream: &ArrivalStream,
    plan: &PhasePlan,
    n_classifiers: usize,
    seed: u64,
) -> LearningPhase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = LabelMatrix::new(n_classifiers, 2).expect("two classes");
    let mut selected = Vec::new();
    for t in 1..=plan.t_learn.min(stream.horizon()) {
        let arrivals = stream.slot(t);
        if arrivals.is_empty() {
            continue;
        }
        let pick = &arrivals[rng.gen_range(0..arrivals.len())];
        let row: Vec<Option<u32>> = (0..n_classifiers)
            .map(|m| {
                pick.drawn_labels()
                    .get(m)
                    .copied()
                    .flatten()
                    .map(|l| l.class_id())
            })
            .collect();
        labels.push_row(&row).expect("binary labels");
        selected.push((t, pick.id));
    }
    LearningPhase { labels, selected }
}

#[derive(Debug, Clone)]
pub struct TwoPhaseRun {
    pub ledger: AssignmentLedger,
    /// Utility of the matching phase measured with the true competences.
    pub utility: f64,
    /// The same ledger valued with the learned competences.
    pub believed_utility: f64,
    pub learned: LearnedCompetences,
    pub n_learning_samples: usize,
    pub matching: GreedyRun,
}

/// Runs both phases with the default learner.
pub fn run_two_phase(
    stream: &ArrivalStream,
    truth: &[f64],
    plan: &PhasePlan,
    c: f64,
    selection_seed: u64,
) -> Result<TwoPhaseRun, SchedulerError> {
    run_two_phase_with(stream, truth, plan, c, selection_seed, |labels| {
        online_learn(labels, &LearnOptions::default())
    })
}

/// Runs both phases with a caller-supplied learner.
pub fn run_two_phase_with<F>(
    stream: &ArrivalStream,
    truth: &[f64],
    plan: &PhasePlan,
    c: f64,
    selection_seed: u64,
    learner: F,
) -> Result<TwoPhaseRun, SchedulerError>
where
    F: FnOnce(&LabelMatrix) -> Result<LearnedCompetences, LearnError>,
{
    let phase = learning_phase(stream, plan, truth.len(), selection_seed);
    let learned = learner(&phase.labels)?;
    let profile = CompetenceProfile::new(&learned.p_hat)?;

    let mut matcher = GreedyMatcher::new(profile, c);
    for t in 1..=plan.t_learn {
        for s in stream.slot(t) {
            matcher.record_skipped(s.id, t);
        }
    }
    for t in (plan.t_learn + 1)..=plan.horizon {
        matcher.run_slot(stream.slot(t), t);
    }
    let matching = matcher.finish(plan.horizon);
    let utility = ledger_utility(&matching.ledger, stream.samples(), truth, c);
    Ok(TwoPhaseRun {
        ledger: matching.ledger.clone(),
        utility,
        believed_utility: matching.total_utility,
        learned,
        n_learning_samples: phase.selected.len(),
        matching,
    })
}

/// A learner that returns the given competences unchanged.
pub fn fixed_learner(
    p: Vec<f64>,
) -> impl FnOnce(&LabelMatrix) -> Result<LearnedCompetences, LearnError> {
    move |_| {
        Ok(LearnedCompetences {
            p_hat: p,
            iterations_run: 0,
            converged: true,
            negative_sqrt: 0,
        })
    }
}
