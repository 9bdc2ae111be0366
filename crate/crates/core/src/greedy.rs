//! Slot-by-slot greedy matching of outstanding sample copies to free
//! classifiers.
//!
//! Each slot scans classifiers in decreasing competence. A classifier takes the
//! eligible outstanding sample with the largest incremental gain if that gain
//! is positive; the first classifier whose best gain is non-positive ends the
//! scan for the slot. After the scan, samples that can no longer gain from any
//! eligible classifier in a later slot exit.
//!
//! Copies of a sample are implicit: a sample can take one more block for every
//! eligible classifier it has not used yet.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::data::ArrivalStream;
use crate::model::{AssignmentLedger, ClassifierId, ResourceBlock, Sample, SampleId, Slot};
use crate::utility::{f_value, incremental_gain, CompetenceProfile};

/// Why a sample left the system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExitReason {
    /// Every classifier that could label it already has.
    NoEligible,
    /// No eligible classifier yields a positive gain at any later slot.
    NoGain,
    /// Still outstanding when the horizon ended.
    Horizon,
    /// Arrived during the learning phase and was not kept for matching.
    Learning,
}

#[derive(Debug, Clone)]
struct Outstanding {
    weight: f64,
    arrival: Slot,
    /// Eligible classifiers: able to label the sample and not used yet.
    eligible: Vec<bool>,
    n_eligible: usize,
    err_held: f64,
    completion: Slot,
    f: f64,
    blocks: Vec<ResourceBlock>,
}

impl Outstanding {
    fn new(sample: &Sample, n_classifiers: usize) -> Self {
        let eligible: Vec<bool> = (0..n_classifiers)
            .map(|m| sample.can_label(ClassifierId(m)))
            .collect();
        let n_eligible = eligible.iter().filter(|e| **e).count();
        Outstanding {
            weight: sample.weight,
            arrival: sample.arrival,
            eligible,
            n_eligible,
            err_held: 0.0,
            completion: sample.arrival,
            f: 0.0,
            blocks: Vec::new(),
        }
    }

    fn gain(&self, err_new: f64, slot: Slot, c: f64) -> f64 {
        let extra = slot.saturating_sub(self.completion) as f64;
        incremental_gain(self.weight, self.err_held, err_new, extra, c)
    }
}

/// Matcher state carried between slots.
#[derive(Debug, Clone, Default)]
pub struct SlotState {
    outstanding: BTreeMap<SampleId, Outstanding>,
    free: Vec<bool>,
}

impl SlotState {
    pub fn outstanding(&self) -> impl Iterator<Item = SampleId> + '_ {
        self.outstanding.keys().copied()
    }

    pub fn n_outstanding(&self) -> usize {
        self.outstanding.len()
    }

    /// Current `f` of an outstanding sample.
    pub fn current_f(&self, s: SampleId) -> Option<f64> {
        self.outstanding.get(&s).map(|o| o.f)
    }

    /// Latest assignment slot, or the arrival slot before any assignment.
    pub fn completion_slot(&self, s: SampleId) -> Option<Slot> {
        self.outstanding.get(&s).map(|o| o.completion)
    }

    pub fn used(&self, s: SampleId) -> Option<Vec<ClassifierId>> {
        self.outstanding
            .get(&s)
            .map(|o| o.blocks.iter().map(|b| b.classifier).collect())
    }

    pub fn free(&self) -> Vec<ClassifierId> {
        self.free
            .iter()
            .enumerate()
            .filter(|(_, f)| **f)
            .map(|(m, _)| ClassifierId(m))
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatcherOutput {
    pub assignments: Vec<(SampleId, ClassifierId)>,
    pub sigmas: Vec<f64>,
    pub exited: Vec<SampleId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceKind {
    Assign,
    Exit,
}

/// One row of the optional per-slot trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEvent {
    pub slot: Slot,
    pub event: TraceKind,
    pub sample_id: usize,
    pub classifier_id: Option<usize>,
    pub sigma: Option<f64>,
    pub f_after: f64,
}

/// Final per-sample record of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    pub f: f64,
    pub exit_slot: Slot,
    pub reason: ExitReason,
}

/// The greedy matcher. Feed it one slot at a time with [`GreedyMatcher::run_slot`].
#[derive(Debug, Clone)]
pub struct GreedyMatcher {
    profile: CompetenceProfile,
    c: f64,
    state: SlotState,
    ledger: AssignmentLedger,
    outcomes: BTreeMap<SampleId, SampleOutcome>,
    executed_sigma: f64,
    trace: Option<Vec<TraceEvent>>,
    /// Recompute `f` from scratch after each assignment and compare.
    pub debug_check: bool,
}

impl GreedyMatcher {
    pub fn new(profile: CompetenceProfile, c: f64) -> Self {
        let m = profile.len();
        GreedyMatcher {
            profile,
            c,
            state: SlotState {
                outstanding: BTreeMap::new(),
                free: vec![true; m],
            },
            ledger: AssignmentLedger::new(),
            outcomes: BTreeMap::new(),
            executed_sigma: 0.0,
            trace: None,
            debug_check: cfg!(debug_assertions),
        }
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn state(&self) -> &SlotState {
        &self.state
    }

    pub fn ledger(&self) -> &AssignmentLedger {
        &self.ledger
    }

    pub fn profile(&self) -> &CompetenceProfile {
        &self.profile
    }

    /// Runs one slot: admit arrivals, scan classifiers, then sweep exits.
    pub fn run_slot(&mut self, arrivals: &[Sample], t: Slot) -> MatcherOutput {
        let n = self.profile.len();
        for s in arrivals {
            debug_assert_eq!(s.arrival, t);
            self.state.outstanding.insert(s.id, Outstanding::new(s, n));
        }
        self.state.free = vec![true; n];

        let mut out = MatcherOutput::default();
        for idx in 0..self.profile.order().len() {
            let m = self.profile.order()[idx];
            if !self.state.free[m.0] {
                continue;
            }
            let err_m = self.profile.err(m);
            let mut best: Option<(SampleId, f64)> = None;
            for (&id, o) in &self.state.outstanding {
                if !o.eligible[m.0] {
                    continue;
                }
                let g = o.gain(err_m, t, self.c);
                if best.is_none_or(|(_, b)| g > b) {
                    best = Some((id, g));
                }
            }
            let Some((id, g)) = best else {
                // Nobody can use this classifier; lower ones may still be useful.
                continue;
            };
            if g <= 0.0 {
                break;
            }
            self.commit(id, m, t, g);
            out.assignments.push((id, m));
            out.sigmas.push(g);
        }

        out.exited = self.exit_sweep(t);
        out
    }

    fn commit(&mut self, id: SampleId, m: ClassifierId, t: Slot, g: f64) {
        self.ledger
            .assign(id, m, t)
            .expect("greedy respects ledger invariants");
        self.state.free[m.0] = false;
        let c = self.c;
        let o = self
            .state
            .outstanding
            .get_mut(&id)
            .expect("outstanding sample");
        o.eligible[m.0] = false;
        o.n_eligible -= 1;
        o.err_held += self.profile.err(m);
        o.completion = o.completion.max(t);
        o.f += g;
        o.blocks.push(ResourceBlock::new(m, t));
        self.executed_sigma += g;
        if self.debug_check {
            let probe = probe_sample(id, o);
            let fresh = f_value(&o.blocks, self.profile.p(), &probe, c)
                .expect("valid block set")
                .f_value;
            assert!(
                (fresh - o.f).abs() <= 1e-9,
                "cached f {} != recomputed {}",
                o.f,
                fresh
            );
        }
        let f_after = o.f;
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceEvent {
                slot: t,
                event: TraceKind::Assign,
                sample_id: id.0,
                classifier_id: Some(m.0),
                sigma: Some(g),
                f_after,
            });
        }
    }

    /// Best gain an outstanding sample could get from any eligible classifier
    /// at `slot`; `None` when nothing is eligible.
    fn best_future_gain(&self, o: &Outstanding, slot: Slot) -> Option<f64> {
        if o.n_eligible == 0 {
            return None;
        }
        // The gain is increasing in the classifier's error mass.
        let err_max = (0..self.profile.len())
            .filter(|&m| o.eligible[m])
            .map(|m| self.profile.err(ClassifierId(m)))
            .fold(f64::NEG_INFINITY, f64::max);
        Some(o.gain(err_max, slot, self.c))
    }

    /// Removes samples with no eligible classifier, or whose best gain at
    /// slot `t + 1` is non-positive. Gains only shrink with later slots, so
    /// the single check covers every future slot.
    pub fn exit_sweep(&mut self, t: Slot) -> Vec<SampleId> {
        let mut leaving = Vec::new();
        for (&id, o) in &self.state.outstanding {
            match self.best_future_gain(o, t + 1) {
                None => leaving.push((id, ExitReason::NoEligible)),
                Some(g) if g <= 0.0 => leaving.push((id, ExitReason::NoGain)),
                Some(_) => {}
            }
        }
        for &(id, reason) in &leaving {
            self.retire(id, t, reason);
        }
        leaving.into_iter().map(|(id, _)| id).collect()
    }

    fn retire(&mut self, id: SampleId, t: Slot, reason: ExitReason) {
        let o = self
            .state
            .outstanding
            .remove(&id)
            .expect("outstanding sample");
        self.ledger
            .record_exit(id, t)
            .expect("exit after last assignment");
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceEvent {
                slot: t,
                event: TraceKind::Exit,
                sample_id: id.0,
                classifier_id: None,
                sigma: None,
                f_after: o.f,
            });
        }
        self.outcomes.insert(
            id,
            SampleOutcome {
                f: o.f,
                exit_slot: t,
                reason,
            },
        );
    }

    /// Records a sample that never enters matching (learning-phase arrivals).
    pub fn record_skipped(&mut self, id: SampleId, t: Slot) {
        self.ledger
            .record_exit(id, t)
            .expect("skipped sample has no entries");
        self.outcomes.insert(
            id,
            SampleOutcome {
                f: 0.0,
                exit_slot: t,
                reason: ExitReason::Learning,
            },
        );
    }

    /// Flushes every still-outstanding sample at the horizon.
    pub fn finish(mut self, horizon: Slot) -> GreedyRun {
        let ids: Vec<SampleId> = self.state.outstanding.keys().copied().collect();
        for id in ids {
            self.retire(id, horizon, ExitReason::Horizon);
        }
        let total_utility = self.outcomes.values().map(|o| o.f).sum();
        GreedyRun {
            ledger: self.ledger,
            total_utility,
            executed_sigma: self.executed_sigma,
            outcomes: self.outcomes,
            trace: self.trace.unwrap_or_default(),
        }
    }
}

fn probe_sample(id: SampleId, o: &Outstanding) -> Sample {
    Sample::new(
        id,
        o.arrival,
        o.weight,
        crate::model::Label::Pos,
        Vec::new(),
    )
    .expect("outstanding samples have positive weight")
}

/// Result of a full matcher run.
#[derive(Debug, Clone)]
pub struct GreedyRun {
    pub ledger: AssignmentLedger,
    /// Sum of final `f` values, under the competences the matcher used.
    pub total_utility: f64,
    /// Sum of every accepted gain; equals `total_utility` up to rounding.
    pub executed_sigma: f64,
    pub outcomes: BTreeMap<SampleId, SampleOutcome>,
    pub trace: Vec<TraceEvent>,
}

/// Greedy over slots `first..=last` of the stream; arrivals before `first`
/// are ignored.
pub fn run_range(
    stream: &ArrivalStream,
    profile: &CompetenceProfile,
    c: f64,
    first: Slot,
    last: Slot,
    trace: bool,
) -> GreedyRun {
    let mut matcher = GreedyMatcher::new(profile.clone(), c);
    if trace {
        matcher = matcher.with_trace();
    }
    for t in first..=last {
        matcher.run_slot(stream.slot(t), t);
    }
    matcher.finish(last.max(first.saturating_sub(1)))
}

/// Greedy over the whole horizon with the given competences.
pub fn run_genie(stream: &ArrivalStream, profile: &CompetenceProfile, c: f64) -> GreedyRun {
    run_range(stream, profile, c, 1, stream.horizon(), false)
}

/// Sum of `f` over every sample in the ledger, evaluated with `competences`.
pub fn ledger_utility<'a>(
    ledger: &AssignmentLedger,
    samples: impl IntoIterator<Item = &'a Sample>,
    competences: &[f64],
    c: f64,
) -> f64 {
    let mut blocks: BTreeMap<SampleId, Vec<ResourceBlock>> = BTreeMap::new();
    for e in ledger.entries() {
        blocks
            .entry(e.sample)
            .or_default()
            .push(ResourceBlock::new(e.classifier, e.slot));
    }
    samples
        .into_iter()
        .filter_map(|s| blocks.get(&s.id).map(|b| (s, b)))
        .map(|(s, b)| {
            f_value(b, competences, s, c)
                .expect("ledger blocks are valid")
                .f_value
        })
        .sum()
}
