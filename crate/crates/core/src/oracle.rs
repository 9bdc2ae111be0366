//! Desk-scale ground truth: exhaustive offline optimum, the contention gap
//! between samples, and the perturbation harness showing that small errors
//! in the competences leave greedy decisions unchanged.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::ArrivalStream;
use crate::greedy::{run_genie, GreedyRun};
use crate::model::{AssignmentLedger, ClassifierId, Label, ResourceBlock, Sample, SampleId, Slot};
use crate::utility::{
    accuracy, err_single, f_value, incremental_gain, u_increment, CompetenceProfile, ErrMass,
};

/// Largest search space `brute_force_opt` accepts.
pub const MAX_ENUMERATION: u128 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("instance needs {0} leaf evaluations, above the limit of {MAX_ENUMERATION}")]
    TooLarge(u128),
    #[error("no pair of contending copies has a positive utility gap")]
    DegenerateGap,
    #[error("invalid instance: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TinyInstance {
    pub stream: ArrivalStream,
    pub competences: Vec<f64>,
    pub c: f64,
}

impl TinyInstance {
    pub fn new(stream: ArrivalStream, competences: Vec<f64>, c: f64) -> Result<Self, OracleError> {
        if competences.iter().any(|&p| !(p > 0.5 && p < 1.0)) {
            return Err(OracleError::Invalid(
                "competences must lie in (0.5, 1)".into(),
            ));
        }
        Ok(TinyInstance {
            stream,
            competences,
            c,
        })
    }

    pub fn profile(&self) -> CompetenceProfile {
        CompetenceProfile::new(&self.competences).expect("validated competences")
    }

    pub fn samples(&self) -> Vec<&Sample> {
        self.stream.samples().collect()
    }

    pub fn max_weight(&self) -> f64 {
        self.stream.samples().map(|s| s.weight).fold(0.0, f64::max)
    }

    pub fn greedy(&self) -> GreedyRun {
        run_genie(&self.stream, &self.profile(), self.c)
    }
}

/// Random instance with `1..=max_m` classifiers, `1..=max_t` slots and
/// `1..=max_samples` samples, weights on `{3, ..., 10}`.
pub fn random_tiny<R: Rng>(
    rng: &mut R,
    max_m: usize,
    max_t: usize,
    max_samples: usize,
) -> TinyInstance {
    let m = rng.gen_range(1..=max_m);
    let horizon = rng.gen_range(1..=max_t);
    let n = rng.gen_range(1..=max_samples);
    let competences: Vec<f64> = (0..m).map(|_| rng.gen_range(0.55..0.95)).collect();
    let mut arrivals: Vec<Slot> = (0..n).map(|_| rng.gen_range(1..=horizon)).collect();
    arrivals.sort_unstable();
    let mut per_slot = vec![Vec::new(); horizon];
    for (i, &a) in arrivals.iter().enumerate() {
        let w = rng.gen_range(3..=10) as f64;
        let s = Sample::new(SampleId(i), a, w, Label::Pos, vec![Some(Label::Pos); m])
            .expect("positive weight");
        per_slot[a - 1].push(s);
    }
    TinyInstance::new(ArrivalStream::new(per_slot, 0), competences, 1.0).expect("valid competences")
}

/// Per classifier, every way to give it to at most one sample per slot and
/// at most once per sample: `choice[s]` is the slot sample `s` uses it in.
fn classifier_options(
    samples: &[&Sample],
    m: ClassifierId,
    horizon: Slot,
) -> Vec<Vec<Option<Slot>>> {
    fn rec(
        idx: usize,
        samples: &[&Sample],
        m: ClassifierId,
        horizon: Slot,
        used: &mut Vec<bool>,
        cur: &mut Vec<Option<Slot>>,
        out: &mut Vec<Vec<Option<Slot>>>,
    ) {
        if idx == samples.len() {
            out.push(cur.clone());
            return;
        }
        cur.push(None);
        rec(idx + 1, samples, m, horizon, used, cur, out);
        cur.pop();
        if samples[idx].can_label(m) {
            for t in samples[idx].arrival..=horizon {
                if used[t] {
                    continue;
                }
                used[t] = true;
                cur.push(Some(t));
                rec(idx + 1, samples, m, horizon, used, cur, out);
                cur.pop();
                used[t] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(
        0,
        samples,
        m,
        horizon,
        &mut vec![false; horizon + 1],
        &mut Vec::new(),
        &mut out,
    );
    out
}

/// Exact offline optimum of the total utility by enumeration. A sample may
/// end up with no blocks (utility 0); exits are implicit at its last block.
pub fn brute_force_opt(inst: &TinyInstance) -> Result<(f64, AssignmentLedger), OracleError> {
    let samples = inst.samples();
    let horizon = inst.stream.horizon();
    let n_cls = inst.competences.len();
    let options: Vec<Vec<Vec<Option<Slot>>>> = (0..n_cls)
        .map(|m| classifier_options(&samples, ClassifierId(m), horizon))
        .collect();
    let size: u128 = options.iter().map(|o| o.len() as u128).product();
    if size > MAX_ENUMERATION {
        return Err(OracleError::TooLarge(size));
    }
    let err: Vec<f64> = inst
        .competences
        .iter()
        .map(|&p| err_single(p).expect("valid").0)
        .collect();

    struct Search<'a> {
        samples: &'a [&'a Sample],
        options: &'a [Vec<Vec<Option<Slot>>>],
        err: &'a [f64],
        c: f64,
        err_held: Vec<f64>,
        last: Vec<Slot>,
        pick: Vec<usize>,
        best: f64,
        best_pick: Vec<usize>,
    }
    impl Search<'_> {
        fn go(&mut self, m: usize) {
            if m == self.options.len() {
                let total: f64 = self
                    .samples
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let acc = accuracy(ErrMass(self.err_held[i]), self.c);
                        s.weight * acc - (self.last[i].max(s.arrival) - s.arrival) as f64
                    })
                    .sum();
                if total > self.best {
                    self.best = total;
                    self.best_pick = self.pick.clone();
                }
                return;
            }
            for k in 0..self.options[m].len() {
                let saved_last = self.last.clone();
                let saved_err = self.err_held.clone();
                for (i, slot) in self.options[m][k].iter().enumerate() {
                    if let Some(t) = *slot {
                        self.err_held[i] += self.err[m];
                        self.last[i] = self.last[i].max(t);
                    }
                }
                self.pick[m] = k;
                self.go(m + 1);
                self.err_held = saved_err;
                self.last = saved_last;
            }
        }
    }

    let mut search = Search {
        samples: &samples,
        options: &options,
        err: &err,
        c: inst.c,
        err_held: vec![0.0; samples.len()],
        last: vec![0; samples.len()],
        pick: vec![0; n_cls],
        best: f64::NEG_INFINITY,
        best_pick: vec![0; n_cls],
    };
    search.go(0);

    let mut ledger = AssignmentLedger::new();
    for (m, &k) in search.best_pick.iter().enumerate() {
        for (i, slot) in options[m][k].iter().enumerate() {
            if let Some(t) = *slot {
                ledger
                    .assign(samples[i].id, ClassifierId(m), t)
                    .expect("feasible by construction");
            }
        }
    }
    // Recompute from the ledger so the reported optimum carries no drift
    // from the incremental sums.
    let mut best = 0.0;
    for s in &samples {
        let blocks = ledger.blocks_of(s.id);
        best += f_value(&blocks, &inst.competences, s, inst.c)
            .expect("valid")
            .f_value;
    }
    for s in &samples {
        let exit = ledger
            .blocks_of(s.id)
            .iter()
            .map(|b| b.slot)
            .max()
            .unwrap_or(s.arrival);
        ledger.record_exit(s.id, exit).expect("exit at last block");
    }
    Ok((best, ledger))
}

/// Every subset of `pool` as a bitmask-indexed list.
fn subsets(pool: &[usize]) -> Vec<Vec<usize>> {
    (0..(1u32 << pool.len()))
        .map(|mask| {
            pool.iter()
                .enumerate()
                .filter(|(b, _)| mask & (1 << b) != 0)
                .map(|(_, &m)| m)
                .collect()
        })
        .collect()
}

/// Smallest positive gap between the incremental utilities of copies of two
/// distinct samples contending for one classifier, over every pair of
/// label histories, every eligible classifier and every reachable pending
/// delay (`0..=T - a_s` for each sample).
pub fn delta_gap(inst: &TinyInstance) -> Result<f64, OracleError> {
    let samples = inst.samples();
    let horizon = inst.stream.horizon();
    let n_cls = inst.competences.len();
    let err: Vec<f64> = inst
        .competences
        .iter()
        .map(|&p| err_single(p).expect("valid").0)
        .collect();

    // Per sample: for every history and eligible classifier, the gain before
    // subtracting delay.
    struct Gains {
        weight_gain: Vec<(usize, f64)>,
        max_delay: usize,
    }
    let table: Vec<Gains> = samples
        .iter()
        .map(|s| {
            let pool: Vec<usize> = (0..n_cls)
                .filter(|&m| s.can_label(ClassifierId(m)))
                .collect();
            let mut weight_gain = Vec::new();
            for held in subsets(&pool) {
                let e_held: f64 = held.iter().map(|&m| err[m]).sum();
                for &m in pool.iter().filter(|m| !held.contains(m)) {
                    weight_gain.push((m, incremental_gain(s.weight, e_held, err[m], 0.0, inst.c)));
                }
            }
            Gains {
                weight_gain,
                max_delay: horizon - s.arrival,
            }
        })
        .collect();

    let mut best = f64::INFINITY;
    for i in 0..samples.len() {
        for j in (i + 1)..samples.len() {
            for &(mi, gi) in &table[i].weight_gain {
                for &(mj, gj) in &table[j].weight_gain {
                    if mi != mj {
                        continue;
                    }
                    for di in 0..=table[i].max_delay {
                        for dj in 0..=table[j].max_delay {
                            let gap = ((gi - di as f64) - (gj - dj as f64)).abs();
                            if gap > 0.0 && gap < best {
                                best = gap;
                            }
                        }
                    }
                }
            }
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(OracleError::DegenerateGap)
    }
}

/// Inverse of the error mass on `(1/2, 1)` by bisection.
pub fn invert_err(target: f64) -> f64 {
    assert!(target > 0.0, "error mass must be positive");
    let f = |p: f64| (p - 0.5) * (p / (1.0 - p)).ln();
    let (mut lo, mut hi) = (0.5_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationReport {
    pub trials: usize,
    pub violations: usize,
    pub delta: f64,
    /// Perturbation bound on each error mass actually applied.
    pub bound: f64,
}

/// Perturbs every error mass by at most `scale * delta / (6 w_max 2^M)`, runs
/// greedy with true and perturbed competences and counts differing ledgers.
pub fn perturbation_harness(
    inst: &TinyInstance,
    n_trials: usize,
    seed: u64,
    scale: f64,
) -> Result<PerturbationReport, OracleError> {
    let delta = delta_gap(inst)?;
    let m = inst.competences.len();
    let bound = scale * delta / (6.0 * inst.max_weight() * 2f64.powi(m as i32));
    let reference = inst.greedy();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    for _ in 0..n_trials {
        let perturbed: Vec<f64> = inst
            .competences
            .iter()
            .map(|&p| {
                let e = err_single(p).expect("valid").0;
                let shift = if bound > 0.0 {
                    rng.gen_range(-bound..=bound)
                } else {
                    0.0
                };
                invert_err((e + shift).max(f64::MIN_POSITIVE))
            })
            .collect();
        let profile = CompetenceProfile::new(&perturbed).expect("perturbed competences valid");
        let run = run_genie(&inst.stream, &profile, inst.c);
        if run.ledger != reference.ledger {
            violations += 1;
        }
    }
    Ok(PerturbationReport {
        trials: n_trials,
        violations,
        delta,
        bound,
    })
}

/// Outcome of one randomized verification suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub violations: usize,
    /// Worst margin seen; negative means the property was violated.
    pub worst_margin: f64,
    pub detail: String,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// How blocks in a submodularity case are placed in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotMode {
    /// Every block sits in the arrival slot, so no delay is charged.
    Same,
    /// Chain blocks advance by 0 to 2 slots; the probe lands at or after
    /// the last of them.
    Random,
}

/// Randomized diminishing-returns checks on incremental chains of blocks for
/// one sample: accuracy over nested classifier sets, and the monotonized
/// utility increment for a block `x` after prefixes `S` and `T` of a chain.
pub fn submodularity_suite(n_cases: usize, seed: u64, tol: f64, mode: SlotMode) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut acc_bad, mut u_bad, mut violations) = (0, 0, 0);
    let mut worst = f64::INFINITY;
    let mut first = String::new();
    let step = |rng: &mut ChaCha8Rng| match mode {
        SlotMode::Same => 0,
        SlotMode::Random => rng.gen_range(0..=2),
    };
    for case in 0..n_cases {
        let m = rng.gen_range(2..=8);
        let p: Vec<f64> = (0..m).map(|_| rng.gen_range(0.51..0.95)).collect();
        let arrival = rng.gen_range(1..=5);
        let weight = rng.gen_range(3..=10) as f64;
        let sample = Sample::new(
            SampleId(0),
            arrival,
            weight,
            Label::Pos,
            vec![Some(Label::Pos); m],
        )
        .expect("positive weight");

        // Random order of classifiers; the last one is the probe x.
        let mut order: Vec<usize> = (0..m).collect();
        for i in (1..m).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let chain_len = rng.gen_range(0..m);
        let mut slot = arrival;
        let chain: Vec<ResourceBlock> = order[..chain_len]
            .iter()
            .map(|&c| {
                slot += step(&mut rng);
                ResourceBlock::new(ClassifierId(c), slot)
            })
            .collect();
        let x = ResourceBlock::new(ClassifierId(order[m - 1]), slot + step(&mut rng));
        let s_len = rng.gen_range(0..=chain_len);
        let (short, long) = (&chain[..s_len], &chain[..chain_len]);

        // Accuracy: acc(V + x) - acc(V) >= acc(V' + x) - acc(V').
        let err_of = |blocks: &[ResourceBlock]| -> f64 {
            blocks
                .iter()
                .map(|b| err_single(p[b.classifier.0]).expect("valid").0)
                .sum()
        };
        let ex = err_single(p[x.classifier.0]).expect("valid").0;
        let acc = |e: f64| accuracy(ErrMass(e), 1.0);
        let acc_margin = (acc(err_of(short) + ex) - acc(err_of(short)))
            - (acc(err_of(long) + ex) - acc(err_of(long)));

        // Utility: u-increment after S >= u-increment after T.
        let f =
            |blocks: &[ResourceBlock]| f_value(blocks, &p, &sample, 1.0).expect("valid").f_value;
        let with = |blocks: &[ResourceBlock]| {
            let mut v = blocks.to_vec();
            v.push(x);
            f(&v)
        };
        let u_margin = u_increment(f(short), with(short)) - u_increment(f(long), with(long));

        worst = worst.min(acc_margin.min(u_margin));
        acc_bad += usize::from(acc_margin < -tol);
        u_bad += usize::from(u_margin < -tol);
        if acc_margin < -tol || u_margin < -tol {
            violations += 1;
            if first.is_empty() {
                first = format!(
                    "; first case {case}: p={p:?} a={arrival} w={weight} S={short:?} T={long:?} x={x:?} \
                     acc_margin={acc_margin:.3e} u_margin={u_margin:.3e}"
                );
            }
        }
    }
    SuiteReport {
        name: match mode {
            SlotMode::Same => "submodularity_same_slot",
            SlotMode::Random => "submodularity_random_slot",
        },
        cases: n_cases,
        violations,
        worst_margin: worst,
        detail: format!("acc violations {acc_bad}, u violations {u_bad}{first}"),
    }
}

/// Greedy utility against half the exhaustive optimum on random tiny instances.
pub fn half_opt_suite(
    n_instances: usize,
    seed: u64,
    slack: f64,
) -> Result<SuiteReport, OracleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    let mut detail = String::new();
    for case in 0..n_instances {
        let inst = random_tiny(&mut rng, 3, 4, 3);
        let (opt, _) = brute_force_opt(&inst)?;
        let greedy = inst.greedy().total_utility;
        let margin = greedy - 0.5 * opt;
        worst = worst.min(margin);
        if margin < -slack || greedy > opt + slack {
            violations += 1;
            if detail.is_empty() {
                detail = format!("case {case}: greedy={greedy} opt={opt} instance={inst:?}");
            }
        }
    }
    Ok(SuiteReport {
        name: "half_opt",
        cases: n_instances,
        violations,
        worst_margin: worst,
        detail,
    })
}

/// One perturbation trial on each of `n_instances` random instances.
pub fn perturbation_suite(n_instances: usize, seed: u64) -> Result<SuiteReport, OracleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut cases = 0;
    let mut detail = String::new();
    while cases < n_instances {
        // Instances need two samples for the gap to exist.
        let inst = random_tiny(&mut rng, 4, 4, 3);
        let report = match perturbation_harness(&inst, 1, rng.gen(), 1.0) {
            Ok(r) => r,
            Err(OracleError::DegenerateGap) => continue,
            Err(e) => return Err(e),
        };
        cases += 1;
        if report.violations > 0 {
            violations += 1;
            if detail.is_empty() {
                detail = format!(
                    "delta={} bound={} instance={inst:?}",
                    report.delta, report.bound
                );
            }
        }
    }
    Ok(SuiteReport {
        name: "perturbation",
        cases,
        violations,
        worst_margin: if violations == 0 { 0.0 } else { -1.0 },
        detail,
    })
}

/// Golden table of optimum values for seeded random instances.
pub fn write_golden<W: Write>(out: W, n_instances: usize, seed: u64) -> Result<(), csv::Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "instance",
        "competences",
        "arrivals",
        "weights",
        "horizon",
        "opt",
        "greedy",
    ])?;
    for i in 0..n_instances {
        let inst = random_tiny(&mut rng, 3, 4, 3);
        let (opt, _) = brute_force_opt(&inst).expect("tiny instance");
        let join = |v: Vec<String>| v.join(" ");
        w.write_record([
            i.to_string(),
            join(
                inst.competences
                    .iter()
                    .map(|p| format!("{p:.12}"))
                    .collect(),
            ),
            join(
                inst.stream
                    .samples()
                    .map(|s| s.arrival.to_string())
                    .collect(),
            ),
            join(
                inst.stream
                    .samples()
                    .map(|s| s.weight.to_string())
                    .collect(),
            ),
            inst.stream.horizon().to_string(),
            format!("{opt:.9}"),
            format!("{:.9}", inst.greedy().total_utility),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(p: &[f64], samples: &[(Slot, f64)], horizon: Slot) -> TinyInstance {
        let mut per_slot = vec![Vec::new(); horizon];
        for (i, &(a, w)) in samples.iter().enumerate() {
            per_slot[a - 1].push(
                Sample::new(
                    SampleId(i),
                    a,
                    w,
                    Label::Pos,
                    vec![Some(Label::Pos); p.len()],
                )
                .unwrap(),
            );
        }
        TinyInstance::new(ArrivalStream::new(per_slot, 0), p.to_vec(), 1.0).unwrap()
    }

    fn acc(ps: &[f64]) -> f64 {
        accuracy(
            ErrMass(ps.iter().map(|&p| err_single(p).unwrap().0).sum()),
            1.0,
        )
    }

    #[test]
    fn single_sample_single_classifier_uses_arrival_slot() {
        let i = inst(&[0.9], &[(1, 10.0)], 2);
        let (opt, ledger) = brute_force_opt(&i).unwrap();
        assert!((opt - 10.0 * acc(&[0.9])).abs() < 1e-12);
        assert_eq!(ledger.entries()[0].slot, 1);
    }

    #[test]
    fn one_slot_two_classifiers() {
        let i = inst(&[0.9, 0.8], &[(1, 10.0)], 1);
        let (opt, ledger) = brute_force_opt(&i).unwrap();
        // All four block subsets: {}, {a}, {b}, {a, b}; both blocks win.
        let candidates = [
            0.0,
            10.0 * acc(&[0.9]),
            10.0 * acc(&[0.8]),
            10.0 * acc(&[0.9, 0.8]),
        ];
        let best = candidates.iter().copied().fold(f64::MIN, f64::max);
        assert!((opt - best).abs() < 1e-12);
        assert_eq!(ledger.len(), 2);
    }

    #[test]
    fn two_samples_one_classifier_two_slots() {
        let i = inst(&[0.9], &[(1, 10.0), (1, 3.0)], 2);
        let (opt, _) = brute_force_opt(&i).unwrap();
        // Options: serve either one at slot 1, the other at slot 2 (one slot
        // late) or not at all.
        let a = acc(&[0.9]);
        let both = 10.0 * a + (3.0 * a - 1.0);
        let candidates = [10.0 * a, 3.0 * a, both, 3.0 * a + (10.0 * a - 1.0)];
        let best = candidates.iter().copied().fold(f64::MIN, f64::max);
        assert!((opt - best).abs() < 1e-12);
    }

    #[test]
    fn enumeration_limit() {
        let i = inst(&[0.9; 8], &[(1, 5.0), (1, 5.0), (1, 5.0)], 4);
        assert!(matches!(brute_force_opt(&i), Err(OracleError::TooLarge(_))));
    }

    #[test]
    fn opt_dominates_greedy_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let i = random_tiny(&mut rng, 3, 4, 3);
            let (opt, ledger) = brute_force_opt(&i).unwrap();
            assert!(opt + 1e-9 >= i.greedy().total_utility);
            ledger.check_arrivals(i.stream.samples()).unwrap();
        }
    }

    #[test]
    fn delta_gap_golden() {
        // Two samples in a single slot, M = 2, p = (0.9, 0.8), weights (10, 3).
        let i = inst(&[0.9, 0.8], &[(1, 10.0), (1, 3.0)], 1);
        let d = delta_gap(&i).unwrap();
        // Independent enumeration: gains w e^{-E}(1 - e^{-e_m}) over histories.
        let e = [err_single(0.9).unwrap().0, err_single(0.8).unwrap().0];
        let gains = |w: f64| {
            vec![
                (0, w * (1.0 - (-e[0]).exp())),
                (1, w * (1.0 - (-e[1]).exp())),
                (0, w * (-e[1]).exp() * (1.0 - (-e[0]).exp())),
                (1, w * (-e[0]).exp() * (1.0 - (-e[1]).exp())),
            ]
        };
        let mut expected = f64::INFINITY;
        for (ma, ga) in gains(10.0) {
            for (mb, gb) in gains(3.0) {
                if ma == mb && (ga - gb).abs() > 0.0 {
                    expected = expected.min((ga - gb).abs());
                }
            }
        }
        assert!((d - expected).abs() < 1e-15);
        assert!((d - 0.392_111_949_015_689_5).abs() < 1e-12, "{d}");
    }

    #[test]
    fn delta_gap_excludes_identical_samples() {
        let i = inst(&[0.9, 0.8], &[(1, 5.0), (1, 5.0)], 1);
        let d = delta_gap(&i).unwrap();
        assert!(d > 0.0);
        let lone = inst(&[0.9], &[(1, 5.0), (1, 5.0)], 1);
        assert_eq!(delta_gap(&lone), Err(OracleError::DegenerateGap));
    }

    #[test]
    fn delta_gap_scales_with_weights_without_delay() {
        let i = inst(&[0.9, 0.8, 0.7], &[(1, 10.0), (1, 3.0), (1, 6.0)], 1);
        let j = inst(&[0.9, 0.8, 0.7], &[(1, 20.0), (1, 6.0), (1, 12.0)], 1);
        let (a, b) = (delta_gap(&i).unwrap(), delta_gap(&j).unwrap());
        assert!((b - 2.0 * a).abs() < 1e-12);
    }

    #[test]
    fn err_inversion_round_trips() {
        let top = err_single(0.95).unwrap().0;
        for k in 1..=1000 {
            let e = top * k as f64 / 1000.0;
            let p = invert_err(e);
            assert!((err_single(p).unwrap().0 - e).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_perturbation_leaves_ledger_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let i = random_tiny(&mut rng, 4, 4, 3);
        let mut i = i;
        if delta_gap(&i).is_err() {
            i = inst(&[0.9, 0.8], &[(1, 10.0), (2, 3.0)], 3);
        }
        let r = perturbation_harness(&i, 10, 1, 0.0).unwrap();
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn golden_opt_table_is_stable() {
        let mut buf = Vec::new();
        write_golden(&mut buf, 20, 2024).unwrap();
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/opt.csv");
        if std::env::var_os("REGEN_GOLDEN").is_some() {
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(&path, &buf).unwrap();
        }
        let golden = std::fs::read(&path).expect("golden file; set REGEN_GOLDEN=1 to create");
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            String::from_utf8(golden).unwrap()
        );
    }
}
