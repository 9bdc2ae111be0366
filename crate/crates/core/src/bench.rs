//! Experiment harness: the genie greedy against learn-then-match on shared
//! arrival streams, swept over learning intervals and horizons.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::data::{generate_stream, replay_stream, ArrivalStream, DataError, DatasetTable};
use crate::greedy::run_genie;
use crate::learn::{online_learn, LearnOptions};
use crate::model::{ArrivalProcess, ModelError, SimConfig, Slot};
use crate::scheduler::{fixed_learner, run_two_phase_with, PhasePlan, SchedulerError};
use crate::utility::CompetenceProfile;

pub const DEFAULT_TL_GRID: [Slot; 10] = [5, 15, 25, 45, 50, 150, 250, 450, 750, 1250];
pub const DEFAULT_T_GRID: [Slot; 10] =
    [1000, 2000, 3000, 4000, 5000, 6000, 7000, 8000, 9000, 10000];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error("no learning interval in {grid:?} fits horizon {horizon}")]
    EmptyGrid { grid: Vec<Slot>, horizon: Slot },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// splitmix64 over the parts, for per-cell seeds.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut z: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        z = z.wrapping_add(p).wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// Where a run's arrivals come from.
#[derive(Debug, Clone)]
pub enum Scenario {
    Synthetic(SimConfig),
    Replay {
        table: DatasetTable,
        rate: f64,
        weight_support: Vec<f64>,
        c: f64,
    },
}

/// One realized stream and the competences utility is measured with.
#[derive(Debug, Clone)]
pub struct Instance {
    pub stream: ArrivalStream,
    pub truth: Vec<f64>,
}

impl Scenario {
    /// The synthetic scenario, or a replay of the config's dataset.
    pub fn from_config(config: &SimConfig) -> Result<Self, BenchError> {
        match &config.arrival {
            ArrivalProcess::Poisson { .. } => Ok(Scenario::Synthetic(config.clone())),
            ArrivalProcess::Replay {
                path,
                club_classes,
                max_workers,
            } => {
                let clubbing = club_classes.then(crate::data::dog_clubbing);
                let mut table = crate::data::load_dataset(Path::new(path), clubbing.as_ref())?;
                if let Some(n) = max_workers {
                    table = table.select_top_workers(*n);
                }
                Ok(Scenario::Replay {
                    table,
                    rate: 5.0,
                    weight_support: config.weight_support.clone(),
                    c: config.accuracy_scale,
                })
            }
        }
    }

    pub fn c(&self) -> f64 {
        match self {
            Scenario::Synthetic(cfg) => cfg.accuracy_scale,
            Scenario::Replay { c, .. } => *c,
        }
    }

    /// Configured mean arrivals per slot.
    pub fn rate(&self) -> f64 {
        match self {
            Scenario::Synthetic(SimConfig {
                arrival: ArrivalProcess::Poisson { rate },
                ..
            }) => *rate,
            Scenario::Synthetic(_) => 5.0,
            Scenario::Replay { rate, .. } => *rate,
        }
    }

    /// Configured mean sample weight.
    pub fn mean_weight(&self) -> f64 {
        let support = match self {
            Scenario::Synthetic(cfg) => &cfg.weight_support,
            Scenario::Replay { weight_support, .. } => weight_support,
        };
        support.iter().sum::<f64>() / support.len() as f64
    }

    pub fn instance(&self, horizon: Slot, seed: u64) -> Result<Instance, BenchError> {
        match self {
            Scenario::Synthetic(cfg) => {
                let mut cfg = cfg.clone();
                cfg.horizon = horizon;
                cfg.seed = seed;
                let stream = generate_stream(&cfg)?;
                Ok(Instance {
                    stream,
                    truth: cfg.competences.clone(),
                })
            }
            Scenario::Replay {
                table,
                rate,
                weight_support,
                ..
            } => {
                let replay = replay_stream(table, horizon, seed, *rate, weight_support)?;
                Ok(Instance {
                    stream: replay.stream,
                    truth: replay.genie.p_hat,
                })
            }
        }
    }
}

/// How the learning phase turns labels into competences.
#[derive(Debug, Clone, PartialEq)]
pub enum Learner {
    Online(LearnOptions),
    /// Returns the true competences; the learning window is then the only
    /// source of regret.
    Perfect,
}

impl Default for Learner {
    fn default() -> Self {
        Learner::Online(LearnOptions::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    #[serde(rename = "T")]
    pub horizon: Slot,
    #[serde(rename = "T_L")]
    pub t_learn: Slot,
    pub seed: u64,
    pub utility_genie: f64,
    pub utility_learned: f64,
    pub regret: f64,
    pub regret_normalized: f64,
    pub ratio: f64,
    pub learn_error_inf: f64,
    pub n_samples: usize,
    pub realized_rate: f64,
    pub realized_mean_weight: f64,
    pub stream_digest: String,
    /// Kept out of CSV files so they stay byte-reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

fn ratio(learned: f64, genie: f64) -> f64 {
    if genie > 0.0 {
        learned / genie
    } else {
        f64::NAN
    }
}

/// Runs the learner on one instance given its genie utility.
fn learned_cell(
    scenario: &Scenario,
    inst: &Instance,
    utility_genie: f64,
    plan: PhasePlan,
    seed: u64,
    learner: &Learner,
) -> Result<ExperimentResult, BenchError> {
    let start = Instant::now();
    let c = scenario.c();
    let selection_seed = mix_seed(&[seed, plan.t_learn() as u64]);
    let run = match learner {
        Learner::Online(opts) => {
            run_two_phase_with(&inst.stream, &inst.truth, &plan, c, selection_seed, |l| {
                online_learn(l, opts)
            })?
        }
        Learner::Perfect => run_two_phase_with(
            &inst.stream,
            &inst.truth,
            &plan,
            c,
            selection_seed,
            fixed_learner(inst.truth.clone()),
        )?,
    };
    let regret = utility_genie - run.utility;
    Ok(ExperimentResult {
        horizon: plan.horizon(),
        t_learn: plan.t_learn(),
        seed,
        utility_genie,
        utility_learned: run.utility,
        regret,
        regret_normalized: regret / (scenario.rate() * scenario.mean_weight()),
        ratio: ratio(run.utility, utility_genie),
        learn_error_inf: run.learned.error_inf(&inst.truth),
        n_samples: inst.stream.n_samples(),
        realized_rate: inst.stream.mean_arrivals(),
        realized_mean_weight: inst.stream.mean_weight(),
        stream_digest: format!("{:016x}", inst.stream.digest()),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn genie_utility(scenario: &Scenario, inst: &Instance) -> Result<f64, BenchError> {
    let profile = CompetenceProfile::new(&inst.truth).map_err(SchedulerError::from)?;
    Ok(run_genie(&inst.stream, &profile, scenario.c()).total_utility)
}

/// Both algorithms on the stream generated from `seed`.
pub fn run_pair(
    scenario: &Scenario,
    plan: PhasePlan,
    seed: u64,
) -> Result<ExperimentResult, BenchError> {
    run_pair_with(scenario, plan, seed, &Learner::default())
}

pub fn run_pair_with(
    scenario: &Scenario,
    plan: PhasePlan,
    seed: u64,
    learner: &Learner,
) -> Result<ExperimentResult, BenchError> {
    let start = Instant::now();
    let inst = scenario.instance(plan.horizon(), seed)?;
    let genie = genie_utility(scenario, &inst)?;
    let mut r = learned_cell(scenario, &inst, genie, plan, seed, learner)?;
    r.wall_time = start.elapsed().as_secs_f64();
    Ok(r)
}

/// Aggregate over replicates for one learning interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TlSummary {
    #[serde(rename = "T")]
    pub horizon: Slot,
    #[serde(rename = "T_L")]
    pub t_learn: Slot,
    pub n_seeds: usize,
    pub mean_utility: f64,
    pub std_utility: f64,
    pub mean_error_inf: f64,
    pub median_error_inf: f64,
    pub mean_utility_genie: f64,
    pub mean_regret: f64,
    pub mean_regret_normalized: f64,
    pub mean_ratio: f64,
    pub median_ratio: f64,
    pub median_regret_normalized: f64,
}

#[derive(Debug, Clone)]
pub struct TlSweep {
    pub horizon: Slot,
    pub best_tl: Slot,
    pub summary: Vec<TlSummary>,
    /// Ordered by (T_L, replicate).
    pub runs: Vec<ExperimentResult>,
}

impl TlSweep {
    pub fn best(&self) -> &TlSummary {
        self.summary
            .iter()
            .find(|s| s.t_learn == self.best_tl)
            .expect("best is in the grid")
    }

    pub fn runs_at(&self, t_learn: Slot) -> impl Iterator<Item = &ExperimentResult> {
        self.runs.iter().filter(move |r| r.t_learn == t_learn)
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Seed of replicate `rep` at horizon `horizon`; shared by every T_L so the
/// learning intervals are compared on the same streams.
pub fn replicate_seed(base: u64, horizon: Slot, rep: usize) -> u64 {
    mix_seed(&[base, horizon as u64, rep as u64])
}

fn summarize(horizon: Slot, t_learn: Slot, runs: &[&ExperimentResult]) -> TlSummary {
    let col = |f: fn(&ExperimentResult) -> f64| runs.iter().map(|r| f(r)).collect::<Vec<_>>();
    let utility = col(|r| r.utility_learned);
    let err = col(|r| r.learn_error_inf);
    let ratios = col(|r| r.ratio);
    let regret_n = col(|r| r.regret_normalized);
    TlSummary {
        horizon,
        t_learn,
        n_seeds: runs.len(),
        mean_utility: mean(&utility),
        std_utility: std_dev(&utility),
        mean_error_inf: mean(&err),
        median_error_inf: median(&err),
        mean_utility_genie: mean(&col(|r| r.utility_genie)),
        mean_regret: mean(&col(|r| r.regret)),
        mean_regret_normalized: mean(&regret_n),
        mean_ratio: mean(&ratios),
        median_ratio: median(&ratios),
        median_regret_normalized: median(&regret_n),
    }
}

/// Every T_L in the grid on `n_seeds` replicates. Grid values outside
/// `[1, T)` are dropped.
pub fn sweep_tl(
    scenario: &Scenario,
    horizon: Slot,
    tl_grid: &[Slot],
    base_seed: u64,
    n_seeds: usize,
    learner: &Learner,
) -> Result<TlSweep, BenchError> {
    let mut grid: Vec<Slot> = tl_grid
        .iter()
        .copied()
        .filter(|&tl| tl >= 1 && tl < horizon)
        .collect();
    grid.sort_unstable();
    grid.dedup();
    if grid.is_empty() || n_seeds == 0 {
        return Err(BenchError::EmptyGrid {
            grid: tl_grid.to_vec(),
            horizon,
        });
    }

    let instances: Vec<(u64, Instance, f64)> = (0..n_seeds)
        .into_par_iter()
        .map(|rep| {
            let seed = replicate_seed(base_seed, horizon, rep);
            let inst = scenario.instance(horizon, seed)?;
            let genie = genie_utility(scenario, &inst)?;
            Ok((seed, inst, genie))
        })
        .collect::<Result<_, BenchError>>()?;

    let cells: Vec<(Slot, usize)> = grid
        .iter()
        .flat_map(|&tl| (0..n_seeds).map(move |r| (tl, r)))
        .collect();
    let runs: Vec<ExperimentResult> = cells
        .par_iter()
        .map(|&(tl, rep)| {
            let (seed, inst, genie) = &instances[rep];
            learned_cell(
                scenario,
                inst,
                *genie,
                PhasePlan::new(tl, horizon)?,
                *seed,
                learner,
            )
        })
        .collect::<Result<_, BenchError>>()?;

    let summary: Vec<TlSummary> = grid
        .iter()
        .map(|&tl| {
            let rows: Vec<&ExperimentResult> = runs.iter().filter(|r| r.t_learn == tl).collect();
            summarize(horizon, tl, &rows)
        })
        .collect();
    // Strict comparison keeps the smaller T_L on ties.
    let best_tl = summary
        .iter()
        .fold(None::<&TlSummary>, |best, s| match best {
            Some(b) if s.mean_utility <= b.mean_utility => Some(b),
            _ => Some(s),
        })
        .map(|s| s.t_learn)
        .expect("nonempty grid");
    Ok(TlSweep {
        horizon,
        best_tl,
        summary,
        runs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorizonRow {
    #[serde(rename = "T")]
    pub horizon: Slot,
    #[serde(rename = "best_TL")]
    pub best_tl: Slot,
    pub regret: f64,
    pub regret_normalized: f64,
    pub ratio: f64,
    pub median_ratio: f64,
    pub median_regret_normalized: f64,
    pub median_regret_normalized_over_ln_t: f64,
    pub mean_error_inf: f64,
}

#[derive(Debug, Clone)]
pub struct HorizonSweep {
    pub rows: Vec<HorizonRow>,
    pub sweeps: Vec<TlSweep>,
}

pub fn sweep_horizon(
    scenario: &Scenario,
    t_grid: &[Slot],
    tl_grid: &[Slot],
    base_seed: u64,
    n_seeds: usize,
    learner: &Learner,
) -> Result<HorizonSweep, BenchError> {
    let sweeps: Vec<TlSweep> = t_grid
        .iter()
        .map(|&t| sweep_tl(scenario, t, tl_grid, base_seed, n_seeds, learner))
        .collect::<Result<_, _>>()?;
    let rows = sweeps
        .iter()
        .map(|s| {
            let b = s.best();
            HorizonRow {
                horizon: s.horizon,
                best_tl: s.best_tl,
                regret: b.mean_regret,
                regret_normalized: b.mean_regret_normalized,
                ratio: b.mean_ratio,
                median_ratio: b.median_ratio,
                median_regret_normalized: b.median_regret_normalized,
                median_regret_normalized_over_ln_t: b.median_regret_normalized
                    / (s.horizon as f64).ln(),
                mean_error_inf: b.mean_error_inf,
            }
        })
        .collect();
    Ok(HorizonSweep { rows, sweeps })
}

pub fn write_csv<T: Serialize, W: Write>(out: W, rows: &[T]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), BenchError> {
    write_csv(std::fs::File::create(path)?, rows)
}

/// Minimal SVG line chart: one polyline per series over shared x values.
pub fn svg_line_chart(
    title: &str,
    x_label: &str,
    xs: &[f64],
    series: &[(&str, Vec<f64>)],
) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let finite = |v: &&f64| v.is_finite();
    let (x0, x1) = xs
        .iter()
        .filter(finite)
        .fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
    let ys = series.iter().flat_map(|(_, v)| v.iter()).filter(finite);
    let (y0, y1) = ys.fold((f64::MAX, f64::MIN), |(a, b), &y| (a.min(y), b.max(y)));
    let span = |a: f64, b: f64| if b > a { b - a } else { 1.0 };
    let px = |x: f64| PAD + (x - x0) / span(x0, x1) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - (y - y0) / span(y0, y1) * (H - 2.0 * PAD);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\">\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\">{title}</text>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x_label}</text>\n\
         <rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>\n\
         <text x=\"{PAD}\" y=\"{}\" font-size=\"10\">{x0}</text>\n\
         <text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{x1}</text>\n\
         <text x=\"5\" y=\"{}\" font-size=\"10\">{y1:.4}</text>\n\
         <text x=\"5\" y=\"{}\" font-size=\"10\">{y0:.4}</text>\n",
        W / 2.0,
        W / 2.0,
        H - 10.0,
        W - 2.0 * PAD,
        H - 2.0 * PAD,
        H - PAD + 14.0,
        W - PAD,
        H - PAD + 14.0,
        PAD,
        H - PAD,
    );
    for (i, (name, ys)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let points: Vec<String> = xs
            .iter()
            .zip(ys)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" points=\"{}\"/>\n\
             <text x=\"{}\" y=\"{}\" fill=\"{color}\" font-size=\"12\">{name}</text>\n",
            points.join(" "),
            W - PAD - 5.0,
            PAD + 15.0 * (i + 1) as f64,
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greedy::run_range;

    fn synth() -> Scenario {
        Scenario::Synthetic(SimConfig::synthetic(1, 0))
    }

    #[test]
    fn perfect_learner_regret_is_the_learning_window() {
        let sc = synth();
        let plan = PhasePlan::new(30, 300).unwrap();
        let r = run_pair_with(&sc, plan, 11, &Learner::Perfect).unwrap();
        let inst = sc.instance(300, 11).unwrap();
        let profile = CompetenceProfile::new(&inst.truth).unwrap();
        let window = run_range(&inst.stream, &profile, 1.0, 31, 300, false).total_utility;
        assert!((r.regret - (r.utility_genie - window)).abs() < 1e-9);
        assert!(r.regret > 0.0);
        assert_eq!(r.learn_error_inf, 0.0);
    }

    #[test]
    fn result_invariants() {
        let r = run_pair(&synth(), PhasePlan::new(50, 400).unwrap(), 3).unwrap();
        assert!((r.regret - (r.utility_genie - r.utility_learned)).abs() < 1e-12);
        assert!((r.ratio - r.utility_learned / r.utility_genie).abs() < 1e-12);
        assert!((r.regret_normalized - r.regret / 32.5).abs() < 1e-12);
        assert!(r.ratio > 0.0 && r.ratio <= 1.0);
    }

    #[test]
    fn both_algorithms_see_the_same_stream() {
        let sc = synth();
        let a = run_pair(&sc, PhasePlan::new(5, 200).unwrap(), 9).unwrap();
        let b = run_pair(&sc, PhasePlan::new(50, 200).unwrap(), 9).unwrap();
        assert_eq!(a.stream_digest, b.stream_digest);
        assert_eq!(a.utility_genie, b.utility_genie);
        let inst = sc.instance(200, 9).unwrap();
        assert_eq!(a.stream_digest, format!("{:016x}", inst.stream.digest()));
    }

    #[test]
    fn nearly_all_learning_leaves_little_utility() {
        let r = run_pair(&synth(), PhasePlan::new(9, 10).unwrap(), 1).unwrap();
        assert!(r.utility_learned < r.utility_genie);
    }

    #[test]
    fn degenerate_grid() {
        let s = sweep_tl(&synth(), 50, &[1], 0, 2, &Learner::default()).unwrap();
        assert_eq!(s.best_tl, 1);
        assert_eq!(s.runs.len(), 2);
        assert!(matches!(
            sweep_tl(&synth(), 50, &[50, 60], 0, 2, &Learner::default()),
            Err(BenchError::EmptyGrid { .. })
        ));
    }

    #[test]
    fn sweep_is_ordered_and_repeatable() {
        let a = sweep_tl(&synth(), 200, &[45, 5, 15], 4, 3, &Learner::default()).unwrap();
        let b = sweep_tl(&synth(), 200, &[5, 15, 45], 4, 3, &Learner::default()).unwrap();
        let bytes = |s: &TlSweep| {
            let mut buf = Vec::new();
            write_csv(&mut buf, &s.runs).unwrap();
            buf
        };
        assert_eq!(bytes(&a), bytes(&b));
        let order: Vec<(Slot, u64)> = a.runs.iter().map(|r| (r.t_learn, r.seed)).collect();
        let mut sorted = order.clone();
        sorted.sort_by_key(|&(tl, _)| tl);
        assert_eq!(order, sorted);
        assert_eq!(a.summary.len(), 3);
        let best = a
            .summary
            .iter()
            .map(|s| s.mean_utility)
            .fold(f64::MIN, f64::max);
        assert_eq!(a.best().mean_utility, best);
    }

    #[test]
    fn single_point_horizon_grid() {
        let h = sweep_horizon(&synth(), &[100], &[5, 25], 0, 2, &Learner::default()).unwrap();
        assert_eq!(h.rows.len(), 1);
        assert_eq!(h.rows[0].horizon, 100);
    }

    #[test]
    fn genie_against_itself_has_ratio_one() {
        let sc = synth();
        let inst = sc.instance(100, 2).unwrap();
        let g = genie_utility(&sc, &inst).unwrap();
        assert_eq!(ratio(g, g), 1.0);
    }

    #[test]
    fn stats_helpers() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!((std_dev(&[1.0, 2.0, 3.0]) - 1.0).abs() < 1e-15);
        assert_eq!(std_dev(&[1.0]), 0.0);
        assert_ne!(mix_seed(&[1, 2]), mix_seed(&[2, 1]));
    }

    #[test]
    fn csv_skips_wall_time() {
        let r = run_pair(&synth(), PhasePlan::new(5, 50).unwrap(), 1).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &[r]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.starts_with("T,T_L,seed,utility_genie,utility_learned,regret"));
        assert!(!header.contains("wall_time"));
    }

    #[test]
    fn svg_has_one_polyline_per_series() {
        let svg = svg_line_chart(
            "t",
            "x",
            &[1.0, 2.0],
            &[("a", vec![1.0, 2.0]), ("b", vec![0.0, f64::NAN])],
        );
        assert_eq!(svg.matches("<polyline").count(), 2);
    }
}
