//! Acceptance criteria, one line each. Criteria that need dataset files are
//! skipped unless `CROWDSCHED_BIRD` / `CROWDSCHED_DOG` point at them.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use crowdsched::bench::{sweep_horizon, sweep_tl, Learner, Scenario, DEFAULT_TL_GRID};
use crowdsched::data::{dog_clubbing, load_dataset};
use crowdsched::greedy::{ExitReason, GreedyMatcher};
use crowdsched::model::{ClassifierId, ResourceBlock, SimConfig};
use crowdsched::oracle::{half_opt_suite, perturbation_suite, submodularity_suite, SlotMode};
use crowdsched::utility::{sigma, CompetenceProfile};

const SEED: u64 = 1;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn judge(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn within(elapsed: Duration, limit: Duration) -> (bool, String) {
    (
        elapsed <= limit,
        format!("{:.2}s (limit {}s)", elapsed.as_secs_f64(), limit.as_secs()),
    )
}

fn submodularity() -> Outcome {
    let start = Instant::now();
    let r = submodularity_suite(1000, SEED, 1e-9, SlotMode::Random);
    let (fast, time) = within(start.elapsed(), Duration::from_secs(5));
    judge(
        r.passed() && fast,
        format!(
            "{} cases, {} violations, worst margin {:.3e}; {}; {time}",
            r.cases, r.violations, r.worst_margin, r.detail
        ),
    )
}

fn half_opt() -> Outcome {
    let start = Instant::now();
    let r = half_opt_suite(200, SEED, 1e-9).expect("tiny instances enumerate");
    let (fast, time) = within(start.elapsed(), Duration::from_secs(60));
    judge(
        r.passed() && fast,
        format!(
            "{} instances, {} below half of OPT, worst margin {:.4}; {time}",
            r.cases, r.violations, r.worst_margin
        ),
    )
}

fn perturbation() -> Outcome {
    let start = Instant::now();
    let r = perturbation_suite(100, SEED).expect("harness runs");
    let (fast, time) = within(start.elapsed(), Duration::from_secs(60));
    judge(
        r.passed() && fast,
        format!(
            "{} trials, {} changed ledgers; {time}",
            r.cases, r.violations
        ),
    )
}

fn exit_soundness() -> Outcome {
    let start = Instant::now();
    let horizon = 2000;
    let sc = Scenario::Synthetic(SimConfig::synthetic(horizon, SEED));
    let inst = sc.instance(horizon, SEED).expect("stream");
    let profile = CompetenceProfile::new(&inst.truth).expect("competences");
    let mut matcher = GreedyMatcher::new(profile, 1.0);
    for t in 1..=horizon {
        matcher.run_slot(inst.stream.slot(t), t);
    }
    let run = matcher.finish(horizon);

    let mut checked = 0u64;
    let mut positive = 0u64;
    let mut worst = f64::NEG_INFINITY;
    for s in inst.stream.samples() {
        let outcome = &run.outcomes[&s.id];
        if !matches!(outcome.reason, ExitReason::NoGain | ExitReason::NoEligible) {
            continue;
        }
        let held: Vec<ResourceBlock> = run.ledger.blocks_of(s.id);
        for m in (0..inst.truth.len()).map(ClassifierId) {
            if !s.can_label(m) || held.iter().any(|b| b.classifier == m) {
                continue;
            }
            for t in (outcome.exit_slot + 1)..=horizon {
                let g = sigma(s, &held, ResourceBlock::new(m, t), &inst.truth, 1.0)
                    .expect("valid probe");
                checked += 1;
                worst = worst.max(g);
                if g > 0.0 {
                    positive += 1;
                }
            }
        }
    }
    let (fast, time) = within(start.elapsed(), Duration::from_secs(120));
    judge(
        positive == 0 && fast,
        format!("{checked} (sample, classifier, slot) probes, {positive} positive, max sigma {worst:.4}; {time}"),
    )
}

fn learner_consistency() -> Outcome {
    let start = Instant::now();
    let sc = Scenario::Synthetic(SimConfig::synthetic(1, 0));
    let sweep = sweep_tl(&sc, 2000, &[5, 1250], SEED, 20, &Learner::default()).expect("sweep");
    let small: Vec<f64> = sweep.runs_at(5).map(|r| r.learn_error_inf).collect();
    let large: Vec<f64> = sweep.runs_at(1250).map(|r| r.learn_error_inf).collect();
    let accurate = large.iter().filter(|&&e| e <= 0.05).count();
    let improved = small.iter().zip(&large).filter(|(s, l)| l < s).count();
    let (fast, time) = within(start.elapsed(), Duration::from_secs(300));
    let worst = large.iter().copied().fold(0.0, f64::max);
    judge(
        accurate >= 18 && improved >= 18 && fast,
        format!("{accurate}/20 seeds within 0.05 (worst {worst:.4}), {improved}/20 better than T_L = 5; {time}"),
    )
}

fn regret_and_ratio() -> Outcome {
    let start = Instant::now();
    let sc = Scenario::Synthetic(SimConfig::synthetic(1, 0));
    let t_grid = [1000, 2000, 5000, 10000];
    let h =
        sweep_horizon(&sc, &t_grid, &DEFAULT_TL_GRID, SEED, 5, &Learner::default()).expect("sweep");
    let bound = 0.5 - (10000f64).ln() / 10000.0;
    let last = h.rows.last().expect("rows");
    let ratio_ok = last.median_ratio >= bound;
    let per_log: Vec<f64> = h
        .rows
        .iter()
        .map(|r| r.median_regret_normalized_over_ln_t)
        .collect();
    let nonincreasing = per_log.windows(2).all(|w| w[1] <= w[0]);
    let (fast, time) = within(start.elapsed(), Duration::from_secs(1800));
    let series: Vec<String> = h
        .rows
        .iter()
        .map(|r| {
            format!(
                "T={} T_L*={} {:.3}",
                r.horizon, r.best_tl, r.median_regret_normalized_over_ln_t
            )
        })
        .collect();
    judge(
        ratio_ok && nonincreasing && fast,
        format!(
            "(a) median ratio at T=10000 {:.5} vs bound {bound:.5}: {}; (b) median regret_normalized/ln T [{}]: {}; {time}",
            last.median_ratio,
            if ratio_ok { "ok" } else { "below" },
            series.join(", "),
            if nonincreasing { "nonincreasing" } else { "increases" },
        ),
    )
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_crowdsched")
}

fn csv_well_formed(path: &Path) -> Result<usize, String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    let width = r.headers().map_err(|e| e.to_string())?.len();
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        if rec.len() != width {
            return Err(format!(
                "row {rows} has {} fields, header {width}",
                rec.len()
            ));
        }
        rows += 1;
    }
    Ok(rows)
}

fn real_data() -> Outcome {
    let bird = std::env::var_os("CROWDSCHED_BIRD").map(PathBuf::from);
    let dog = std::env::var_os("CROWDSCHED_DOG").map(PathBuf::from);
    if bird.is_none() && dog.is_none() {
        return Outcome::Skip("set CROWDSCHED_BIRD and/or CROWDSCHED_DOG to dataset files".into());
    }
    let mut ok = true;
    let mut notes = Vec::new();
    if let Some(path) = &bird {
        match load_dataset(path, None) {
            Ok(t) => {
                let shape = t.n_workers() == 39 && t.n_items() == 108;
                ok &= shape;
                notes.push(format!(
                    "bird {} workers / {} items",
                    t.n_workers(),
                    t.n_items()
                ));
            }
            Err(e) => {
                ok = false;
                notes.push(format!("bird load failed: {e}"));
            }
        }
        let out = tempfile::tempdir().expect("tempdir");
        let status = Command::new(bin())
            .args(["sweep-tl", "--dataset"])
            .arg(path)
            .args(["--T", "4000", "--seeds", "2", "--seed", "1", "--out"])
            .arg(out.path())
            .status()
            .expect("spawn");
        let csv = csv_well_formed(&out.path().join("sweep_tl.csv"));
        ok &= status.success() && matches!(csv, Ok(n) if n > 0);
        notes.push(format!(
            "bird sweep-tl T=4000 exit {:?}, sweep_tl.csv {csv:?} rows",
            status.code()
        ));
    }
    if let Some(path) = &dog {
        match load_dataset(path, Some(&dog_clubbing())) {
            Ok(t) => {
                let top = t.select_top_workers(90);
                ok &= top.n_items() == 798 && top.n_workers() == 90;
                notes.push(format!(
                    "dog clubbed {} items, top {} workers",
                    top.n_items(),
                    top.n_workers()
                ));
            }
            Err(e) => {
                ok = false;
                notes.push(format!("dog load failed: {e}"));
            }
        }
    }
    judge(ok, notes.join("; "))
}

fn determinism() -> Outcome {
    let invocations: [&[&str]; 5] = [
        &["gen", "--T", "300", "--seed", "4"],
        &["run", "--T", "600", "--TL", "45", "--seed", "4", "--trace"],
        &[
            "sweep-tl",
            "--T",
            "400",
            "--TL-grid",
            "5,25,150",
            "--seeds",
            "3",
            "--seed",
            "4",
        ],
        &[
            "sweep-horizon",
            "--T-grid",
            "200,400",
            "--TL-grid",
            "5,45",
            "--seeds",
            "2",
            "--seed",
            "4",
        ],
        &[
            "verify",
            "--instances",
            "20",
            "--trials",
            "10",
            "--cases",
            "100",
            "--seed",
            "4",
        ],
    ];
    let mut problems = Vec::new();
    let mut files = 0;
    for args in invocations {
        let dirs = [
            tempfile::tempdir().expect("tempdir"),
            tempfile::tempdir().expect("tempdir"),
        ];
        for d in &dirs {
            let out = Command::new(bin())
                .args(args)
                .arg("--out")
                .arg(d.path())
                .output()
                .expect("spawn");
            if !out.status.success() {
                problems.push(format!("{} exited {:?}", args[0], out.status.code()));
            }
        }
        let mut names: Vec<_> = std::fs::read_dir(dirs[0].path())
            .expect("output dir")
            .map(|e| e.expect("entry").file_name())
            .filter(|n| n.to_string_lossy().ends_with(".csv"))
            .collect();
        names.sort();
        if names.is_empty() {
            problems.push(format!("{} wrote no csv", args[0]));
        }
        for n in names {
            files += 1;
            let a = std::fs::read(dirs[0].path().join(&n)).expect("first");
            let b = std::fs::read(dirs[1].path().join(&n)).unwrap_or_default();
            if a != b {
                problems.push(format!("{} {} differs", args[0], n.to_string_lossy()));
            }
        }
    }
    let detail = format!(
        "{files} csv files compared across 5 subcommands; {}",
        if problems.is_empty() {
            "all identical".to_string()
        } else {
            problems.join(", ")
        }
    );
    judge(problems.is_empty(), detail)
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 submodularity suite", submodularity),
        ("2 greedy >= OPT/2 on tiny instances", half_opt),
        (
            "3 ledger invariance under small perturbations",
            perturbation,
        ),
        ("4 exit-rule soundness", exit_soundness),
        ("5 learner consistency", learner_consistency),
        ("6 regret and ratio trends", regret_and_ratio),
        ("7 real-data plumbing", real_data),
        ("8 CLI determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let (tag, detail) = match check() {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("criterion {name}: {tag}: {detail}");
    }
    println!("acceptance: {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
