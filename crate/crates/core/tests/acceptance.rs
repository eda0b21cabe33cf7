//! Acceptance run: one PASS/FAIL line per criterion, at desk scale.
//!
//!     cargo test --release --test acceptance

use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use smallworld_seir::calibration::{fit_phase_r, CaseSeries, FitOptions, LossKind};
use smallworld_seir::config::ScenarioConfig;
use smallworld_seir::engine::{mean_rank_profile, EnsembleStats, ReplicaOutput, SimConfig, Simulator};
use smallworld_seir::metrics::{theoretical_r0, PhaseAverage};
use smallworld_seir::output::{run_scenario, write_outputs, ScenarioRun};
use smallworld_seir::policy::PolicySchedule;
use smallworld_seir::seir::DurationDistribution;

type Outcome = Result<String, String>;

fn scenario(name: &str) -> ScenarioConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"));
    ScenarioConfig::load(&path).unwrap_or_else(|e| panic!("{e}"))
}

fn run(cfg: &ScenarioConfig) -> ScenarioRun {
    run_scenario(cfg).unwrap_or_else(|e| panic!("{}: {e}", cfg.label))
}

/// `cfg` with the last phase's rates replaced.
fn with_last_rates(cfg: &ScenarioConfig, r_short: f64, r_long: f64, label: &str) -> ScenarioConfig {
    let mut c = cfg.clone();
    let last = c.schedule.phase.last_mut().unwrap();
    last.r_short = Some(r_short);
    last.r_long = Some(r_long);
    c.label = label.to_string();
    c.validate().unwrap();
    c
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target
}

/// Checks each phase's empirical R0 against `targets` at +-15%.
fn phase_r0(name: &str, targets: &[f64]) -> Outcome {
    let cfg = scenario(name);
    let result = run(&cfg);
    let kind = cfg.analysis.r0_average;
    let got = result.r0.phase_averages(kind);
    let weighted = result.r0.phase_averages(PhaseAverage::InfectorWeighted);
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, &t) in targets.iter().enumerate() {
        let v = got[i].unwrap_or(f64::NAN);
        ok &= within(v, t, 0.15);
        parts.push(format!(
            "phase {i} {v:.3} in [{:.3}, {:.3}] (weighted {:.3})",
            0.85 * t,
            1.15 * t,
            weighted[i].unwrap_or(f64::NAN)
        ));
    }
    let line = format!("{name}: {}", parts.join("; "));
    if ok {
        Ok(line)
    } else {
        Err(line)
    }
}

fn peaks_line(r: &ScenarioRun) -> (bool, String) {
    let p = r.peaks();
    let v = |x: Option<smallworld_seir::metrics::Peak>| x.map_or(f64::NAN, |p| p.value);
    (
        p.second_below_first(),
        format!("{} first {:.2} second {:.2}", r.config.label, v(p.first), v(p.second)),
    )
}

fn criterion_1() -> Outcome {
    let v = theoretical_r0(0.055, 20.0, 6.5);
    let line = format!("theoretical R0 at r=0.055, k=20, T=6.5 is {v}");
    if v == 7.15 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn criterion_5() -> Outcome {
    let (random_below, a) = peaks_line(&run(&scenario("reopen-check-random")));
    let (long_below, b) = peaks_line(&run(&scenario("reopen-check-long")));
    let line = format!("{a}; {b}");
    if long_below && !random_below {
        Ok(line)
    } else {
        Err(line)
    }
}

fn criterion_6_and_7() -> (Outcome, Outcome) {
    let (none_below, a) = peaks_line(&run(&scenario("reopen-uniform")));
    let base = scenario("reopen-short-only");
    let short_only = run(&base);
    let (short_only_below, b) = peaks_line(&short_only);
    let (leaky_below, b2) = peaks_line(&run(&with_last_rates(&base, 0.055, 0.005, "reopen-long-0.005")));
    let (mixed_below, c) = peaks_line(&run(&scenario("reopen-long-reduced")));
    let line = format!("{a}; {b}; {b2}; {c}");
    let c6 = if !none_below && short_only_below && !leaky_below && mixed_below {
        Ok(line)
    } else {
        Err(line)
    };

    let open = run(&with_last_rates(&base, 0.055, 0.055, "reopen-both-open"));
    let lift = base.split_day();
    let closed_c = short_only.mean_components_from(lift);
    let open_c = open.mean_components_from(lift);
    let top = run(&scenario("ring-open"));
    let bottom = run(&scenario("ring-long-closed"));
    let (top_c, bottom_c) = (top.mean_components_from(0), bottom.mean_components_from(0));
    let line = format!(
        "components after day {lift}: r_long=0 {closed_c:.2} vs r_long=0.055 {open_c:.2}; \
         n=150 smoke test {bottom_c:.2} vs {top_c:.2}"
    );
    let snapshots_ok = top.snapshots.as_ref().is_some_and(|(_, s)| s.len() == 5);
    let c7 = if closed_c < open_c && bottom_c < top_c && snapshots_ok {
        Ok(line)
    } else {
        Err(line)
    };
    (c6, c7)
}

/// Standard errors of the second differences of the log mean profile, from
/// resampling replicas.
fn kink_standard_errors(outputs: &[ReplicaOutput], day: usize, ranks: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let resamples = 200;
    let mut draws = vec![Vec::with_capacity(resamples); ranks - 2];
    for _ in 0..resamples {
        let sample: Vec<ReplicaOutput> = (0..outputs.len())
            .map(|_| outputs[rng.random_range(0..outputs.len())].clone())
            .collect();
        let logs: Vec<f64> = mean_rank_profile(&sample, day).iter().take(ranks).map(|v| v.ln()).collect();
        for (i, w) in logs.windows(3).enumerate() {
            draws[i].push(w[0] + w[2] - 2.0 * w[1]);
        }
    }
    draws
        .iter()
        .map(|d| {
            let m = d.iter().sum::<f64>() / d.len() as f64;
            (d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (d.len() - 1) as f64).sqrt()
        })
        .collect()
}

/// Monotone and convex in log over the top 50 ranks: no second difference of
/// the log profile below three bootstrap standard errors, and the tail
/// flatter than the head.
fn criterion_8() -> Outcome {
    let cfg = scenario("eu-aggregate");
    let result = run(&cfg);
    let day = cfg.snapshot_day() as usize;
    let ranks = 50;
    let logs: Vec<f64> = mean_rank_profile(&result.outputs, day).iter().take(ranks).map(|v| v.ln()).collect();
    let monotone = logs.windows(2).all(|w| w[1] <= w[0]);
    let se = kink_standard_errors(&result.outputs, day, ranks);
    let worst_z = logs
        .windows(3)
        .zip(&se)
        .map(|(w, s)| (w[0] + w[2] - 2.0 * w[1]) / s)
        .fold(f64::INFINITY, f64::min);
    let head_slope = (logs[9] - logs[0]) / 9.0;
    let tail_slope = (logs[49] - logs[40]) / 9.0;
    let line = format!(
        "day {day}: ln profile at ranks 1/10/25/50 = {:.3}/{:.3}/{:.3}/{:.3}; \
         slope {head_slope:.3} over ranks 1-10 vs {tail_slope:.3} over 41-50; \
         worst second difference {worst_z:+.2} standard errors",
        logs[0], logs[9], logs[24], logs[49]
    );
    if monotone && worst_z >= -3.0 && tail_slope > head_slope {
        Ok(line)
    } else {
        Err(line)
    }
}

fn ceiled_mean_oracle(mu: f64, sigma: f64) -> f64 {
    let z = Normal::new(0.0, 1.0).unwrap();
    1.0 + (1..10_000)
        .map(|k| 1.0 - z.cdf(((k as f64).ln() - mu) / sigma))
        .sum::<f64>()
}

fn criterion_9() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (mean, sd) in [(5.0, 3.0), (6.5, 3.0)] {
        let d = DurationDistribution::new(mean, sd).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| d.sample_continuous(&mut rng)).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let s = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        ok &= within(m, mean, 0.01) && within(s, sd, 0.01);

        let oracle = ceiled_mean_oracle(d.mu(), d.sigma());
        let ceiled = (0..n).map(|_| f64::from(d.sample_days(&mut rng))).sum::<f64>() / n as f64;
        let tol = 4.0 * (sd + 0.3) / (n as f64).sqrt();
        ok &= (ceiled - oracle).abs() <= tol;
        parts.push(format!(
            "({mean}, {sd}): mean {m:.4} sd {s:.4}, ceiled mean {ceiled:.4} vs integrated {oracle:.4}"
        ));
    }
    let line = parts.join("; ");
    if ok {
        Ok(line)
    } else {
        Err(line)
    }
}

fn dir_files(dir: &Path) -> Vec<PathBuf> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    files.sort();
    files
}

fn criterion_10() -> Outcome {
    let mut cfg = scenario("wuhan");
    cfg.output.per_replica = true;
    let tmp = tempfile::TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let first = run(&cfg);
    write_outputs(&first, &a).unwrap();
    let second = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap()
        .install(|| run(&cfg));
    write_outputs(&second, &b).unwrap();
    let files = dir_files(&a);
    let same_names = files == dir_files(&b);
    let differing: Vec<_> = files
        .iter()
        .filter(|f| std::fs::read(a.join(f)).ok() != std::fs::read(b.join(f)).ok())
        .collect();

    let mut shuffled = first.outputs.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(10));
    let permuted = EnsembleStats::from_replicas(&shuffled, &cfg.sim_config()) == first.stats;

    let line = format!(
        "{} files byte-identical across reruns: {}; aggregates unchanged under replica permutation: {permuted}",
        files.len(),
        same_names && differing.is_empty()
    );
    if same_names && differing.is_empty() && permuted {
        Ok(line)
    } else {
        Err(format!("{line}; differing {differing:?}"))
    }
}

fn criterion_11() -> Outcome {
    let seed_date = NaiveDate::from_ymd_opt(2020, 2, 1).unwrap();
    let truth = 0.01;
    let schedule = PolicySchedule::stepwise(&[(0, 0.055), (35, truth)]).unwrap();
    let target_cfg = SimConfig {
        horizon: 80,
        master_seed: 2024,
        ..SimConfig::default()
    };
    let stats = Simulator::new(target_cfg.clone(), schedule.clone())
        .unwrap()
        .run_ensemble()
        .unwrap();
    let observed = CaseSeries::new("synthetic", seed_date, stats.expected_confirmed.clone()).unwrap();
    let fit_cfg = SimConfig {
        master_seed: 7,
        ..target_cfg
    };
    let options = FitOptions {
        phase: 1,
        bounds: (0.001, 0.05),
        grid_points: 9,
        search_replicas: 50,
        final_replicas: 200,
        loss: LossKind::Rmse,
        seed_date,
        exclude_dates: vec![],
    };
    let fit = fit_phase_r(&observed, &fit_cfg, &schedule, options).unwrap();
    let line = format!(
        "generated at r={truth}, fitted r={:.5} ({:+.1}%)",
        fit.fitted_r,
        100.0 * (fit.fitted_r / truth - 1.0)
    );
    if within(fit.fitted_r, truth, 0.20) {
        Ok(line)
    } else {
        Err(line)
    }
}

fn main() {
    // libtest-style filter arguments are ignored; every criterion runs.
    let mut failures = 0;
    let mut report = |n: u32, title: &str, started: Instant, outcome: Outcome| {
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS  {title}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failures += 1;
                println!("criterion {n:>2} FAIL  {title}: {detail} [{secs:.1}s]");
            }
        }
    };

    let t = Instant::now();
    report(1, "theoretical R0", t, criterion_1());
    let t = Instant::now();
    report(2, "Wuhan phase R0", t, phase_r0("wuhan", &[3.9, 0.54, 0.12]));
    let t = Instant::now();
    report(3, "Italy phase R0", t, phase_r0("italy", &[4.0, 0.84]));
    let t = Instant::now();
    report(4, "Austria phase R0", t, phase_r0("austria", &[4.2, 0.55]));
    let t = Instant::now();
    report(5, "edge checking peaks", t, criterion_5());
    let t = Instant::now();
    let (c6, c7) = criterion_6_and_7();
    report(6, "reopening strategies", t, c6);
    report(7, "spatial containment", t, c7);
    let t = Instant::now();
    report(8, "regional rank profile", t, criterion_8());
    let t = Instant::now();
    report(9, "duration sampler moments", t, criterion_9());
    let t = Instant::now();
    report(10, "determinism", t, criterion_10());
    let t = Instant::now();
    report(11, "calibration self-consistency", t, criterion_11());

    if failures > 0 {
        println!("{failures} of 11 criteria failed");
        std::process::exit(1);
    }
    println!("all 11 criteria passed");
}
