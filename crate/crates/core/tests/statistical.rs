//! Sampling behaviour checked against independent distributional oracles.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use smallworld_seir::engine::{thin_confirmed, SimConfig, Simulator};
use smallworld_seir::graph::{Graph, GraphParams};
use smallworld_seir::policy::PolicySchedule;
use smallworld_seir::seir::{Compartment, DurationDistribution, Dynamics, Population};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mean of `ceil(X)` (at least 1) for lognormal `X`, by summing the
/// survival function: `E[max(1, ceil X)] = 1 + sum_{k>=1} P(X > k)`.
fn ceiled_mean_oracle(mu: f64, sigma: f64) -> f64 {
    let z = Normal::new(0.0, 1.0).unwrap();
    1.0 + (1..10_000)
        .map(|k| 1.0 - z.cdf(((k as f64).ln() - mu) / sigma))
        .sum::<f64>()
}

#[test]
fn long_edge_count_matches_the_binomial() {
    let gp = GraphParams { n: 10_000, k: 20, p: 0.1 };
    let trials = 100_000.0;
    let sigma = (trials * 0.1 * 0.9f64).sqrt();
    let mut fractions = Vec::new();
    for seed in 0..100 {
        let g = Graph::generate(gp, seed).unwrap();
        assert_eq!(g.edge_count(), 100_000);
        let long = g.long_edge_count() as f64;
        assert!((long - 10_000.0).abs() < 3.0 * sigma, "seed {seed}: {long} long edges");
        fractions.push(long / trials);
    }
    let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
    assert!((0.097..=0.103).contains(&mean), "{mean}");
}

#[test]
fn star_hub_exposes_a_binomial_number_of_leaves() {
    let mut text = String::from("21 2 0 0\n");
    for leaf in 1..=20 {
        text += &format!("0 {leaf} short\n");
    }
    let star = Graph::read_edge_list(text.as_bytes()).unwrap();
    // One-day incubation, so the hub is infectious from day 1 on.
    let dynamics = Dynamics::new((1.0, 1e-12), (10.0, 1e-12)).unwrap();
    let mut r = rng(11);
    let trials = 10_000;
    let mut total = 0usize;
    for _ in 0..trials {
        let mut pop = Population::new(21);
        pop.seed_node(0, &dynamics, &mut r).unwrap();
        pop.step(&star, 1, &dynamics, |_| 0.0, &mut r);
        assert_eq!(pop.state(0).compartment, Compartment::Infectious);
        total += pop.step(&star, 2, &dynamics, |_| 0.055, &mut r).exposures.len();
    }
    let mean = total as f64 / trials as f64;
    assert!((1.04..=1.16).contains(&mean), "{mean}");
}

#[test]
fn patient_zero_is_uniform() {
    let n = 10_000;
    let draws = 10_000;
    let dynamics = Dynamics::default();
    let mut r = rng(12);
    // Pool node ids into 100 equal bins so each expects 100 hits.
    let bins = 100;
    let mut hits = vec![0f64; bins];
    for _ in 0..draws {
        let mut pop = Population::new(n);
        let node = pop.seed_patient_zero(&dynamics, &mut r).unwrap();
        hits[node as usize * bins / n] += 1.0;
        assert_eq!(pop.counts(), [n - 1, 1, 0, 0]);
    }
    let expected = draws as f64 / bins as f64;
    let chi2: f64 = hits.iter().map(|h| (h - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(chi2);
    assert!(p > 0.001, "chi-square {chi2}, p = {p}");
}

#[test]
fn continuous_durations_match_configured_moments() {
    for (mean, sd) in [(5.0, 3.0), (6.5, 3.0)] {
        let d = DurationDistribution::new(mean, sd).unwrap();
        let mut r = rng(13);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| d.sample_continuous(&mut r)).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let s = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((m - mean).abs() < 0.02 && (m - mean).abs() < 0.01 * mean, "mean {m}");
        assert!((s - sd).abs() < 0.02 && (s - sd).abs() < 0.01 * sd, "sd {s}");
    }
}

#[test]
fn ceiled_durations_match_the_integrated_mean() {
    for (mean, sd) in [(5.0, 3.0), (6.5, 3.0)] {
        let d = DurationDistribution::new(mean, sd).unwrap();
        let oracle = ceiled_mean_oracle(d.mu(), d.sigma());
        assert!(oracle > mean && oracle < mean + 0.5 + 1e-3, "oracle {oracle}");
        let mut r = rng(14);
        let n = 100_000;
        let xs: Vec<u32> = (0..n).map(|_| d.sample_days(&mut r)).collect();
        assert!(xs.iter().all(|&x| x >= 1));
        let m = xs.iter().map(|&x| f64::from(x)).sum::<f64>() / n as f64;
        // Four standard errors of the ceiled mean.
        assert!((m - oracle).abs() < 4.0 * (sd + 0.3) / (n as f64).sqrt(), "{m} vs {oracle}");
        if mean == 5.0 {
            assert!((4.9..=5.6).contains(&m), "{m}");
        }
    }
}

#[test]
fn thinning_is_binomial() {
    let mut r = rng(15);
    let reps = 10_000;
    let total: u32 = (0..reps)
        .map(|_| thin_confirmed(&[100], 0.1, 0, &mut r)[0])
        .sum();
    let mean = f64::from(total) / reps as f64;
    assert!((9.4..=10.6).contains(&mean), "{mean}");
    assert_eq!(thin_confirmed(&[7, 9, 11], 1.0, 1, &mut r), vec![0, 7, 9]);
    assert_eq!(thin_confirmed(&[7, 9, 11], 0.0, 0, &mut r), vec![0, 0, 0]);
}

fn desk_sim(horizon: u32, replicas: usize) -> SimConfig {
    SimConfig {
        graph: GraphParams { n: 2_000, k: 20, p: 0.1 },
        n_regions: 20,
        horizon,
        replicas,
        master_seed: 5,
        ..SimConfig::default()
    }
}

#[test]
fn attack_size_grows_with_the_rate() {
    let cfg = desk_sim(100, 40);
    let mut last = 0.0;
    for r in [0.001, 0.005, 0.01, 0.02, 0.055] {
        let stats = Simulator::new(cfg.clone(), PolicySchedule::constant(r).unwrap())
            .unwrap()
            .run_ensemble()
            .unwrap();
        let attack = *stats.mean(smallworld_seir::engine::Field::CumulativeInfected).last().unwrap();
        assert!(attack >= last, "r = {r}: {attack} < {last}");
        last = attack;
    }
}

#[test]
fn severe_lockdown_ends_most_outbreaks() {
    let mut cfg = desk_sim(140, 100);
    cfg.graph.n = 10_000;
    cfg.n_regions = 100;
    let sched = PolicySchedule::stepwise(&[(0, 0.055), (20, 0.0012)]).unwrap();
    let outputs = Simulator::new(cfg, sched).unwrap().run_replicas().unwrap();
    let ended = outputs
        .iter()
        .filter(|o| o.extinction_day().is_some_and(|d| d <= 140))
        .count();
    assert!(ended * 10 >= outputs.len() * 9, "{ended} of {} ended", outputs.len());
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let cfg = desk_sim(60, 16);
    let sched = PolicySchedule::stepwise(&[(0, 0.05), (25, 0.01)]).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| Simulator::new(cfg.clone(), sched.clone()).unwrap().run_ensemble().unwrap())
    };
    assert_eq!(run(1), run(4));
}
