//! Regional concentration 60 days in, 25 days into lockdown: the normalized
//! rank profile of cumulative infections over 100 ring regions.
//!
//!     cargo run --release --example rank_profile [replicas]

use smallworld_seir::config::ScenarioConfig;
use smallworld_seir::engine::mean_rank_profile;
use smallworld_seir::metrics::rank_profile;
use smallworld_seir::output::run_scenario;

fn main() -> smallworld_seir::Result<()> {
    let mut cfg = ScenarioConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/eu-aggregate.toml"))?;
    if let Some(r) = std::env::args().nth(1).and_then(|a| a.parse().ok()) {
        cfg.run.replicas = r;
    }
    let day = cfg.snapshot_day() as usize;
    let run = run_scenario(&cfg)?;

    let first = &run.outputs[0].records[day].region_cumulative;
    let counts: Vec<f64> = first.iter().map(|&c| f64::from(c)).collect();
    let profile = rank_profile(&counts, false)?;
    println!("replica 0, day {day}: {} regions with cases; top five:", profile.len());
    for e in profile.entries.iter().take(5) {
        println!("  rank {:>2}: region {:>2} with {:>4} infections ({:.3})", e.rank, e.unit, e.count, e.value);
    }

    let mean = mean_rank_profile(&run.outputs, day);
    println!("ensemble mean profile (rank: value, ln value):");
    for rank in [1, 2, 5, 10, 20, 30, 40, 50] {
        let v = mean[rank - 1];
        println!("  {rank:>3}: {v:.4} {:>7.3}", v.ln());
    }
    Ok(())
}
