//! Three ways to reopen, and how far long-tie transmission must be cut when
//! short ties reopen fully.
//!
//!     cargo run --release --example reopening_strategies [replicas]

use smallworld_seir::config::ScenarioConfig;
use smallworld_seir::output::run_scenario;

fn main() -> smallworld_seir::Result<()> {
    let replicas: Option<usize> = std::env::args().nth(1).and_then(|a| a.parse().ok());
    let load = |name: &str| -> smallworld_seir::Result<ScenarioConfig> {
        let mut cfg = ScenarioConfig::load(format!("{}/scenarios/{name}.toml", env!("CARGO_MANIFEST_DIR")))?;
        if let Some(r) = replicas {
            cfg.run.replicas = r;
        }
        Ok(cfg)
    };
    let report = |label: &str, cfg: &ScenarioConfig| -> smallworld_seir::Result<()> {
        let run = run_scenario(cfg)?;
        let p = run.peaks();
        println!(
            "{label:<34} second/first = {:.2}  mean components after lift {:.1}",
            p.second.unwrap().value / p.first.unwrap().value,
            run.mean_components_from(cfg.split_day())
        );
        Ok(())
    };

    report("A  r_short = r_long = 0.02", &load("reopen-uniform")?)?;
    report("C  r_short = 0.02, r_long = 0.005", &load("reopen-long-reduced")?)?;
    let base = load("reopen-short-only")?;
    for r_long in [0.0, 0.0025, 0.005, 0.01, 0.055] {
        let mut cfg = base.clone();
        cfg.schedule.phase.last_mut().unwrap().r_long = Some(r_long);
        report(&format!("B  r_short = 0.055, r_long = {r_long}"), &cfg)?;
    }
    Ok(())
}
