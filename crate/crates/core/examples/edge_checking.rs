//! Reopening after a 75-day lockdown while checking 7.5% of ties, spent
//! either on random ties or on long ties only.
//!
//!     cargo run --release --example edge_checking [replicas]

use smallworld_seir::config::ScenarioConfig;
use smallworld_seir::output::run_scenario;

fn main() -> smallworld_seir::Result<()> {
    let replicas: Option<usize> = std::env::args().nth(1).and_then(|a| a.parse().ok());
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios");
    for (name, what) in [("reopen-uniform", "no checking"), ("reopen-check-random", "7.5% random ties"), ("reopen-check-long", "7.5% long ties")] {
        let mut cfg = ScenarioConfig::load(format!("{dir}/{name}.toml"))?;
        if let Some(r) = replicas {
            cfg.run.replicas = r;
        }
        let peaks = run_scenario(&cfg)?.peaks();
        let (a, b) = (peaks.first.unwrap(), peaks.second.unwrap());
        println!(
            "{what:<18} first peak {:>5.2} on day {:>3}, second {:>5.2} on day {:>3}: {}",
            a.value,
            a.day,
            b.value,
            b.day,
            if peaks.second_below_first() { "flattened" } else { "second wave higher" }
        );
    }
    Ok(())
}
