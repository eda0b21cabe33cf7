//! Lining up epidemic curves by their smoothed peaks, as when comparing
//! countries whose outbreaks started on different dates. Individual
//! replicas stand in for countries here.
//!
//!     cargo run --release --example peak_alignment

use smallworld_seir::config::ScenarioConfig;
use smallworld_seir::engine::Field;
use smallworld_seir::metrics::{align_to_peak, SMOOTHING_WINDOW};
use smallworld_seir::output::run_scenario;

fn main() -> smallworld_seir::Result<()> {
    let mut cfg = ScenarioConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/eu-aggregate.toml"))?;
    cfg.run.replicas = 40;
    let run = run_scenario(&cfg)?;
    let target = 50;

    let model = align_to_peak(&run.stats.expected_confirmed, target, SMOOTHING_WINDOW)?;
    println!("ensemble mean: shifted by {:+} days", model.shift);

    let mut shown = 0;
    for out in run.outputs.iter().filter(|o| o.extinction_day().is_none_or(|d| d > 40)) {
        let series = out.series(Field::NewInfectious);
        let aligned = align_to_peak(&series, target, SMOOTHING_WINDOW)?;
        let window = aligned.window(target as i64 - 20, 41);
        let cells: String = window
            .iter()
            .step_by(5)
            .map(|v| v.map_or("    -".into(), |x| format!("{x:>5.0}")))
            .collect();
        println!("replica {:>2} shift {:>+4}: {cells}", out.replica, aligned.shift);
        shown += 1;
        if shown == 8 {
            break;
        }
    }
    println!("(columns: days {}..={} in steps of 5, newly infectious per day)", target - 20, target + 20);
    Ok(())
}
