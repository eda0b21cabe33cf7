//! The Wuhan scenario: a 200-replica ensemble and its phase reproduction
//! numbers. Pass an output directory to also write the CSV set.
//!
//!     cargo run --release --example wuhan_ensemble [out_dir]

use smallworld_seir::config::ScenarioConfig;
use smallworld_seir::engine::Field;
use smallworld_seir::metrics::{theoretical_r0, PhaseAverage};
use smallworld_seir::output::{run_scenario, write_outputs};

fn main() -> smallworld_seir::Result<()> {
    let cfg = ScenarioConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/wuhan.toml"))?;
    let run = run_scenario(&cfg)?;

    let names = ["pre-lockdown", "initial lockdown", "severe lockdown"];
    let daily = run.r0.phase_averages(PhaseAverage::DailyMean);
    let weighted = run.r0.phase_averages(PhaseAverage::InfectorWeighted);
    for (i, ph) in run.schedule.phases().iter().enumerate() {
        let fmt = |x: Option<f64>| x.map_or("-".into(), |v| format!("{v:.3}"));
        println!(
            "{:<17} from {}  r={:<7} theoretical {:.3}  empirical {} (infector-weighted {})",
            names[i],
            cfg.date_of(ph.start_day).unwrap(),
            ph.r_short,
            theoretical_r0(ph.r_short, cfg.graph.k as f64, cfg.dynamics.infection.mean),
            fmt(daily[i]),
            fmt(weighted[i])
        );
    }

    let peak = run.peaks().first.expect("non-empty series");
    let confirmed = run.stats.expected_cumulative_confirmed();
    println!(
        "daily confirmed peaks on {} at {:.1}; {:.0} confirmed by {}",
        cfg.date_of(peak.day as u32).unwrap(),
        peak.value,
        confirmed.last().unwrap(),
        cfg.date_of(cfg.run.horizon).unwrap()
    );
    println!(
        "{} of {} replicas died out; mean attack {:.1}%",
        run.stats.extinct_replicas,
        run.stats.replicas,
        100.0 * run.stats.mean(Field::CumulativeInfected).last().unwrap() / cfg.graph.n as f64
    );

    if let Some(dir) = std::env::args().nth(1) {
        let files = write_outputs(&run, &dir)?;
        println!("wrote {} files to {dir}", files.len());
    }
    Ok(())
}
