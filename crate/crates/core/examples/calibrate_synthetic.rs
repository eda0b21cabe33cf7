//! Fits the lockdown rate to a case series generated by the model itself at
//! r = 0.01, then checks how close the fit lands.
//!
//!     cargo run --release --example calibrate_synthetic

use chrono::NaiveDate;
use smallworld_seir::calibration::{fit_phase_r, CaseSeries, FitOptions, LossKind};
use smallworld_seir::engine::{SimConfig, Simulator};
use smallworld_seir::policy::PolicySchedule;

fn main() -> smallworld_seir::Result<()> {
    let seed_date = NaiveDate::from_ymd_opt(2020, 2, 1).unwrap();
    let truth = 0.01;
    let schedule = PolicySchedule::stepwise(&[(0, 0.055), (35, truth)])?;
    let target_cfg = SimConfig {
        horizon: 80,
        master_seed: 2024,
        ..SimConfig::default()
    };
    let stats = Simulator::new(target_cfg.clone(), schedule.clone())?.run_ensemble()?;
    let observed = CaseSeries::new("synthetic", seed_date, stats.expected_confirmed.clone())?;

    let dir = std::env::temp_dir().join("smallworld-synthetic.csv");
    observed.write(&dir)?;
    let observed = CaseSeries::read(&dir)?;
    println!("wrote and re-read {} days of synthetic cases via {}", observed.len(), dir.display());

    let fit_cfg = SimConfig {
        master_seed: 7,
        ..target_cfg
    };
    let result = fit_phase_r(
        &observed,
        &fit_cfg,
        &schedule,
        FitOptions {
            phase: 1,
            bounds: (0.001, 0.05),
            grid_points: 9,
            search_replicas: 50,
            final_replicas: 200,
            loss: LossKind::Rmse,
            seed_date,
            exclude_dates: vec![],
        },
    )?;
    for t in &result.trace {
        println!("  pass {} r={:.5} loss {:.1}", t.pass, t.r, t.loss);
    }
    println!(
        "fitted r = {:.5} (truth {truth}, error {:+.1}%), final loss {:.1} at {} replicas",
        result.fitted_r,
        100.0 * (result.fitted_r / truth - 1.0),
        result.loss,
        result.final_replicas
    );
    Ok(())
}
