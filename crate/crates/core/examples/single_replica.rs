//! One replica under the Wuhan schedule, printed every five days.
//!
//!     cargo run --release --example single_replica [replica]

use smallworld_seir::engine::{SimConfig, Simulator};
use smallworld_seir::metrics::empirical_r0;
use smallworld_seir::policy::PolicySchedule;

fn main() -> smallworld_seir::Result<()> {
    let index = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0);
    let config = SimConfig {
        horizon: 90,
        ..SimConfig::default()
    };
    let schedule = PolicySchedule::stepwise(&[(0, 0.055), (38, 0.0065), (56, 0.0012)])?;
    let sim = Simulator::new(config, schedule.clone())?;
    let out = sim.run_replica_fresh(index)?;

    println!("replica {index}: patient zero {}, {} long ties", out.patient_zero, out.long_edges);
    println!("{:>4} {:>6} {:>6} {:>6} {:>6} {:>8} {:>10}", "day", "S", "E", "I", "R", "new_conf", "components");
    for r in out.records.iter().step_by(5) {
        println!(
            "{:>4} {:>6} {:>6} {:>6} {:>6} {:>8} {:>10}",
            r.day, r.susceptible, r.exposed, r.infectious, r.recovered, r.new_confirmed, r.active_components
        );
    }
    match out.extinction_day() {
        Some(d) => println!("no active cases from day {d}"),
        None => println!("still active at the horizon"),
    }
    let r0 = empirical_r0(&out.r0, &schedule);
    println!("phase R0 (daily mean of cohorts): {:?}", r0.phase_daily_mean);
    Ok(())
}
