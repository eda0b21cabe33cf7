//! Stage durations: moment-matched lognormals rounded up to whole days.
//!
//!     cargo run --release --example lognormal_durations

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use smallworld_seir::seir::{lognormal_params, DurationDistribution};

fn main() -> smallworld_seir::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (name, mean, sd) in [("incubation", 5.0, 3.0), ("infection", 6.5, 3.0)] {
        let (mu, sigma) = lognormal_params(mean, sd)?;
        let dist = DurationDistribution::new(mean, sd)?;
        let draws = 200_000;
        let cont: Vec<f64> = (0..draws).map(|_| dist.sample_continuous(&mut rng)).collect();
        let m = cont.iter().sum::<f64>() / draws as f64;
        let s = (cont.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (draws - 1) as f64).sqrt();

        let mut hist = [0usize; 16];
        let mut total = 0u64;
        for _ in 0..draws {
            let d = dist.sample_days(&mut rng);
            total += d as u64;
            hist[(d as usize).min(15)] += 1;
        }
        println!("{name}: mu={mu:.5} sigma={sigma:.5}; sampled mean {m:.3} sd {s:.3}; whole-day mean {:.3}", total as f64 / draws as f64);
        for (d, &c) in hist.iter().enumerate().skip(1) {
            let bar = "#".repeat(c * 200 / draws);
            println!("  {d:>2}{} {bar}", if d == 15 { "+" } else { " " });
        }
    }
    Ok(())
}
