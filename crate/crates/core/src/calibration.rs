//! Fitting one phase's transmission probability to observed case counts.
//!
//! The fit compares the ensemble's expected cumulative confirmed cases with
//! the observed cumulative series on the days of the fitted phase. Candidates
//! come from a log-spaced grid over the bounds, followed by one linear pass
//! between the neighbours of the best coarse point. Every candidate runs on
//! the same master seed, so candidates differ only through `r`.

use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{Simulator, SimConfig};
use crate::error::{Error, Result};
use crate::policy::PolicySchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Root-mean-square error of the counts.
    #[default]
    Rmse,
    /// Root-mean-square error of `ln(1 + count)`.
    Log1pRmse,
}

/// Distance between a simulated and an observed cumulative series.
pub fn loss(sim: &[f64], observed: &[f64], kind: LossKind) -> Result<f64> {
    if sim.len() != observed.len() {
        return Err(Error::InvalidInput(format!(
            "series lengths differ: {} simulated vs {} observed",
            sim.len(),
            observed.len()
        )));
    }
    if sim.is_empty() {
        return Err(Error::InvalidInput("cannot score empty series".into()));
    }
    let f = |x: f64| match kind {
        LossKind::Rmse => x,
        LossKind::Log1pRmse => x.ln_1p(),
    };
    let sq: f64 = sim.iter().zip(observed).map(|(&s, &o)| (f(s) - f(o)).powi(2)).sum();
    Ok((sq / sim.len() as f64).sqrt())
}

/// Daily new confirmed cases on consecutive dates.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseSeries {
    pub label: String,
    pub start: NaiveDate,
    pub new_cases: Vec<f64>,
    /// Days absent from the source and filled with zero.
    pub filled: Vec<bool>,
}

impl CaseSeries {
    pub fn new(label: impl Into<String>, start: NaiveDate, new_cases: Vec<f64>) -> Result<Self> {
        if let Some(c) = new_cases.iter().find(|c| !(**c >= 0.0 && c.is_finite())) {
            return Err(Error::InvalidInput(format!("case counts must be nonnegative, got {c}")));
        }
        let filled = vec![false; new_cases.len()];
        Ok(Self {
            label: label.into(),
            start,
            new_cases,
            filled,
        })
    }

    /// Reads a `date,new_cases` CSV. `origin` names the source in errors,
    /// whose row numbers are file lines.
    pub fn from_reader(reader: impl Read, origin: &Path) -> Result<Self> {
        let row_err = |row: u64, message: String| Error::DataRow {
            path: origin.to_path_buf(),
            row: row as usize,
            message,
        };
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| row_err(1, e.to_string()))?.clone();
        if headers.len() != 2 || &headers[0] != "date" || &headers[1] != "new_cases" {
            return Err(row_err(1, format!("expected header `date,new_cases`, got `{}`", headers.iter().collect::<Vec<_>>().join(","))));
        }
        let mut rows: Vec<(NaiveDate, f64)> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let row = e.position().map_or(0, |p| p.line());
                row_err(row, e.to_string())
            })?;
            let row = rec.position().map_or(0, |p| p.line());
            let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d")
                .map_err(|e| row_err(row, format!("bad date `{}`: {e}", &rec[0])))?;
            let count: f64 = rec[1]
                .parse()
                .ok()
                .filter(|c: &f64| *c >= 0.0 && c.is_finite())
                .ok_or_else(|| row_err(row, format!("bad case count `{}`", &rec[1])))?;
            if let Some(&(prev, _)) = rows.last() {
                if date <= prev {
                    return Err(row_err(row, format!("date {date} does not follow {prev}")));
                }
            }
            rows.push((date, count));
        }
        let Some(&(start, _)) = rows.first() else {
            return Err(Error::InvalidInput(format!("{}: no data rows", origin.display())));
        };
        let label = origin.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        let days = (rows.last().unwrap().0 - start).num_days() as usize + 1;
        let mut new_cases = vec![0.0; days];
        let mut filled = vec![true; days];
        for (date, count) in rows {
            let i = (date - start).num_days() as usize;
            new_cases[i] = count;
            filled[i] = false;
        }
        Ok(Self {
            label,
            start,
            new_cases,
            filled,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(std::io::BufReader::new(file), path)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["date", "new_cases"])?;
        for (i, c) in self.new_cases.iter().enumerate() {
            w.write_record([self.date(i).to_string(), c.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.new_cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.new_cases.is_empty()
    }

    pub fn date(&self, index: usize) -> NaiveDate {
        self.start + chrono::Days::new(index as u64)
    }

    pub fn gap_days(&self) -> usize {
        self.filled.iter().filter(|&&f| f).count()
    }
}

/// Settings of one fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub phase: usize,
    pub bounds: (f64, f64),
    pub grid_points: usize,
    pub search_replicas: usize,
    pub final_replicas: usize,
    pub loss: LossKind,
    /// Calendar date of simulation day 0.
    pub seed_date: NaiveDate,
    pub exclude_dates: Vec<NaiveDate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// 0 for the coarse grid, 1 for the refinement.
    pub pass: u8,
    pub r: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub label: String,
    pub phase: usize,
    pub fitted_r: f64,
    /// Loss of `fitted_r` at `final_replicas`.
    pub loss: f64,
    pub loss_kind: LossKind,
    pub search_loss: f64,
    pub search_replicas: usize,
    pub final_replicas: usize,
    pub master_seed: u64,
    pub bounds: (f64, f64),
    /// First and last scored simulation day.
    pub fit_days: (u32, u32),
    pub scored_days: usize,
    /// Per-phase `r_short` of the fitted schedule.
    pub phase_rates: Vec<f64>,
    pub trace: Vec<TracePoint>,
}

impl CalibrationResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("results always serialize")
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }
}

/// A prepared fit: the template, the phase to vary and the scored points.
#[derive(Debug, Clone)]
pub struct Calibrator {
    config: SimConfig,
    template: PolicySchedule,
    options: FitOptions,
    label: String,
    /// Simulation days scored, with the observed cumulative count on each.
    points: Vec<(u32, f64)>,
}

impl Calibrator {
    pub fn new(observed: &CaseSeries, config: &SimConfig, template: &PolicySchedule, options: FitOptions) -> Result<Self> {
        let (lo, hi) = options.bounds;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::Calibration(format!("bounds must satisfy 0 <= lo < hi <= 1, got [{lo}, {hi}]")));
        }
        if options.phase >= template.len() {
            return Err(Error::Calibration(format!(
                "no phase {}; the schedule has {}",
                options.phase,
                template.len()
            )));
        }
        if options.grid_points < 2 || options.search_replicas == 0 || options.final_replicas == 0 {
            return Err(Error::Calibration("need at least 2 grid points and 1 replica".into()));
        }
        let (first, last) = template.phase_days(options.phase, config.horizon).into_inner();

        let mut points = Vec::new();
        let mut cumulative = 0.0;
        for (i, &c) in observed.new_cases.iter().enumerate() {
            let date = observed.date(i);
            if options.exclude_dates.contains(&date) {
                continue;
            }
            cumulative += c;
            let day = (date - options.seed_date).num_days();
            if (first as i64..=last as i64).contains(&day) {
                points.push((day as u32, cumulative));
            }
        }
        if points.is_empty() {
            return Err(Error::Calibration(format!(
                "observed dates {}..{} do not overlap phase {} (days {first}..={last} from {})",
                observed.start,
                observed.date(observed.len().saturating_sub(1)),
                options.phase,
                options.seed_date
            )));
        }
        let mut config = config.clone();
        config.horizon = points.last().unwrap().0.max(1);
        Ok(Self {
            config,
            template: template.clone(),
            label: observed.label.clone(),
            options,
            points,
        })
    }

    /// The template with phase `options.phase` set to `r` on every edge.
    pub fn schedule_for(&self, r: f64) -> PolicySchedule {
        let mut s = self.template.clone();
        let ph = &mut s.phases_mut()[self.options.phase];
        ph.r_short = r;
        ph.r_long = r;
        s
    }

    pub fn scored_days(&self) -> impl Iterator<Item = u32> + '_ {
        self.points.iter().map(|p| p.0)
    }

    /// Loss of candidate `r` with an ensemble of `replicas`.
    pub fn loss_at(&self, r: f64, replicas: usize) -> Result<f64> {
        let mut cfg = self.config.clone();
        cfg.replicas = replicas;
        let stats = Simulator::new(cfg, self.schedule_for(r))?.run_ensemble()?;
        let cum = stats.expected_cumulative_confirmed();
        let sim: Vec<f64> = self.points.iter().map(|&(d, _)| cum[d as usize]).collect();
        let obs: Vec<f64> = self.points.iter().map(|p| p.1).collect();
        loss(&sim, &obs, self.options.loss)
    }

    fn evaluate(&self, pass: u8, candidates: &[f64]) -> Result<Vec<TracePoint>> {
        candidates
            .par_iter()
            .map(|&r| {
                Ok(TracePoint {
                    pass,
                    r,
                    loss: self.loss_at(r, self.options.search_replicas)?,
                })
            })
            .collect()
    }

    pub fn fit(&self) -> Result<CalibrationResult> {
        let o = &self.options;
        let coarse = coarse_grid(o.bounds, o.grid_points);
        let mut trace = self.evaluate(0, &coarse)?;
        let b = argmin(&trace);
        let lo = coarse[b.saturating_sub(1)];
        let hi = coarse[(b + 1).min(coarse.len() - 1)];
        let fine: Vec<f64> = linear_grid(lo, hi, o.grid_points)
            .into_iter()
            .filter(|r| !coarse.contains(r))
            .collect();
        trace.extend(self.evaluate(1, &fine)?);
        let best = trace[argmin(&trace)];
        let final_loss = self.loss_at(best.r, o.final_replicas)?;
        let schedule = self.schedule_for(best.r);
        Ok(CalibrationResult {
            label: self.label.clone(),
            phase: o.phase,
            fitted_r: best.r,
            loss: final_loss,
            loss_kind: o.loss,
            search_loss: best.loss,
            search_replicas: o.search_replicas,
            final_replicas: o.final_replicas,
            master_seed: self.config.master_seed,
            bounds: o.bounds,
            fit_days: (self.points[0].0, self.points.last().unwrap().0),
            scored_days: self.points.len(),
            phase_rates: schedule.phases().iter().map(|p| p.r_short).collect(),
            trace,
        })
    }
}

/// Fits the rate of one phase of `template` to `observed`.
pub fn fit_phase_r(
    observed: &CaseSeries,
    config: &SimConfig,
    template: &PolicySchedule,
    options: FitOptions,
) -> Result<CalibrationResult> {
    Calibrator::new(observed, config, template, options)?.fit()
}

/// `points` log-spaced values over `bounds`. A zero lower bound is kept as a
/// candidate and the log grid starts at a thousandth of the upper bound.
pub fn coarse_grid(bounds: (f64, f64), points: usize) -> Vec<f64> {
    let (lo, hi) = bounds;
    if lo > 0.0 {
        return log_grid(lo, hi, points);
    }
    let mut g = vec![0.0];
    g.extend(log_grid(hi * 1e-3, hi, points - 1));
    g
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| match i {
            0 => lo,
            i if i == points - 1 => hi,
            i => (a + (b - a) * i as f64 / (points - 1) as f64).exp(),
        })
        .collect()
}

fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

/// Index of the smallest loss; the earliest on ties.
fn argmin(trace: &[TracePoint]) -> usize {
    let mut best = 0;
    for (i, t) in trace.iter().enumerate() {
        if t.loss < trace[best].loss {
            best = i;
        }
    }
    best
}
