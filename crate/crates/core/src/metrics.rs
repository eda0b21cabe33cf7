//! Observables computed from completed epidemic histories.

use crate::error::{Error, Result};
use crate::graph::{EdgeKind, Graph, NodeId};
use crate::policy::PolicySchedule;
use crate::seir::{Compartment, NodeState, Population};

/// Basic reproduction number at the onset of an outbreak: every one of the
/// `k` ties of an infectious node transmits with probability `r` on each of
/// `t` infectious days.
pub fn theoretical_r0(r: f64, k: f64, t: f64) -> f64 {
    r * k * t
}

/// Secondary-infection counts grouped by the day each infector became
/// infectious.
///
/// Infectors still infectious when the run ends have truncated counts. They
/// are tallied separately per onset day, and any cohort containing one is
/// reported as absent rather than biased low.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct R0Tally {
    /// Completed infectors per onset day.
    pub infectors: Vec<u64>,
    /// Their secondary infections per onset day.
    pub secondary: Vec<u64>,
    /// Still-infectious infectors per onset day.
    pub censored: Vec<u64>,
    pub censored_secondary: u64,
}

impl R0Tally {
    pub fn new(days: usize) -> Self {
        Self {
            infectors: vec![0; days],
            secondary: vec![0; days],
            censored: vec![0; days],
            censored_secondary: 0,
        }
    }

    pub fn days(&self) -> usize {
        self.infectors.len()
    }

    fn ensure(&mut self, days: usize) {
        if days > self.days() {
            self.infectors.resize(days, 0);
            self.secondary.resize(days, 0);
            self.censored.resize(days, 0);
        }
    }

    /// Adds one infector whose infectious period has ended.
    pub fn record(&mut self, onset_day: u32, secondary: u32) {
        let d = onset_day as usize;
        self.ensure(d + 1);
        self.infectors[d] += 1;
        self.secondary[d] += u64::from(secondary);
    }

    /// Adds one infector still infectious at the end of the run.
    pub fn record_censored(&mut self, onset_day: u32, secondary: u32) {
        let d = onset_day as usize;
        self.ensure(d + 1);
        self.censored[d] += 1;
        self.censored_secondary += u64::from(secondary);
    }

    /// Tallies every node of `population` that ever became infectious.
    pub fn from_population(population: &Population, days: usize) -> Self {
        let mut tally = Self::new(days);
        let counts = population.secondary_counts();
        for (node, state) in population.states().iter().enumerate() {
            let Some(onset) = state.day_became_infectious else {
                continue;
            };
            match state.compartment {
                Compartment::Recovered => tally.record(onset, counts[node]),
                _ => tally.record_censored(onset, counts[node]),
            }
        }
        tally
    }

    pub fn merge(&mut self, other: &R0Tally) {
        self.ensure(other.days());
        for d in 0..other.days() {
            self.infectors[d] += other.infectors[d];
            self.secondary[d] += other.secondary[d];
            self.censored[d] += other.censored[d];
        }
        self.censored_secondary += other.censored_secondary;
    }

    pub fn total_censored(&self) -> u64 {
        self.censored.iter().sum()
    }

    /// Secondary infections attributed to all infectors, completed or not.
    pub fn total_secondary(&self) -> u64 {
        self.secondary.iter().sum::<u64>() + self.censored_secondary
    }

    /// Mean secondary infections of the cohort with onset on `day`, if it
    /// is non-empty and complete.
    pub fn cohort_mean(&self, day: usize) -> Option<f64> {
        let i = *self.infectors.get(day)?;
        (i > 0 && self.censored[day] == 0).then(|| self.secondary[day] as f64 / i as f64)
    }
}

/// How a phase's reproduction number summarises its cohorts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseAverage {
    /// Mean of the daily cohort values over the phase's days.
    #[default]
    DailyMean,
    /// Total secondary infections over total infectors.
    InfectorWeighted,
}

/// Empirical reproduction numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct R0Series {
    /// Mean secondary infections of the infectors whose infectious period
    /// began on each day; `None` for empty or incomplete cohorts.
    pub cohorts: Vec<Option<f64>>,
    /// Completed infectors per cohort.
    pub cohort_sizes: Vec<u64>,
    /// Per phase: unweighted mean of the cohort values.
    pub phase_daily_mean: Vec<Option<f64>>,
    /// Per phase: total secondary infections over total infectors, over the
    /// complete cohorts.
    pub phase_weighted: Vec<Option<f64>>,
    pub phase_infectors: Vec<u64>,
}

impl R0Series {
    pub fn phase_averages(&self, kind: PhaseAverage) -> &[Option<f64>] {
        match kind {
            PhaseAverage::DailyMean => &self.phase_daily_mean,
            PhaseAverage::InfectorWeighted => &self.phase_weighted,
        }
    }
}

/// Reproduction numbers from ground-truth infector attribution.
pub fn empirical_r0(tally: &R0Tally, schedule: &PolicySchedule) -> R0Series {
    let days = tally.days();
    let cohorts: Vec<Option<f64>> = (0..days).map(|d| tally.cohort_mean(d)).collect();

    let phases = schedule.len();
    let mut infectors = vec![0u64; phases];
    let mut secondary = vec![0u64; phases];
    let mut cohort_sum = vec![0f64; phases];
    let mut cohort_n = vec![0usize; phases];
    for (day, cohort) in cohorts.iter().enumerate() {
        let Some(v) = *cohort else { continue };
        let ph = schedule.phase_index_at(day as u32);
        infectors[ph] += tally.infectors[day];
        secondary[ph] += tally.secondary[day];
        cohort_sum[ph] += v;
        cohort_n[ph] += 1;
    }
    R0Series {
        cohort_sizes: tally.infectors.clone(),
        cohorts,
        phase_daily_mean: cohort_sum
            .iter()
            .zip(&cohort_n)
            .map(|(&s, &n)| (n > 0).then(|| s / n as f64))
            .collect(),
        phase_weighted: infectors
            .iter()
            .zip(&secondary)
            .map(|(&i, &s)| (i > 0).then(|| s as f64 / i as f64))
            .collect(),
        phase_infectors: infectors,
    }
}

/// Reusable union-find over the active subgraph.
///
/// Membership is tracked with an epoch stamp so that each count only touches
/// the active nodes and their edges, not the whole network.
#[derive(Debug, Clone)]
pub struct ComponentCounter {
    parent: Vec<u32>,
    rank: Vec<u8>,
    stamp: Vec<u32>,
    epoch: u32,
}

impl ComponentCounter {
    pub fn new(n: usize) -> Self {
        Self {
            parent: vec![0; n],
            rank: vec![0; n],
            stamp: vec![0; n],
            epoch: 0,
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (ra_rank, rb_rank) = (self.rank[ra as usize], self.rank[rb as usize]);
        if ra_rank < rb_rank {
            self.parent[ra as usize] = rb;
        } else {
            self.parent[rb as usize] = ra;
            if ra_rank == rb_rank {
                self.rank[ra as usize] += 1;
            }
        }
        true
    }

    /// Components of the subgraph induced by `active` over short edges only.
    pub fn count(&mut self, graph: &Graph, active: &[NodeId]) -> usize {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.fill(0);
            self.epoch = 1;
        }
        for &u in active {
            self.stamp[u as usize] = self.epoch;
            self.parent[u as usize] = u;
            self.rank[u as usize] = 0;
        }
        let mut components = active.len();
        for &u in active {
            for &(v, e) in graph.neighbors(u) {
                if v > u && self.stamp[v as usize] == self.epoch && graph.edge(e).kind == EdgeKind::Short && self.union(u, v) {
                    components -= 1;
                }
            }
        }
        components
    }
}

/// Number of connected components formed by Exposed and Infectious nodes
/// joined by short edges.
pub fn active_components(graph: &Graph, states: &[NodeState]) -> usize {
    let active: Vec<NodeId> = states
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.compartment.is_active().then_some(i as NodeId))
        .collect();
    ComponentCounter::new(graph.n()).count(graph, &active)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankEntry {
    pub rank: usize,
    pub unit: usize,
    pub count: f64,
    /// `count / max count`.
    pub value: f64,
}

/// Per-unit case counts ranked from largest to smallest and normalised by the
/// largest.
#[derive(Debug, Clone, PartialEq)]
pub struct RankProfile {
    pub entries: Vec<RankEntry>,
}

impl RankProfile {
    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Ranks `counts` (indexed by unit) descending and divides by the maximum.
/// Units with zero cases are dropped unless `keep_zeros` is set. Equal counts
/// keep ascending unit order.
pub fn rank_profile(counts: &[f64], keep_zeros: bool) -> Result<RankProfile> {
    if counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
        return Err(Error::InvalidInput("rank profile counts must be finite and nonnegative".into()));
    }
    let max = counts.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::InvalidInput("rank profile needs at least one positive count".into()));
    }
    let mut units: Vec<usize> = (0..counts.len()).filter(|&u| keep_zeros || counts[u] > 0.0).collect();
    units.sort_by(|&a, &b| counts[b].total_cmp(&counts[a]).then(a.cmp(&b)));
    Ok(RankProfile {
        entries: units
            .into_iter()
            .enumerate()
            .map(|(rank, unit)| RankEntry {
                rank: rank + 1,
                unit,
                count: counts[unit],
                value: counts[unit] / max,
            })
            .collect(),
    })
}

/// Window of the smoothing used for peak detection.
pub const SMOOTHING_WINDOW: usize = 6;

/// Trailing moving average; the first `window - 1` days average over the
/// days available so far.
pub fn moving_average(series: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for (t, &x) in series.iter().enumerate() {
        sum += x;
        if t >= window {
            sum -= series[t - window];
        }
        out.push(sum / (t + 1).min(window) as f64);
    }
    out
}

/// Index of the maximum, earliest on ties.
fn argmax(series: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in series.iter().enumerate() {
        match best {
            Some(b) if series[b] >= x => {}
            _ => best = Some(i),
        }
    }
    best
}

/// A series moved in time by `shift` days. Every input value is kept; use
/// [`AlignedSeries::window`] for a truncated, padded view.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedSeries {
    pub shift: i64,
    /// `(new day, value)` for every original value.
    pub points: Vec<(i64, f64)>,
}

impl AlignedSeries {
    /// Days `start .. start + len`, `None` where the shifted series has no value.
    pub fn window(&self, start: i64, len: usize) -> Vec<Option<f64>> {
        let first = self.points.first().map_or(0, |p| p.0);
        (0..len as i64)
            .map(|i| {
                let idx = start + i - first;
                (idx >= 0).then(|| self.points.get(idx as usize).map(|p| p.1)).flatten()
            })
            .collect()
    }
}

/// Shifts `series` so that the peak of its `window`-day trailing average
/// falls on `target_peak_day`.
pub fn align_to_peak(series: &[f64], target_peak_day: usize, window: usize) -> Result<AlignedSeries> {
    let smoothed = moving_average(series, window);
    let (min, max) = smoothed
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if smoothed.is_empty() || max.partial_cmp(&min) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::InvalidInput("cannot align a series without a peak".into()));
    }
    let peak = argmax(&smoothed).expect("non-empty");
    let shift = target_peak_day as i64 - peak as i64;
    Ok(AlignedSeries {
        shift,
        points: series.iter().enumerate().map(|(t, &x)| (t as i64 + shift, x)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub day: usize,
    pub value: f64,
}

/// Peaks of a (smoothed) daily series before and from `split_day`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavePeaks {
    pub first: Option<Peak>,
    pub second: Option<Peak>,
}

impl WavePeaks {
    /// True when both peaks exist and the second is strictly lower.
    pub fn second_below_first(&self) -> bool {
        matches!((self.first, self.second), (Some(a), Some(b)) if b.value < a.value)
    }
}

/// Maximum over days `< split_day` and over days `>= split_day`, earliest
/// day on ties.
pub fn wave_peaks(series: &[f64], split_day: usize) -> WavePeaks {
    let split = split_day.min(series.len());
    let peak = |slice: &[f64], offset: usize| {
        argmax(slice).map(|i| Peak {
            day: i + offset,
            value: slice[i],
        })
    };
    WavePeaks {
        first: peak(&series[..split], 0),
        second: peak(&series[split..], split),
    }
}
