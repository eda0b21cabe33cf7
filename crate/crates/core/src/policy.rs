//! Piecewise-constant policies.
//!
//! A schedule is a list of phases. Each phase fixes the transmission
//! probability on short and on long ties, and may "check" a share of the
//! network's edges, which blocks transmission on them for the whole phase.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeKind, Graph};

/// Which edges an edge-checking directive draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckTarget {
    #[default]
    None,
    RandomEdges,
    LongEdges,
}

impl CheckTarget {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckTarget::None => "none",
            CheckTarget::RandomEdges => "random_edges",
            CheckTarget::LongEdges => "long_edges",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(CheckTarget::None),
            "random_edges" | "random" => Some(CheckTarget::RandomEdges),
            "long_edges" | "long" => Some(CheckTarget::LongEdges),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub start_day: u32,
    pub r_short: f64,
    pub r_long: f64,
    /// Share of *all* edges to check, whatever the target.
    pub check_fraction: f64,
    pub check_target: CheckTarget,
}

impl Phase {
    /// A phase with one transmission probability on every edge and no checking.
    pub fn uniform(start_day: u32, r: f64) -> Self {
        Self {
            start_day,
            r_short: r,
            r_long: r,
            check_fraction: 0.0,
            check_target: CheckTarget::None,
        }
    }

    pub fn with_rates(mut self, r_short: f64, r_long: f64) -> Self {
        self.r_short = r_short;
        self.r_long = r_long;
        self
    }

    pub fn with_checking(mut self, fraction: f64, target: CheckTarget) -> Self {
        self.check_fraction = fraction;
        self.check_target = target;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("r_short", self.r_short),
            ("r_long", self.r_long),
            ("check_fraction", self.check_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(name, format!("must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }

    /// Transmission probability on an edge of `kind` under this phase.
    pub fn edge_rate(&self, kind: EdgeKind, checked: bool) -> f64 {
        edge_rate(self, kind, checked)
    }
}

/// Phases with strictly increasing start days, the first at day 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Phase>", into = "Vec<Phase>")]
pub struct PolicySchedule {
    phases: Vec<Phase>,
}

impl PolicySchedule {
    pub fn new(phases: Vec<Phase>) -> Result<Self> {
        let first = phases
            .first()
            .ok_or_else(|| Error::InvalidInput("a schedule needs at least one phase".into()))?;
        if first.start_day != 0 {
            return Err(Error::InvalidInput(format!(
                "the first phase must start on day 0, not day {}",
                first.start_day
            )));
        }
        for w in phases.windows(2) {
            if w[1].start_day <= w[0].start_day {
                return Err(Error::InvalidInput(format!(
                    "phase start days must strictly increase ({} then {})",
                    w[0].start_day, w[1].start_day
                )));
            }
        }
        for p in &phases {
            p.validate()?;
        }
        Ok(Self { phases })
    }

    /// One phase with rate `r` on every edge.
    pub fn constant(r: f64) -> Result<Self> {
        Self::new(vec![Phase::uniform(0, r)])
    }

    /// Phases given as `(start_day, r)` pairs, undifferentiated and unchecked.
    pub fn stepwise(steps: &[(u32, f64)]) -> Result<Self> {
        Self::new(steps.iter().map(|&(d, r)| Phase::uniform(d, r)).collect())
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    pub fn phases_mut(&mut self) -> &mut [Phase] {
        &mut self.phases
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Index of the phase in force on `day` (intervals are `[start, next_start)`).
    pub fn phase_index_at(&self, day: u32) -> usize {
        self.phases.partition_point(|p| p.start_day <= day) - 1
    }

    pub fn phase_at(&self, day: u32) -> &Phase {
        &self.phases[self.phase_index_at(day)]
    }

    /// Days covered by phase `index`, clipped to `0..=horizon`.
    pub fn phase_days(&self, index: usize, horizon: u32) -> std::ops::RangeInclusive<u32> {
        let start = self.phases[index].start_day;
        let end = self
            .phases
            .get(index + 1)
            .map_or(horizon, |p| p.start_day.saturating_sub(1).min(horizon));
        start..=end
    }
}

impl TryFrom<Vec<Phase>> for PolicySchedule {
    type Error = Error;

    fn try_from(phases: Vec<Phase>) -> Result<Self> {
        Self::new(phases)
    }
}

impl From<PolicySchedule> for Vec<Phase> {
    fn from(s: PolicySchedule) -> Self {
        s.phases
    }
}

/// The phase in force on `day`.
pub fn phase_at(schedule: &PolicySchedule, day: u32) -> &Phase {
    schedule.phase_at(day)
}

/// A set of checked edges, as a membership mask over edge ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckedEdges {
    mask: Vec<bool>,
    count: usize,
}

impl CheckedEdges {
    pub fn none(edge_count: usize) -> Self {
        Self {
            mask: vec![false; edge_count],
            count: 0,
        }
    }

    pub fn contains(&self, edge: usize) -> bool {
        self.mask[edge]
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter_map(|(i, &c)| c.then_some(i))
    }
}

/// Draws the edges to check: `round(fraction * |E|)` of them, uniformly
/// without replacement, from all edges or only from long edges (capped at the
/// number of long edges).
pub fn select_checked_edges<R: Rng + ?Sized>(
    graph: &Graph,
    fraction: f64,
    target: CheckTarget,
    rng: &mut R,
) -> CheckedEdges {
    let total = graph.edge_count();
    let mut checked = CheckedEdges::none(total);
    let budget = (fraction.clamp(0.0, 1.0) * total as f64).round() as usize;
    if budget == 0 {
        return checked;
    }
    let pool: Vec<usize> = match target {
        CheckTarget::None => return checked,
        CheckTarget::RandomEdges => (0..total).collect(),
        CheckTarget::LongEdges => graph
            .edges()
            .iter()
            .enumerate()
            .filter_map(|(i, e)| (e.kind == EdgeKind::Long).then_some(i))
            .collect(),
    };
    let amount = budget.min(pool.len());
    for i in rand::seq::index::sample(rng, pool.len(), amount) {
        checked.mask[pool[i]] = true;
    }
    checked.count = amount;
    checked
}

/// Transmission probability of one edge: zero if checked, otherwise the
/// phase's rate for the edge's kind.
pub fn edge_rate(phase: &Phase, kind: EdgeKind, checked: bool) -> f64 {
    if checked {
        return 0.0;
    }
    match kind {
        EdgeKind::Short => phase.r_short,
        EdgeKind::Long => phase.r_long,
    }
}
