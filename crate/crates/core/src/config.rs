//! Scenario files.
//!
//! A scenario is a TOML document with one block per concern:
//!
//! ```toml
//! label = "italy"
//!
//! [graph]
//! n = 10000
//! k = 20
//! p = 0.1
//!
//! [run]
//! horizon = 90
//! seed_date = "2020-01-31"
//!
//! [[schedule.phase]]
//! r = 0.055
//!
//! [[schedule.phase]]
//! start_date = "2020-03-09"
//! r = 0.01
//! ```
//!
//! Every block except `schedule` may be omitted, as may any key with a
//! default. A phase gives its start either as `start_day` or as an ISO
//! `start_date` (which needs `run.seed_date`), and its rates either as a
//! single `r` or as `r_short` and `r_long`. Loading normalizes phases to
//! `start_day`, `r_short` and `r_long`, so [`ScenarioConfig::to_toml`]
//! writes a file that loads back to an identical config.
//!
//! Errors carry the line of the offending key.

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use toml::de::DeTable;

use crate::calibration::LossKind;
use crate::engine::{DurationSpec, SimConfig};
use crate::error::{Error, Result};
use crate::graph::{GraphParams, RegionPartition};
use crate::metrics::PhaseAverage;
use crate::policy::{CheckTarget, Phase, PolicySchedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub label: String,
    #[serde(default)]
    pub graph: GraphParams,
    #[serde(default)]
    pub dynamics: DynamicsBlock,
    #[serde(default)]
    pub reporting: ReportingBlock,
    #[serde(default)]
    pub run: RunBlock,
    #[serde(default)]
    pub regions: RegionsBlock,
    #[serde(default)]
    pub analysis: AnalysisBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationBlock>,
    pub schedule: ScheduleBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsBlock {
    pub incubation: DurationSpec,
    pub infection: DurationSpec,
}

impl Default for DynamicsBlock {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            incubation: d.incubation,
            infection: d.infection,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportingBlock {
    pub detection_fraction: f64,
    pub diagnosis_delay: u32,
}

impl Default for ReportingBlock {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            detection_fraction: d.detection_fraction,
            diagnosis_delay: d.diagnosis_delay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunBlock {
    pub horizon: u32,
    pub replicas: usize,
    pub master_seed: u64,
    pub quantiles: Vec<f64>,
    /// Calendar date of simulation day 0.
    #[serde(skip_serializing_if = "Option::is_none", deserialize_with = "dates::optional")]
    pub seed_date: Option<NaiveDate>,
}

impl Default for RunBlock {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            horizon: d.horizon,
            replicas: d.replicas,
            master_seed: d.master_seed,
            quantiles: d.quantiles,
            seed_date: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionsBlock {
    pub n_regions: usize,
    /// Day of the regional rank profiles; the horizon when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_day: Option<u32>,
}

impl Default for RegionsBlock {
    fn default() -> Self {
        Self {
            n_regions: SimConfig::default().n_regions,
            snapshot_day: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisBlock {
    /// First day of the second wave; the start of the last phase when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_day: Option<u32>,
    pub r0_average: PhaseAverage,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    /// Write one CSV of daily records per replica.
    pub per_replica: bool,
    /// Days on which to dump every node's compartment for one replica.
    pub snapshot_days: Vec<u32>,
    pub snapshot_replica: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationBlock {
    /// Index of the phase whose rate is fitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[f64; 2]>,
    pub grid_points: usize,
    pub search_replicas: usize,
    pub final_replicas: usize,
    pub loss: LossKind,
    /// Observed rows left out of the fit.
    #[serde(deserialize_with = "dates::list")]
    pub exclude_dates: Vec<NaiveDate>,
}

impl Default for CalibrationBlock {
    fn default() -> Self {
        Self {
            phase: None,
            bounds: None,
            grid_points: 9,
            search_replicas: 50,
            final_replicas: 200,
            loss: LossKind::Rmse,
            exclude_dates: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleBlock {
    pub phase: Vec<PhaseSpec>,
}

/// A phase as written in a scenario file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_day: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", deserialize_with = "dates::optional")]
    pub start_date: Option<NaiveDate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_short: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_long: Option<f64>,
    pub check_fraction: f64,
    pub check_target: CheckTarget,
}

impl From<Phase> for PhaseSpec {
    fn from(p: Phase) -> Self {
        Self {
            start_day: Some(p.start_day),
            start_date: None,
            r: None,
            r_short: Some(p.r_short),
            r_long: Some(p.r_long),
            check_fraction: p.check_fraction,
            check_target: p.check_target,
        }
    }
}

/// Dates given either as quoted ISO strings or as bare TOML dates.
mod dates {
    use std::fmt;

    use chrono::NaiveDate;
    use serde::de::{self, Deserializer, MapAccess, Visitor};
    use serde::Deserialize;

    struct Date(NaiveDate);

    impl<'de> Deserialize<'de> for Date {
        fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
            d.deserialize_any(DateVisitor).map(Date)
        }
    }

    struct DateVisitor;

    impl<'de> Visitor<'de> for DateVisitor {
        type Value = NaiveDate;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a date such as 2020-03-09")
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<NaiveDate, E> {
            NaiveDate::parse_from_str(v, "%Y-%m-%d").map_err(|e| E::custom(format!("bad date `{v}`: {e}")))
        }

        // The toml deserializer hands native datetimes over as a one-entry map.
        fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<NaiveDate, A::Error> {
            let Some((_, text)) = map.next_entry::<String, String>()? else {
                return Err(de::Error::custom("empty datetime"));
            };
            self.visit_str(&text)
        }
    }

    pub fn optional<'de, D: Deserializer<'de>>(d: D) -> Result<Option<NaiveDate>, D::Error> {
        Ok(Some(Date::deserialize(d)?.0))
    }

    pub fn list<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<NaiveDate>, D::Error> {
        Ok(Vec::<Date>::deserialize(d)?.into_iter().map(|x| x.0).collect())
    }
}

/// One step of a key path into a scenario document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Key {
    Name(&'static str),
    Index(usize),
}

/// A validation failure located by key path.
#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub path: Vec<Key>,
    pub message: String,
}

impl Issue {
    fn new(path: Vec<Key>, message: impl Into<String>) -> Self {
        Self {
            path,
            message: message.into(),
        }
    }

    fn dotted(&self) -> String {
        let parts: Vec<String> = self
            .path
            .iter()
            .map(|k| match k {
                Key::Name(s) => s.to_string(),
                Key::Index(i) => i.to_string(),
            })
            .collect();
        parts.join(".")
    }
}

use Key::{Index, Name};

impl ScenarioConfig {
    /// The paper-default setup with the given schedule.
    pub fn with_schedule(label: &str, schedule: &PolicySchedule) -> Self {
        Self {
            label: label.to_string(),
            graph: GraphParams::default(),
            dynamics: DynamicsBlock::default(),
            reporting: ReportingBlock::default(),
            run: RunBlock::default(),
            regions: RegionsBlock::default(),
            analysis: AnalysisBlock::default(),
            output: OutputBlock::default(),
            calibration: None,
            schedule: ScheduleBlock {
                phase: schedule.phases().iter().map(|&p| p.into()).collect(),
            },
        }
    }

    /// Parses, normalizes and validates a scenario. `origin` names the source
    /// in error messages.
    pub fn from_toml_str(src: &str, origin: &str) -> Result<Self> {
        let mut cfg: Self = toml::from_str(src).map_err(|e| Error::Config {
            origin: origin.to_string(),
            line: e.span().map_or(1, |s| line_at(src, s.start)),
            message: e.message().trim().to_string(),
        })?;
        cfg.normalize()
            .and_then(|()| cfg.check())
            .map_err(|issue| Error::Config {
                origin: origin.to_string(),
                line: line_of_key(src, &issue.path),
                message: format!("`{}`: {}", issue.dotted(), issue.message),
            })?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&src, &path.display().to_string())
    }

    /// Serializes the normalized config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario configs always serialize")
    }

    /// Re-checks the config after programmatic edits.
    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|issue| Error::Config {
            origin: "<config>".into(),
            line: 0,
            message: format!("`{}`: {}", issue.dotted(), issue.message),
        })
    }

    /// Resolves dates to day offsets and `r` to `r_short`/`r_long`.
    fn normalize(&mut self) -> std::result::Result<(), Issue> {
        let seed_date = self.run.seed_date;
        for (i, ph) in self.schedule.phase.iter_mut().enumerate() {
            let at = |k| vec![Name("schedule"), Name("phase"), Index(i), Name(k)];
            match (ph.start_day, ph.start_date) {
                (Some(_), Some(_)) => {
                    return Err(Issue::new(at("start_date"), "give start_day or start_date, not both"))
                }
                (None, Some(date)) => {
                    let seed = seed_date.ok_or_else(|| {
                        Issue::new(at("start_date"), "a start_date needs run.seed_date")
                    })?;
                    let offset = (date - seed).num_days();
                    if offset < 0 {
                        return Err(Issue::new(at("start_date"), format!("{date} precedes the seed date {seed}")));
                    }
                    ph.start_day = Some(offset as u32);
                    ph.start_date = None;
                }
                (None, None) if i == 0 => ph.start_day = Some(0),
                (None, None) => return Err(Issue::new(at("start_day"), "missing start_day or start_date")),
                (Some(_), None) => {}
            }
            if let Some(r) = ph.r.take() {
                ph.r_short.get_or_insert(r);
                ph.r_long.get_or_insert(r);
            }
            if ph.r_short.is_none() || ph.r_long.is_none() {
                let k = if ph.r_short.is_none() { "r_short" } else { "r_long" };
                return Err(Issue::new(at(k), "give r, or both r_short and r_long"));
            }
        }
        Ok(())
    }

    fn check(&self) -> std::result::Result<(), Issue> {
        if let Err(Error::InvalidParameter { name, reason }) = self.graph.validate() {
            return Err(Issue::new(vec![Name("graph"), Name(name)], reason));
        }
        for (block, d) in [("incubation", self.dynamics.incubation), ("infection", self.dynamics.infection)] {
            for (key, v) in [("mean", d.mean), ("sd", d.sd)] {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Issue::new(vec![Name("dynamics"), Name(block), Name(key)], format!("must be positive, got {v}")));
                }
            }
        }
        if !(0.0..=1.0).contains(&self.reporting.detection_fraction) {
            return Err(Issue::new(
                vec![Name("reporting"), Name("detection_fraction")],
                format!("must lie in [0, 1], got {}", self.reporting.detection_fraction),
            ));
        }
        if self.run.horizon == 0 {
            return Err(Issue::new(vec![Name("run"), Name("horizon")], "must be at least 1"));
        }
        if self.run.replicas == 0 {
            return Err(Issue::new(vec![Name("run"), Name("replicas")], "must be at least 1"));
        }
        if let Some(q) = self.run.quantiles.iter().find(|q| !(0.0..=1.0).contains(*q)) {
            return Err(Issue::new(vec![Name("run"), Name("quantiles")], format!("level {q} outside [0, 1]")));
        }
        if let Err(e) = RegionPartition::new(self.graph.n, self.regions.n_regions) {
            return Err(Issue::new(vec![Name("regions"), Name("n_regions")], e.to_string()));
        }
        if let Some(d) = self.regions.snapshot_day.filter(|&d| d > self.run.horizon) {
            return Err(Issue::new(vec![Name("regions"), Name("snapshot_day")], format!("day {d} is past the horizon")));
        }
        if let Some(d) = self.output.snapshot_days.iter().find(|&&d| d > self.run.horizon) {
            return Err(Issue::new(vec![Name("output"), Name("snapshot_days")], format!("day {d} is past the horizon")));
        }
        if self.output.snapshot_replica >= self.run.replicas {
            return Err(Issue::new(vec![Name("output"), Name("snapshot_replica")], "no such replica"));
        }

        let phases = &self.schedule.phase;
        if phases.is_empty() {
            return Err(Issue::new(vec![Name("schedule")], "needs at least one [[schedule.phase]]"));
        }
        for (i, ph) in phases.iter().enumerate() {
            let at = |k| vec![Name("schedule"), Name("phase"), Index(i), Name(k)];
            let start = ph.start_day.unwrap_or(0);
            if i == 0 && start != 0 {
                return Err(Issue::new(at("start_day"), "the first phase must start on day 0"));
            }
            if i > 0 && start <= phases[i - 1].start_day.unwrap_or(0) {
                return Err(Issue::new(at("start_day"), "phase starts must strictly increase"));
            }
            if let Err(Error::InvalidParameter { name, reason }) = self.phase(i).validate() {
                let key = if ph.r.is_some() && name != "check_fraction" { "r" } else { name };
                return Err(Issue::new(at(key), reason));
            }
        }

        if let Some(cal) = &self.calibration {
            let at = |k| vec![Name("calibration"), Name(k)];
            if let Some(p) = cal.phase.filter(|&p| p >= phases.len()) {
                return Err(Issue::new(at("phase"), format!("no phase {p}; the schedule has {}", phases.len())));
            }
            if let Some([lo, hi]) = cal.bounds {
                if !(0.0 <= lo && lo < hi && hi <= 1.0) {
                    return Err(Issue::new(at("bounds"), format!("need 0 <= lo < hi <= 1, got [{lo}, {hi}]")));
                }
            }
            if cal.grid_points < 2 {
                return Err(Issue::new(at("grid_points"), "need at least 2 grid points"));
            }
            if cal.search_replicas == 0 || cal.final_replicas == 0 {
                let k = if cal.search_replicas == 0 { "search_replicas" } else { "final_replicas" };
                return Err(Issue::new(at(k), "must be at least 1"));
            }
        }
        Ok(())
    }

    fn phase(&self, i: usize) -> Phase {
        let ph = &self.schedule.phase[i];
        let r = ph.r.unwrap_or(f64::NAN);
        Phase {
            start_day: ph.start_day.unwrap_or(0),
            r_short: ph.r_short.unwrap_or(r),
            r_long: ph.r_long.unwrap_or(r),
            check_fraction: ph.check_fraction,
            check_target: ph.check_target,
        }
    }

    pub fn schedule(&self) -> Result<PolicySchedule> {
        PolicySchedule::new((0..self.schedule.phase.len()).map(|i| self.phase(i)).collect())
    }

    pub fn set_schedule(&mut self, schedule: &PolicySchedule) {
        self.schedule.phase = schedule.phases().iter().map(|&p| p.into()).collect();
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            graph: self.graph,
            incubation: self.dynamics.incubation,
            infection: self.dynamics.infection,
            detection_fraction: self.reporting.detection_fraction,
            diagnosis_delay: self.reporting.diagnosis_delay,
            horizon: self.run.horizon,
            replicas: self.run.replicas,
            master_seed: self.run.master_seed,
            n_regions: self.regions.n_regions,
            quantiles: self.run.quantiles.clone(),
        }
    }

    /// First day of the second wave for peak analysis.
    pub fn split_day(&self) -> u32 {
        self.analysis.split_day.unwrap_or_else(|| {
            self.schedule.phase.last().and_then(|p| p.start_day).unwrap_or(0)
        })
    }

    pub fn snapshot_day(&self) -> u32 {
        self.regions.snapshot_day.unwrap_or(self.run.horizon)
    }

    /// Calendar date of simulation `day`, when the seed date is known.
    pub fn date_of(&self, day: u32) -> Option<NaiveDate> {
        self.run.seed_date.map(|d| d + chrono::Days::new(day as u64))
    }
}

fn line_at(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

/// Line of the deepest existing prefix of `path`; line 1 if none exists.
fn line_of_key(src: &str, path: &[Key]) -> usize {
    let Ok(root) = DeTable::parse(src) else { return 1 };
    let mut offset = 0;
    let Some((first, rest)) = path.split_first() else { return 1 };
    let Name(first) = first else { return 1 };
    let Some(mut node) = root.get_ref().get(*first) else { return 1 };
    offset = offset.max(node.span().start);
    for key in rest {
        let next = match key {
            Name(k) => node.get_ref().get(*k),
            Index(i) => node.get_ref().get(*i),
        };
        match next {
            Some(v) => {
                node = v;
                offset = v.span().start;
            }
            None => break,
        }
    }
    line_at(src, offset)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ITALY: &str = r#"
label = "italy"

[run]
horizon = 90
seed_date = "2020-01-31"

[[schedule.phase]]
r = 0.055

[[schedule.phase]]
start_date = "2020-03-09"
r = 0.01
"#;

    #[test]
    fn dates_become_day_offsets() {
        let cfg = ScenarioConfig::from_toml_str(ITALY, "italy.toml").unwrap();
        let s = cfg.schedule().unwrap();
        assert_eq!(s.phases()[1].start_day, 38);
        assert_eq!(s.phases()[1].r_long, 0.01);
        assert_eq!(cfg.graph, GraphParams::default());
        assert_eq!(cfg.date_of(38), NaiveDate::from_ymd_opt(2020, 3, 9));
    }

    #[test]
    fn normalized_form_round_trips() {
        let cfg = ScenarioConfig::from_toml_str(ITALY, "italy.toml").unwrap();
        let text = cfg.to_toml();
        assert!(text.contains("r_short"));
        assert_eq!(ScenarioConfig::from_toml_str(&text, "x").unwrap(), cfg);
    }

    fn err_line(src: &str) -> (usize, String) {
        match ScenarioConfig::from_toml_str(src, "t.toml") {
            Err(Error::Config { line, message, .. }) => (line, message),
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn validation_errors_point_at_the_key() {
        let src = "[graph]\nn = 100\nk = 7\n\n[[schedule.phase]]\nr = 0.1\n";
        let (line, msg) = err_line(src);
        assert_eq!(line, 3);
        assert!(msg.contains("graph.k"), "{msg}");

        let src = "[[schedule.phase]]\nr = 0.1\n\n[[schedule.phase]]\nstart_day = 5\nr_short = 0.2\nr_long = 1.5\n";
        let (line, msg) = err_line(src);
        assert_eq!(line, 7);
        assert!(msg.contains("schedule.phase.1.r_long"), "{msg}");
    }

    #[test]
    fn syntax_and_type_errors_carry_lines() {
        let (line, _) = err_line("[run]\nhorizon = \"long\"\n");
        assert_eq!(line, 2);
        let (line, msg) = err_line("[graph]\nn = 100\nwidth = 3\n");
        assert_eq!(line, 3);
        assert!(msg.contains("width"), "{msg}");
    }

    #[test]
    fn phase_rules() {
        let (_, msg) = err_line("[[schedule.phase]]\nr_short = 0.1\n");
        assert!(msg.contains("r_long"), "{msg}");
        let (line, msg) = err_line("[[schedule.phase]]\nr = 0.1\n[[schedule.phase]]\nstart_date = \"2020-01-01\"\nr = 0.1\n");
        assert_eq!(line, 4);
        assert!(msg.contains("seed_date"), "{msg}");
        let (_, msg) = err_line("[[schedule.phase]]\nr = 0.1\n[[schedule.phase]]\nstart_day = 0\nr = 0.1\n");
        assert!(msg.contains("strictly increase"), "{msg}");
    }

    #[test]
    fn bare_toml_dates_are_accepted() {
        let bare = ITALY.replace("\"2020-01-31\"", "2020-01-31").replace("\"2020-03-09\"", "2020-03-09");
        assert_ne!(bare, ITALY);
        assert_eq!(
            ScenarioConfig::from_toml_str(&bare, "x").unwrap(),
            ScenarioConfig::from_toml_str(ITALY, "x").unwrap()
        );
        let (line, msg) = err_line(&ITALY.replace("\"2020-01-31\"", "2020-01-31T10:00:00"));
        assert_eq!(line, 6);
        assert!(msg.contains("bad date"), "{msg}");
    }

    #[test]
    fn split_day_defaults_to_last_phase() {
        let cfg = ScenarioConfig::from_toml_str(ITALY, "x").unwrap();
        assert_eq!(cfg.split_day(), 38);
    }
}
