//! Running a scenario and writing its results.
//!
//! Every CSV starts with one comment line naming the crate version, the
//! master seed and the scenario label, followed by a header row.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::ScenarioConfig;
use crate::engine::{mean_rank_profile, EnsembleStats, Field, FieldStats, ReplicaOutput, Simulator};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::metrics::{
    empirical_r0, moving_average, rank_profile, theoretical_r0, wave_peaks, R0Series, WavePeaks,
    SMOOTHING_WINDOW,
};
use crate::policy::PolicySchedule;
use crate::seir::Compartment;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Compartments of every node on one day.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub day: u32,
    pub compartments: Vec<Compartment>,
}

/// Everything a scenario run produces.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub config: ScenarioConfig,
    pub schedule: PolicySchedule,
    pub outputs: Vec<ReplicaOutput>,
    pub stats: EnsembleStats,
    pub r0: R0Series,
    /// Node states of `output.snapshot_replica`, with its network.
    pub snapshots: Option<(Graph, Vec<Snapshot>)>,
}

impl ScenarioRun {
    /// Wave peaks of the smoothed expected confirmed cases.
    pub fn peaks(&self) -> WavePeaks {
        let smooth = moving_average(&self.stats.expected_confirmed, SMOOTHING_WINDOW);
        wave_peaks(&smooth, self.config.split_day() as usize)
    }

    /// Time-averaged ensemble-mean active component count from `from` on.
    pub fn mean_components_from(&self, from: u32) -> f64 {
        let c = self.stats.mean(Field::ActiveComponents);
        let tail = &c[(from as usize).min(c.len() - 1)..];
        tail.iter().sum::<f64>() / tail.len() as f64
    }
}

/// Runs every replica of a scenario on the current rayon pool.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioRun> {
    let schedule = config.schedule()?;
    let sim = Simulator::new(config.sim_config(), schedule.clone())?;
    let outputs = sim.run_replicas()?;
    let stats = EnsembleStats::from_replicas(&outputs, sim.config());
    let r0 = empirical_r0(&stats.r0, &schedule);

    let snapshots = if config.output.snapshot_days.is_empty() {
        None
    } else {
        let index = config.output.snapshot_replica;
        let graph = sim.config().replica_graph(index)?;
        let mut snaps = Vec::new();
        sim.run_replica_observed(&graph, index, |day, pop| {
            if config.output.snapshot_days.contains(&day) {
                snaps.push(Snapshot {
                    day,
                    compartments: pop.states().iter().map(|s| s.compartment).collect(),
                });
            }
        })?;
        Some((graph, snaps))
    };

    Ok(ScenarioRun {
        config: config.clone(),
        schedule,
        outputs,
        stats,
        r0,
        snapshots,
    })
}

/// Writes CSVs into one directory, each prefixed with the provenance line.
pub struct OutputDir {
    dir: PathBuf,
    comment: String,
}

impl OutputDir {
    pub fn create(dir: impl AsRef<Path>, master_seed: u64, label: &str) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self {
            dir,
            comment: format!("# smallworld-seir {VERSION} master_seed={master_seed} label={label}\n"),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    /// A CSV writer for `name` whose comment line is already written.
    pub fn csv(&self, name: &str) -> Result<csv::Writer<File>> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        file.write_all(self.comment.as_bytes()).map_err(|e| Error::io(&path, e))?;
        Ok(csv::Writer::from_writer(file))
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

/// Column label of a quantile level: 0.01 becomes `q1`, 0.025 `q2.5`.
pub fn quantile_label(level: f64) -> String {
    format!("q{}", (level * 100.0 * 1e6).round() / 1e6)
}

fn num(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

fn stat_columns(prefix: &str, levels: &[f64]) -> Vec<String> {
    let mut cols = vec![format!("{prefix}mean"), format!("{prefix}sd")];
    cols.extend(levels.iter().map(|&q| format!("{prefix}{}", quantile_label(q))));
    cols
}

fn stat_values(fs: &FieldStats, day: usize) -> Vec<String> {
    let mut v = vec![num(fs.mean[day]), num(fs.sd[day])];
    v.extend(fs.quantiles.iter().map(|band| num(band[day])));
    v
}

/// Writes the full output set of `run` into `dir`; returns the file names.
pub fn write_outputs(run: &ScenarioRun, dir: impl AsRef<Path>) -> Result<Vec<String>> {
    let cfg = &run.config;
    let out = OutputDir::create(dir, cfg.run.master_seed, &cfg.label)?;
    let mut written = Vec::new();
    let mut done = |name: &str| written.push(name.to_string());

    out.write_text("scenario.toml", &cfg.to_toml())?;
    done("scenario.toml");

    write_aggregate(&out, run)?;
    done("aggregate.csv");
    write_r0(&out, run)?;
    done("r0.csv");
    write_r0_phases(&out, run)?;
    done("r0_phases.csv");
    write_components(&out, run)?;
    done("components.csv");
    write_regions(&out, run)?;
    done("regions.csv");
    done("regions_mean.csv");
    write_peaks(&out, run)?;
    done("peaks.csv");

    if cfg.output.per_replica {
        for o in &run.outputs {
            let name = format!("replicas/replica_{:04}.csv", o.replica);
            write_replica(&out, &name, o)?;
            done(&name);
        }
    }
    if let Some((graph, snaps)) = &run.snapshots {
        out.write_text("snapshot_graph.txt", &graph.to_edge_list())?;
        done("snapshot_graph.txt");
        let mut w = out.csv("snapshots.csv")?;
        w.write_record(["day", "node", "region", "compartment"])?;
        let regions = crate::graph::RegionPartition::new(graph.n(), cfg.regions.n_regions)?;
        for s in snaps {
            for (node, c) in s.compartments.iter().enumerate() {
                w.write_record([
                    s.day.to_string(),
                    node.to_string(),
                    regions.region_of(node as u32).to_string(),
                    c.as_str().to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(out.path().join("snapshots.csv"), e))?;
        done("snapshots.csv");
    }
    Ok(written)
}

fn flush(w: &mut csv::Writer<File>, out: &OutputDir, name: &str) -> Result<()> {
    w.flush().map_err(|e| Error::io(out.path().join(name), e))
}

fn write_aggregate(out: &OutputDir, run: &ScenarioRun) -> Result<()> {
    let s = &run.stats;
    let mut w = out.csv("aggregate.csv")?;
    let mut header = vec!["day".to_string(), "date".to_string()];
    for f in Field::ALL {
        header.extend(stat_columns(&format!("{}_", f.name()), &s.quantile_levels));
    }
    header.push("expected_confirmed".into());
    header.push("expected_cumulative_confirmed".into());
    w.write_record(&header)?;
    let cum = s.expected_cumulative_confirmed();
    for (day, (&expected, &total)) in s.expected_confirmed.iter().zip(&cum).enumerate() {
        let mut row = vec![day.to_string(), date_cell(run, day)];
        for fs in &s.fields {
            row.extend(stat_values(fs, day));
        }
        row.push(num(expected));
        row.push(num(total));
        w.write_record(&row)?;
    }
    flush(&mut w, out, "aggregate.csv")
}

fn date_cell(run: &ScenarioRun, day: usize) -> String {
    run.config.date_of(day as u32).map_or_else(String::new, |d| d.to_string())
}

fn write_r0(out: &OutputDir, run: &ScenarioRun) -> Result<()> {
    let t = &run.stats.r0;
    let mut w = out.csv("r0.csv")?;
    w.write_record(["day", "date", "phase", "infectors", "secondary", "censored", "r0"])?;
    for day in 0..t.days() {
        w.write_record([
            day.to_string(),
            date_cell(run, day),
            run.schedule.phase_index_at(day as u32).to_string(),
            t.infectors[day].to_string(),
            t.secondary[day].to_string(),
            t.censored[day].to_string(),
            opt(t.cohort_mean(day)),
        ])?;
    }
    flush(&mut w, out, "r0.csv")
}

fn write_r0_phases(out: &OutputDir, run: &ScenarioRun) -> Result<()> {
    let cfg = &run.config;
    let mut w = out.csv("r0_phases.csv")?;
    w.write_record([
        "phase",
        "start_day",
        "end_day",
        "r_short",
        "r_long",
        "theoretical_r0",
        "infectors",
        "r0_daily_mean",
        "r0_infector_weighted",
        "r0_reported",
    ])?;
    let reported = run.r0.phase_averages(cfg.analysis.r0_average);
    for (i, ph) in run.schedule.phases().iter().enumerate() {
        let days = run.schedule.phase_days(i, cfg.run.horizon);
        let p = cfg.graph.p;
        let r_mix = (1.0 - p) * ph.r_short + p * ph.r_long;
        w.write_record([
            i.to_string(),
            days.start().to_string(),
            days.end().to_string(),
            num(ph.r_short),
            num(ph.r_long),
            num(theoretical_r0(r_mix, cfg.graph.k as f64, cfg.dynamics.infection.mean)),
            run.r0.phase_infectors[i].to_string(),
            opt(run.r0.phase_daily_mean[i]),
            opt(run.r0.phase_weighted[i]),
            opt(reported[i]),
        ])?;
    }
    flush(&mut w, out, "r0_phases.csv")
}

fn write_components(out: &OutputDir, run: &ScenarioRun) -> Result<()> {
    let s = &run.stats;
    let fs = s.field(Field::ActiveComponents);
    let active = s.field(Field::Exposed).mean.iter().zip(&s.field(Field::Infectious).mean);
    let mut w = out.csv("components.csv")?;
    let mut header = vec!["day".to_string()];
    header.extend(stat_columns("components_", &s.quantile_levels));
    header.push("active_mean".into());
    w.write_record(&header)?;
    for (day, (e, i)) in active.enumerate() {
        let mut row = vec![day.to_string()];
        row.extend(stat_values(fs, day));
        row.push(num(e + i));
        w.write_record(&row)?;
    }
    flush(&mut w, out, "components.csv")
}

fn write_regions(out: &OutputDir, run: &ScenarioRun) -> Result<()> {
    let day = run.config.snapshot_day() as usize;
    let mut w = out.csv("regions.csv")?;
    w.write_record(["replica", "day", "rank", "unit", "count", "value"])?;
    for o in &run.outputs {
        let counts: Vec<f64> = o.records[day].region_cumulative.iter().map(|&c| f64::from(c)).collect();
        for e in rank_profile(&counts, false)?.entries {
            w.write_record([
                o.replica.to_string(),
                day.to_string(),
                e.rank.to_string(),
                e.unit.to_string(),
                num(e.count),
                num(e.value),
            ])?;
        }
    }
    flush(&mut w, out, "regions.csv")?;

    let mut w = out.csv("regions_mean.csv")?;
    w.write_record(["day", "rank", "value"])?;
    for (rank, v) in mean_rank_profile(&run.outputs, day).iter().enumerate() {
        w.write_record([day.to_string(), (rank + 1).to_string(), num(*v)])?;
    }
    flush(&mut w, out, "regions_mean.csv")
}

fn write_peaks(out: &OutputDir, run: &ScenarioRun) -> Result<()> {
    let split = run.config.split_day() as usize;
    let mut w = out.csv("peaks.csv")?;
    w.write_record([
        "series",
        "split_day",
        "first_day",
        "first_value",
        "second_day",
        "second_value",
        "second_below_first",
    ])?;
    let series = [
        ("expected_confirmed_ma6", run.stats.expected_confirmed.clone()),
        ("new_infectious_mean_ma6", run.stats.mean(Field::NewInfectious).to_vec()),
    ];
    for (name, s) in series {
        let peaks = wave_peaks(&moving_average(&s, SMOOTHING_WINDOW), split);
        let cell = |p: Option<crate::metrics::Peak>| {
            p.map_or_else(|| (String::new(), String::new()), |p| (p.day.to_string(), num(p.value)))
        };
        let (fd, fv) = cell(peaks.first);
        let (sd, sv) = cell(peaks.second);
        w.write_record([
            name.to_string(),
            split.to_string(),
            fd,
            fv,
            sd,
            sv,
            peaks.second_below_first().to_string(),
        ])?;
    }
    flush(&mut w, out, "peaks.csv")
}

fn write_replica(out: &OutputDir, name: &str, o: &ReplicaOutput) -> Result<()> {
    let mut w = out.csv(name)?;
    let mut header = vec!["day"];
    header.extend(Field::ALL.iter().map(|f| f.name()));
    w.write_record(&header)?;
    for rec in &o.records {
        let mut row = vec![rec.day.to_string()];
        row.extend(Field::ALL.iter().map(|f| num(f.value(rec))));
        w.write_record(&row)?;
    }
    flush(&mut w, out, name)
}

/// Reported phase averages of `run` under its configured convention.
pub fn phase_r0(run: &ScenarioRun) -> &[Option<f64>] {
    run.r0.phase_averages(run.config.analysis.r0_average)
}

/// Reads an output CSV, skipping its comment line.
pub fn read_csv(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
    let header = rdr.headers()?.iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_labels() {
        assert_eq!(quantile_label(0.01), "q1");
        assert_eq!(quantile_label(0.5), "q50");
        assert_eq!(quantile_label(0.99), "q99");
        assert_eq!(quantile_label(0.025), "q2.5");
    }

    #[test]
    fn outputs_carry_provenance_and_headers() {
        let src = r#"
label = "tiny"
[graph]
n = 200
k = 4
[regions]
n_regions = 10
[run]
horizon = 20
replicas = 4
master_seed = 9
[output]
per_replica = true
snapshot_days = [0, 10]
[[schedule.phase]]
r = 0.2
"#;
        let cfg = ScenarioConfig::from_toml_str(src, "tiny").unwrap();
        let run = run_scenario(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = write_outputs(&run, dir.path()).unwrap();
        for f in files.iter().filter(|f| f.ends_with(".csv")) {
            let text = std::fs::read_to_string(dir.path().join(f)).unwrap();
            assert!(text.starts_with("# smallworld-seir 0.1.0 master_seed=9 label=tiny\n"), "{f}");
        }
        let (header, rows) = read_csv(dir.path().join("aggregate.csv")).unwrap();
        assert_eq!(header[0], "day");
        assert!(header.contains(&"susceptible_q99".to_string()));
        assert_eq!(rows.len(), 21);
        let (_, snaps) = read_csv(dir.path().join("snapshots.csv")).unwrap();
        assert_eq!(snaps.len(), 400);
        assert!(files.contains(&"replicas/replica_0003.csv".to_string()));
    }
}
