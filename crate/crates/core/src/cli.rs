//! The `smallworld` command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::calibration::{CaseSeries, FitOptions};
use crate::config::{CalibrationBlock, ScenarioConfig};
use crate::engine::SimConfig;
use crate::error::{Error, Result};
use crate::graph::{Graph, GraphParams};
use crate::output::{run_scenario, write_outputs, OutputDir};
use crate::policy::CheckTarget;

#[derive(Debug, Parser)]
#[command(name = "smallworld", version, about = "SEIR epidemics on small-world networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario ensemble and write its CSV outputs.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
        /// Also write one CSV per replica.
        #[arg(long)]
        per_replica: bool,
    },
    /// Fit one phase's transmission probability to a `date,new_cases` CSV.
    Calibrate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        data: PathBuf,
        /// Index of the phase to fit; defaults to the config, then the last phase.
        #[arg(long)]
        phase: Option<usize>,
        /// Search interval `lo,hi`.
        #[arg(long, value_parser = parse_bounds)]
        bounds: Option<(f64, f64)>,
        /// Directory for calibration.json; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario once per value of one schedule field.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// `phase.<index|last>.<field>=v1,v2,...`
        #[arg(long)]
        param: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a network as an edge list.
    GraphDump {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        p: Option<f64>,
        /// Seed of the network; overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Dump the network this replica of the config runs on.
        #[arg(long, conflicts_with = "seed")]
        replica: Option<usize>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Options shared by the commands that run ensembles.
#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `run.master_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `run.replicas`.
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Overrides `run.quantiles`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub quantiles: Option<Vec<f64>>,
}

impl RunArgs {
    fn load(&self) -> Result<ScenarioConfig> {
        let mut cfg = ScenarioConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.run.master_seed = s;
        }
        if let Some(r) = self.replicas {
            cfg.run.replicas = r;
        }
        if let Some(q) = &self.quantiles {
            cfg.run.quantiles = q.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(w) = self.workers {
            if w == 0 {
                return Err(Error::InvalidInput("--workers must be at least 1".into()));
            }
            b = b.num_threads(w);
        }
        b.build().map_err(|e| Error::InvalidInput(format!("cannot start workers: {e}")))
    }
}

fn parse_bounds(s: &str) -> std::result::Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [lo, hi] = parts[..] else {
        return Err(format!("expected `lo,hi`, got `{s}`"));
    };
    let f = |x: &str| x.parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
    Ok((f(lo)?, f(hi)?))
}

/// Which phase a sweep edits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseRef {
    Index(usize),
    Last,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepField {
    R,
    RShort,
    RLong,
    CheckFraction,
    CheckTarget,
    StartDay,
}

/// A parsed `--param` specification.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub phase: PhaseRef,
    pub field: SweepField,
    pub field_name: String,
    pub values: Vec<String>,
}

impl SweepSpec {
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = |m: String| Error::InvalidInput(format!("--param `{spec}`: {m}"));
        let (key, values) = spec
            .split_once('=')
            .ok_or_else(|| bad("expected `phase.<index|last>.<field>=v1,v2,...`".into()))?;
        let parts: Vec<&str> = key.trim().split('.').collect();
        let ["phase", which, field] = parts[..] else {
            return Err(bad("the key must look like `phase.<index|last>.<field>`".into()));
        };
        let phase = match which {
            "last" => PhaseRef::Last,
            i => PhaseRef::Index(i.parse().map_err(|_| bad(format!("bad phase index `{i}`")))?),
        };
        let field_kind = match field {
            "r" => SweepField::R,
            "r_short" => SweepField::RShort,
            "r_long" => SweepField::RLong,
            "check_fraction" => SweepField::CheckFraction,
            "check_target" => SweepField::CheckTarget,
            "start_day" => SweepField::StartDay,
            other => {
                return Err(bad(format!(
                    "unknown field `{other}`; expected r, r_short, r_long, check_fraction, check_target or start_day"
                )))
            }
        };
        let values: Vec<String> = values
            .split(',')
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect();
        if values.is_empty() {
            return Err(bad("empty value list".into()));
        }
        Ok(Self {
            phase,
            field: field_kind,
            field_name: field.to_string(),
            values,
        })
    }

    /// A copy of `base` with the swept field set to `value`.
    pub fn apply(&self, base: &ScenarioConfig, value: &str) -> Result<ScenarioConfig> {
        let mut cfg = base.clone();
        let n = cfg.schedule.phase.len();
        let i = match self.phase {
            PhaseRef::Last => n - 1,
            PhaseRef::Index(i) if i < n => i,
            PhaseRef::Index(i) => {
                return Err(Error::InvalidInput(format!("--param: no phase {i}; the schedule has {n}")))
            }
        };
        let bad = || Error::InvalidInput(format!("--param: bad value `{value}` for {}", self.field_name));
        let ph = &mut cfg.schedule.phase[i];
        let float = || value.parse::<f64>().map_err(|_| bad());
        match self.field {
            SweepField::R => {
                let r = float()?;
                ph.r_short = Some(r);
                ph.r_long = Some(r);
            }
            SweepField::RShort => ph.r_short = Some(float()?),
            SweepField::RLong => ph.r_long = Some(float()?),
            SweepField::CheckFraction => ph.check_fraction = float()?,
            SweepField::CheckTarget => ph.check_target = CheckTarget::parse(value).ok_or_else(bad)?,
            SweepField::StartDay => ph.start_day = Some(value.parse().map_err(|_| bad())?),
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses arguments and runs the command; the binary's whole `main`.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { run, out, per_replica } => {
            let mut cfg = run.load()?;
            cfg.output.per_replica |= per_replica;
            let result = run.pool()?.install(|| run_scenario(&cfg))?;
            let files = write_outputs(&result, &out)?;
            eprintln!("wrote {} files to {}", files.len(), out.display());
            Ok(())
        }
        Command::Calibrate {
            run,
            data,
            phase,
            bounds,
            out,
        } => calibrate(&run, &data, phase, bounds, out.as_deref()),
        Command::Sweep { run, param, out } => sweep(&run, &param, &out),
        Command::GraphDump {
            config,
            n,
            k,
            p,
            seed,
            replica,
            out,
        } => {
            let cfg = config.map(ScenarioConfig::load).transpose()?;
            let mut params = cfg.as_ref().map_or_else(GraphParams::default, |c| c.graph);
            params.n = n.unwrap_or(params.n);
            params.k = k.unwrap_or(params.k);
            params.p = p.unwrap_or(params.p);
            let graph = match replica {
                Some(i) => {
                    let mut sim = cfg.as_ref().map_or_else(SimConfig::default, ScenarioConfig::sim_config);
                    sim.graph = params;
                    sim.replica_graph(i)?
                }
                None => {
                    let seed = seed.or(cfg.as_ref().map(|c| c.run.master_seed)).unwrap_or(1);
                    Graph::generate(params, seed)?
                }
            };
            let text = graph.to_edge_list();
            match out {
                Some(path) => std::fs::write(&path, text).map_err(|e| Error::io(&path, e)),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
    }
}

fn calibrate(
    run: &RunArgs,
    data: &Path,
    phase: Option<usize>,
    bounds: Option<(f64, f64)>,
    out: Option<&Path>,
) -> Result<()> {
    let cfg = run.load()?;
    let observed = CaseSeries::read(data)?;
    let block = cfg.calibration.clone().unwrap_or_default();
    let seed_date = cfg
        .run
        .seed_date
        .ok_or_else(|| Error::Calibration("the config needs run.seed_date to align observed dates".into()))?;
    let phase = phase.or(block.phase).unwrap_or(cfg.schedule.phase.len() - 1);
    let bounds = bounds.or(block.bounds.map(|[a, b]| (a, b))).unwrap_or((0.0005, 0.1));
    let CalibrationBlock {
        grid_points,
        search_replicas,
        final_replicas,
        loss,
        exclude_dates,
        ..
    } = block;
    let options = FitOptions {
        phase,
        bounds,
        grid_points,
        search_replicas: run.replicas.map_or(search_replicas, |r| r.min(search_replicas)),
        final_replicas: run.replicas.unwrap_or(final_replicas),
        loss,
        seed_date,
        exclude_dates,
    };
    let schedule = cfg.schedule()?;
    let result = run
        .pool()?
        .install(|| crate::calibration::fit_phase_r(&observed, &cfg.sim_config(), &schedule, options))?;
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            result.write_json(dir.join("calibration.json"))?;
            eprintln!("phase {} r = {} (loss {})", result.phase, result.fitted_r, result.loss);
        }
        None => println!("{}", result.to_json()),
    }
    Ok(())
}

fn sweep(run: &RunArgs, param: &str, out: &Path) -> Result<()> {
    let spec = SweepSpec::parse(param)?;
    let base = run.load()?;
    let configs: Vec<ScenarioConfig> = spec
        .values
        .iter()
        .map(|v| spec.apply(&base, v))
        .collect::<Result<_>>()?;
    let pool = run.pool()?;
    let summary = OutputDir::create(out, base.run.master_seed, &base.label)?;
    let mut w = summary.csv("summary.csv")?;
    w.write_record([
        "index",
        "param",
        "value",
        "dir",
        "split_day",
        "first_day",
        "first_peak",
        "second_day",
        "second_peak",
        "second_below_first",
        "mean_components_after_split",
    ])?;
    for (i, (cfg, value)) in configs.iter().zip(&spec.values).enumerate() {
        let dir = format!("{i:02}_{}_{value}", spec.field_name);
        let result = pool.install(|| run_scenario(cfg))?;
        write_outputs(&result, out.join(&dir))?;
        let peaks = result.peaks();
        let split = cfg.split_day();
        let cell = |p: Option<crate::metrics::Peak>| {
            p.map_or_else(|| (String::new(), String::new()), |p| (p.day.to_string(), p.value.to_string()))
        };
        let (fd, fv) = cell(peaks.first);
        let (sd, sv) = cell(peaks.second);
        w.write_record([
            i.to_string(),
            param.split('=').next().unwrap_or_default().trim().to_string(),
            value.clone(),
            dir,
            split.to_string(),
            fd,
            fv,
            sd,
            sv,
            peaks.second_below_first().to_string(),
            result.mean_components_from(split).to_string(),
        ])?;
        eprintln!("{}={value}: second peak below first = {}", spec.field_name, peaks.second_below_first());
    }
    w.flush().map_err(|e| Error::io(out.join("summary.csv"), e))
}
