//! Replica and ensemble runs.
//!
//! A replica draws its own network, seeds patient zero on day 0 and steps the
//! population one day at a time under the policy schedule. Replicas are keyed
//! by `(master_seed, replica_index)`, so an ensemble is identical whatever
//! order (or thread) its replicas run on.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphParams, NodeId, RegionPartition};
use crate::metrics::{rank_profile, ComponentCounter, R0Tally};
use crate::policy::{edge_rate, select_checked_edges, PolicySchedule};
use crate::rng::{replica_rng, replica_seed, Stream};
use crate::seir::{Dynamics, Population};

/// Mean and standard deviation of a stage duration, in days.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DurationSpec {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub graph: GraphParams,
    pub incubation: DurationSpec,
    pub infection: DurationSpec,
    pub detection_fraction: f64,
    /// Days from becoming infectious to a confirmed diagnosis.
    pub diagnosis_delay: u32,
    pub horizon: u32,
    pub replicas: usize,
    pub master_seed: u64,
    pub n_regions: usize,
    pub quantiles: Vec<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            graph: GraphParams::default(),
            incubation: DurationSpec { mean: 5.0, sd: 3.0 },
            infection: DurationSpec { mean: 6.5, sd: 3.0 },
            detection_fraction: 0.1,
            diagnosis_delay: 10,
            horizon: 150,
            replicas: 200,
            master_seed: 1,
            n_regions: 100,
            quantiles: vec![0.01, 0.5, 0.99],
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.graph.validate()?;
        self.dynamics()?;
        if !(0.0..=1.0).contains(&self.detection_fraction) {
            return Err(Error::param(
                "detection_fraction",
                format!("must lie in [0, 1], got {}", self.detection_fraction),
            ));
        }
        if self.replicas == 0 {
            return Err(Error::param("replicas", "need at least one replica"));
        }
        RegionPartition::new(self.graph.n, self.n_regions)?;
        if let Some(q) = self.quantiles.iter().find(|q| !(0.0..=1.0).contains(*q)) {
            return Err(Error::param("quantiles", format!("level {q} outside [0, 1]")));
        }
        Ok(())
    }

    pub fn dynamics(&self) -> Result<Dynamics> {
        Dynamics::new(
            (self.incubation.mean, self.incubation.sd),
            (self.infection.mean, self.infection.sd),
        )
    }

    /// The network replica `index` runs on.
    pub fn replica_graph(&self, index: usize) -> Result<Graph> {
        let mut rng = replica_rng(self.master_seed, index as u64, Stream::Graph);
        Graph::generate_with(self.graph, replica_seed(self.master_seed, index as u64), &mut rng)
    }
}

/// End-of-day observables of one replica.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DailyRecord {
    pub day: u32,
    pub susceptible: u32,
    pub exposed: u32,
    pub infectious: u32,
    pub recovered: u32,
    pub new_exposed: u32,
    pub new_infectious: u32,
    pub new_confirmed: u32,
    pub cumulative_confirmed: u32,
    pub active_components: u32,
    /// Ever-infected nodes per region.
    pub region_cumulative: Vec<u32>,
}

impl DailyRecord {
    pub fn cumulative_infected(&self) -> u32 {
        self.exposed + self.infectious + self.recovered
    }

    pub fn active(&self) -> u32 {
        self.exposed + self.infectious
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaOutput {
    pub replica: usize,
    pub patient_zero: NodeId,
    pub long_edges: usize,
    /// Days `0..=horizon`.
    pub records: Vec<DailyRecord>,
    pub r0: R0Tally,
}

impl ReplicaOutput {
    /// First day with no Exposed or Infectious node, if the outbreak ended.
    pub fn extinction_day(&self) -> Option<u32> {
        self.records.iter().find(|r| r.active() == 0).map(|r| r.day)
    }

    pub fn series(&self, field: Field) -> Vec<f64> {
        self.records.iter().map(|r| field.value(r)).collect()
    }
}

/// Expected confirmed cases: a fraction `detection_fraction` of the people
/// who became infectious `diagnosis_delay` days earlier.
pub fn confirmed_series(new_infectious: &[f64], detection_fraction: f64, diagnosis_delay: u32) -> Vec<f64> {
    let delay = diagnosis_delay as usize;
    (0..new_infectious.len())
        .map(|t| {
            if t < delay {
                0.0
            } else {
                detection_fraction * new_infectious[t - delay]
            }
        })
        .collect()
}

/// Confirmed cases of a single replica: each newly infectious person is
/// detected independently with probability `detection_fraction`.
pub fn thin_confirmed<R: Rng + ?Sized>(
    new_infectious: &[u32],
    detection_fraction: f64,
    diagnosis_delay: u32,
    rng: &mut R,
) -> Vec<u32> {
    let delay = diagnosis_delay as usize;
    (0..new_infectious.len())
        .map(|t| {
            if t < delay {
                return 0;
            }
            let cases = new_infectious[t - delay];
            if cases == 0 || detection_fraction <= 0.0 {
                return 0;
            }
            Binomial::new(u64::from(cases), detection_fraction)
                .expect("detection fraction validated")
                .sample(rng) as u32
        })
        .collect()
}

/// A validated configuration and schedule, ready to run replicas.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: SimConfig,
    schedule: PolicySchedule,
    dynamics: Dynamics,
    regions: RegionPartition,
}

impl Simulator {
    pub fn new(config: SimConfig, schedule: PolicySchedule) -> Result<Self> {
        config.validate()?;
        let dynamics = config.dynamics()?;
        let regions = RegionPartition::new(config.graph.n, config.n_regions)?;
        Ok(Self {
            config,
            schedule,
            dynamics,
            regions,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn schedule(&self) -> &PolicySchedule {
        &self.schedule
    }

    /// Runs replica `index` on `graph`.
    pub fn run_replica(&self, graph: &Graph, index: usize) -> Result<ReplicaOutput> {
        self.run_replica_observed(graph, index, |_, _| {})
    }

    /// Like [`Simulator::run_replica`], calling `observe` with the population
    /// at the end of every day, day 0 included.
    pub fn run_replica_observed(
        &self,
        graph: &Graph,
        index: usize,
        mut observe: impl FnMut(u32, &Population),
    ) -> Result<ReplicaOutput> {
        let cfg = &self.config;
        if graph.params() != cfg.graph {
            return Err(Error::InvalidInput(format!(
                "graph parameters {:?} do not match the configuration {:?}",
                graph.params(),
                cfg.graph
            )));
        }
        let seed = cfg.master_seed;
        let idx = index as u64;
        let n = graph.n();
        let horizon = cfg.horizon;

        let phase_rates: Vec<Vec<f64>> = self
            .schedule
            .phases()
            .iter()
            .enumerate()
            .map(|(i, phase)| {
                let mut rng = replica_rng(seed, idx, Stream::Checking(i as u32));
                let checked = select_checked_edges(graph, phase.check_fraction, phase.check_target, &mut rng);
                graph
                    .edges()
                    .iter()
                    .enumerate()
                    .map(|(e, edge)| edge_rate(phase, edge.kind, checked.contains(e)))
                    .collect()
            })
            .collect();

        let mut rng = replica_rng(seed, idx, Stream::Dynamics);
        let mut pop = Population::new(n);
        let patient_zero = pop.seed_patient_zero(&self.dynamics, &mut rng)?;

        let mut regions = vec![0u32; self.regions.n_regions()];
        regions[self.regions.region_of(patient_zero)] += 1;
        let mut counter = ComponentCounter::new(n);
        let mut records = Vec::with_capacity(horizon as usize + 1);
        let record = |day, pop: &Population, new_exposed, new_infectious, components, regions: &[u32]| {
            let [s, e, i, r] = pop.counts();
            DailyRecord {
                day,
                susceptible: s as u32,
                exposed: e as u32,
                infectious: i as u32,
                recovered: r as u32,
                new_exposed,
                new_infectious,
                new_confirmed: 0,
                cumulative_confirmed: 0,
                active_components: components,
                region_cumulative: regions.to_vec(),
            }
        };
        records.push(record(0, &pop, 1, 0, 1, &regions));
        observe(0, &pop);

        for day in 1..=horizon {
            if pop.active().is_empty() {
                let last = records.last().expect("day 0 recorded").clone();
                records.push(DailyRecord {
                    day,
                    new_exposed: 0,
                    new_infectious: 0,
                    ..last
                });
                observe(day, &pop);
                continue;
            }
            let rates = &phase_rates[self.schedule.phase_index_at(day)];
            let t = pop.step(graph, day, &self.dynamics, |e| rates[e as usize], &mut rng);
            for &(v, _) in &t.exposures {
                regions[self.regions.region_of(v)] += 1;
            }
            let components = counter.count(graph, pop.active()) as u32;
            records.push(record(
                day,
                &pop,
                t.exposures.len() as u32,
                t.became_infectious.len() as u32,
                components,
                &regions,
            ));
            observe(day, &pop);
        }

        let new_infectious: Vec<u32> = records.iter().map(|r| r.new_infectious).collect();
        let mut rng = replica_rng(seed, idx, Stream::Reporting);
        let confirmed = thin_confirmed(&new_infectious, cfg.detection_fraction, cfg.diagnosis_delay, &mut rng);
        let mut cumulative = 0;
        for (rec, c) in records.iter_mut().zip(confirmed) {
            cumulative += c;
            rec.new_confirmed = c;
            rec.cumulative_confirmed = cumulative;
        }

        Ok(ReplicaOutput {
            replica: index,
            patient_zero,
            long_edges: graph.long_edge_count(),
            records,
            r0: R0Tally::from_population(&pop, horizon as usize + 1),
        })
    }

    /// Runs replica `index` on its own freshly generated network.
    pub fn run_replica_fresh(&self, index: usize) -> Result<ReplicaOutput> {
        let graph = self.config.replica_graph(index)?;
        self.run_replica(&graph, index)
    }

    /// Runs every replica, in parallel on the current rayon pool. The result
    /// is ordered by replica index.
    pub fn run_replicas(&self) -> Result<Vec<ReplicaOutput>> {
        (0..self.config.replicas)
            .into_par_iter()
            .map(|i| self.run_replica_fresh(i))
            .collect()
    }

    /// Runs every replica on one shared network.
    pub fn run_replicas_on(&self, graph: &Graph) -> Result<Vec<ReplicaOutput>> {
        (0..self.config.replicas)
            .into_par_iter()
            .map(|i| self.run_replica(graph, i))
            .collect()
    }

    pub fn run_ensemble(&self) -> Result<EnsembleStats> {
        let outputs = self.run_replicas()?;
        Ok(EnsembleStats::from_replicas(&outputs, &self.config))
    }
}

/// Runs one replica on `graph`.
pub fn run_replica(
    config: &SimConfig,
    schedule: &PolicySchedule,
    graph: &Graph,
    replica_index: usize,
) -> Result<ReplicaOutput> {
    Simulator::new(config.clone(), schedule.clone())?.run_replica(graph, replica_index)
}

/// Runs `config.replicas` replicas, each on its own network, and aggregates.
pub fn run_ensemble(config: &SimConfig, schedule: &PolicySchedule) -> Result<EnsembleStats> {
    Simulator::new(config.clone(), schedule.clone())?.run_ensemble()
}

/// Per-day numeric observables of a [`DailyRecord`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Susceptible,
    Exposed,
    Infectious,
    Recovered,
    NewExposed,
    NewInfectious,
    NewConfirmed,
    CumulativeConfirmed,
    CumulativeInfected,
    ActiveComponents,
}

impl Field {
    pub const ALL: [Field; 10] = [
        Field::Susceptible,
        Field::Exposed,
        Field::Infectious,
        Field::Recovered,
        Field::NewExposed,
        Field::NewInfectious,
        Field::NewConfirmed,
        Field::CumulativeConfirmed,
        Field::CumulativeInfected,
        Field::ActiveComponents,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::Susceptible => "susceptible",
            Field::Exposed => "exposed",
            Field::Infectious => "infectious",
            Field::Recovered => "recovered",
            Field::NewExposed => "new_exposed",
            Field::NewInfectious => "new_infectious",
            Field::NewConfirmed => "new_confirmed",
            Field::CumulativeConfirmed => "cumulative_confirmed",
            Field::CumulativeInfected => "cumulative_infected",
            Field::ActiveComponents => "active_components",
        }
    }

    pub fn value(self, r: &DailyRecord) -> f64 {
        f64::from(match self {
            Field::Susceptible => r.susceptible,
            Field::Exposed => r.exposed,
            Field::Infectious => r.infectious,
            Field::Recovered => r.recovered,
            Field::NewExposed => r.new_exposed,
            Field::NewInfectious => r.new_infectious,
            Field::NewConfirmed => r.new_confirmed,
            Field::CumulativeConfirmed => r.cumulative_confirmed,
            Field::CumulativeInfected => r.cumulative_infected(),
            Field::ActiveComponents => r.active_components,
        })
    }
}

/// Cross-replica statistics of one field, per day.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldStats {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// One series per configured quantile level.
    pub quantiles: Vec<Vec<f64>>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        len => {
            let h = (len - 1) as f64 * q.clamp(0.0, 1.0);
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(len - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

/// Mean, sample standard deviation and quantiles of `values`. The input is
/// sorted first, so the result does not depend on its order.
pub fn summarize(values: &mut [f64], levels: &[f64]) -> (f64, f64, Vec<f64>) {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd, levels.iter().map(|&q| quantile_sorted(values, q)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub replicas: usize,
    pub quantile_levels: Vec<f64>,
    /// Number of recorded days (`horizon + 1`).
    pub days: usize,
    /// Indexed like [`Field::ALL`].
    pub fields: Vec<FieldStats>,
    /// Confirmed cases from the ensemble-mean newly infectious series.
    pub expected_confirmed: Vec<f64>,
    pub r0: R0Tally,
    pub extinct_replicas: usize,
}

impl EnsembleStats {
    pub fn from_replicas(outputs: &[ReplicaOutput], config: &SimConfig) -> Self {
        assert!(!outputs.is_empty(), "an ensemble needs at least one replica");
        let days = outputs[0].records.len();
        let levels = config.quantiles.clone();
        let mut fields = Vec::with_capacity(Field::ALL.len());
        let mut column = vec![0.0; outputs.len()];
        for field in Field::ALL {
            let mut fs = FieldStats {
                mean: Vec::with_capacity(days),
                sd: Vec::with_capacity(days),
                quantiles: vec![Vec::with_capacity(days); levels.len()],
            };
            for day in 0..days {
                for (slot, out) in column.iter_mut().zip(outputs) {
                    *slot = field.value(&out.records[day]);
                }
                let (mean, sd, qs) = summarize(&mut column, &levels);
                fs.mean.push(mean);
                fs.sd.push(sd);
                for (band, q) in fs.quantiles.iter_mut().zip(qs) {
                    band.push(q);
                }
            }
            fields.push(fs);
        }
        let mut r0 = R0Tally::new(days);
        for out in outputs {
            r0.merge(&out.r0);
        }
        let mut stats = Self {
            replicas: outputs.len(),
            quantile_levels: levels,
            days,
            fields,
            expected_confirmed: Vec::new(),
            r0,
            extinct_replicas: outputs.iter().filter(|o| o.extinction_day().is_some()).count(),
        };
        stats.expected_confirmed = confirmed_series(
            &stats.field(Field::NewInfectious).mean,
            config.detection_fraction,
            config.diagnosis_delay,
        );
        stats
    }

    pub fn field(&self, field: Field) -> &FieldStats {
        let i = Field::ALL.iter().position(|&f| f == field).expect("field listed in ALL");
        &self.fields[i]
    }

    pub fn mean(&self, field: Field) -> &[f64] {
        &self.field(field).mean
    }

    pub fn expected_cumulative_confirmed(&self) -> Vec<f64> {
        self.expected_confirmed
            .iter()
            .scan(0.0, |acc, x| {
                *acc += x;
                Some(*acc)
            })
            .collect()
    }
}

/// Rank-wise mean of the per-replica normalised regional profiles on `day`.
/// Zero-count regions are kept so every profile has one entry per region.
pub fn mean_rank_profile(outputs: &[ReplicaOutput], day: usize) -> Vec<f64> {
    let mut acc: Vec<f64> = Vec::new();
    let mut used = 0usize;
    for out in outputs {
        let rec = &out.records[day.min(out.records.len() - 1)];
        let counts: Vec<f64> = rec.region_cumulative.iter().map(|&c| f64::from(c)).collect();
        let Ok(profile) = rank_profile(&counts, true) else {
            continue;
        };
        if acc.is_empty() {
            acc = vec![0.0; profile.len()];
        }
        for (a, v) in acc.iter_mut().zip(profile.values()) {
            *a += v;
        }
        used += 1;
    }
    acc.iter_mut().for_each(|a| *a /= used.max(1) as f64);
    acc
}
