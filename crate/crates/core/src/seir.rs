//! Per-node SEIR state machine and the daily transmission rule.
//!
//! A day is processed in two passes. First every Infectious node tries to
//! infect each Susceptible neighbour, using the compartments as they stood
//! at the start of the day. Then stage timers of nodes that were already
//! Exposed or Infectious count down, and finally the day's new exposures
//! enter Exposed. Someone exposed on day `t` therefore cannot transmit before
//! day `t + 2`.

use rand::Rng;
use rand_distr::{Distribution, LogNormal};

use crate::error::{Error, Result};
use crate::graph::{EdgeId, Graph, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Compartment {
    Susceptible,
    Exposed,
    Infectious,
    Recovered,
}

impl Compartment {
    /// One-letter code: `S`, `E`, `I` or `R`.
    pub fn as_str(self) -> &'static str {
        match self {
            Compartment::Susceptible => "S",
            Compartment::Exposed => "E",
            Compartment::Infectious => "I",
            Compartment::Recovered => "R",
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    pub fn is_active(self) -> bool {
        matches!(self, Compartment::Exposed | Compartment::Infectious)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeState {
    pub compartment: Compartment,
    /// Days left in the current Exposed or Infectious stage.
    pub days_remaining: u32,
    pub day_exposed: Option<u32>,
    pub day_became_infectious: Option<u32>,
    pub infector: Option<NodeId>,
}

impl NodeState {
    pub const SUSCEPTIBLE: NodeState = NodeState {
        compartment: Compartment::Susceptible,
        days_remaining: 0,
        day_exposed: None,
        day_became_infectious: None,
        infector: None,
    };
}

/// Solves for the log-scale parameters `(mu, sigma)` of a lognormal with the
/// given arithmetic mean and standard deviation.
pub fn lognormal_params(mean: f64, sd: f64) -> Result<(f64, f64)> {
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(Error::param("mean", format!("must be positive, got {mean}")));
    }
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(Error::param("sd", format!("must be positive, got {sd}")));
    }
    let sigma2 = (sd * sd / (mean * mean)).ln_1p();
    Ok((mean.ln() - sigma2 / 2.0, sigma2.sqrt()))
}

/// A stage duration: a moment-matched lognormal, ceiled to whole days.
#[derive(Debug, Clone, Copy)]
pub struct DurationDistribution {
    mean: f64,
    sd: f64,
    mu: f64,
    sigma: f64,
    sampler: LogNormal<f64>,
}

impl DurationDistribution {
    pub fn new(mean: f64, sd: f64) -> Result<Self> {
        let (mu, sigma) = lognormal_params(mean, sd)?;
        let sampler = LogNormal::new(mu, sigma).map_err(|e| Error::param("sd", e.to_string()))?;
        Ok(Self {
            mean,
            sd,
            mu,
            sigma,
            sampler,
        })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sd(&self) -> f64 {
        self.sd
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// One draw from the continuous lognormal, before rounding.
    pub fn sample_continuous<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sampler.sample(rng)
    }

    /// One stage duration in whole days (at least 1).
    pub fn sample_days<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        sample_duration(self, rng)
    }
}

/// Draws a continuous duration and rounds it up to whole days, minimum 1.
pub fn sample_duration<R: Rng + ?Sized>(dist: &DurationDistribution, rng: &mut R) -> u32 {
    // Round-off slack so a point mass on a whole day is not pushed up by one.
    let x = (dist.sample_continuous(rng) - 1e-9).ceil();
    if x < 1.0 {
        1
    } else if x >= u32::MAX as f64 {
        u32::MAX
    } else {
        x as u32
    }
}

/// Incubation and infectious-period distributions.
#[derive(Debug, Clone, Copy)]
pub struct Dynamics {
    pub incubation: DurationDistribution,
    pub infection: DurationDistribution,
}

impl Dynamics {
    pub fn new(incubation: (f64, f64), infection: (f64, f64)) -> Result<Self> {
        Ok(Self {
            incubation: DurationDistribution::new(incubation.0, incubation.1)?,
            infection: DurationDistribution::new(infection.0, infection.1)?,
        })
    }
}

impl Default for Dynamics {
    fn default() -> Self {
        Self::new((5.0, 3.0), (6.5, 3.0)).expect("default durations are valid")
    }
}

/// What happened during one simulated day.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DayTransitions {
    /// `(exposed node, infector)` in the order the exposures occurred.
    pub exposures: Vec<(NodeId, NodeId)>,
    /// Nodes that moved E -> I.
    pub became_infectious: Vec<NodeId>,
    /// Nodes that moved I -> R.
    pub recovered: Vec<NodeId>,
}

/// The epidemic state of every node in one replica.
#[derive(Debug, Clone)]
pub struct Population {
    states: Vec<NodeState>,
    counts: [usize; 4],
    /// Exposed or Infectious nodes, ascending.
    active: Vec<NodeId>,
    secondary: Vec<u32>,
    exposed_today: Vec<bool>,
}

impl Population {
    pub fn new(n: usize) -> Self {
        Self {
            states: vec![NodeState::SUSCEPTIBLE; n],
            counts: [n, 0, 0, 0],
            active: Vec::new(),
            secondary: vec![0; n],
            exposed_today: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[NodeState] {
        &self.states
    }

    pub fn state(&self, node: NodeId) -> &NodeState {
        &self.states[node as usize]
    }

    pub fn count(&self, c: Compartment) -> usize {
        self.counts[c.index()]
    }

    /// `[S, E, I, R]` counts.
    pub fn counts(&self) -> [usize; 4] {
        self.counts
    }

    /// Exposed or Infectious nodes in ascending id order.
    pub fn active(&self) -> &[NodeId] {
        &self.active
    }

    /// Number of exposures attributed to each node so far.
    pub fn secondary_counts(&self) -> &[u32] {
        &self.secondary
    }

    /// Everyone who has left Susceptible.
    pub fn ever_infected(&self) -> usize {
        self.len() - self.counts[0]
    }

    fn expose(&mut self, node: NodeId, infector: Option<NodeId>, day: u32, days: u32) {
        let s = &mut self.states[node as usize];
        debug_assert_eq!(s.compartment, Compartment::Susceptible);
        s.compartment = Compartment::Exposed;
        s.days_remaining = days;
        s.day_exposed = Some(day);
        s.infector = infector;
        self.counts[0] -= 1;
        self.counts[1] += 1;
    }

    /// Exposes one uniformly chosen node on day 0 and returns it.
    pub fn seed_patient_zero<R: Rng + ?Sized>(&mut self, dynamics: &Dynamics, rng: &mut R) -> Result<NodeId> {
        if self.is_empty() {
            return Err(Error::InvalidInput("cannot seed an empty population".into()));
        }
        if self.counts[0] != self.len() {
            return Err(Error::InvalidInput(
                "patient zero can only be seeded into a fully susceptible population".into(),
            ));
        }
        let node = rng.random_range(0..self.len()) as NodeId;
        self.seed_node(node, dynamics, rng)?;
        Ok(node)
    }

    /// Exposes a chosen susceptible node on day 0 with no infector.
    pub fn seed_node<R: Rng + ?Sized>(&mut self, node: NodeId, dynamics: &Dynamics, rng: &mut R) -> Result<()> {
        match self.states.get(node as usize) {
            None => return Err(Error::InvalidInput(format!("node {node} is outside the population"))),
            Some(s) if s.compartment != Compartment::Susceptible => {
                return Err(Error::InvalidInput(format!("node {node} is not susceptible")));
            }
            Some(_) => {}
        }
        let days = dynamics.incubation.sample_days(rng);
        self.expose(node, None, 0, days);
        let at = self.active.partition_point(|&u| u < node);
        self.active.insert(at, node);
        Ok(())
    }

    /// Advances the population by one day.
    ///
    /// `edge_rate` gives the transmission probability of each edge for this
    /// day. Infectious nodes are visited in ascending id order, so when two
    /// of them both reach the same susceptible node the lower id is recorded
    /// as the infector.
    pub fn step<R, F>(
        &mut self,
        graph: &Graph,
        day: u32,
        dynamics: &Dynamics,
        edge_rate: F,
        rng: &mut R,
    ) -> DayTransitions
    where
        R: Rng + ?Sized,
        F: Fn(EdgeId) -> f64,
    {
        debug_assert_eq!(graph.n(), self.len());
        let mut out = DayTransitions::default();

        for &u in &self.active {
            if self.states[u as usize].compartment != Compartment::Infectious {
                continue;
            }
            for &(v, e) in graph.neighbors(u) {
                let vi = v as usize;
                if self.states[vi].compartment != Compartment::Susceptible || self.exposed_today[vi] {
                    continue;
                }
                let rate = edge_rate(e);
                if rate > 0.0 && rng.random::<f64>() < rate {
                    self.exposed_today[vi] = true;
                    out.exposures.push((v, u));
                }
            }
        }

        for &u in &self.active {
            let s = &mut self.states[u as usize];
            s.days_remaining -= 1;
            if s.days_remaining > 0 {
                continue;
            }
            match s.compartment {
                Compartment::Exposed => {
                    s.compartment = Compartment::Infectious;
                    s.days_remaining = dynamics.infection.sample_days(rng);
                    s.day_became_infectious = Some(day);
                    self.counts[1] -= 1;
                    self.counts[2] += 1;
                    out.became_infectious.push(u);
                }
                Compartment::Infectious => {
                    s.compartment = Compartment::Recovered;
                    self.counts[2] -= 1;
                    self.counts[3] += 1;
                    out.recovered.push(u);
                }
                _ => unreachable!("inactive node in active list"),
            }
        }

        for &(v, u) in &out.exposures {
            let days = dynamics.incubation.sample_days(rng);
            self.expose(v, Some(u), day, days);
            self.exposed_today[v as usize] = false;
            self.secondary[u as usize] += 1;
        }

        if !out.recovered.is_empty() || !out.exposures.is_empty() {
            let states = &self.states;
            self.active.retain(|&u| states[u as usize].compartment.is_active());
            self.active.extend(out.exposures.iter().map(|&(v, _)| v));
            self.active.sort_unstable();
        }
        out
    }
}

/// Exposes one uniformly random node of a fully susceptible population.
pub fn seed_patient_zero<R: Rng + ?Sized>(
    population: &mut Population,
    dynamics: &Dynamics,
    rng: &mut R,
) -> Result<NodeId> {
    population.seed_patient_zero(dynamics, rng)
}

/// Runs one day of transmission and stage progression; returns the new
/// exposures as `(node, infector)` pairs.
pub fn transmission_step<R, F>(
    graph: &Graph,
    population: &mut Population,
    day: u32,
    dynamics: &Dynamics,
    edge_rate: F,
    rng: &mut R,
) -> Vec<(NodeId, NodeId)>
where
    R: Rng + ?Sized,
    F: Fn(EdgeId) -> f64,
{
    population.step(graph, day, dynamics, edge_rate, rng).exposures
}
