//! Watts-Strogatz small-world networks with every edge tagged short or long.
//!
//! The generator starts from a ring lattice where node `i` is tied to its
//! `k/2` nearest neighbours on either side, then visits every lattice edge
//! and, with probability `p`, moves its far endpoint to a uniformly drawn
//! node. Moved edges are the long ties, untouched edges the short ties.

use std::fmt::Write as _;
use std::io::BufRead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type NodeId = u32;
pub type EdgeId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Short,
    Long,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Short => "short",
            EdgeKind::Long => "long",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub u: NodeId,
    pub v: NodeId,
    pub kind: EdgeKind,
}

/// Size parameters of a small-world network.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphParams {
    pub n: usize,
    pub k: usize,
    pub p: f64,
}

impl GraphParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || !self.k.is_multiple_of(2) {
            return Err(Error::param("k", format!("must be a positive even number, got {}", self.k)));
        }
        if self.k + 2 > self.n {
            return Err(Error::param(
                "k",
                format!("k={} needs n >= k + 2, got n={}", self.k, self.n),
            ));
        }
        if self.n > NodeId::MAX as usize {
            return Err(Error::param("n", "too many nodes"));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::param("p", format!("must lie in [0, 1], got {}", self.p)));
        }
        Ok(())
    }
}

impl Default for GraphParams {
    fn default() -> Self {
        Self {
            n: 10_000,
            k: 20,
            p: 0.1,
        }
    }
}

/// An immutable small-world network.
///
/// Adjacency is stored in compressed form: the neighbours of node `u` are
/// `neighbors(u)`, each paired with the id of the edge that carries the tie.
#[derive(Debug, Clone)]
pub struct Graph {
    params: GraphParams,
    seed: u64,
    edges: Vec<Edge>,
    offsets: Vec<usize>,
    incidence: Vec<(NodeId, EdgeId)>,
}

impl Graph {
    /// Generates a network from `seed`. The same inputs always give the same
    /// edge list in the same order.
    pub fn generate(params: GraphParams, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::generate_with(params, seed, &mut rng)
    }

    /// Generates a network drawing from a caller-provided rng. `seed` is only
    /// recorded for the edge-list header.
    pub fn generate_with<R: Rng + ?Sized>(params: GraphParams, seed: u64, rng: &mut R) -> Result<Self> {
        params.validate()?;
        let GraphParams { n, k, p } = params;
        let half = k / 2;

        // Edge slot `u * half + (j - 1)` initially holds the lattice tie (u, u + j).
        let mut edges: Vec<Edge> = Vec::with_capacity(n * half);
        let mut neighbors: Vec<Vec<NodeId>> = vec![Vec::with_capacity(k + 4); n];
        for u in 0..n {
            for j in 1..=half {
                let v = (u + j) % n;
                edges.push(Edge {
                    u: u as NodeId,
                    v: v as NodeId,
                    kind: EdgeKind::Short,
                });
                neighbors[u].push(v as NodeId);
                neighbors[v].push(u as NodeId);
            }
        }

        if p > 0.0 {
            for j in 1..=half {
                for u in 0..n {
                    if !rng.random_bool(p) {
                        continue;
                    }
                    let slot = u * half + (j - 1);
                    let old = edges[slot].v;
                    let target = (0..n).find_map(|_| {
                        let w = rng.random_range(0..n) as NodeId;
                        (w as usize != u && !neighbors[u].contains(&w)).then_some(w)
                    });
                    let Some(w) = target else { continue };
                    remove_one(&mut neighbors[u], old);
                    remove_one(&mut neighbors[old as usize], u as NodeId);
                    neighbors[u].push(w);
                    neighbors[w as usize].push(u as NodeId);
                    edges[slot].v = w;
                    edges[slot].kind = EdgeKind::Long;
                }
            }
        }

        Ok(Self::from_edges(params, seed, edges))
    }

    fn from_edges(params: GraphParams, seed: u64, edges: Vec<Edge>) -> Self {
        let n = params.n;
        let mut degree = vec![0usize; n];
        for e in &edges {
            degree[e.u as usize] += 1;
            degree[e.v as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets.clone();
        let mut incidence = vec![(0, 0); offsets[n]];
        for (id, e) in edges.iter().enumerate() {
            let id = id as EdgeId;
            incidence[fill[e.u as usize]] = (e.v, id);
            fill[e.u as usize] += 1;
            incidence[fill[e.v as usize]] = (e.u, id);
            fill[e.v as usize] += 1;
        }
        Self {
            params,
            seed,
            edges,
            offsets,
            incidence,
        }
    }

    pub fn params(&self) -> GraphParams {
        self.params
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> Edge {
        self.edges[id as usize]
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn long_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| e.kind == EdgeKind::Long).count()
    }

    /// `(neighbor, edge id)` pairs incident to `u`.
    pub fn neighbors(&self, u: NodeId) -> &[(NodeId, EdgeId)] {
        let u = u as usize;
        &self.incidence[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn degree(&self, u: NodeId) -> usize {
        self.neighbors(u).len()
    }

    /// Writes the edge list: a `n k p seed` header, then one `u v kind` line
    /// per edge in generation order.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::with_capacity(self.edges.len() * 16);
        let GraphParams { n, k, p } = self.params;
        let _ = writeln!(out, "{n} {k} {p} {}", self.seed);
        for e in &self.edges {
            let _ = writeln!(out, "{} {} {}", e.u, e.v, e.kind.as_str());
        }
        out
    }

    /// Parses the format produced by [`Graph::to_edge_list`].
    pub fn read_edge_list<R: BufRead>(reader: R) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::InvalidInput(format!("edge list line {line}: {msg}"));
        let mut lines = reader.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| bad(1, "missing header"))?;
        let header = header.map_err(|e| Error::io("<edge list>", e))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(bad(1, "header must be `n k p seed`"));
        }
        let n: usize = fields[0].parse().map_err(|_| bad(1, "bad n"))?;
        let k: usize = fields[1].parse().map_err(|_| bad(1, "bad k"))?;
        let p: f64 = fields[2].parse().map_err(|_| bad(1, "bad p"))?;
        let seed: u64 = fields[3].parse().map_err(|_| bad(1, "bad seed"))?;
        let params = GraphParams { n, k, p };
        params.validate()?;

        let mut edges = Vec::with_capacity(n * k / 2);
        for (idx, line) in lines {
            let line = line.map_err(|e| Error::io("<edge list>", e))?;
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let mut node = || -> Result<NodeId> {
                let id: NodeId = it
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad(lineno, "expected `u v kind`"))?;
                if id as usize >= n {
                    return Err(bad(lineno, "node id out of range"));
                }
                Ok(id)
            };
            let u = node()?;
            let v = node()?;
            let kind = match it.next() {
                Some("short") => EdgeKind::Short,
                Some("long") => EdgeKind::Long,
                _ => return Err(bad(lineno, "kind must be `short` or `long`")),
            };
            edges.push(Edge { u, v, kind });
        }
        Ok(Self::from_edges(params, seed, edges))
    }
}

fn remove_one(list: &mut Vec<NodeId>, value: NodeId) {
    if let Some(pos) = list.iter().position(|&x| x == value) {
        list.swap_remove(pos);
    }
}

/// Hop distance between `u` and `v` around a ring of `n` nodes.
pub fn ring_distance(u: NodeId, v: NodeId, n: usize) -> usize {
    let d = (u as usize).abs_diff(v as usize);
    d.min(n - d)
}

/// Contiguous arcs of the ring, used as geographic regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionPartition {
    n_regions: usize,
    block: usize,
}

impl RegionPartition {
    pub fn new(n: usize, n_regions: usize) -> Result<Self> {
        if n_regions == 0 || !n.is_multiple_of(n_regions) {
            return Err(Error::param(
                "n_regions",
                format!("{n_regions} regions do not evenly divide {n} nodes"),
            ));
        }
        Ok(Self {
            n_regions,
            block: n / n_regions,
        })
    }

    pub fn n_regions(&self) -> usize {
        self.n_regions
    }

    pub fn region_of(&self, node: NodeId) -> usize {
        node as usize / self.block
    }
}

/// Splits `n` ring nodes into `n_regions` equal contiguous blocks.
pub fn partition(n: usize, n_regions: usize) -> Result<RegionPartition> {
    RegionPartition::new(n, n_regions)
}
