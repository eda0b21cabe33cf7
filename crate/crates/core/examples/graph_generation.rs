//! Builds the default small-world network and a few small ones, and shows
//! how short and long ties differ.
//!
//!     cargo run --release --example graph_generation

use smallworld_seir::graph::{ring_distance, EdgeKind, Graph, GraphParams, RegionPartition};

fn main() -> smallworld_seir::Result<()> {
    let g = Graph::generate(GraphParams::default(), 7)?;
    let long = g.long_edge_count();
    println!(
        "n={} k={} p={}: {} edges, {} long ({:.2}%)",
        g.n(),
        g.params().k,
        g.params().p,
        g.edge_count(),
        long,
        100.0 * long as f64 / g.edge_count() as f64
    );

    let mean_span = |kind: EdgeKind| {
        let spans: Vec<f64> = g
            .edges()
            .iter()
            .filter(|e| e.kind == kind)
            .map(|e| ring_distance(e.u, e.v, g.n()) as f64)
            .collect();
        spans.iter().sum::<f64>() / spans.len() as f64
    };
    println!("mean ring distance: short {:.1}, long {:.1}", mean_span(EdgeKind::Short), mean_span(EdgeKind::Long));

    let (min, max) = (0..g.n() as u32).fold((usize::MAX, 0), |(lo, hi), u| {
        let d = g.degree(u);
        (lo.min(d), hi.max(d))
    });
    println!("degree range after rewiring: {min}..={max}");

    let regions = RegionPartition::new(g.n(), 100)?;
    println!("node 150 lies in region {}", regions.region_of(150));

    let tiny = Graph::generate(GraphParams { n: 10, k: 2, p: 0.0 }, 1)?;
    print!("the unrewired 10-cycle as an edge list:\n{}", tiny.to_edge_list());
    Ok(())
}
