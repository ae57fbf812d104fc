#![allow(dead_code)]

use std::sync::Arc;

use iph_dd::assembly::DEFAULT_ALPHA;
use iph_dd::dg_space::TraceLayout;
use iph_dd::mesh::{generate_structured, partition_mesh, Point};
use iph_dd::{assemble_hybrid, BlockSystem, Domain, PartitionStrategy, PenaltyField, TraceSpace};

pub fn source(p: Point) -> f64 {
    (3.0 * p[0]).sin() * (2.0 * p[1] + 0.5).cos() + 1.0
}

pub fn block_system(n: usize, domain: Domain, strategy: PartitionStrategy, layout: TraceLayout) -> BlockSystem {
    block_system_with(n, domain, strategy, layout, 1.0, &source)
}

pub fn block_system_with(
    n: usize,
    domain: Domain,
    strategy: PartitionStrategy,
    layout: TraceLayout,
    eta: f64,
    f: &(dyn Fn(Point) -> f64 + Sync),
) -> BlockSystem {
    let mesh = Arc::new(generate_structured(n, domain).unwrap());
    let part = Arc::new(partition_mesh(mesh.clone(), strategy).unwrap());
    let trace = TraceSpace::new(part.clone(), layout);
    let pen = PenaltyField::new(&mesh, DEFAULT_ALPHA).unwrap();
    assemble_hybrid(part, trace, eta, pen, f).unwrap()
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
