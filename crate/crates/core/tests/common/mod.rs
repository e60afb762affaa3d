#![allow(dead_code)]

use metgraph::graph::{canonical, Canonical, MetricGraph, PointOnGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn graph(kind: Canonical) -> MetricGraph {
    canonical(&kind).unwrap()
}

pub fn star3() -> MetricGraph {
    graph(Canonical::Star(vec![1.0, 1.0, 1.0]))
}

pub fn figure_eight() -> MetricGraph {
    graph(Canonical::FigureEight(1.0, 2.0))
}

/// Graphs used across the property suites.
pub fn test_graphs() -> Vec<(&'static str, MetricGraph)> {
    vec![
        ("interval", graph(Canonical::Interval(1.3))),
        ("circle", graph(Canonical::Circle { length: 2.0, n: 4 })),
        ("loop", graph(Canonical::Circle { length: 1.5, n: 1 })),
        ("star", graph(Canonical::Star(vec![1.0, 0.5, 2.0, 0.7]))),
        ("figure-eight", figure_eight()),
        ("tadpole", graph(Canonical::Tadpole { cycle: 2.0, edge: 1.0 })),
    ]
}

/// Uniformly placed point (edge chosen proportionally to length).
pub fn random_point(g: &MetricGraph, rng: &mut impl Rng) -> PointOnGraph {
    let mut x = rng.random::<f64>() * g.total_length();
    for (i, e) in g.edges().iter().enumerate() {
        if x <= e.length || i + 1 == g.edge_count() {
            return PointOnGraph::new(i, x.min(e.length));
        }
        x -= e.length;
    }
    unreachable!()
}

pub fn random_points(g: &MetricGraph, n: usize, seed: u64) -> Vec<PointOnGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_point(g, &mut rng)).collect()
}

/// Split edge `edge` at arclength `cut` with a new degree-2 vertex. Returns the
/// new graph and a map taking points of `g` to the same locations in it.
pub fn subdivide(g: &MetricGraph, edge: usize, cut: f64) -> (MetricGraph, impl Fn(PointOnGraph) -> PointOnGraph) {
    use metgraph::graph::{build_graph, EdgeSpec};
    let mut spec = g.to_spec();
    let old = spec.edges[edge].clone();
    let mid = spec.vertices;
    spec.vertices += 1;
    spec.edges[edge] = EdgeSpec {
        id: old.id.clone(),
        u: old.u,
        v: mid,
        length: cut,
    };
    spec.edges.push(EdgeSpec {
        id: format!("{}-tail", old.id),
        u: mid,
        v: old.v,
        length: old.length - cut,
    });
    let tail = spec.edges.len() - 1;
    let h = build_graph(&spec).unwrap();
    let map = move |p: PointOnGraph| {
        if p.edge == edge && p.t > cut {
            PointOnGraph::new(tail, p.t - cut)
        } else {
            p
        }
    };
    (h, map)
}
