mod common;

use common::{random_points, test_graphs};
use metgraph::cov::{psd_report, CovarianceSource};
use metgraph::exact::{continuity_constraints, markov_check, ConstraintMatrix, ExactField};
use metgraph::graph::{End, MetricGraph, PointOnGraph};
use metgraph::model::{EdgeParams, FieldModel};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_model(g: &MetricGraph, seed: u64) -> FieldModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = (0..g.edge_count())
        .map(|_| EdgeParams {
            kappa: 10f64.powf(rng.random_range(-0.7..0.7)),
            a: 10f64.powf(rng.random_range(-0.5..0.5)),
        })
        .collect();
    FieldModel::new(edges, rng.random_range(0.5..2.0), 1.0).unwrap()
}

fn end_point(g: &MetricGraph, edge: usize, end: End) -> PointOnGraph {
    match end {
        End::Start => PointOnGraph::new(edge, 0.0),
        End::Finish => PointOnGraph::new(edge, g.edge(edge).length),
    }
}

#[test]
fn vertex_values_agree_exactly_across_incident_edges() {
    for (name, g) in test_graphs() {
        let m = random_model(&g, 1);
        let field = ExactField::new(&g, &m).unwrap();
        let probes = random_points(&g, 8, 2);
        for v in 0..g.vertex_count() {
            let reps: Vec<PointOnGraph> = g.incident(v).iter().map(|e| end_point(&g, e.edge, e.end)).collect();
            for &s in &probes {
                let first = field.cov(reps[0], s);
                for &r in &reps[1..] {
                    assert_eq!(field.cov(r, s), first, "{name} vertex {v}");
                }
            }
        }
    }
}

#[test]
fn bridge_part_is_orthogonal_to_boundary_values() {
    for (name, g) in test_graphs() {
        let m = random_model(&g, 3);
        let field = ExactField::new(&g, &m).unwrap();
        for s in random_points(&g, 10, 4) {
            let e = s.edge;
            let ends = [end_point(&g, e, End::Start), end_point(&g, e, End::Finish)];
            let c = field.covariance(&[s, ends[0], ends[1]]).unwrap().matrix;
            let gs = field.basis(e).eval(s.t);
            // Cov(u(s) - G(s)^T B u_e, B u_e) = 0
            for j in 0..2 {
                let residual = c[(0, 1 + j)] - (gs[0] * c[(1, 1 + j)] + gs[1] * c[(2, 1 + j)]);
                assert!(residual.abs() <= 1e-12, "{name}: {residual}");
            }
        }
    }
}

#[test]
fn constraint_choice_invariance() {
    for (name, g) in test_graphs() {
        let k = continuity_constraints(&g);
        if k.rows() == 0 {
            continue;
        }
        let m = random_model(&g, 5);
        let base = ExactField::new(&g, &m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        // Any invertible recombination of the rows has the same kernel.
        let r = loop {
            let r = DMatrix::from_fn(k.rows(), k.rows(), |_, _| rng.random_range(-1.0..1.0));
            if r.clone().svd(false, false).singular_values.min() > 0.2 {
                break r;
            }
        };
        let other = ConstraintMatrix::from_matrix(&g, r * k.matrix()).unwrap();
        let alt = ExactField::with_constraints(&g, &m, &other).unwrap();
        let diff = (base.vertex_cov() - alt.vertex_cov()).amax();
        assert!(diff <= 1e-12, "{name}: {diff}");
    }
}

#[test]
fn star_edge_permutation_symmetry() {
    let g = common::star3();
    let m = FieldModel::uniform(&g, 1.3, 0.8, 1.1, 1.0).unwrap();
    let field = ExactField::new(&g, &m).unwrap();
    let pts = random_points(&g, 12, 7);
    let c = field.covariance(&pts).unwrap().matrix;
    for perm in [[1, 2, 0], [2, 0, 1], [1, 0, 2], [0, 2, 1]] {
        let moved: Vec<PointOnGraph> = pts.iter().map(|p| PointOnGraph::new(perm[p.edge], p.t)).collect();
        let cp = field.covariance(&moved).unwrap().matrix;
        assert!((&c - cp).amax() <= 1e-12);
    }
}

#[test]
fn separating_vertex_makes_sides_independent() {
    // Figure-eight: the join vertex separates the two cycles.
    let g = common::figure_eight();
    let m = random_model(&g, 8);
    let field = ExactField::new(&g, &m).unwrap();
    let mut pts: Vec<PointOnGraph> = random_points(&g, 40, 9).into_iter().filter(|p| g.vertex_at(*p).is_none()).collect();
    pts.push(g.vertex_point(0));
    let join = pts.len() - 1;
    let a: Vec<usize> = (0..join).filter(|&i| pts[i].edge < 3).collect();
    let b: Vec<usize> = (0..join).filter(|&i| pts[i].edge >= 3).collect();
    let c = field.covariance(&pts).unwrap();
    assert!(markov_check(&c, &a, &b, &[join]).unwrap() <= 1e-10);

    // Tadpole: a cut across the cycle needs two vertices.
    let g = common::graph(metgraph::graph::Canonical::Tadpole { cycle: 3.0, edge: 1.0 });
    let m = random_model(&g, 10);
    let field = ExactField::new(&g, &m).unwrap();
    // Edge 0 runs 0 -> 1 on the cycle; vertices 0 and 1 separate it from the rest.
    let mut pts = vec![PointOnGraph::new(0, 0.2), PointOnGraph::new(0, 0.7)];
    pts.extend([PointOnGraph::new(1, 0.5), PointOnGraph::new(2, 0.3), PointOnGraph::new(3, 0.9)]);
    pts.extend([g.vertex_point(0), g.vertex_point(1)]);
    let c = field.covariance(&pts).unwrap();
    assert!(markov_check(&c, &[0, 1], &[2, 3, 4], &[5, 6]).unwrap() <= 1e-10);
    // One vertex alone does not separate a cycle.
    assert!(markov_check(&c, &[0, 1], &[2, 3, 4], &[5]).unwrap() > 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn full_cov_symmetric_psd(which in 0usize..6, seed in 0u64..10_000) {
        let (_, g) = test_graphs().swap_remove(which);
        let m = random_model(&g, seed);
        let pts = random_points(&g, 25, seed + 1);
        let c = ExactField::new(&g, &m).unwrap().covariance(&pts).unwrap();
        prop_assert_eq!(c.asymmetry(), 0.0);
        let r = psd_report(&c.matrix);
        prop_assert!(r.min_eigenvalue >= -1e-10 * r.trace);
    }

    #[test]
    fn star_markov_for_random_sets(seed in 0u64..10_000, kappa in 0.2f64..5.0) {
        let g = common::star3();
        let m = FieldModel::uniform(&g, kappa, 1.0, 1.0, 1.0).unwrap();
        let field = ExactField::new(&g, &m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts: Vec<PointOnGraph> = (0..4).map(|_| PointOnGraph::new(0, rng.random_range(0.01..0.99))).collect();
        pts.extend((0..4).map(|_| PointOnGraph::new(1 + rng.random_range(0..2), rng.random_range(0.01..0.99))));
        pts.push(g.vertex_point(3));
        let c = field.covariance(&pts).unwrap();
        prop_assert!(markov_check(&c, &[0, 1, 2, 3], &[4, 5, 6, 7], &[8]).unwrap() <= 1e-10);
    }
}
