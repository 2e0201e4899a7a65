use prioembed::generate::{random_graph, random_metric, random_ordering, rng, GraphShape};
use prioembed::graph::shortest_path_metric;
use prioembed::petal::petal_decomposition_traced;
use prioembed::ultrametric::{build_ultrametric_traced, grow_ultrametric_partition};
use prioembed::{
    build_ultrametric, default_priority_function, validate_priority_function, MetricSpace, PriorityFunction,
    PriorityOrdering, Scalar, WeightedGraph,
};
use rand::Rng;

fn quadratic_alpha(n: usize) -> PriorityFunction {
    validate_priority_function(|j| Scalar::from(2 * j * j), n, "2j^2").unwrap()
}

fn metric(rows: Vec<Vec<Scalar>>) -> MetricSpace {
    prioembed::metric::validate_metric(rows).unwrap()
}

fn wide_graph(n: usize, seed: u64) -> WeightedGraph {
    let mut r = rng(seed);
    let mut edges = Vec::new();
    for v in 1..n {
        let u = r.gen_range(0..v);
        let w = 2f64.powf(r.gen_range(0.0..24.0)) as i64;
        edges.push((u, v, Scalar::from_int(w.max(1))));
    }
    for u in 0..n {
        for v in (u + 1)..n {
            if r.gen_bool(0.08) {
                let w = 2f64.powf(r.gen_range(0.0..24.0)) as i64;
                edges.push((u, v, Scalar::from_int(w.max(1))));
            }
        }
    }
    WeightedGraph::new(n, &edges).unwrap()
}

#[test]
fn uniform_metric_splits_off_one_point() {
    let n = 9;
    let rows = (0..n).map(|a| (0..n).map(|b| Scalar::from(u64::from(a != b))).collect()).collect();
    let m = metric(rows);
    let p = grow_ultrametric_partition(&m, &PriorityOrdering::identity(n), &default_priority_function(n), 0, 1).unwrap();
    assert_eq!(p.x1, vec![0]);
    assert!(p.increments.is_empty());
    assert_eq!(p.x1.len() + p.x2.len(), n);
}

#[test]
fn tight_clusters_stay_together() {
    let eps = Scalar::new(1, 1000);
    let far = Scalar::from(100u64);
    let d = |a: usize, b: usize| match (a == b, a / 2 == b / 2) {
        (true, _) => Scalar::ZERO,
        (false, true) => eps.clone(),
        _ => far.clone(),
    };
    let m = metric((0..4).map(|a| (0..4).map(|b| d(a, b)).collect()).collect());
    let ord = PriorityOrdering::identity(4);
    let alpha = default_priority_function(4);
    let p = grow_ultrametric_partition(&m, &ord, &alpha, 0, 2).unwrap();
    assert_eq!(p.x1, vec![0, 1]);
    let u = build_ultrametric(&m, &ord, &alpha).unwrap();
    assert_eq!(*u.distance(0, 1), eps);
    assert_eq!(*u.distance(0, 3), far);
}

#[test]
fn ultrametric_with_quadratic_alpha() {
    for seed in 0..12u64 {
        let n = 10 + 9 * seed as usize;
        let m = random_metric(n, &GraphShape::default(), seed).unwrap();
        let ord = random_ordering(n, seed + 1);
        let alpha = quadratic_alpha(n);
        let (u, splits) = build_ultrametric_traced(&m, &ord, &alpha).unwrap();
        for s in &splits {
            assert!(s.radius < s.diameter);
        }
        for a in 0..n {
            for b in (a + 1)..n {
                let j = ord.rank(a).min(ord.rank(b));
                assert!(u.distance(a, b) >= m.d(a, b));
                assert!(*u.distance(a, b) <= &(alpha.alpha(j) * &Scalar::from(2u64)) * m.d(a, b));
            }
        }
    }
}

fn check_spanning_tree(g: &WeightedGraph, ord: &PriorityOrdering, alpha: &PriorityFunction) -> usize {
    let build = petal_decomposition_traced(g, ord, alpha).unwrap();
    let t = build.tree.validate(g).unwrap();
    let dg = shortest_path_metric(g).unwrap();
    for a in 0..g.len() {
        let dt = t.distances_from(a);
        for b in (a + 1)..g.len() {
            let j = ord.rank(a).min(ord.rank(b));
            assert!(dt[b] >= *dg.d(a, b));
            assert!(dt[b] <= &(alpha.alpha(j) * &Scalar::from(1024u64)) * dg.d(a, b));
        }
    }
    for c in &build.clusters {
        let radius = c.tree_radius.clone().expect("cluster spans a subtree");
        assert!(radius <= &c.cluster.rad * &Scalar::from(4u64));
    }
    for cv in &build.carves {
        assert!(&cv.r * &Scalar::from(8u64) <= cv.rad);
        assert!(cv.proximity_violation.is_none());
    }
    build.carves.iter().filter(|c| c.r.is_positive()).count()
}

#[test]
fn spanning_tree_with_quadratic_alpha_and_wide_weights() {
    let mut grown = 0;
    for seed in 0..10u64 {
        let n = 20 + 10 * seed as usize;
        let ord = random_ordering(n, seed + 7);
        grown += check_spanning_tree(&wide_graph(n, seed), &ord, &quadratic_alpha(n));
    }
    assert!(grown > 0, "no petal needed a positive radius");
}

#[test]
fn spanning_tree_on_tiny_graphs() {
    let g = WeightedGraph::new(2, &[(0, 1, Scalar::from(3u64))]).unwrap();
    let build = petal_decomposition_traced(&g, &PriorityOrdering::identity(2), &default_priority_function(2)).unwrap();
    assert_eq!(build.tree.edges, vec![0]);
    let g = WeightedGraph::new(1, &[]).unwrap();
    let build = petal_decomposition_traced(&g, &PriorityOrdering::identity(1), &default_priority_function(1)).unwrap();
    assert!(build.tree.edges.is_empty());
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let n = 90;
    let m = random_metric(n, &GraphShape::default(), 3).unwrap();
    let g = random_graph(n, &GraphShape::default(), 4).unwrap();
    let ord = random_ordering(n, 5);
    let alpha = default_priority_function(n);
    let run = || {
        let u = build_ultrametric(&m, &ord, &alpha).unwrap();
        let t = petal_decomposition_traced(&g, &ord, &alpha).unwrap();
        (u, t.tree, t.carves)
    };
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run);
    assert_eq!(serial, run());
}
