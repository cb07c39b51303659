#![allow(dead_code)]

use fsfgw::StructuredObject;
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Min-cost flow by successive shortest paths (Bellman-Ford) on integer
/// supplies. Returns the optimal cost divided by the total supply.
pub fn ssp_transport_value(cost: &Array2<f64>, supply: &[u64], demand: &[u64]) -> f64 {
    let (n, m) = cost.dim();
    let total: u64 = supply.iter().sum();
    assert_eq!(total, demand.iter().sum::<u64>());
    let s = n + m;
    let t = s + 1;
    let nodes = t + 1;
    // edges: (to, cap, cost, rev)
    let mut graph: Vec<Vec<(usize, u64, f64, usize)>> = vec![Vec::new(); nodes];
    let add = |g: &mut Vec<Vec<(usize, u64, f64, usize)>>, u: usize, v: usize, cap: u64, c: f64| {
        let ru = g[v].len();
        let rv = g[u].len();
        g[u].push((v, cap, c, ru));
        g[v].push((u, 0, -c, rv));
    };
    for i in 0..n {
        add(&mut graph, s, i, supply[i], 0.0);
        for j in 0..m {
            add(&mut graph, i, n + j, total, cost[[i, j]]);
        }
    }
    for (j, &dj) in demand.iter().enumerate() {
        add(&mut graph, n + j, t, dj, 0.0);
    }
    let mut flow = 0;
    let mut value = 0.0;
    while flow < total {
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; nodes];
        dist[s] = 0.0;
        for _ in 0..nodes {
            let mut changed = false;
            for u in 0..nodes {
                if dist[u].is_infinite() {
                    continue;
                }
                for (k, &(v, cap, c, _)) in graph[u].iter().enumerate() {
                    if cap > 0 && dist[u] + c < dist[v] - 1e-15 {
                        dist[v] = dist[u] + c;
                        prev[v] = Some((u, k));
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        assert!(dist[t].is_finite(), "oracle found no augmenting path");
        let mut push = total - flow;
        let mut v = t;
        while let Some((u, k)) = prev[v] {
            push = push.min(graph[u][k].1);
            v = u;
        }
        let mut v = t;
        while let Some((u, k)) = prev[v] {
            let rev = graph[u][k].3;
            graph[u][k].1 -= push;
            graph[v][rev].1 += push;
            value += push as f64 * graph[u][k].2;
            v = u;
        }
        flow += push;
    }
    value / total as f64
}

/// Random positive integers summing to `total`.
pub fn random_composition(rng: &mut ChaCha8Rng, parts: usize, total: u64) -> Vec<u64> {
    let mut out = vec![1u64; parts];
    for _ in 0..(total - parts as u64) {
        out[rng.random_range(0..parts)] += 1;
    }
    out
}

/// North-west corner vertex of U(a, b) after shuffling rows and columns.
pub fn random_vertex(rng: &mut ChaCha8Rng, a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let (n, m) = (a.len(), b.len());
    let mut rows: Vec<usize> = (0..n).collect();
    let mut cols: Vec<usize> = (0..m).collect();
    rows.shuffle(rng);
    cols.shuffle(rng);
    let mut ra: Vec<f64> = rows.iter().map(|&i| a[i]).collect();
    let mut rb: Vec<f64> = cols.iter().map(|&j| b[j]).collect();
    let mut t = Array2::zeros((n, m));
    let (mut x, mut y) = (0, 0);
    while x < n && y < m {
        let f = ra[x].min(rb[y]);
        t[[rows[x], cols[y]]] += f;
        ra[x] -= f;
        rb[y] -= f;
        if ra[x] <= rb[y] && x + 1 < n {
            x += 1;
        } else {
            y += 1;
        }
    }
    t
}

/// Random convex combination of three shuffled north-west corner vertices.
pub fn random_feasible_plan(rng: &mut ChaCha8Rng, a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let w: Vec<f64> = (0..3).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = w.iter().sum();
    let mut t = Array2::zeros((a.len(), b.len()));
    for wk in w {
        t.scaled_add(wk / total, &random_vertex(rng, a, b));
    }
    t
}

/// Euclidean distance matrix of random points in the unit square.
pub fn random_metric(rng: &mut ChaCha8Rng, n: usize) -> Array2<f64> {
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
    Array2::from_shape_fn((n, n), |(i, j)| {
        ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt()
    })
}

pub fn random_probability(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    let v: Array1<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let s = v.sum();
    v / s
}

pub fn random_object(rng: &mut ChaCha8Rng, n: usize, d: usize) -> StructuredObject {
    let c = random_metric(rng, n);
    let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
    let a = random_probability(rng, n);
    StructuredObject::new(c, a, x, None).unwrap()
}

/// 5 x 6 grid of precincts (row-major ids `p00`..`p29`) with random features
/// and populations; plan `base` puts each grid row in its own district and
/// plan `moved` shifts precinct (1,0) from district 2 into district 1.
pub fn grid_fixture(
    rng: &mut ChaCha8Rng,
    d: usize,
) -> (
    fsfgw::pipelines::redistrict::PrecinctGraph,
    fsfgw::pipelines::redistrict::RedistrictingPlan,
    fsfgw::pipelines::redistrict::RedistrictingPlan,
) {
    use fsfgw::pipelines::redistrict::{PrecinctGraph, RedistrictingPlan};
    let (rows, cols) = (5, 6);
    let id = |r: usize, c: usize| r * cols + c;
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push((id(r, c), id(r, c + 1)));
            }
            if r + 1 < rows {
                edges.push((id(r, c), id(r + 1, c)));
            }
        }
    }
    let p = rows * cols;
    let ids: Vec<String> = (0..p).map(|k| format!("p{k:02}")).collect();
    let features = Array2::from_shape_fn((p, d), |_| rng.random_range(0.0..1.0));
    let population: Vec<f64> = (0..p).map(|_| rng.random_range(100.0..1000.0)).collect();
    let names = (0..d).map(|r| format!("f{r}")).collect();
    let graph = PrecinctGraph::new(ids, edges, features, Some(population), names).unwrap();
    let base_labels: Vec<String> = (0..p).map(|k| format!("{}", k / cols + 1)).collect();
    let mut moved_labels = base_labels.clone();
    moved_labels[id(1, 0)] = "1".into();
    let base = RedistrictingPlan::from_labels("base".into(), &base_labels).unwrap();
    let moved = RedistrictingPlan::from_labels("moved".into(), &moved_labels).unwrap();
    (graph, base, moved)
}
