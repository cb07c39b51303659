mod common;

use std::collections::BTreeSet;

use fsfgw::features::{feature_cost_stack, feature_scores, FeatureNorm};
use fsfgw::pipelines::cluster::{complete_linkage, Merge};
use fsfgw::pipelines::geodesic::geodesic_structure;
use fsfgw::pipelines::pairwise::pairwise_distance_matrix;
use fsfgw::pipelines::redistrict::{compare_plans, plan_distance_matrix, PrecinctGraph, RedistrictingPlan};
use fsfgw::pipelines::synthetic::{generate_synthetic_pair, SyntheticSpec};
use fsfgw::{solve_classical_fgw, solve_fsfgw, FsFgwConfig, FsFgwError};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

/// Step-by-step complete linkage over explicit leaf sets.
fn naive_complete_linkage(d: &Array2<f64>) -> Vec<Merge> {
    let n = d.nrows();
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut merges = Vec::new();
    while clusters.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for p in 0..clusters.len() {
            for q in p + 1..clusters.len() {
                let mut h: f64 = 0.0;
                for &i in &clusters[p].1 {
                    for &j in &clusters[q].1 {
                        h = h.max(d[[i, j]]);
                    }
                }
                let (a, b) = (clusters[p].0.min(clusters[q].0), clusters[p].0.max(clusters[q].0));
                let better = match best {
                    None => true,
                    Some((bh, ba, bb)) => {
                        let (ia, ib) = (clusters[ba].0.min(clusters[bb].0), clusters[ba].0.max(clusters[bb].0));
                        h < bh || (h == bh && (a, b) < (ia, ib))
                    }
                };
                if better {
                    best = Some((h, p, q));
                }
            }
        }
        let (h, p, q) = best.unwrap();
        let (ida, idb) = (clusters[p].0, clusters[q].0);
        let mut leaves = clusters[p].1.clone();
        leaves.extend(&clusters[q].1);
        let new_id = n + merges.len();
        merges.push(Merge {
            a: ida.min(idb),
            b: ida.max(idb),
            height: h,
        });
        clusters.remove(q);
        clusters.remove(p);
        clusters.push((new_id, leaves));
    }
    merges
}

#[test]
fn complete_linkage_matches_naive_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let d = random_metric(&mut rng, 6);
        assert_eq!(complete_linkage(&d).unwrap(), naive_complete_linkage(&d));
    }
    // Integer distances force ties.
    for _ in 0..50 {
        let n = rng.random_range(2..8);
        let mut d = Array2::zeros((n, n));
        for i in 0..n {
            for j in i + 1..n {
                let v = rng.random_range(1..4) as f64;
                d[[i, j]] = v;
                d[[j, i]] = v;
            }
        }
        assert_eq!(complete_linkage(&d).unwrap(), naive_complete_linkage(&d));
    }
}

#[test]
fn geodesics_satisfy_the_triangle_inequality() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut checked = 0;
    while checked < 30 {
        let n = rng.random_range(3..15);
        let mut edges = Vec::new();
        for i in 1..n {
            edges.push((rng.random_range(0..i), i));
        }
        for _ in 0..n {
            let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
            if i != j {
                edges.push((i, j));
            }
        }
        let c = geodesic_structure(&edges, &(0..n).collect::<Vec<_>>()).unwrap();
        for i in 0..n {
            assert_eq!(c[[i, i]], 0.0);
            for j in 0..n {
                assert_eq!(c[[i, j]], c[[j, i]]);
                if i != j {
                    assert!(c[[i, j]] > 0.0);
                }
                for k in 0..n {
                    assert!(c[[i, j]] <= c[[i, k]] + c[[k, j]] + 1e-12);
                }
            }
        }
        assert!((c.iter().cloned().fold(0.0, f64::max) - 1.0).abs() < 1e-15);
        checked += 1;
    }
}

#[test]
fn pairwise_matrix_is_symmetric_and_matches_swapped_solves() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let objects: Vec<_> = (0..3).map(|_| {
        let n = rng.random_range(4..9);
        random_object(&mut rng, n, 3)
    }).collect();
    let cfg = FsFgwConfig::default();
    let res = pairwise_distance_matrix(&objects, &cfg).unwrap();
    let d = &res.distances;
    assert_eq!(d.dim(), (3, 3));
    for i in 0..3 {
        assert_eq!(d[[i, i]], 0.0);
        for j in 0..3 {
            assert_eq!(d[[i, j]], d[[j, i]]);
            assert!(d[[i, j]] >= 0.0);
        }
    }
    for (i, j) in [(0, 1), (1, 2)] {
        let swapped = solve_fsfgw(&objects[j], &objects[i], &cfg).unwrap();
        assert!((swapped.objective - d[[i, j]]).abs() <= 1e-8, "{} vs {}", swapped.objective, d[[i, j]]);
    }
    let pairs: Vec<_> = res.records.iter().map(|r| (r.i, r.j)).collect();
    assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 2)]);
}

#[test]
fn pairwise_of_nothing_is_empty() {
    let res = pairwise_distance_matrix(&[], &FsFgwConfig::default()).unwrap();
    assert_eq!(res.distances.dim(), (0, 0));
    assert!(res.records.is_empty());
}

#[test]
fn classical_scores_concentrate_on_differentiating_features() {
    let mut ratios = Vec::new();
    for seed in 0..10 {
        let spec = SyntheticSpec {
            seed,
            ..Default::default()
        };
        let pair = generate_synthetic_pair(&spec).unwrap();
        assert_eq!(pair.differentiating, vec![0, 1, 2]);
        let cfg = FsFgwConfig {
            feature_norm: FeatureNorm::PerFeature,
            ..Default::default()
        };
        let t0 = solve_classical_fgw(&pair.x, &pair.y, &cfg).unwrap();
        let stack = feature_cost_stack(&pair.x, &pair.y, cfg.q, cfg.feature_norm).unwrap();
        let s = feature_scores(t0.plan.view(), &stack).unwrap();
        let diff = s[..3].iter().sum::<f64>() / 3.0;
        let shared = s[3..].iter().sum::<f64>() / 7.0;
        ratios.push(diff / shared);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!(mean >= 2.0, "score ratios {ratios:?}");
}

/// 6 x 9 grid split into three column bands. Feature 2 is high on column 3,
/// which `moved` hands from the middle band to the left band; the other
/// features are low-amplitude noise.
fn planted_fixture() -> (PrecinctGraph, RedistrictingPlan, RedistrictingPlan) {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let (rows, cols, d) = (6, 9, 4);
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
    let features = Array2::from_shape_fn((p, d), |(k, f)| {
        if f == 2 {
            if k % cols == 3 { 1.0 } else { 0.05 }
        } else {
            rng.random_range(0.0..0.1)
        }
    });
    let names = (0..d).map(|f| format!("f{f}")).collect();
    let ids = (0..p).map(|k| format!("q{k}")).collect();
    let graph = PrecinctGraph::new(ids, edges, features, None, names).unwrap();
    let band = |c: usize| c / 3;
    let base: Vec<String> = (0..p).map(|k| band(k % cols).to_string()).collect();
    let moved: Vec<String> = (0..p)
        .map(|k| if k % cols == 3 { "0".to_string() } else { band(k % cols).to_string() })
        .collect();
    (
        graph,
        RedistrictingPlan::from_labels("base".into(), &base).unwrap(),
        RedistrictingPlan::from_labels("moved".into(), &moved).unwrap(),
    )
}

#[test]
fn planted_feature_gets_the_largest_mean_weight() {
    let (graph, base, moved) = planted_fixture();
    let cfg = FsFgwConfig {
        feature_norm: FeatureNorm::None,
        ..Default::default()
    };
    let cmp = compare_plans(&graph, &base, &moved, &cfg).unwrap();
    assert_eq!(cmp.matching, vec![(0, 0), (1, 1), (2, 2)]);
    let top = (0..4).max_by(|&a, &b| cmp.mean_weights[a].total_cmp(&cmp.mean_weights[b])).unwrap();
    assert_eq!(top, 2, "mean weights {:?}", cmp.mean_weights);
    assert!(cmp.per_district[2].objective.abs() < 1e-12);
    assert_eq!(cmp.weight_matrix.dim(), (3, 4));
}

#[test]
fn plan_distances_are_relabeling_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let (graph, base, moved) = grid_fixture(&mut rng, 3);
    let relabeled_labels: Vec<String> = moved
        .assignment
        .iter()
        .map(|&d| format!("z{}", 4 - d))
        .collect();
    let relabeled = RedistrictingPlan::from_labels("relabeled".into(), &relabeled_labels).unwrap();
    let cfg = FsFgwConfig::default();
    let a = compare_plans(&graph, &base, &moved, &cfg).unwrap();
    let b = compare_plans(&graph, &base, &relabeled, &cfg).unwrap();
    assert!((a.total_distance - b.total_distance).abs() <= 1e-12);

    let m = plan_distance_matrix(&graph, &[base.clone(), moved, base], &cfg).unwrap();
    assert!(m[[0, 2]].abs() <= 1e-12);
    assert!(m[[0, 1]] > 0.0);
    assert_eq!(m[[0, 1]], m[[1, 0]]);
    assert!((m[[0, 1]] - a.total_distance).abs() <= 1e-12);
}

#[test]
fn disconnected_district_is_reported_with_its_precincts() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let (graph, base, _) = grid_fixture(&mut rng, 2);
    let mut labels: Vec<String> = base.assignment.iter().map(|d| d.to_string()).collect();
    // Precinct (4,5) joins the top row's district, far from its members.
    labels[29] = labels[0].clone();
    let broken = RedistrictingPlan::from_labels("broken".into(), &labels).unwrap();
    let err = compare_plans(&graph, &base, &broken, &FsFgwConfig::default()).unwrap_err();
    match err {
        FsFgwError::DisconnectedDistrict { components, .. } => {
            let flat: BTreeSet<String> = components.into_iter().flatten().collect();
            assert!(flat.contains("p29"));
            assert!(flat.contains("p00"));
        }
        other => panic!("unexpected error {other}"),
    }
}
