mod common;

use std::fs;

use fsfgw::io::*;
use fsfgw::pipelines::cluster::complete_linkage;
use fsfgw::pipelines::redistrict::compare_plans;
use fsfgw::{solve_fsfgw, FsFgwConfig, FsFgwError};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use common::*;

fn close(a: &Array2<f64>, b: &Array2<f64>, tol: f64) -> bool {
    a.dim() == b.dim() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * x.abs().max(1.0))
}

#[test]
fn object_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut obj = random_object(&mut rng, 5, 3);
    obj.feature_names = Some(vec!["a".into(), "b".into(), "c".into()]);
    let path = dir.path().join("x.json");
    write_object(&path, &obj).unwrap();
    let back = read_object(&path).unwrap();
    assert!(close(&obj.structure, &back.structure, 1e-11));
    assert!(close(&obj.features, &back.features, 1e-11));
    assert!((&obj.measure - &back.measure).iter().all(|v| v.abs() < 1e-11));
    assert_eq!(back.feature_names, obj.feature_names);
}

#[test]
fn solve_result_has_documented_keys() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let x = random_object(&mut rng, 4, 2);
    let y = random_object(&mut rng, 5, 2);
    let res = solve_fsfgw(&x, &y, &FsFgwConfig::default()).unwrap();
    let v = solve_result_json(&res);
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    for k in [
        "objective", "feature_term", "gw_term", "reg_term", "lambda", "weights", "scores", "plan",
        "outer_iters", "converged", "trace",
    ] {
        assert!(keys.contains(&k), "missing {k}");
    }
    assert_eq!(v["plan"].as_array().unwrap().len(), 4);
    assert_eq!(v["trace"][0].as_object().unwrap().len(), 2);
    assert_eq!(v["objective"].as_f64().unwrap(), round_sig(res.objective));
}

#[test]
fn precinct_graph_and_plans_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let nodes = dir.path().join("nodes.csv");
    let edges = dir.path().join("edges.csv");
    fs::write(&nodes, "precinct_id,population,income,age\nA,10,1.0,2.0\nB,20,3.0,4.0\nC,30,5.0,6.0\nD,40,7.0,8.0\n").unwrap();
    fs::write(&edges, "precinct_id_a,precinct_id_b\nA,B\nB,C\nC,D\nD,A\n").unwrap();
    let graph = read_precinct_graph(&nodes, &edges).unwrap();
    assert_eq!(graph.feature_names, vec!["income", "age"]);
    assert_eq!(graph.population.as_deref(), Some(&[10.0, 20.0, 30.0, 40.0][..]));
    assert_eq!(graph.edges.len(), 4);

    let p1 = dir.path().join("plan_one.csv");
    let p2 = dir.path().join("plan_two.csv");
    fs::write(&p1, "precinct_id,district\nA,1\nB,1\nC,2\nD,2\n").unwrap();
    fs::write(&p2, "precinct_id,district\nD,x\nA,y\nB,y\nC,x\n").unwrap();
    let one = read_plan(&p1, &graph).unwrap();
    let two = read_plan(&p2, &graph).unwrap();
    assert_eq!(one.plan_id, "one");
    assert_eq!(one.num_districts(), 2);
    let cmp = compare_plans(&graph, &one, &two, &FsFgwConfig::default()).unwrap();
    assert!(cmp.total_distance.abs() < 1e-12);
    let v = plan_comparison_json(&cmp);
    assert_eq!(v["per_district"].as_array().unwrap().len(), 2);
    assert_eq!(v["weight_matrix"][0].as_array().unwrap().len(), 2);

    let copy = dir.path().join("plan_copy.csv");
    write_plan(&copy, &graph, &one).unwrap();
    assert_eq!(read_plan(&copy, &graph).unwrap().assignment, one.assignment);
}

#[test]
fn plan_files_must_cover_the_graph() {
    let dir = tempfile::tempdir().unwrap();
    let nodes = dir.path().join("nodes.csv");
    let edges = dir.path().join("edges.csv");
    fs::write(&nodes, "precinct_id,f\nA,1\nB,2\n").unwrap();
    fs::write(&edges, "precinct_id_a,precinct_id_b\nA,B\n").unwrap();
    let graph = read_precinct_graph(&nodes, &edges).unwrap();
    assert!(graph.population.is_none());
    let plan = dir.path().join("plan_p.csv");
    for body in ["precinct_id,district\nA,1\n", "precinct_id,district\nA,1\nB,1\nZ,2\n", "precinct_id,district\nA,1\nA,2\nB,1\n"] {
        fs::write(&plan, body).unwrap();
        assert!(matches!(read_plan(&plan, &graph), Err(FsFgwError::PrecinctUniverseMismatch(_))));
    }
    fs::write(&edges, "precinct_id_a,precinct_id_b\nA,Q\n").unwrap();
    assert!(matches!(read_precinct_graph(&nodes, &edges), Err(FsFgwError::PrecinctUniverseMismatch(_))));
}

#[test]
fn distance_matrix_and_dendrogram_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let d = random_metric(&mut rng, 5);
    let ids: Vec<String> = (0..5).map(|i| format!("obj{i}")).collect();
    let path = dir.path().join("d.csv");
    write_distance_matrix(&path, &ids, &d).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("obj0,obj1,obj2,obj3,obj4\n"));
    let (ids2, d2) = read_distance_matrix(&path).unwrap();
    assert_eq!(ids2, ids);
    assert!(close(&d, &d2, 1e-11));

    let merges = complete_linkage(&d).unwrap();
    let path = dir.path().join("tree.json");
    write_json(&path, &dendrogram_json(&merges)).unwrap();
    let back = parse_dendrogram(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back.len(), 4);
    for (m, b) in merges.iter().zip(&back) {
        assert_eq!((m.a, m.b), (b.a, b.b));
        assert_eq!(round_sig(m.height), b.height);
    }
}

#[test]
fn groups_file() {
    let g = parse_groups("[[0, 2], [1], [3]]", 4).unwrap();
    assert_eq!(g.len(), 3);
    assert!(matches!(parse_groups("[[0], [0, 1]]", 2), Err(FsFgwError::InvalidPartition(_))));
    assert!(matches!(parse_groups("{\"a\": 1}", 2), Err(FsFgwError::Json(_))));
}

#[test]
fn geodesic_object_file_solves() {
    let text = r#"{"n": 4, "edges": [[0,1],[1,2],[2,3]], "structure": "geodesic", "a": [0.25, 0.25, 0.25, 0.25], "X": [[0],[1],[2],[3]], "feature_names": ["h"]}"#;
    let obj = parse_object(text).unwrap();
    let unnormalized = text.replace("0.25", "1");
    assert!(matches!(parse_object(&unnormalized), Err(FsFgwError::InvalidMeasure(_))));
    assert_eq!(obj.structure[[0, 3]], 1.0);
    assert!((obj.measure.sum() - 1.0).abs() < 1e-15);
    let res = solve_fsfgw(&obj, &obj, &FsFgwConfig::default()).unwrap();
    assert!(res.objective.abs() < 1e-12);
    let v: Value = solve_result_json(&res);
    assert_eq!(v["converged"], Value::Bool(true));
}
