//! File formats: structured objects and group partitions (JSON), solve
//! results and plan comparisons (JSON), precinct graphs and plans (CSV),
//! distance matrices (CSV) and dendrograms (JSON).
//!
//! Floats are written with 12 significant digits.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{FsFgwError, Result};
use crate::object::StructuredObject;
use crate::pipelines::cluster::Merge;
use crate::pipelines::geodesic::geodesic_structure;
use crate::pipelines::redistrict::{PlanComparison, PrecinctGraph, RedistrictingPlan};
use crate::suppression::SolveResult;
use crate::weights::Groups;

pub const SIGNIFICANT_DIGITS: usize = 12;

/// `v` rounded to 12 significant digits.
pub fn round_sig(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v).parse().unwrap_or(v)
}

/// Shortest text that reads back as `round_sig(v)`.
pub fn format_float(v: f64) -> String {
    let r = round_sig(v);
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

fn num(v: f64) -> Value {
    json!(round_sig(v))
}

fn vector(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| num(x)).collect())
}

fn matrix(m: &Array2<f64>) -> Value {
    Value::Array(m.rows().into_iter().map(|r| Value::Array(r.iter().map(|&x| num(x)).collect())).collect())
}

fn with_path(path: &Path, e: std::io::Error) -> FsFgwError {
    FsFgwError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| with_path(path, e))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| with_path(path, e))?;
    Ok(csv::Reader::from_reader(file))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| with_path(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn parse_err(what: &str, e: impl std::fmt::Display) -> FsFgwError {
    FsFgwError::Parse(format!("{what}: {e}"))
}

fn rows_to_array(rows: Vec<Vec<f64>>, ncols: usize, what: &str) -> Result<Array2<f64>> {
    let nrows = rows.len();
    if let Some((k, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(FsFgwError::ShapeMismatch {
            expected: format!("{what} rows of length {ncols}"),
            got: format!("row {k} of length {}", r.len()),
        });
    }
    Array2::from_shape_vec((nrows, ncols), rows.into_iter().flatten().collect())
        .map_err(|e| parse_err(what, e))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MeasureSpec {
    Values(Vec<f64>),
    Named(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectFile {
    n: usize,
    #[serde(rename = "C")]
    c: Option<Vec<Vec<f64>>>,
    edges: Option<Vec<[usize; 2]>>,
    structure: Option<String>,
    a: MeasureSpec,
    #[serde(rename = "X")]
    x: Vec<Vec<f64>>,
    feature_names: Option<Vec<String>>,
}

/// Parses a structured object. The structure is either a full matrix `C`, or
/// an edge list with `"structure": "geodesic"` turned into normalized hop
/// distances.
pub fn parse_object(text: &str) -> Result<StructuredObject> {
    let file: ObjectFile = serde_json::from_str(text)?;
    let n = file.n;
    let structure = match (file.c, file.edges) {
        (Some(c), None) => {
            if c.len() != n {
                return Err(FsFgwError::ShapeMismatch {
                    expected: format!("{n} rows in C"),
                    got: format!("{}", c.len()),
                });
            }
            rows_to_array(c, n, "C")?
        }
        (None, Some(edges)) => {
            match file.structure.as_deref() {
                Some("geodesic") => {}
                other => {
                    return Err(FsFgwError::Parse(format!(
                        "edge lists need \"structure\": \"geodesic\", got {other:?}"
                    )))
                }
            }
            let edges: Vec<(usize, usize)> = edges.into_iter().map(|[i, j]| (i, j)).collect();
            if let Some(&(i, j)) = edges.iter().find(|(i, j)| *i >= n || *j >= n) {
                return Err(FsFgwError::InvalidStructure(format!("edge ({i},{j}) out of range for n={n}")));
            }
            let nodes: Vec<usize> = (0..n).collect();
            geodesic_structure(&edges, &nodes)?
        }
        (Some(_), Some(_)) => return Err(FsFgwError::Parse("give either C or edges, not both".into())),
        (None, None) => return Err(FsFgwError::Parse("object needs C or edges".into())),
    };
    let measure = match file.a {
        MeasureSpec::Values(a) => Array1::from(a),
        MeasureSpec::Named(s) if s == "uniform" => Array1::from_elem(n, 1.0 / n.max(1) as f64),
        MeasureSpec::Named(s) => return Err(FsFgwError::Parse(format!("unknown measure '{s}'"))),
    };
    if file.x.len() != n {
        return Err(FsFgwError::ShapeMismatch {
            expected: format!("{n} rows in X"),
            got: format!("{}", file.x.len()),
        });
    }
    let d = file.x.first().map_or(0, Vec::len);
    let features = rows_to_array(file.x, d, "X")?;
    StructuredObject::new(structure, measure, features, file.feature_names)
}

pub fn read_object(path: &Path) -> Result<StructuredObject> {
    parse_object(&read_text(path)?)
}

pub fn object_to_json(obj: &StructuredObject) -> Value {
    let mut v = json!({
        "n": obj.n(),
        "C": matrix(&obj.structure),
        "a": vector(&obj.measure.to_vec()),
        "X": matrix(&obj.features),
    });
    if let Some(names) = &obj.feature_names {
        v["feature_names"] = json!(names);
    }
    v
}

pub fn write_object(path: &Path, obj: &StructuredObject) -> Result<()> {
    write_json(path, &object_to_json(obj))
}

/// A group partition file: a JSON array of zero-based feature index blocks.
pub fn parse_groups(text: &str, d: usize) -> Result<Groups> {
    let blocks: Vec<Vec<usize>> = serde_json::from_str(text)?;
    Groups::new(blocks, d)
}

pub fn read_groups(path: &Path, d: usize) -> Result<Groups> {
    parse_groups(&read_text(path)?, d)
}

pub fn solve_result_json(res: &SolveResult) -> Value {
    json!({
        "objective": num(res.objective),
        "feature_term": num(res.feature_term),
        "gw_term": num(res.gw_term),
        "reg_term": num(res.reg_term),
        "lambda": num(res.lambda_used),
        "weights": vector(&res.weights.values),
        "scores": vector(&res.scores),
        "plan": matrix(&res.plan.coupling),
        "outer_iters": res.outer_iters,
        "converged": res.converged,
        "trace": res.trace.iter().map(|t| json!({"objective": num(t.objective), "dw": num(t.dw)})).collect::<Vec<_>>(),
    })
}

pub fn plan_comparison_json(cmp: &PlanComparison) -> Value {
    json!({
        "matching": cmp.matching.iter().map(|&(i, j)| json!([i, j])).collect::<Vec<_>>(),
        "total_distance": num(cmp.total_distance),
        "per_district": cmp.per_district.iter().map(solve_result_json).collect::<Vec<_>>(),
        "mean_weights": vector(&cmp.mean_weights),
        "weight_matrix": matrix(&cmp.weight_matrix),
    })
}

pub fn dendrogram_json(merges: &[Merge]) -> Value {
    Value::Array(
        merges
            .iter()
            .map(|m| json!({"a": m.a, "b": m.b, "height": num(m.height)}))
            .collect(),
    )
}

pub fn parse_dendrogram(text: &str) -> Result<Vec<Merge>> {
    Ok(serde_json::from_str(text)?)
}

/// Pretty JSON with a trailing newline.
pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| with_path(path, e))?;
    Ok(())
}

/// Square matrix with a header row of object ids.
pub fn write_distance_matrix(path: &Path, ids: &[String], d: &Array2<f64>) -> Result<()> {
    if d.dim() != (ids.len(), ids.len()) {
        return Err(FsFgwError::ShapeMismatch {
            expected: format!("{0}x{0}", ids.len()),
            got: format!("{:?}", d.dim()),
        });
    }
    let mut w = csv_writer(path)?;
    w.write_record(ids)?;
    for row in d.rows() {
        w.write_record(row.iter().map(|&v| format_float(v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_distance_matrix(path: &Path) -> Result<(Vec<String>, Array2<f64>)> {
    let mut r = csv_reader(path)?;
    let ids: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push(
            rec.iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| parse_err("distance", e)))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    if rows.len() != ids.len() {
        return Err(FsFgwError::InvalidMatrix(format!("{} ids but {} rows", ids.len(), rows.len())));
    }
    let m = rows_to_array(rows, ids.len(), "distance matrix")?;
    Ok((ids, m))
}

/// Writes a CSV with a header row.
pub fn write_table<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv_writer(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_number(s: &str, what: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| parse_err(what, format!("'{s}': {e}")))
}

/// Reads `nodes.csv` (precinct_id, optional population, feature columns) and
/// `edges.csv` (precinct_id_a, precinct_id_b).
pub fn read_precinct_graph(nodes: &Path, edges: &Path) -> Result<PrecinctGraph> {
    let mut r = csv_reader(nodes)?;
    let header: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if header.first().map(String::as_str) != Some("precinct_id") {
        return Err(FsFgwError::Parse("nodes.csv must start with a precinct_id column".into()));
    }
    let pop_col = header.iter().position(|h| h == "population");
    let feature_cols: Vec<usize> = (1..header.len()).filter(|&c| Some(c) != pop_col).collect();
    let feature_names: Vec<String> = feature_cols.iter().map(|&c| header[c].clone()).collect();

    let mut ids = Vec::new();
    let mut population = Vec::new();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        ids.push(rec[0].trim().to_string());
        if let Some(c) = pop_col {
            population.push(parse_number(&rec[c], "population")?);
        }
        rows.push(
            feature_cols
                .iter()
                .map(|&c| parse_number(&rec[c], &header[c]))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let features = rows_to_array(rows, feature_cols.len(), "nodes.csv")?;

    let index: std::collections::HashMap<&str, usize> =
        ids.iter().enumerate().map(|(k, id)| (id.as_str(), k)).collect();
    let mut r = csv_reader(edges)?;
    let mut edge_list = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let lookup = |s: &str| {
            index.get(s.trim()).copied().ok_or_else(|| {
                FsFgwError::PrecinctUniverseMismatch(format!("edge endpoint '{}' is not in nodes.csv", s.trim()))
            })
        };
        edge_list.push((lookup(&rec[0])?, lookup(&rec[1])?));
    }
    PrecinctGraph::new(ids, edge_list, features, pop_col.map(|_| population), feature_names)
}

/// Plan id of `plan_<id>.csv`, or the file stem otherwise.
pub fn plan_id_from_path(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    stem.strip_prefix("plan_").map(str::to_string).unwrap_or(stem)
}

/// Reads a plan file (precinct_id, district). Every precinct of `graph` must
/// appear exactly once.
pub fn read_plan(path: &Path, graph: &PrecinctGraph) -> Result<RedistrictingPlan> {
    let mut r = csv_reader(path)?;
    let mut labels: Vec<Option<String>> = vec![None; graph.len()];
    for rec in r.records() {
        let rec = rec?;
        let id = rec[0].trim();
        let k = graph.index_of(id).ok_or_else(|| {
            FsFgwError::PrecinctUniverseMismatch(format!("precinct '{id}' is not in the graph"))
        })?;
        if labels[k].replace(rec[1].trim().to_string()).is_some() {
            return Err(FsFgwError::PrecinctUniverseMismatch(format!("precinct '{id}' assigned twice")));
        }
    }
    let missing: Vec<&str> = labels
        .iter()
        .zip(&graph.ids)
        .filter(|(l, _)| l.is_none())
        .map(|(_, id)| id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(FsFgwError::PrecinctUniverseMismatch(format!("unassigned precincts: {missing:?}")));
    }
    let labels: Vec<String> = labels.into_iter().flatten().collect();
    RedistrictingPlan::from_labels(plan_id_from_path(path), &labels)
}

pub fn write_plan(path: &Path, graph: &PrecinctGraph, plan: &RedistrictingPlan) -> Result<()> {
    write_table(
        path,
        &["precinct_id", "district"],
        graph
            .ids
            .iter()
            .zip(&plan.assignment)
            .map(|(id, &d)| vec![id.clone(), plan.district_labels[d].clone()]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digit_rounding() {
        assert_eq!(format_float(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_float(2.0), "2");
        assert_eq!(format_float(-0.0), "0");
        assert_eq!(format_float(123456789.123457), "123456789.123");
        assert_eq!(round_sig(round_sig(0.1 + 0.2)), round_sig(0.1 + 0.2));
    }

    #[test]
    fn object_with_edges_and_uniform_measure() {
        let text = r#"{"n": 3, "edges": [[0,1],[1,2]], "structure": "geodesic", "a": "uniform", "X": [[0.0],[1.0],[2.0]]}"#;
        let obj = parse_object(text).unwrap();
        assert_eq!(obj.structure[[0, 2]], 1.0);
        assert_eq!(obj.structure[[0, 1]], 0.5);
        assert!((obj.measure[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn object_rejects_both_structures() {
        let text = r#"{"n": 1, "C": [[0.0]], "edges": [], "structure": "geodesic", "a": "uniform", "X": [[0.0]]}"#;
        assert!(matches!(parse_object(text), Err(FsFgwError::Parse(_))));
    }

    #[test]
    fn object_rejects_ragged_features() {
        let text = r#"{"n": 2, "C": [[0,1],[1,0]], "a": [0.5, 0.5], "X": [[0.0, 1.0],[1.0]]}"#;
        assert!(matches!(parse_object(text), Err(FsFgwError::ShapeMismatch { .. })));
    }

    #[test]
    fn disconnected_edges_are_rejected() {
        let text = r#"{"n": 3, "edges": [[0,1]], "structure": "geodesic", "a": "uniform", "X": [[0.0],[1.0],[2.0]]}"#;
        assert!(matches!(parse_object(text), Err(FsFgwError::DisconnectedDistrict { .. })));
    }

    #[test]
    fn plan_ids_from_file_names() {
        assert_eq!(plan_id_from_path(Path::new("dir/plan_2016.csv")), "2016");
        assert_eq!(plan_id_from_path(Path::new("enacted.csv")), "enacted");
    }
}
