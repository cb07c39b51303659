//! Plan-to-plan comparison on a precinct adjacency graph: districts become
//! structured objects, districts are matched by Hamming assignment and the
//! matched pairs are solved independently.

use std::collections::{BTreeSet, HashMap};

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use super::assignment::linear_sum_assignment;
use super::geodesic::geodesic_structure;
use super::pairwise::{shared_scales, solve_with_scales};
use crate::config::FsFgwConfig;
use crate::error::{FsFgwError, Result};
use crate::object::StructuredObject;
use crate::suppression::SolveResult;

#[derive(Debug, Clone)]
pub struct PrecinctGraph {
    pub ids: Vec<String>,
    /// Undirected edges over precinct indices, each stored once with `a < b`.
    pub edges: Vec<(usize, usize)>,
    pub features: Array2<f64>,
    pub population: Option<Vec<f64>>,
    pub feature_names: Vec<String>,
    index: HashMap<String, usize>,
}

impl PrecinctGraph {
    pub fn new(
        ids: Vec<String>,
        edges: Vec<(usize, usize)>,
        features: Array2<f64>,
        population: Option<Vec<f64>>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let p = ids.len();
        let mut index = HashMap::with_capacity(p);
        for (k, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), k).is_some() {
                return Err(FsFgwError::InvalidStructure(format!("duplicate precinct id '{id}'")));
            }
        }
        if features.nrows() != p || feature_names.len() != features.ncols() {
            return Err(FsFgwError::ShapeMismatch {
                expected: format!("{p} feature rows with one name per column"),
                got: format!("{:?} with {} names", features.dim(), feature_names.len()),
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(FsFgwError::InvalidStructure("precinct features must be finite".into()));
        }
        if let Some(pop) = &population {
            if pop.len() != p || pop.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(FsFgwError::InvalidMeasure(
                    "population must be one nonnegative value per precinct".into(),
                ));
            }
        }
        let mut unique = BTreeSet::new();
        for &(a, b) in &edges {
            if a >= p || b >= p {
                return Err(FsFgwError::InvalidStructure(format!("edge ({a},{b}) out of range")));
            }
            if a == b {
                return Err(FsFgwError::InvalidStructure(format!("self-loop at precinct '{}'", ids[a])));
            }
            unique.insert((a.min(b), a.max(b)));
        }
        Ok(PrecinctGraph {
            ids,
            edges: unique.into_iter().collect(),
            features,
            population,
            feature_names,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RedistrictingPlan {
    pub plan_id: String,
    /// District index of every precinct.
    pub assignment: Vec<usize>,
    pub district_labels: Vec<String>,
}

impl RedistrictingPlan {
    pub fn new(plan_id: String, assignment: Vec<usize>, district_labels: Vec<String>) -> Result<Self> {
        let mut used = vec![false; district_labels.len()];
        for (k, &dist) in assignment.iter().enumerate() {
            match used.get_mut(dist) {
                Some(u) => *u = true,
                None => {
                    return Err(FsFgwError::InvalidStructure(format!(
                        "plan '{plan_id}': precinct {k} assigned to unknown district {dist}"
                    )))
                }
            }
        }
        if let Some(empty) = used.iter().position(|u| !u) {
            return Err(FsFgwError::InvalidStructure(format!(
                "plan '{plan_id}': district '{}' is empty",
                district_labels[empty]
            )));
        }
        Ok(RedistrictingPlan {
            plan_id,
            assignment,
            district_labels,
        })
    }

    /// Builds a plan from one district label per precinct. Labels are
    /// ordered numerically when they are all integers, else lexicographically.
    pub fn from_labels(plan_id: String, labels: &[String]) -> Result<Self> {
        let mut distinct: Vec<String> = labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        if distinct.iter().all(|l| l.parse::<i64>().is_ok()) {
            distinct.sort_by_key(|l| l.parse::<i64>().unwrap_or(0));
        }
        let lookup: HashMap<&str, usize> =
            distinct.iter().enumerate().map(|(k, l)| (l.as_str(), k)).collect();
        let assignment = labels.iter().map(|l| lookup[l.as_str()]).collect();
        RedistrictingPlan::new(plan_id, assignment, distinct)
    }

    pub fn num_districts(&self) -> usize {
        self.district_labels.len()
    }

    pub fn members(&self, district: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&k| self.assignment[k] == district)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistrictMatching {
    /// `(district in P, district in Q)`, ordered by the P index.
    pub pairs: Vec<(usize, usize)>,
    pub cost: f64,
    pub hamming: Array2<f64>,
}

fn check_compatible(p: &RedistrictingPlan, q: &RedistrictingPlan) -> Result<()> {
    if p.assignment.len() != q.assignment.len() {
        return Err(FsFgwError::PrecinctUniverseMismatch(format!(
            "plan '{}' covers {} precincts, plan '{}' covers {}",
            p.plan_id,
            p.assignment.len(),
            q.plan_id,
            q.assignment.len()
        )));
    }
    if p.num_districts() != q.num_districts() {
        return Err(FsFgwError::DistrictCountMismatch {
            left: p.num_districts(),
            right: q.num_districts(),
        });
    }
    Ok(())
}

/// `H[i][j]` = number of precincts in exactly one of district `i` of `p`
/// and district `j` of `q`.
pub fn hamming_matrix(p: &RedistrictingPlan, q: &RedistrictingPlan) -> Result<Array2<f64>> {
    check_compatible(p, q)?;
    let d = p.num_districts();
    let mut overlap = Array2::<f64>::zeros((d, d));
    let mut size_p = vec![0.0; d];
    let mut size_q = vec![0.0; d];
    for (&a, &b) in p.assignment.iter().zip(&q.assignment) {
        overlap[[a, b]] += 1.0;
        size_p[a] += 1.0;
        size_q[b] += 1.0;
    }
    Ok(Array2::from_shape_fn((d, d), |(i, j)| size_p[i] + size_q[j] - 2.0 * overlap[[i, j]]))
}

pub fn match_districts(p: &RedistrictingPlan, q: &RedistrictingPlan) -> Result<DistrictMatching> {
    let hamming = hamming_matrix(p, q)?;
    let (assignment, cost) = linear_sum_assignment(&hamming)?;
    Ok(DistrictMatching {
        pairs: assignment.into_iter().enumerate().collect(),
        cost,
        hamming,
    })
}

/// District `district` of `plan` as a structured object: geodesic structure
/// on its induced subgraph, population-weighted measure (uniform when the
/// district has no population data) and its precinct features.
pub fn district_object(
    graph: &PrecinctGraph,
    plan: &RedistrictingPlan,
    district: usize,
) -> Result<StructuredObject> {
    if plan.assignment.len() != graph.len() {
        return Err(FsFgwError::PrecinctUniverseMismatch(format!(
            "plan '{}' covers {} precincts, graph has {}",
            plan.plan_id,
            plan.assignment.len(),
            graph.len()
        )));
    }
    let members = plan.members(district);
    let structure = geodesic_structure(&graph.edges, &members).map_err(|e| match e {
        FsFgwError::DisconnectedDistrict { components, .. } => FsFgwError::DisconnectedDistrict {
            district: format!("{}/{}", plan.plan_id, plan.district_labels[district]),
            components: components
                .into_iter()
                .map(|c| {
                    c.into_iter()
                        .map(|k| graph.ids[k.parse::<usize>().unwrap_or(0)].clone())
                        .collect()
                })
                .collect(),
        },
        other => other,
    })?;
    let k = members.len();
    let mut measure = Array1::from_elem(k, 1.0 / k as f64);
    if let Some(pop) = &graph.population {
        let weights: Array1<f64> = members.iter().map(|&v| pop[v]).collect();
        let total = weights.sum();
        if total > 0.0 {
            measure = weights / total;
        }
    }
    let features = graph.features.select(ndarray::Axis(0), &members);
    StructuredObject::new(structure, measure, features, Some(graph.feature_names.clone()))
}

fn district_objects(graph: &PrecinctGraph, plan: &RedistrictingPlan) -> Result<Vec<StructuredObject>> {
    (0..plan.num_districts())
        .map(|dist| district_object(graph, plan, dist))
        .collect()
}

#[derive(Debug, Clone)]
pub struct PlanComparison {
    pub matching: Vec<(usize, usize)>,
    /// One solve per matched pair, in matching order.
    pub per_district: Vec<SolveResult>,
    pub total_distance: f64,
    pub mean_weights: Vec<f64>,
    /// `D x d`, row `k` holds the weights of matched pair `k`.
    pub weight_matrix: Array2<f64>,
}

fn compare_objects(
    p_objects: &[StructuredObject],
    q_objects: &[StructuredObject],
    matching: Vec<(usize, usize)>,
    scales: Option<&[Option<f64>]>,
    config: &FsFgwConfig,
) -> Result<PlanComparison> {
    let per_district = matching
        .par_iter()
        .map(|&(i, j)| solve_with_scales(&p_objects[i], &q_objects[j], scales, config))
        .collect::<Result<Vec<_>>>()?;
    let d = p_objects.first().map_or(0, |o| o.d());
    let mut weight_matrix = Array2::zeros((per_district.len(), d));
    for (k, res) in per_district.iter().enumerate() {
        for (r, &w) in res.weights.values.iter().enumerate() {
            weight_matrix[[k, r]] = w;
        }
    }
    let mean_weights = if per_district.is_empty() {
        vec![0.0; d]
    } else {
        weight_matrix.mean_axis(ndarray::Axis(0)).map(|m| m.to_vec()).unwrap_or_default()
    };
    let total_distance = per_district.iter().map(|r| r.objective).sum();
    Ok(PlanComparison {
        matching,
        per_district,
        total_distance,
        mean_weights,
        weight_matrix,
    })
}

/// Matches the districts of `p` and `q` and solves every matched pair.
pub fn compare_plans(
    graph: &PrecinctGraph,
    p: &RedistrictingPlan,
    q: &RedistrictingPlan,
    config: &FsFgwConfig,
) -> Result<PlanComparison> {
    config.validate()?;
    let matching = match_districts(p, q)?;
    let p_objects = district_objects(graph, p)?;
    let q_objects = district_objects(graph, q)?;
    let all: Vec<StructuredObject> = p_objects.iter().chain(&q_objects).cloned().collect();
    let scales = shared_scales(&all, config);
    compare_objects(&p_objects, &q_objects, matching.pairs, scales.as_deref(), config)
}

/// Symmetric matrix of total plan distances. Under `per_feature`
/// normalization the feature scales are shared by all districts of all plans.
pub fn plan_distance_matrix(
    graph: &PrecinctGraph,
    plans: &[RedistrictingPlan],
    config: &FsFgwConfig,
) -> Result<Array2<f64>> {
    config.validate()?;
    let objects = plans
        .iter()
        .map(|p| district_objects(graph, p))
        .collect::<Result<Vec<_>>>()?;
    let flat: Vec<StructuredObject> = objects.iter().flatten().cloned().collect();
    let scales = shared_scales(&flat, config);
    let n = plans.len();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let matching = match_districts(&plans[i], &plans[j])?;
            let cmp = compare_objects(&objects[i], &objects[j], matching.pairs, scales.as_deref(), config)
                .map_err(|e| FsFgwError::PairFailed {
                    i,
                    j,
                    source: Box::new(e),
                })?;
            out[[i, j]] = cmp.total_distance;
            out[[j, i]] = cmp.total_distance;
        }
    }
    Ok(out)
}
