//! All-pairs fsFGW distance matrices.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::FsFgwConfig;
use crate::error::{FsFgwError, Result};
use crate::features::{
    dataset_feature_scales, feature_cost_stack, feature_cost_stack_scaled, FeatureNorm,
};
use crate::object::StructuredObject;
use crate::suppression::{solve_fsfgw_with_stack, SolveResult};

/// Outcome of one `i < j` solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub i: usize,
    pub j: usize,
    pub objective: f64,
    pub lambda: f64,
    pub weights: Vec<f64>,
    pub converged: bool,
    pub outer_iters: usize,
}

#[derive(Debug, Clone)]
pub struct PairwiseResult {
    pub distances: Array2<f64>,
    /// Ordered by `(i, j)`.
    pub records: Vec<PairRecord>,
}

/// Solves one pair, honoring dataset-wide feature scales when given.
pub(crate) fn solve_with_scales(
    x: &StructuredObject,
    y: &StructuredObject,
    scales: Option<&[Option<f64>]>,
    config: &FsFgwConfig,
) -> Result<SolveResult> {
    let stack = match scales {
        Some(s) => feature_cost_stack_scaled(x, y, config.q, s)?,
        None => feature_cost_stack(x, y, config.q, config.feature_norm)?,
    };
    solve_fsfgw_with_stack(x, y, &stack, config)
}

/// Feature divisors shared by every pair of `objects` under `per_feature`
/// normalization; `None` for the other settings.
pub fn shared_scales(objects: &[StructuredObject], config: &FsFgwConfig) -> Option<Vec<Option<f64>>> {
    (config.feature_norm == FeatureNorm::PerFeature).then(|| dataset_feature_scales(objects, config.q))
}

/// Symmetric matrix of fsFGW objectives with zero diagonal. Pairs run on the
/// current rayon pool; the first failing pair (in `(i, j)` order) is reported.
pub fn pairwise_distance_matrix(
    objects: &[StructuredObject],
    config: &FsFgwConfig,
) -> Result<PairwiseResult> {
    config.validate()?;
    if let Some(first) = objects.first() {
        for o in objects {
            if o.d() != first.d() {
                return Err(FsFgwError::DimensionMismatch {
                    left: first.d(),
                    right: o.d(),
                });
            }
        }
    }
    let n = objects.len();
    let scales = shared_scales(objects, config);
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let outcomes: Vec<Result<SolveResult>> = pairs
        .par_iter()
        .map(|&(i, j)| solve_with_scales(&objects[i], &objects[j], scales.as_deref(), config))
        .collect();

    let mut distances = Array2::zeros((n, n));
    let mut records = Vec::with_capacity(pairs.len());
    for (&(i, j), outcome) in pairs.iter().zip(outcomes) {
        let res = outcome.map_err(|e| FsFgwError::PairFailed {
            i,
            j,
            source: Box::new(e),
        })?;
        distances[[i, j]] = res.objective;
        distances[[j, i]] = res.objective;
        records.push(PairRecord {
            i,
            j,
            objective: res.objective,
            lambda: res.lambda_used,
            weights: res.weights.values,
            converged: res.converged,
            outer_iters: res.outer_iters,
        });
    }
    Ok(PairwiseResult { distances, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn obj(v: f64) -> StructuredObject {
        StructuredObject::uniform(array![[0.0, 1.0], [1.0, 0.0]], array![[v, 0.0], [1.0, v]]).unwrap()
    }

    #[test]
    fn single_object() {
        let res = pairwise_distance_matrix(&[obj(0.0)], &FsFgwConfig::default()).unwrap();
        assert_eq!(res.distances, array![[0.0]]);
        assert!(res.records.is_empty());
    }

    #[test]
    fn duplicates_are_close() {
        let res = pairwise_distance_matrix(&[obj(0.3), obj(0.3)], &FsFgwConfig::default()).unwrap();
        assert!(res.distances[[0, 1]] <= 1e-8);
    }

    #[test]
    fn mismatched_dimensions() {
        let other = StructuredObject::uniform(array![[0.0]], array![[1.0]]).unwrap();
        assert!(matches!(
            pairwise_distance_matrix(&[obj(0.0), other], &FsFgwConfig::default()),
            Err(FsFgwError::DimensionMismatch { .. })
        ));
    }
}
