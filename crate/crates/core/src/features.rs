//! Per-feature transport costs `M_r[i][j] = |x_ir - y_jr|^q` and feature scores.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{FsFgwError, Result};
use crate::object::{validate_pair, StructuredObject};

/// How each feature cost matrix is rescaled before solving.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureNorm {
    None,
    /// Rescale each `M_r` to max 1. Across a dataset the scale of feature `r`
    /// is shared by every pair (see [`dataset_feature_scales`]).
    PerFeature,
    /// Rescale each `M_r` of each pair to max 1 independently.
    PerPair,
}

impl FromStr for FeatureNorm {
    type Err = FsFgwError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(FeatureNorm::None),
            "per_feature" => Ok(FeatureNorm::PerFeature),
            "per_pair" => Ok(FeatureNorm::PerPair),
            other => Err(FsFgwError::InvalidConfig(format!(
                "unknown feature normalization '{other}'"
            ))),
        }
    }
}

impl fmt::Display for FeatureNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureNorm::None => "none",
            FeatureNorm::PerFeature => "per_feature",
            FeatureNorm::PerPair => "per_pair",
        })
    }
}

/// The `d` feature cost matrices of one pair, each `n x m`.
pub type FeatureStack = Vec<Array2<f64>>;

#[inline]
pub(crate) fn pow_q(v: f64, q: f64) -> f64 {
    if q == 2.0 {
        v * v
    } else if q == 1.0 {
        v
    } else {
        v.powf(q)
    }
}

/// Builds the feature cost stack for a pair. Both `per_feature` and
/// `per_pair` rescale every nonzero matrix to max entry 1 when the pair is
/// considered on its own; all-zero matrices are left as zeros.
pub fn feature_cost_stack(
    x: &StructuredObject,
    y: &StructuredObject,
    q: f64,
    norm: FeatureNorm,
) -> Result<FeatureStack> {
    let ctx = validate_pair(x, y)?;
    let scales = match norm {
        FeatureNorm::None => None,
        FeatureNorm::PerFeature | FeatureNorm::PerPair => Some(vec![None; ctx.d]),
    };
    Ok(raw_stack(x, y, q, scales.as_deref()))
}

/// Stack with explicit per-feature divisors. `Some(None)` for a feature means
/// "rescale by this pair's own max"; `Some(Some(s))` divides by `s`.
pub fn feature_cost_stack_scaled(
    x: &StructuredObject,
    y: &StructuredObject,
    q: f64,
    scales: &[Option<f64>],
) -> Result<FeatureStack> {
    let ctx = validate_pair(x, y)?;
    if scales.len() != ctx.d {
        return Err(FsFgwError::ShapeMismatch {
            expected: format!("{} feature scales", ctx.d),
            got: format!("{}", scales.len()),
        });
    }
    Ok(raw_stack(x, y, q, Some(scales)))
}

fn raw_stack(
    x: &StructuredObject,
    y: &StructuredObject,
    q: f64,
    scales: Option<&[Option<f64>]>,
) -> FeatureStack {
    let (n, m, d) = (x.n(), y.n(), x.d());
    (0..d)
        .map(|r| {
            let xr = x.features.column(r);
            let yr = y.features.column(r);
            let mut mr = Array2::from_shape_fn((n, m), |(i, j)| pow_q((xr[i] - yr[j]).abs(), q));
            if let Some(scales) = scales {
                let divisor = match scales[r] {
                    Some(s) => s,
                    None => mr.iter().cloned().fold(0.0, f64::max),
                };
                if divisor > 0.0 {
                    mr.mapv_inplace(|v| v / divisor);
                }
            }
            mr
        })
        .collect()
}

/// Dataset-wide divisor for each feature: the largest `|x_ir - y_jr|^q` over
/// all nodes of all distinct object pairs. Features that are constant across
/// the dataset get `None` and are left unscaled.
pub fn dataset_feature_scales(objects: &[StructuredObject], q: f64) -> Vec<Option<f64>> {
    let d = objects.first().map(|o| o.d()).unwrap_or(0);
    (0..d)
        .map(|r| {
            let ranges: Vec<(f64, f64)> = objects
                .iter()
                .map(|o| {
                    let col = o.features.column(r);
                    let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    (lo, hi)
                })
                .collect();
            let mut best: f64 = 0.0;
            for (i, &(lo_i, hi_i)) in ranges.iter().enumerate() {
                for (j, &(lo_j, hi_j)) in ranges.iter().enumerate() {
                    if i != j {
                        best = best.max((hi_i - lo_j).abs()).max((hi_j - lo_i).abs());
                    }
                }
            }
            let s = pow_q(best, q);
            (s > 0.0).then_some(s)
        })
        .collect()
}

/// `s_r = sum_ij T_ij M_r[i][j]` for every feature.
pub fn feature_scores(plan: ArrayView2<'_, f64>, stack: &[Array2<f64>]) -> Result<Vec<f64>> {
    stack
        .iter()
        .map(|mr| {
            if mr.dim() != plan.dim() {
                return Err(FsFgwError::ShapeMismatch {
                    expected: format!("{:?}", plan.dim()),
                    got: format!("{:?}", mr.dim()),
                });
            }
            Ok(frobenius(plan, mr.view()))
        })
        .collect()
}

/// Entrywise inner product `<A, B>`.
pub fn frobenius(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    let mut acc = 0.0;
    Zip::from(a).and(b).for_each(|u, v| acc += u * v);
    acc
}

/// `sum_r coeff_r M_r`.
pub fn weighted_cost(stack: &[Array2<f64>], coeffs: &[f64], shape: (usize, usize)) -> Array2<f64> {
    let mut out = Array2::zeros(shape);
    for (mr, &c) in stack.iter().zip(coeffs) {
        if c != 0.0 {
            out.scaled_add(c, mr);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn object(features: Array2<f64>) -> StructuredObject {
        let n = features.nrows();
        let c = Array2::from_shape_fn((n, n), |(i, j)| if i == j { 0.0 } else { 1.0 });
        StructuredObject::uniform(c, features).unwrap()
    }

    #[test]
    fn single_feature_costs_by_direct_evaluation() {
        let x = object(array![[0.0], [1.0]]);
        let y = object(array![[1.0]]);
        let stack = feature_cost_stack(&x, &y, 2.0, FeatureNorm::None).unwrap();
        assert_eq!(stack[0], array![[1.0], [0.0]]);
    }

    #[test]
    fn identical_columns_give_zero_costs_even_when_normalized() {
        let x = object(array![[0.3], [0.7], [1.5]]);
        let stack = feature_cost_stack(&x, &x.clone(), 2.0, FeatureNorm::PerPair).unwrap();
        // diagonal is zero, off-diagonal is not, so check the diagonal only
        for i in 0..3 {
            assert_eq!(stack[0][[i, i]], 0.0);
        }
        let constant = object(array![[2.0], [2.0], [2.0]]);
        let stack = feature_cost_stack(&constant, &constant, 1.0, FeatureNorm::PerFeature).unwrap();
        assert!(stack[0].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn per_feature_normalization_matches_direct_rescaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let fx = Array2::from_shape_fn((3, 2), |_| rng.random_range(-2.0..2.0));
        let fy = Array2::from_shape_fn((3, 2), |_| rng.random_range(-2.0..2.0));
        let x = object(fx.clone());
        let y = object(fy.clone());
        let stack = feature_cost_stack(&x, &y, 1.0, FeatureNorm::PerFeature).unwrap();
        for r in 0..2 {
            let mut raw = [[0.0; 3]; 3];
            let mut max: f64 = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    raw[i][j] = (fx[[i, r]] - fy[[j, r]]).abs();
                    max = max.max(raw[i][j]);
                }
            }
            for i in 0..3 {
                for j in 0..3 {
                    assert!((stack[r][[i, j]] - raw[i][j] / max).abs() < 1e-15);
                }
            }
            let top = stack[r].iter().cloned().fold(0.0, f64::max);
            assert_eq!(top, 1.0);
        }
    }

    #[test]
    fn scores_of_single_cell() {
        let t = array![[1.0]];
        let s = feature_scores(t.view(), &[array![[0.7]], array![[0.0]]]).unwrap();
        assert_eq!(s, vec![0.7, 0.0]);
    }

    #[test]
    fn scores_match_double_sum_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = Array2::from_shape_fn((3, 3), |_| rng.random_range(0.0..1.0));
        let stack: Vec<Array2<f64>> = (0..4)
            .map(|_| Array2::from_shape_fn((3, 3), |_| rng.random_range(0.0..5.0)))
            .collect();
        let s = feature_scores(t.view(), &stack).unwrap();
        for r in 0..4 {
            let mut oracle = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    oracle += t[[i, j]] * stack[r][[i, j]];
                }
            }
            assert!((s[r] - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn scores_reject_wrong_shape() {
        let t = Array2::<f64>::zeros((2, 3));
        assert!(matches!(
            feature_scores(t.view(), &[Array2::zeros((3, 2))]),
            Err(FsFgwError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn dataset_scale_equals_max_over_cross_pairs() {
        let objs = vec![
            object(array![[0.0], [1.0]]),
            object(array![[3.0], [2.0]]),
            object(array![[-1.0], [0.5]]),
        ];
        let scales = dataset_feature_scales(&objs, 2.0);
        // largest cross-object gap is 3 - (-1) = 4
        assert_eq!(scales, vec![Some(16.0)]);
    }
}
