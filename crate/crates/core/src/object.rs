//! Structured objects `(C, a, X)` and transport plans between them.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{FsFgwError, Result};

/// Tolerance on the total mass of a probability vector.
pub const MEASURE_TOL: f64 = 1e-9;
/// Tolerance on `|C[i][j] - C[j][i]|`.
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Tolerance on the marginals of a transport plan.
pub const MARGINAL_TOL: f64 = 1e-8;

/// One graph (or any finite metric measure space) with node features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredObject {
    /// `n x n` structure cost matrix.
    pub structure: Array2<f64>,
    /// Node measure, a probability vector of length `n`.
    pub measure: Array1<f64>,
    /// `n x d` node feature matrix.
    pub features: Array2<f64>,
    pub feature_names: Option<Vec<String>>,
}

impl StructuredObject {
    /// Validates the triple and renormalizes the measure to sum exactly to one.
    pub fn new(
        structure: Array2<f64>,
        measure: Array1<f64>,
        features: Array2<f64>,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let mut obj = StructuredObject {
            structure,
            measure,
            features,
            feature_names,
        };
        obj.validate()?;
        obj.measure = normalized_measure(&obj.measure)?;
        Ok(obj)
    }

    /// Object with the uniform measure.
    pub fn uniform(structure: Array2<f64>, features: Array2<f64>) -> Result<Self> {
        let n = structure.nrows();
        let measure = Array1::from_elem(n, 1.0 / n.max(1) as f64);
        Self::new(structure, measure, features, None)
    }

    pub fn n(&self) -> usize {
        self.structure.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.structure.nrows();
        if n == 0 {
            return Err(FsFgwError::InvalidStructure("object has no nodes".into()));
        }
        if self.structure.ncols() != n {
            return Err(FsFgwError::ShapeMismatch {
                expected: format!("{n}x{n} structure matrix"),
                got: format!("{}x{}", n, self.structure.ncols()),
            });
        }
        for i in 0..n {
            for j in 0..n {
                let c = self.structure[[i, j]];
                if !c.is_finite() || c < 0.0 {
                    return Err(FsFgwError::InvalidStructure(format!(
                        "entry C[{i}][{j}] = {c} must be finite and nonnegative"
                    )));
                }
                if j > i {
                    let gap = (c - self.structure[[j, i]]).abs();
                    if gap > SYMMETRY_TOL {
                        return Err(FsFgwError::AsymmetricCost { i, j, gap });
                    }
                }
            }
            if self.structure[[i, i]].abs() > SYMMETRY_TOL {
                return Err(FsFgwError::InvalidStructure(format!(
                    "diagonal entry C[{i}][{i}] = {} must be zero",
                    self.structure[[i, i]]
                )));
            }
        }
        if self.measure.len() != n {
            return Err(FsFgwError::ShapeMismatch {
                expected: format!("measure of length {n}"),
                got: format!("length {}", self.measure.len()),
            });
        }
        check_measure(&self.measure)?;
        if self.features.nrows() != n {
            return Err(FsFgwError::ShapeMismatch {
                expected: format!("{n} feature rows"),
                got: format!("{} rows", self.features.nrows()),
            });
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(FsFgwError::InvalidStructure("features must be finite".into()));
        }
        if let Some(names) = &self.feature_names {
            if names.len() != self.d() {
                return Err(FsFgwError::ShapeMismatch {
                    expected: format!("{} feature names", self.d()),
                    got: format!("{}", names.len()),
                });
            }
        }
        Ok(())
    }
}

fn check_measure(a: &Array1<f64>) -> Result<()> {
    if let Some((i, v)) = a
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite() || **v < 0.0)
    {
        return Err(FsFgwError::InvalidMeasure(format!("entry {i} = {v}")));
    }
    let total: f64 = a.sum();
    if (total - 1.0).abs() > MEASURE_TOL {
        return Err(FsFgwError::InvalidMeasure(format!("sums to {total}")));
    }
    Ok(())
}

/// Checks `a` is a probability vector and returns it rescaled to unit mass.
pub fn normalized_measure(a: &Array1<f64>) -> Result<Array1<f64>> {
    check_measure(a)?;
    let total = a.sum();
    Ok(a.mapv(|v| v / total))
}

/// Two validated objects that can be compared.
#[derive(Debug, Clone)]
pub struct PairContext<'a> {
    pub x: &'a StructuredObject,
    pub y: &'a StructuredObject,
    pub a: Array1<f64>,
    pub b: Array1<f64>,
    pub n: usize,
    pub m: usize,
    pub d: usize,
}

pub fn validate_pair<'a>(
    x: &'a StructuredObject,
    y: &'a StructuredObject,
) -> Result<PairContext<'a>> {
    x.validate()?;
    y.validate()?;
    if x.d() != y.d() {
        return Err(FsFgwError::DimensionMismatch {
            left: x.d(),
            right: y.d(),
        });
    }
    Ok(PairContext {
        x,
        y,
        a: normalized_measure(&x.measure)?,
        b: normalized_measure(&y.measure)?,
        n: x.n(),
        m: y.n(),
        d: x.d(),
    })
}

/// A coupling `T` in `U(a, b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub coupling: Array2<f64>,
    pub row_marginal: Array1<f64>,
    pub col_marginal: Array1<f64>,
}

impl TransportPlan {
    /// Wraps a coupling, checking it is nonnegative and has the stated marginals.
    pub fn new(coupling: Array2<f64>, a: Array1<f64>, b: Array1<f64>) -> Result<Self> {
        let plan = TransportPlan {
            coupling,
            row_marginal: a,
            col_marginal: b,
        };
        plan.check(MARGINAL_TOL)?;
        Ok(plan)
    }

    /// The independent coupling `a b^T`.
    pub fn product(a: &Array1<f64>, b: &Array1<f64>) -> Self {
        let coupling = Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j]);
        TransportPlan {
            coupling,
            row_marginal: a.clone(),
            col_marginal: b.clone(),
        }
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.coupling.view()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.coupling.dim()
    }

    /// Largest deviation of the row and column sums from the stored marginals.
    pub fn marginal_error(&self) -> f64 {
        let rows = self.coupling.sum_axis(Axis(1));
        let cols = self.coupling.sum_axis(Axis(0));
        let r = rows
            .iter()
            .zip(self.row_marginal.iter())
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max);
        let c = cols
            .iter()
            .zip(self.col_marginal.iter())
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max);
        r.max(c)
    }

    pub fn check(&self, tol: f64) -> Result<()> {
        let (n, m) = self.coupling.dim();
        if self.row_marginal.len() != n || self.col_marginal.len() != m {
            return Err(FsFgwError::ShapeMismatch {
                expected: format!("marginals of length {n} and {m}"),
                got: format!(
                    "{} and {}",
                    self.row_marginal.len(),
                    self.col_marginal.len()
                ),
            });
        }
        if self.coupling.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(FsFgwError::NumericalFailure(
                "transport plan has negative or non-finite entries".into(),
            ));
        }
        let err = self.marginal_error();
        if err > tol {
            return Err(FsFgwError::NumericalFailure(format!(
                "transport plan marginals off by {err:e}"
            )));
        }
        Ok(())
    }

    /// Plan obtained by swapping the roles of the two objects.
    pub fn transposed(&self) -> Self {
        TransportPlan {
            coupling: self.coupling.t().to_owned(),
            row_marginal: self.col_marginal.clone(),
            col_marginal: self.row_marginal.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn two_node(d: usize) -> StructuredObject {
        StructuredObject::uniform(array![[0.0, 1.0], [1.0, 0.0]], Array2::zeros((2, d))).unwrap()
    }

    #[test]
    fn pair_context_reports_dimensions() {
        let x = two_node(10);
        let y = two_node(10);
        let ctx = validate_pair(&x, &y).unwrap();
        assert_eq!((ctx.n, ctx.m, ctx.d), (2, 2, 10));
    }

    #[test]
    fn differing_feature_dimension_is_rejected() {
        let x = two_node(10);
        let y = two_node(9);
        assert!(matches!(
            validate_pair(&x, &y),
            Err(FsFgwError::DimensionMismatch { left: 10, right: 9 })
        ));
    }

    #[test]
    fn measure_not_summing_to_one_is_rejected() {
        let mut x = two_node(1);
        x.measure = array![0.5, 0.6];
        let y = two_node(1);
        assert!(matches!(
            validate_pair(&x, &y),
            Err(FsFgwError::InvalidMeasure(_))
        ));
    }

    #[test]
    fn asymmetric_structure_is_rejected() {
        let mut x = two_node(1);
        x.structure[[0, 1]] = 0.5;
        let y = two_node(1);
        assert!(matches!(
            validate_pair(&x, &y),
            Err(FsFgwError::AsymmetricCost { i: 0, j: 1, .. })
        ));
    }

    #[test]
    fn measure_is_renormalized_exactly() {
        let x = StructuredObject::new(
            array![[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]],
            array![0.3333333333, 0.3333333333, 0.3333333334],
            Array2::zeros((3, 1)),
            None,
        )
        .unwrap();
        assert_eq!(x.measure.sum(), 1.0);
    }

    #[test]
    fn product_plan_has_exact_marginals() {
        let a = array![0.2, 0.8];
        let b = array![0.5, 0.25, 0.25];
        let p = TransportPlan::product(&a, &b);
        assert!(p.marginal_error() < 1e-15);
        assert!(p.check(MARGINAL_TOL).is_ok());
    }
}
