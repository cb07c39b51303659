//! Gromov-Wasserstein term, fused objective and the conditional-gradient
//! transport update.
//!
//! For `q = 2` the quartic sum is evaluated through the usual factorization
//! `|c - c'|^2 = c^2 + c'^2 - 2 c c'`, which costs two matrix products. Other
//! exponents use the direct four-index contraction and are capped in size.
//! Structure matrices are assumed symmetric, which gives the factor 2 in the
//! gradient.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{FsFgwError, Result};
use crate::features::{frobenius, pow_q};
use crate::object::{TransportPlan, MARGINAL_TOL};
use crate::transport::{line_search_quadratic, solve_emd, QuadraticObjective, SegmentQuadratic};

/// Size cap `n * m` for the direct contraction used when `q != 2`.
pub const DIRECT_CONTRACTION_CAP: usize = 10_000;

/// The pair of structure matrices with everything the GW term needs.
#[derive(Debug, Clone)]
pub struct GwStructure {
    c1: Array2<f64>,
    c2: Array2<f64>,
    q: f64,
    c1_sq: Array2<f64>,
    c2_sq: Array2<f64>,
}

impl GwStructure {
    pub fn new(c1: Array2<f64>, c2: Array2<f64>, q: f64) -> Result<Self> {
        if c1.nrows() != c1.ncols() || c2.nrows() != c2.ncols() {
            return Err(FsFgwError::ShapeMismatch {
                expected: "square structure matrices".into(),
                got: format!("{:?} and {:?}", c1.dim(), c2.dim()),
            });
        }
        let nm = c1.nrows() * c2.nrows();
        if q != 2.0 && nm > DIRECT_CONTRACTION_CAP {
            return Err(FsFgwError::InstanceTooLarge {
                nm,
                cap: DIRECT_CONTRACTION_CAP,
            });
        }
        let c1_sq = c1.mapv(|v| v * v);
        let c2_sq = c2.mapv(|v| v * v);
        Ok(GwStructure {
            c1,
            c2,
            q,
            c1_sq,
            c2_sq,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.c1.nrows(), self.c2.nrows())
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    fn check_shape(&self, t: ArrayView2<'_, f64>) -> Result<()> {
        if t.dim() != self.dims() {
            return Err(FsFgwError::ShapeMismatch {
                expected: format!("{:?}", self.dims()),
                got: format!("{:?}", t.dim()),
            });
        }
        Ok(())
    }

    /// `sum L_{ii'jj'} T_ij T_i'j'` for any matrix `T` (no clamping).
    pub fn quadratic_form(&self, t: ArrayView2<'_, f64>) -> Result<f64> {
        self.check_shape(t)?;
        if self.q == 2.0 {
            let p = t.sum_axis(Axis(1));
            let s = t.sum_axis(Axis(0));
            let constant = p.dot(&self.c1_sq.dot(&p)) + s.dot(&self.c2_sq.dot(&s));
            let cross = frobenius(self.c1.dot(&t).dot(&self.c2.t()).view(), t);
            Ok(constant - 2.0 * cross)
        } else {
            Ok(0.5 * frobenius(direct_gradient(&self.c1, &self.c2, self.q, t).view(), t))
        }
    }

    /// GW term of a coupling; clamped at zero against rounding.
    pub fn value(&self, t: ArrayView2<'_, f64>) -> Result<f64> {
        Ok(self.quadratic_form(t)?.max(0.0))
    }

    pub fn gradient(&self, t: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_shape(t)?;
        if self.q == 2.0 {
            let p = t.sum_axis(Axis(1));
            let s = t.sum_axis(Axis(0));
            let row_term = self.c1_sq.dot(&p);
            let col_term = self.c2_sq.dot(&s);
            let mut g = self.c1.dot(&t).dot(&self.c2.t());
            let (n, m) = t.dim();
            for i in 0..n {
                for j in 0..m {
                    g[[i, j]] = 2.0 * (row_term[i] + col_term[j] - 2.0 * g[[i, j]]);
                }
            }
            Ok(g)
        } else {
            Ok(direct_gradient(&self.c1, &self.c2, self.q, t))
        }
    }
}

fn check_direct_size(c1: &Array2<f64>, c2: &Array2<f64>) -> Result<()> {
    let nm = c1.nrows() * c2.nrows();
    if nm > DIRECT_CONTRACTION_CAP {
        return Err(FsFgwError::InstanceTooLarge {
            nm,
            cap: DIRECT_CONTRACTION_CAP,
        });
    }
    Ok(())
}

fn direct_gradient(c1: &Array2<f64>, c2: &Array2<f64>, q: f64, t: ArrayView2<'_, f64>) -> Array2<f64> {
    let (n, m) = t.dim();
    let mut g = Array2::zeros((n, m));
    for i in 0..n {
        for ip in 0..n {
            let cx = c1[[i, ip]];
            for j in 0..m {
                let mut acc = 0.0;
                for jp in 0..m {
                    acc += pow_q((cx - c2[[j, jp]]).abs(), q) * t[[ip, jp]];
                }
                g[[i, j]] += 2.0 * acc;
            }
        }
    }
    g
}

/// GW term by explicit four-index summation; any `q >= 1`, size-capped.
pub fn gw_value_direct(
    t: ArrayView2<'_, f64>,
    c1: &Array2<f64>,
    c2: &Array2<f64>,
    q: f64,
) -> Result<f64> {
    check_direct_size(c1, c2)?;
    let (n, m) = t.dim();
    let mut total = 0.0;
    for i in 0..n {
        for ip in 0..n {
            for j in 0..m {
                if t[[i, j]] == 0.0 {
                    continue;
                }
                for jp in 0..m {
                    total += pow_q((c1[[i, ip]] - c2[[j, jp]]).abs(), q) * t[[i, j]] * t[[ip, jp]];
                }
            }
        }
    }
    Ok(total)
}

/// Gradient of the GW term by direct contraction; any `q >= 1`, size-capped.
pub fn gw_gradient_direct(
    t: ArrayView2<'_, f64>,
    c1: &Array2<f64>,
    c2: &Array2<f64>,
    q: f64,
) -> Result<Array2<f64>> {
    check_direct_size(c1, c2)?;
    Ok(direct_gradient(c1, c2, q, t))
}

/// `GW(T) = sum |C1_ii' - C2_jj'|^q T_ij T_i'j'`.
pub fn gw_value(t: &TransportPlan, c1: &Array2<f64>, c2: &Array2<f64>, q: f64) -> Result<f64> {
    GwStructure::new(c1.clone(), c2.clone(), q)?.value(t.view())
}

/// `dGW/dT`.
pub fn gw_gradient(
    t: ArrayView2<'_, f64>,
    c1: &Array2<f64>,
    c2: &Array2<f64>,
    q: f64,
) -> Result<Array2<f64>> {
    GwStructure::new(c1.clone(), c2.clone(), q)?.gradient(t)
}

/// The transport subproblem for fixed suppression weights.
#[derive(Debug, Clone)]
pub struct FgwProblem {
    pub structure: GwStructure,
    /// Effective feature cost `sum_r (1 - w_r) M_r`.
    pub feature_cost: Array2<f64>,
    pub alpha: f64,
    pub a: Array1<f64>,
    pub b: Array1<f64>,
}

impl FgwProblem {
    pub fn new(
        structure: GwStructure,
        feature_cost: Array2<f64>,
        alpha: f64,
        a: Array1<f64>,
        b: Array1<f64>,
    ) -> Result<Self> {
        let dims = structure.dims();
        if feature_cost.dim() != dims || a.len() != dims.0 || b.len() != dims.1 {
            return Err(FsFgwError::ShapeMismatch {
                expected: format!("{dims:?} feature cost and matching marginals"),
                got: format!("{:?}, {}, {}", feature_cost.dim(), a.len(), b.len()),
            });
        }
        if feature_cost.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(FsFgwError::InvalidConfig(
                "effective feature cost must be finite and nonnegative".into(),
            ));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(FsFgwError::InvalidConfig(format!("alpha {alpha} outside [0, 1]")));
        }
        Ok(FgwProblem {
            structure,
            feature_cost,
            alpha,
            a,
            b,
        })
    }

    /// Same structure and marginals with another effective feature cost.
    pub fn with_feature_cost(&self, feature_cost: Array2<f64>) -> Result<Self> {
        FgwProblem::new(
            self.structure.clone(),
            feature_cost,
            self.alpha,
            self.a.clone(),
            self.b.clone(),
        )
    }

    pub fn objective(&self, t: ArrayView2<'_, f64>) -> Result<f64> {
        let feature = frobenius(self.feature_cost.view(), t);
        let gw = self.structure.value(t)?;
        Ok((1.0 - self.alpha) * feature + self.alpha * gw)
    }

    pub fn gradient(&self, t: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut g = self.structure.gradient(t)?;
        g.mapv_inplace(|v| self.alpha * v);
        g.scaled_add(1.0 - self.alpha, &self.feature_cost);
        Ok(g)
    }
}

impl QuadraticObjective for FgwProblem {
    fn segment(&self, from: ArrayView2<'_, f64>, to: ArrayView2<'_, f64>) -> Result<SegmentQuadratic> {
        let direction = &to - &from;
        let grad = self.gradient(from)?;
        Ok(SegmentQuadratic {
            quad: self.alpha * self.structure.quadratic_form(direction.view())?,
            slope: frobenius(grad.view(), direction.view()),
            constant: self.objective(from)?,
        })
    }
}

/// `(1 - alpha) <M_eff, T> + alpha GW(T)`.
pub fn fgw_objective(t: &TransportPlan, problem: &FgwProblem) -> Result<f64> {
    problem.objective(t.view())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    pub max_iter: usize,
    /// Stop once a step would lower the objective by less than this fraction.
    pub tol: f64,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            max_iter: 200,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FgwSolution {
    pub plan: TransportPlan,
    pub objective: f64,
    pub iterations: usize,
    /// Objective after each accepted step, starting with the initial plan.
    pub trace: Vec<f64>,
}

/// Conditional gradient on the transport polytope, with the exact transport
/// LP as linear minimization oracle and exact line search. Steps that fail to
/// lower the objective by a relative `tol` are not taken, so restarting from
/// a returned plan returns it unchanged.
pub fn solve_fgw(
    problem: &FgwProblem,
    init: Option<&TransportPlan>,
    opts: &CgOptions,
) -> Result<FgwSolution> {
    let mut plan = match init {
        Some(p) => {
            if p.shape() != problem.structure.dims() {
                return Err(FsFgwError::ShapeMismatch {
                    expected: format!("{:?}", problem.structure.dims()),
                    got: format!("{:?}", p.shape()),
                });
            }
            let mut p = p.clone();
            p.row_marginal = problem.a.clone();
            p.col_marginal = problem.b.clone();
            p.check(MARGINAL_TOL)?;
            p
        }
        None => TransportPlan::product(&problem.a, &problem.b),
    };
    let mut objective = problem.objective(plan.view())?;
    let mut trace = vec![objective];
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let grad = problem.gradient(plan.view())?;
        let vertex = solve_emd(grad.view(), &problem.a, &problem.b)?.plan;
        let direction = &vertex.coupling - &plan.coupling;
        let slope = frobenius(grad.view(), direction.view());
        if slope >= 0.0 {
            break;
        }
        let seg = SegmentQuadratic {
            quad: problem.alpha * problem.structure.quadratic_form(direction.view())?,
            slope,
            constant: objective,
        };
        let gamma = line_search_quadratic(&seg);
        if gamma <= 0.0 {
            break;
        }
        let mut next = plan.coupling.clone();
        next.scaled_add(gamma, &direction);
        next.mapv_inplace(|v| v.max(0.0));
        let next_objective = problem.objective(next.view())?;
        let decrease = objective - next_objective;
        if decrease.is_nan() || decrease <= opts.tol * objective.abs() {
            break;
        }
        plan.coupling = next;
        objective = next_objective;
        trace.push(objective);
        iterations += 1;
    }

    Ok(FgwSolution {
        plan,
        objective,
        iterations,
        trace,
    })
}
