//! Exact solution of the transportation LP `min <Cost, T>` over `U(a, b)`.
//!
//! The solver is a primal network simplex specialised to the complete
//! bipartite graph between rows and columns. A basis is a spanning tree of
//! `n + m - 1` cells; node potentials come from the tree, entering cells are
//! chosen by most negative reduced cost, and after a run of degenerate pivots
//! the rule switches to Bland's lowest-index choice so the method cannot
//! cycle. Everything is deterministic.

use std::collections::VecDeque;

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{FsFgwError, Result};
use crate::object::TransportPlan;

/// Largest tolerated difference between the total masses of `a` and `b`.
pub const IMBALANCE_TOL: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub plan: TransportPlan,
    pub value: f64,
    /// Number of simplex pivots.
    pub iterations: usize,
}

struct Basis {
    n: usize,
    m: usize,
    /// Row nodes are `0..n`, column nodes `n..n+m`; edges carry the cell id.
    adj: Vec<Vec<(usize, usize)>>,
    in_basis: Vec<bool>,
    flow: Vec<f64>,
}

impl Basis {
    fn insert(&mut self, cell: usize) {
        let (i, j) = (cell / self.m, cell % self.m);
        self.adj[i].push((self.n + j, cell));
        self.adj[self.n + j].push((i, cell));
        self.in_basis[cell] = true;
    }

    fn remove(&mut self, cell: usize) {
        let (i, j) = (cell / self.m, cell % self.m);
        self.adj[i].retain(|&(_, c)| c != cell);
        self.adj[self.n + j].retain(|&(_, c)| c != cell);
        self.in_basis[cell] = false;
        self.flow[cell] = 0.0;
    }

    fn potentials(&self, cost: &[f64], u: &mut [f64], v: &mut [f64], seen: &mut [bool]) {
        let (n, m) = (self.n, self.m);
        seen.iter_mut().for_each(|s| *s = false);
        let mut queue = VecDeque::with_capacity(n + m);
        u[0] = 0.0;
        seen[0] = true;
        queue.push_back(0);
        while let Some(node) = queue.pop_front() {
            for &(next, cell) in &self.adj[node] {
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                let c = cost[cell];
                if node < n {
                    v[next - n] = c - u[node];
                } else {
                    u[next] = c - v[node - n];
                }
                queue.push_back(next);
            }
        }
        debug_assert!(seen.iter().all(|&s| s), "basis is not a spanning tree");
        let _ = m;
    }

    /// Cells on the tree path from column node `n + j` to row node `i`, in order.
    fn path(&self, i: usize, j: usize, parent: &mut [(usize, usize)]) -> Vec<usize> {
        const NONE: usize = usize::MAX;
        parent.iter_mut().for_each(|p| *p = (NONE, NONE));
        let mut queue = VecDeque::new();
        parent[i] = (i, NONE);
        queue.push_back(i);
        let target = self.n + j;
        while let Some(node) = queue.pop_front() {
            if node == target {
                break;
            }
            for &(next, cell) in &self.adj[node] {
                if parent[next].0 == NONE {
                    parent[next] = (node, cell);
                    queue.push_back(next);
                }
            }
        }
        let mut cells = Vec::new();
        let mut node = target;
        while node != i {
            let (prev, cell) = parent[node];
            cells.push(cell);
            node = prev;
        }
        cells
    }
}

/// Solves the transportation LP exactly.
///
/// `a` and `b` must be nonnegative with equal total mass up to
/// [`IMBALANCE_TOL`]; a smaller imbalance is absorbed into the largest entry
/// of `b`. The returned plan is a vertex of the transport polytope.
pub fn solve_emd(cost: ArrayView2<'_, f64>, a: &Array1<f64>, b: &Array1<f64>) -> Result<LpSolution> {
    let (n, m) = cost.dim();
    if a.len() != n || b.len() != m {
        return Err(FsFgwError::ShapeMismatch {
            expected: format!("marginals of length {n} and {m}"),
            got: format!("{} and {}", a.len(), b.len()),
        });
    }
    if n == 0 || m == 0 {
        return Err(FsFgwError::ShapeMismatch {
            expected: "nonempty cost matrix".into(),
            got: format!("{n}x{m}"),
        });
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(FsFgwError::NumericalFailure("cost matrix has non-finite entries".into()));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite() || *v < 0.0) {
        return Err(FsFgwError::InvalidMeasure(
            "marginals must be finite and nonnegative".into(),
        ));
    }
    let (sa, sb) = (a.sum(), b.sum());
    if (sa - sb).abs() > IMBALANCE_TOL {
        return Err(FsFgwError::Infeasible {
            row_sum: sa,
            col_sum: sb,
        });
    }
    let supply = a.to_vec();
    let mut demand = b.to_vec();
    let jmax = (0..m).fold(0, |best, j| if demand[j] > demand[best] { j } else { best });
    demand[jmax] = (demand[jmax] + (sa - sb)).max(0.0);

    let cost: Vec<f64> = cost.iter().cloned().collect();
    let mut basis = initial_basis(&cost, n, m, supply, demand);

    let scale = cost.iter().fold(1.0f64, |acc, c| acc.max(c.abs()));
    let tol = 1e-12 * scale;
    let max_pivots = 100_000 + 50 * n * m;
    let bland_after = n + m;

    let mut u = vec![0.0; n];
    let mut v = vec![0.0; m];
    let mut seen = vec![false; n + m];
    let mut parent = vec![(0usize, 0usize); n + m];
    let mut iterations = 0;
    let mut degenerate_run = 0;

    loop {
        basis.potentials(&cost, &mut u, &mut v, &mut seen);
        let bland = degenerate_run > bland_after;
        let mut entering = None;
        let mut best = -tol;
        'pricing: for i in 0..n {
            let row = &cost[i * m..(i + 1) * m];
            for j in 0..m {
                let cell = i * m + j;
                if basis.in_basis[cell] {
                    continue;
                }
                let reduced = row[j] - u[i] - v[j];
                if reduced < best {
                    entering = Some(cell);
                    if bland {
                        break 'pricing;
                    }
                    best = reduced;
                }
            }
        }
        let Some(enter) = entering else { break };

        iterations += 1;
        if iterations > max_pivots {
            return Err(FsFgwError::NumericalFailure(format!(
                "network simplex exceeded {max_pivots} pivots"
            )));
        }

        let (ei, ej) = (enter / m, enter % m);
        let cycle = basis.path(ei, ej, &mut parent);
        // Cells alternate -, +, -, ... starting next to the entering column.
        let mut theta = f64::INFINITY;
        for &cell in cycle.iter().step_by(2) {
            theta = theta.min(basis.flow[cell]);
        }
        let leave = cycle
            .iter()
            .step_by(2)
            .copied()
            .filter(|&c| basis.flow[c] == theta)
            .min()
            .expect("cycle has a decreasing cell");

        if theta > 0.0 {
            degenerate_run = 0;
            for (k, &cell) in cycle.iter().enumerate() {
                if k % 2 == 0 {
                    basis.flow[cell] -= theta;
                } else {
                    basis.flow[cell] += theta;
                }
            }
        } else {
            degenerate_run += 1;
        }
        basis.flow[enter] = theta;
        basis.remove(leave);
        basis.insert(enter);
    }

    let mut coupling = Array2::zeros((n, m));
    let mut value = 0.0;
    for (cell, &inb) in basis.in_basis.iter().enumerate() {
        if inb {
            let f = basis.flow[cell].max(0.0);
            coupling[[cell / m, cell % m]] = f;
            value += cost[cell] * f;
        }
    }
    Ok(LpSolution {
        plan: TransportPlan {
            coupling,
            row_marginal: a.clone(),
            col_marginal: b.clone(),
        },
        value,
        iterations,
    })
}

/// Least-cost rule: visit cells by increasing cost and saturate a row or a
/// column at each allocation. Crossing out exactly one line per allocation
/// (both on the last one) yields a spanning tree of `n + m - 1` cells.
fn initial_basis(cost: &[f64], n: usize, m: usize, mut supply: Vec<f64>, mut demand: Vec<f64>) -> Basis {
    let mut order: Vec<usize> = (0..n * m).collect();
    order.sort_by(|&x, &y| cost[x].total_cmp(&cost[y]).then(x.cmp(&y)));

    let mut basis = Basis {
        n,
        m,
        adj: vec![Vec::new(); n + m],
        in_basis: vec![false; n * m],
        flow: vec![0.0; n * m],
    };
    let mut row_alive = vec![true; n];
    let mut col_alive = vec![true; m];
    let (mut rows_left, mut cols_left) = (n, m);
    for cell in order {
        let (i, j) = (cell / m, cell % m);
        if !row_alive[i] || !col_alive[j] {
            continue;
        }
        let amount = supply[i].min(demand[j]).max(0.0);
        basis.flow[cell] = amount;
        basis.insert(cell);
        supply[i] -= amount;
        demand[j] -= amount;
        if rows_left == 1 && cols_left == 1 {
            break;
        }
        let kill_row = if rows_left == 1 {
            false
        } else if cols_left == 1 {
            true
        } else {
            supply[i] <= demand[j]
        };
        if kill_row {
            row_alive[i] = false;
            rows_left -= 1;
        } else {
            col_alive[j] = false;
            cols_left -= 1;
        }
    }
    basis
}

/// Objective restricted to the segment `T + gamma (V - T)`:
/// `quad * gamma^2 + slope * gamma + constant`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentQuadratic {
    pub quad: f64,
    pub slope: f64,
    pub constant: f64,
}

impl SegmentQuadratic {
    pub fn eval(&self, gamma: f64) -> f64 {
        (self.quad * gamma + self.slope) * gamma + self.constant
    }
}

/// An objective that is quadratic along every segment of the polytope.
pub trait QuadraticObjective {
    fn segment(&self, from: ArrayView2<'_, f64>, to: ArrayView2<'_, f64>) -> Result<SegmentQuadratic>;
}

/// Exact minimizer of the segment quadratic over `[0, 1]`. For a concave or
/// flat segment the better endpoint wins, with ties going to 0.
pub fn line_search_quadratic(seg: &SegmentQuadratic) -> f64 {
    if seg.quad > 0.0 {
        (-seg.slope / (2.0 * seg.quad)).clamp(0.0, 1.0)
    } else if seg.quad + seg.slope < 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Step from `curr` towards `vertex` minimizing `objective` on the segment.
pub fn line_search<O: QuadraticObjective + ?Sized>(
    curr: &TransportPlan,
    vertex: &TransportPlan,
    objective: &O,
) -> Result<f64> {
    let seg = objective.segment(curr.view(), vertex.view())?;
    Ok(line_search_quadratic(&seg))
}
