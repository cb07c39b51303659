//! Closed-form weight updates and the alternating minimization driver.

use std::hash::{DefaultHasher, Hash, Hasher};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::FsFgwConfig;
use crate::error::{FsFgwError, Result};
use crate::features::{feature_cost_stack, feature_scores, weighted_cost, FeatureStack};
use crate::fgw::{solve_fgw, CgOptions, FgwProblem, FgwSolution, GwStructure};
use crate::object::{validate_pair, StructuredObject, TransportPlan};
use crate::weights::{Groups, Mode, SuppressionWeights};

/// Data of the weight subproblem at a fixed plan.
#[derive(Debug, Clone, Copy)]
pub struct WeightUpdateInput<'a> {
    pub scores: &'a [f64],
    pub alpha: f64,
    pub lambda: Option<f64>,
    pub groups: Option<&'a Groups>,
}

impl<'a> WeightUpdateInput<'a> {
    pub fn new(scores: &'a [f64], alpha: f64) -> Self {
        WeightUpdateInput {
            scores,
            alpha,
            lambda: None,
            groups: None,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn with_groups(mut self, groups: &'a Groups) -> Self {
        self.groups = Some(groups);
        self
    }

    fn lambda(&self) -> Result<f64> {
        match self.lambda {
            None => Err(FsFgwError::MissingLambda),
            Some(l) if l >= 0.0 && !l.is_nan() => Ok(l),
            Some(l) => Err(FsFgwError::InvalidConfig(format!("lambda must be >= 0, got {l}"))),
        }
    }
}

/// `w_r = 1` iff `(1 - alpha) s_r > lambda`.
pub fn update_weights_lasso(input: &WeightUpdateInput<'_>) -> Result<SuppressionWeights> {
    let lambda = input.lambda()?;
    let values = input
        .scores
        .iter()
        .map(|&s| if (1.0 - input.alpha) * s > lambda { 1.0 } else { 0.0 })
        .collect();
    Ok(SuppressionWeights {
        values,
        mode: Mode::Lasso,
        groups: None,
        active_group: None,
    })
}

/// `w_r = min(1, (1 - alpha) s_r / lambda)`.
pub fn update_weights_ridge(input: &WeightUpdateInput<'_>) -> Result<SuppressionWeights> {
    let lambda = input.lambda()?;
    let values = input
        .scores
        .iter()
        .map(|&s| {
            let t = (1.0 - input.alpha) * s;
            if lambda == 0.0 {
                if t > 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                (t / lambda).min(1.0)
            }
        })
        .collect();
    Ok(SuppressionWeights {
        values,
        mode: Mode::Ridge,
        groups: None,
        active_group: None,
    })
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// One-hot on the highest score, lowest index on ties.
pub fn update_weights_simplex(input: &WeightUpdateInput<'_>) -> Result<SuppressionWeights> {
    if input.scores.is_empty() {
        return Err(FsFgwError::EmptySet("no feature scores".into()));
    }
    let mut values = vec![0.0; input.scores.len()];
    values[argmax(input.scores)] = 1.0;
    Ok(SuppressionWeights {
        values,
        mode: Mode::Simplex,
        groups: None,
        active_group: None,
    })
}

/// Suppresses the group with the highest mean score, lowest index on ties.
pub fn update_weights_group_simplex(input: &WeightUpdateInput<'_>) -> Result<SuppressionWeights> {
    let groups = input
        .groups
        .ok_or_else(|| FsFgwError::InvalidConfig("group_simplex update needs groups".into()))?;
    if groups.num_features() != input.scores.len() {
        return Err(FsFgwError::InvalidPartition(format!(
            "groups cover {} features, scores have {}",
            groups.num_features(),
            input.scores.len()
        )));
    }
    let active = argmax(&groups.means(input.scores));
    let mut values = vec![0.0; input.scores.len()];
    for &r in &groups.blocks()[active] {
        values[r] = 1.0;
    }
    Ok(SuppressionWeights {
        values,
        mode: Mode::GroupSimplex,
        groups: Some(groups.clone()),
        active_group: Some(active),
    })
}

pub fn update_weights(mode: Mode, input: &WeightUpdateInput<'_>) -> Result<SuppressionWeights> {
    match mode {
        Mode::Lasso => update_weights_lasso(input),
        Mode::Ridge => update_weights_ridge(input),
        Mode::Simplex => update_weights_simplex(input),
        Mode::GroupSimplex => update_weights_group_simplex(input),
    }
}

/// `lambda = (1 - alpha) * s_(k)` with `k = ceil((1 - f) d)` (nearest rank).
pub fn calibrate_lambda(scores: &[f64], alpha: f64, fraction: f64) -> Result<f64> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(FsFgwError::InvalidFraction(fraction));
    }
    if scores.is_empty() {
        return Err(FsFgwError::EmptySet("no feature scores".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let d = sorted.len();
    let rank = ((1.0 - fraction) * d as f64 - 1e-9).ceil() as isize - 1;
    let idx = rank.clamp(0, d as isize - 1) as usize;
    Ok((1.0 - alpha) * sorted[idx])
}

/// `sum_r g(s_r)`, the feature and penalty terms after minimizing out `w`.
pub fn reduced_objective_g(scores: &[f64], alpha: f64, lambda: f64, mode: Mode) -> Result<f64> {
    let g = |s: f64| {
        let t = (1.0 - alpha) * s;
        match mode {
            Mode::Lasso => Ok(t.min(lambda)),
            Mode::Ridge => Ok(if t <= lambda {
                if lambda == 0.0 {
                    0.0
                } else {
                    t - t * t / (2.0 * lambda)
                }
            } else {
                lambda / 2.0
            }),
            _ => Err(FsFgwError::InvalidConfig(format!(
                "reduced objective is defined for lasso and ridge, not {mode}"
            ))),
        }
    };
    scores.iter().map(|&s| g(s)).sum()
}

/// Multiplier of each `M_r` in the feature term: `1 - w_r`, further divided
/// by the group size in group-simplex mode.
pub fn feature_coefficients(weights: &[f64], groups: Option<&Groups>) -> Vec<f64> {
    match groups {
        Some(g) => {
            let membership = g.membership();
            let sizes: Vec<f64> = g.blocks().iter().map(|b| b.len() as f64).collect();
            weights
                .iter()
                .enumerate()
                .map(|(r, w)| (1.0 - w) / sizes[membership[r]])
                .collect()
        }
        None => weights.iter().map(|w| 1.0 - w).collect(),
    }
}

/// `lambda R(w)`: `lambda ||w||_1` for lasso, `lambda/2 ||w||^2` for ridge, 0 otherwise.
pub fn regularization(weights: &[f64], mode: Mode, lambda: f64) -> f64 {
    match mode {
        Mode::Lasso => lambda * weights.iter().sum::<f64>(),
        Mode::Ridge => 0.5 * lambda * weights.iter().map(|w| w * w).sum::<f64>(),
        Mode::Simplex | Mode::GroupSimplex => 0.0,
    }
}

/// Feature and penalty terms of the weight subproblem, `(feature, reg)`.
pub fn subproblem_terms(
    scores: &[f64],
    weights: &SuppressionWeights,
    alpha: f64,
    lambda: f64,
) -> (f64, f64) {
    let coeffs = feature_coefficients(&weights.values, weights.groups.as_ref());
    let feature = (1.0 - alpha) * coeffs.iter().zip(scores).map(|(c, s)| c * s).sum::<f64>();
    (feature, regularization(&weights.values, weights.mode, lambda))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub objective: f64,
    /// `||w^{k+1} - w^k||`; zero for the initial entry.
    pub dw: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub plan: TransportPlan,
    pub weights: SuppressionWeights,
    pub objective: f64,
    pub feature_term: f64,
    pub gw_term: f64,
    pub reg_term: f64,
    pub scores: Vec<f64>,
    /// Resolved penalty; 0 for the simplex modes.
    pub lambda_used: f64,
    pub trace: Vec<TraceEntry>,
    pub outer_iters: usize,
    pub converged: bool,
    /// Objective at the initial classical FGW plan, before any suppression.
    pub initial_fgw_objective: f64,
}

/// Everything the alternating loop needs about one pair.
struct Instance<'a> {
    stack: &'a FeatureStack,
    base: FgwProblem,
    groups: Option<&'a Groups>,
    config: &'a FsFgwConfig,
    cg: CgOptions,
}

impl Instance<'_> {
    fn terms(
        &self,
        plan: &TransportPlan,
        weights: &SuppressionWeights,
        lambda: f64,
    ) -> Result<(Vec<f64>, f64, f64, f64)> {
        let scores = feature_scores(plan.view(), self.stack)?;
        let (feature, reg) = subproblem_terms(&scores, weights, self.config.alpha, lambda);
        let gw = self.config.alpha * self.base.structure.value(plan.view())?;
        Ok((scores, feature, gw, reg))
    }

    fn cost_for(&self, weights: &SuppressionWeights) -> Array2<f64> {
        let coeffs = feature_coefficients(&weights.values, self.groups);
        weighted_cost(self.stack, &coeffs, self.base.structure.dims())
    }

    fn zero_weights(&self) -> SuppressionWeights {
        let mut w = SuppressionWeights::zeros(self.stack.len(), self.config.mode);
        w.groups = self.groups.cloned();
        w
    }

    /// The alternating loop started at the classical plan `first`. With
    /// `lambda = None` the penalty is calibrated from the scores at `first`.
    fn run(&self, first: TransportPlan, lambda: Option<f64>) -> Result<SolveResult> {
        let cfg = self.config;
        let zero = self.zero_weights();
        let mut plan = first;

        let lambda = match (cfg.mode.is_penalized(), lambda, cfg.fraction) {
            (false, _, _) => 0.0,
            (true, Some(l), _) => l,
            (true, None, Some(f)) => {
                let scores = feature_scores(plan.view(), self.stack)?;
                calibrate_lambda(&scores, cfg.alpha, f)?
            }
            (true, None, None) => return Err(FsFgwError::MissingLambda),
        };

        let (_, feature, gw, reg) = self.terms(&plan, &zero, lambda)?;
        let initial = feature + gw + reg;
        let mut trace = vec![TraceEntry {
            objective: initial,
            dw: 0.0,
        }];
        let mut weights = zero;
        let mut prev = initial;
        let mut converged = false;
        let mut outer_iters = 0;

        while outer_iters < cfg.max_outer_iter {
            let scores = feature_scores(plan.view(), self.stack)?;
            let mut input = WeightUpdateInput::new(&scores, cfg.alpha).with_lambda(lambda);
            input.groups = self.groups;
            let next = update_weights(cfg.mode, &input)?;

            let problem = self.base.with_feature_cost(self.cost_for(&next))?;
            plan = solve_fgw(&problem, Some(&plan), &self.cg)?.plan;

            let (_, feature, gw, reg) = self.terms(&plan, &next, lambda)?;
            let objective = feature + gw + reg;
            let dw = next.distance(&weights);
            trace.push(TraceEntry { objective, dw });
            weights = next;
            outer_iters += 1;
            log::debug!("outer {outer_iters}: objective {objective:.6e}, dw {dw:.3e}");

            if dw < cfg.outer_tol && (prev - objective).abs() <= cfg.outer_tol * prev.abs().max(1e-12) {
                converged = true;
                break;
            }
            prev = objective;
        }

        let (scores, feature_term, gw_term, reg_term) = self.terms(&plan, &weights, lambda)?;
        weights.check_invariants()?;
        Ok(SolveResult {
            plan,
            weights,
            objective: feature_term + gw_term + reg_term,
            feature_term,
            gw_term,
            reg_term,
            scores,
            lambda_used: lambda,
            trace,
            outer_iters,
            converged,
            initial_fgw_objective: initial,
        })
    }
}

fn object_seed(obj: &StructuredObject) -> u64 {
    let mut h = DefaultHasher::new();
    for v in obj.structure.iter() {
        v.to_bits().hash(&mut h);
    }
    obj.structure.dim().hash(&mut h);
    h.finish()
}

fn node_values(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// North-west corner coupling in sorted order of `xi` and `eta`: the optimal
/// plan for any convex cost of `xi_i - eta_j`.
fn monotone_coupling(xi: &[f64], eta: &[f64], a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let order = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]).then(i.cmp(&j)));
        idx
    };
    let (rows, cols) = (order(xi), order(eta));
    let mut t = Array2::zeros((a.len(), b.len()));
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[rows[0]], b[cols[0]]);
    while i < rows.len() && j < cols.len() {
        let mass = ra.min(rb);
        t[[rows[i], cols[j]]] += mass;
        ra -= mass;
        rb -= mass;
        let (next_i, next_j) = (ra <= rb, rb <= ra);
        if next_i {
            i += 1;
            ra = if i < rows.len() { a[rows[i]] } else { 0.0 };
        }
        if next_j {
            j += 1;
            rb = if j < cols.len() { b[cols[j]] } else { 0.0 };
        }
    }
    t
}

/// Interior starting coupling for restart `k`. Each object draws its own
/// random node values from its structure, so swapping the pair transposes
/// the start.
fn restart_plan(
    x: &StructuredObject,
    y: &StructuredObject,
    seed: u64,
    k: usize,
) -> Result<TransportPlan> {
    let salt = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64);
    let xi = node_values(object_seed(x) ^ salt, x.n());
    let eta = node_values(object_seed(y) ^ salt, y.n());
    let vertex = monotone_coupling(&xi, &eta, &x.measure, &y.measure);
    let product = TransportPlan::product(&x.measure, &y.measure);
    let coupling = (&product.coupling + &vertex) * 0.5;
    Ok(TransportPlan {
        coupling,
        row_marginal: x.measure.clone(),
        col_marginal: y.measure.clone(),
    })
}

/// Conditional gradient from the product coupling and from `restarts`
/// random interior couplings; the lowest objective wins.
fn multistart_fgw(
    problem: &FgwProblem,
    x: &StructuredObject,
    y: &StructuredObject,
    config: &FsFgwConfig,
) -> Result<FgwSolution> {
    let cg = CgOptions {
        max_iter: config.cg_max_iter,
        tol: config.cg_tol,
    };
    let mut best = solve_fgw(problem, None, &cg)?;
    for k in 0..config.restarts {
        let start = restart_plan(x, y, config.seed, k)?;
        let candidate = solve_fgw(problem, Some(&start), &cg)?;
        if candidate.objective < best.objective {
            best = candidate;
        }
    }
    Ok(best)
}

fn check_stack(
    x: &StructuredObject,
    y: &StructuredObject,
    stack: &FeatureStack,
    config: &FsFgwConfig,
) -> Result<()> {
    config.validate()?;
    let ctx = validate_pair(x, y)?;
    if stack.len() != ctx.d || stack.iter().any(|m| m.dim() != (ctx.n, ctx.m)) {
        return Err(FsFgwError::ShapeMismatch {
            expected: format!("{} matrices of shape {:?}", ctx.d, (ctx.n, ctx.m)),
            got: format!("{} matrices", stack.len()),
        });
    }
    if let Some(g) = &config.groups {
        if g.num_features() != ctx.d {
            return Err(FsFgwError::InvalidPartition(format!(
                "groups cover {} features, objects have {}",
                g.num_features(),
                ctx.d
            )));
        }
    }
    Ok(())
}

/// The `w = 0` problem of a pair. Group-simplex mode scales each feature
/// cost by the inverse size of its group, as in its feature term.
fn base_problem(
    x: &StructuredObject,
    y: &StructuredObject,
    stack: &FeatureStack,
    groups: Option<&Groups>,
    config: &FsFgwConfig,
) -> Result<FgwProblem> {
    let structure = GwStructure::new(x.structure.clone(), y.structure.clone(), config.q)?;
    let coeffs = feature_coefficients(&vec![0.0; stack.len()], groups);
    let cost = weighted_cost(stack, &coeffs, (x.n(), y.n()));
    FgwProblem::new(structure, cost, config.alpha, x.measure.clone(), y.measure.clone())
}

/// Classical FGW (all weights zero) between two objects, solved from the
/// product coupling plus `config.restarts` random starts.
pub fn solve_classical_fgw(
    x: &StructuredObject,
    y: &StructuredObject,
    config: &FsFgwConfig,
) -> Result<FgwSolution> {
    config.validate()?;
    let stack = feature_cost_stack(x, y, config.q, config.feature_norm)?;
    check_stack(x, y, &stack, config)?;
    let problem = base_problem(x, y, &stack, None, config)?;
    multistart_fgw(&problem, x, y, config)
}

/// fsFGW between two objects, with the feature costs built from `config.feature_norm`.
pub fn solve_fsfgw(
    x: &StructuredObject,
    y: &StructuredObject,
    config: &FsFgwConfig,
) -> Result<SolveResult> {
    config.validate()?;
    validate_pair(x, y)?;
    let stack = feature_cost_stack(x, y, config.q, config.feature_norm)?;
    solve_fsfgw_with_stack(x, y, &stack, config)
}

/// fsFGW with precomputed feature cost matrices (one `n x m` matrix per feature).
pub fn solve_fsfgw_with_stack(
    x: &StructuredObject,
    y: &StructuredObject,
    stack: &FeatureStack,
    config: &FsFgwConfig,
) -> Result<SolveResult> {
    check_stack(x, y, stack, config)?;
    let groups = config.groups.as_ref().filter(|_| config.mode == Mode::GroupSimplex);
    let base = base_problem(x, y, stack, groups, config)?;
    let first = multistart_fgw(&base, x, y, config)?.plan;
    let instance = Instance {
        stack,
        base,
        groups,
        config,
        cg: CgOptions {
            max_iter: config.cg_max_iter,
            tol: config.cg_tol,
        },
    };
    instance.run(first, config.lambda)
}
