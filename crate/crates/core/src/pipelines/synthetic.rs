//! Synthetic feature-recovery experiments on random geometric graphs.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::geodesic::{bfs_order, connected_components, geodesic_matrix};
use crate::config::FsFgwConfig;
use crate::error::{FsFgwError, Result};
use crate::object::StructuredObject;
use crate::suppression::solve_fsfgw;
use crate::weights::Groups;

const MAX_ATTEMPTS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    /// The first `k` features are differentiating.
    pub k: usize,
    pub delta: f64,
    pub geo_radius: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n: 40,
            d: 10,
            k: 3,
            delta: 2.0,
            geo_radius: 0.3,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(FsFgwError::InvalidConfig(format!("n must be >= 2, got {}", self.n)));
        }
        if self.k > self.d {
            return Err(FsFgwError::InvalidConfig(format!(
                "k = {} exceeds d = {}",
                self.k, self.d
            )));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(FsFgwError::InvalidConfig(format!("delta must be >= 0, got {}", self.delta)));
        }
        if !(self.geo_radius > 0.0 && self.geo_radius.is_finite()) {
            return Err(FsFgwError::InvalidConfig(format!(
                "radius must be positive, got {}",
                self.geo_radius
            )));
        }
        Ok(())
    }

    /// The differentiating features as one group and the shared ones in
    /// consecutive blocks of size `k` (a single block when `k = 0`).
    pub fn correct_groups(&self) -> Result<Groups> {
        let mut blocks = Vec::new();
        if self.k > 0 {
            blocks.push((0..self.k).collect());
        }
        let shared: Vec<usize> = (self.k..self.d).collect();
        for chunk in shared.chunks(self.k.max(1)) {
            blocks.push(chunk.to_vec());
        }
        Groups::new(blocks, self.d)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticPair {
    pub x: StructuredObject,
    pub y: StructuredObject,
    pub differentiating: Vec<usize>,
}

/// Largest connected component of a random geometric graph, as adjacency
/// lists over its nodes in BFS order from the component's first node.
fn geometric_component(n: usize, radius: f64, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<usize>>> {
    let needed = (0.9 * n as f64).ceil() as usize;
    for _ in 0..MAX_ATTEMPTS {
        let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
        let r2 = radius * radius;
        let mut adj = vec![Vec::new(); n];
        for i in 0..n {
            for j in i + 1..n {
                let (dx, dy) = (pts[i].0 - pts[j].0, pts[i].1 - pts[j].1);
                if dx * dx + dy * dy <= r2 {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        let largest = connected_components(&adj)
            .into_iter()
            .max_by(|a, b| a.len().cmp(&b.len()).then(b[0].cmp(&a[0])))
            .unwrap_or_default();
        if largest.len() >= needed {
            return Ok(relabel(&adj, &bfs_order(&adj, largest[0])));
        }
    }
    Err(FsFgwError::DisconnectedAfterRetries {
        attempts: MAX_ATTEMPTS,
    })
}

/// Adjacency restricted to `order`, with node `order[k]` renamed `k`.
fn relabel(adj: &[Vec<usize>], order: &[usize]) -> Vec<Vec<usize>> {
    let mut local = vec![usize::MAX; adj.len()];
    for (k, &v) in order.iter().enumerate() {
        local[v] = k;
    }
    order
        .iter()
        .map(|&v| {
            let mut out: Vec<usize> = adj[v]
                .iter()
                .map(|&u| local[u])
                .filter(|&u| u != usize::MAX)
                .collect();
            out.sort_unstable();
            out
        })
        .collect()
}

fn normal_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize, shift: impl Fn(usize) -> f64) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |(_, r)| {
        let z: f64 = StandardNormal.sample(rng);
        z + shift(r)
    })
}

/// Two random geometric graphs of equal size with Gaussian features; the
/// first `k` features of `y` are shifted by `delta`.
pub fn generate_synthetic_pair(spec: &SyntheticSpec) -> Result<SyntheticPair> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let gx = geometric_component(spec.n, spec.geo_radius, &mut rng)?;
    let gy = geometric_component(spec.n, spec.geo_radius, &mut rng)?;
    let size = gx.len().min(gy.len());
    // BFS-order prefixes stay connected
    let cx = geodesic_matrix(&relabel(&gx, &(0..size).collect::<Vec<_>>()))?;
    let cy = geodesic_matrix(&relabel(&gy, &(0..size).collect::<Vec<_>>()))?;

    let fx = normal_matrix(&mut rng, size, spec.d, |_| 0.0);
    let fy = normal_matrix(&mut rng, size, spec.d, |r| if r < spec.k { spec.delta } else { 0.0 });
    Ok(SyntheticPair {
        x: StructuredObject::uniform(cx, fx)?,
        y: StructuredObject::uniform(cy, fy)?,
        differentiating: (0..spec.k).collect(),
    })
}

/// Mean weight on the differentiating features minus mean weight on the rest.
pub fn separation_metric(weights: &[f64], differentiating: &[usize]) -> Result<f64> {
    let d = weights.len();
    let mut is_diff = vec![false; d];
    for &r in differentiating {
        if r >= d {
            return Err(FsFgwError::InvalidConfig(format!("feature {r} out of range 0..{d}")));
        }
        is_diff[r] = true;
    }
    let k = is_diff.iter().filter(|&&b| b).count();
    if k == 0 || k == d {
        return Err(FsFgwError::EmptySet(
            "differentiating set must be a nonempty proper subset".into(),
        ));
    }
    let (mut on, mut off) = (0.0, 0.0);
    for (r, &w) in weights.iter().enumerate() {
        if is_diff[r] {
            on += w;
        } else {
            off += w;
        }
    }
    Ok(on / k as f64 - off / (d - k) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fraction: f64,
    pub tpr: f64,
    pub fpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Weights at or above this value count as a detection.
pub const ROC_THRESHOLD: f64 = 0.5;

/// `(tpr, fpr)` of thresholded weights against the differentiating set.
pub fn detection_rates(weights: &[f64], differentiating: &[usize]) -> (f64, f64) {
    let d = weights.len();
    let k = differentiating.len();
    let mut tp = 0;
    let mut fp = 0;
    for (r, &w) in weights.iter().enumerate() {
        if w >= ROC_THRESHOLD {
            if differentiating.contains(&r) {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    let rate = |hits: usize, total: usize| if total == 0 { 0.0 } else { hits as f64 / total as f64 };
    (rate(tp, k), rate(fp, d - k))
}

/// Trapezoidal area under the curve through `(0,0)`, the points sorted by
/// FPR (then TPR), and `(1,1)`.
pub fn roc_auc(points: &[RocPoint]) -> f64 {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p.fpr, p.tpr)).collect();
    pts.push((0.0, 0.0));
    pts.push((1.0, 1.0));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

/// Solves one synthetic instance at each suppression fraction (in parallel)
/// and scores the thresholded weights.
pub fn roc_sweep(spec: &SyntheticSpec, config: &FsFgwConfig, fractions: &[f64]) -> Result<RocCurve> {
    if let Some(&f) = fractions.iter().find(|&&f| !(f > 0.0 && f < 1.0)) {
        return Err(FsFgwError::InvalidFraction(f));
    }
    if !config.mode.is_penalized() {
        return Err(FsFgwError::InvalidConfig(format!(
            "a fraction sweep needs lasso or ridge, not {}",
            config.mode
        )));
    }
    let pair = generate_synthetic_pair(spec)?;
    let points = fractions
        .par_iter()
        .map(|&f| {
            let cfg = FsFgwConfig {
                lambda: None,
                fraction: Some(f),
                ..config.clone()
            };
            let res = solve_fsfgw(&pair.x, &pair.y, &cfg)?;
            let (tpr, fpr) = detection_rates(&res.weights.values, &pair.differentiating);
            Ok(RocPoint { fraction: f, tpr, fpr })
        })
        .collect::<Result<Vec<_>>>()?;
    let auc = roc_auc(&points);
    Ok(RocCurve { points, auc })
}
