//! Agglomerative clustering with complete linkage.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{FsFgwError, Result};

/// One merge. Leaves are `0..N`; the cluster created by merge `t` gets id `N + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
}

pub fn check_distance_matrix(d: &Array2<f64>) -> Result<()> {
    let n = d.nrows();
    if d.ncols() != n {
        return Err(FsFgwError::InvalidMatrix(format!("not square: {:?}", d.dim())));
    }
    for i in 0..n {
        if d[[i, i]] != 0.0 {
            return Err(FsFgwError::InvalidMatrix(format!("nonzero diagonal at {i}")));
        }
        for j in 0..n {
            let v = d[[i, j]];
            if !v.is_finite() || v < 0.0 {
                return Err(FsFgwError::InvalidMatrix(format!("entry ({i},{j}) = {v}")));
            }
            if (v - d[[j, i]]).abs() > 1e-9 * (1.0 + v.abs()) {
                return Err(FsFgwError::InvalidMatrix(format!("asymmetric at ({i},{j})")));
            }
        }
    }
    Ok(())
}

/// Complete-linkage merges of a distance matrix. Among equally close pairs
/// the one with the lowest `(a, b)` cluster ids merges first.
pub fn complete_linkage(d: &Array2<f64>) -> Result<Vec<Merge>> {
    check_distance_matrix(d)?;
    let n = d.nrows();
    // active clusters as (id, row of the working matrix)
    let mut active: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
    let mut dist = d.clone();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(f64, usize, usize)> = None;
        for x in 0..active.len() {
            for y in x + 1..active.len() {
                let h = dist[[active[x].1, active[y].1]];
                if best.is_none_or(|(bh, _, _)| h < bh) {
                    best = Some((h, x, y));
                }
            }
        }
        let (height, x, y) = best.expect("at least two active clusters");
        let (ia, ra) = active[x];
        let (ib, rb) = active[y];
        for &(_, r) in &active {
            let merged = dist[[ra, r]].max(dist[[rb, r]]);
            dist[[ra, r]] = merged;
            dist[[r, ra]] = merged;
        }
        merges.push(Merge {
            a: ia.min(ib),
            b: ia.max(ib),
            height,
        });
        active[x] = (n + step, ra);
        active.remove(y);
        // keep active sorted by id so ties resolve on ids
        active.sort_by_key(|&(id, _)| id);
    }
    Ok(merges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_points() {
        let m = complete_linkage(&array![[0.0, 2.5], [2.5, 0.0]]).unwrap();
        assert_eq!(m, vec![Merge { a: 0, b: 1, height: 2.5 }]);
    }

    #[test]
    fn three_points() {
        let d = array![[0.0, 1.0, 2.0], [1.0, 0.0, 3.0], [2.0, 3.0, 0.0]];
        let m = complete_linkage(&d).unwrap();
        assert_eq!(m[0], Merge { a: 0, b: 1, height: 1.0 });
        assert_eq!(m[1], Merge { a: 2, b: 3, height: 3.0 });
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(complete_linkage(&array![[0.0, 1.0], [2.0, 0.0]]).is_err());
        assert!(complete_linkage(&array![[1.0]]).is_err());
    }
}
