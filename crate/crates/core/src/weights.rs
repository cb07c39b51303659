//! Suppression weights, their modes and feature groups.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{FsFgwError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Lasso,
    Ridge,
    Simplex,
    GroupSimplex,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Lasso, Mode::Ridge, Mode::Simplex, Mode::GroupSimplex];

    /// Lasso and ridge carry a penalty `lambda R(w)`; the simplex modes do not.
    pub fn is_penalized(self) -> bool {
        matches!(self, Mode::Lasso | Mode::Ridge)
    }
}

impl FromStr for Mode {
    type Err = FsFgwError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lasso" => Ok(Mode::Lasso),
            "ridge" => Ok(Mode::Ridge),
            "simplex" => Ok(Mode::Simplex),
            "group_simplex" | "group-simplex" => Ok(Mode::GroupSimplex),
            other => Err(FsFgwError::InvalidConfig(format!("unknown mode '{other}'"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Lasso => "lasso",
            Mode::Ridge => "ridge",
            Mode::Simplex => "simplex",
            Mode::GroupSimplex => "group_simplex",
        })
    }
}

/// A partition of the feature indices `0..d` into nonempty disjoint blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<usize>>", into = "Vec<Vec<usize>>")]
pub struct Groups {
    blocks: Vec<Vec<usize>>,
    d: usize,
}

impl Groups {
    pub fn new(blocks: Vec<Vec<usize>>, d: usize) -> Result<Self> {
        let g = Self::unchecked(blocks);
        if g.d != d {
            return Err(FsFgwError::InvalidPartition(format!(
                "groups cover {} features, expected {d}",
                g.d
            )));
        }
        g.check()?;
        Ok(g)
    }

    fn unchecked(blocks: Vec<Vec<usize>>) -> Self {
        let d = blocks.iter().map(|b| b.len()).sum();
        Groups { blocks, d }
    }

    fn check(&self) -> Result<()> {
        let mut seen = vec![false; self.d];
        for (gi, block) in self.blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(FsFgwError::InvalidPartition(format!("group {gi} is empty")));
            }
            for &r in block {
                if r >= self.d {
                    return Err(FsFgwError::InvalidPartition(format!(
                        "feature {r} out of range 0..{}",
                        self.d
                    )));
                }
                if seen[r] {
                    return Err(FsFgwError::InvalidPartition(format!(
                        "feature {r} appears in more than one group"
                    )));
                }
                seen[r] = true;
            }
        }
        if let Some(r) = seen.iter().position(|s| !s) {
            return Err(FsFgwError::InvalidPartition(format!("feature {r} is in no group")));
        }
        Ok(())
    }

    /// One singleton group per feature.
    pub fn singletons(d: usize) -> Self {
        Groups {
            blocks: (0..d).map(|r| vec![r]).collect(),
            d,
        }
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.d
    }

    /// Group index of every feature.
    pub fn membership(&self) -> Vec<usize> {
        let mut out = vec![0; self.d];
        for (gi, block) in self.blocks.iter().enumerate() {
            for &r in block {
                out[r] = gi;
            }
        }
        out
    }

    /// Mean of `values` over each block.
    pub fn means(&self, values: &[f64]) -> Vec<f64> {
        self.blocks
            .iter()
            .map(|b| b.iter().map(|&r| values[r]).sum::<f64>() / b.len() as f64)
            .collect()
    }
}

impl TryFrom<Vec<Vec<usize>>> for Groups {
    type Error = FsFgwError;
    fn try_from(blocks: Vec<Vec<usize>>) -> Result<Self> {
        let g = Groups::unchecked(blocks);
        g.check()?;
        Ok(g)
    }
}

impl From<Groups> for Vec<Vec<usize>> {
    fn from(g: Groups) -> Self {
        g.blocks
    }
}

/// Per-feature suppression weights `w in [0,1]^d`. Group-simplex weights are
/// stored expanded per feature, with the selected group kept alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuppressionWeights {
    pub values: Vec<f64>,
    pub mode: Mode,
    pub groups: Option<Groups>,
    pub active_group: Option<usize>,
}

impl SuppressionWeights {
    pub fn zeros(d: usize, mode: Mode) -> Self {
        SuppressionWeights {
            values: vec![0.0; d],
            mode,
            groups: None,
            active_group: None,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Euclidean distance between two weight vectors.
    pub fn distance(&self, other: &SuppressionWeights) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(u, v)| (u - v) * (u - v))
            .sum::<f64>()
            .sqrt()
    }

    /// Checks the mode-specific shape of the weights.
    pub fn check_invariants(&self) -> Result<()> {
        let bad = |msg: String| Err(FsFgwError::NumericalFailure(msg));
        if self.values.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return bad(format!("{} weights leave [0,1]", self.mode));
        }
        match self.mode {
            Mode::Lasso => {
                if self.values.iter().any(|&w| w != 0.0 && w != 1.0) {
                    return bad("lasso weights must be binary".into());
                }
            }
            Mode::Ridge => {}
            Mode::Simplex => {
                let ones = self.values.iter().filter(|&&w| w == 1.0).count();
                let zeros = self.values.iter().filter(|&&w| w == 0.0).count();
                if ones != 1 || ones + zeros != self.values.len() {
                    return bad("simplex weights must be one-hot".into());
                }
            }
            Mode::GroupSimplex => {
                let (Some(groups), Some(active)) = (&self.groups, self.active_group) else {
                    return bad("group-simplex weights need groups and an active group".into());
                };
                if groups.num_features() != self.values.len() || active >= groups.len() {
                    return bad("group-simplex weights do not match their groups".into());
                }
                let membership = groups.membership();
                for (r, &w) in self.values.iter().enumerate() {
                    let expected = if membership[r] == active { 1.0 } else { 0.0 };
                    if w != expected {
                        return bad(format!("feature {r} has weight {w}, expected {expected}"));
                    }
                }
            }
        }
        Ok(())
    }
}
