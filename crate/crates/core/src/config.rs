use serde::{Deserialize, Serialize};

use crate::error::{FsFgwError, Result};
use crate::features::FeatureNorm;
use crate::weights::{Groups, Mode};

/// Settings of one fsFGW solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsFgwConfig {
    /// Structure/feature trade-off in `[0, 1]`.
    pub alpha: f64,
    /// Cost exponent, at least 1.
    pub q: f64,
    pub mode: Mode,
    /// Penalty strength; lasso and ridge only.
    pub lambda: Option<f64>,
    /// Suppression fraction used to calibrate lambda; lasso and ridge only.
    pub fraction: Option<f64>,
    pub groups: Option<Groups>,
    pub max_outer_iter: usize,
    pub outer_tol: f64,
    pub cg_max_iter: usize,
    pub cg_tol: f64,
    pub feature_norm: FeatureNorm,
    pub seed: u64,
    /// Extra random starting couplings for the initial classical FGW solve.
    pub restarts: usize,
}

impl Default for FsFgwConfig {
    fn default() -> Self {
        FsFgwConfig {
            alpha: 0.5,
            q: 2.0,
            mode: Mode::Lasso,
            lambda: None,
            fraction: Some(0.3),
            groups: None,
            max_outer_iter: 50,
            outer_tol: 1e-7,
            cg_max_iter: 200,
            cg_tol: 1e-9,
            feature_norm: FeatureNorm::PerPair,
            seed: 0,
            restarts: 4,
        }
    }
}

impl FsFgwConfig {
    pub fn with_mode(mode: Mode) -> Self {
        let mut cfg = FsFgwConfig {
            mode,
            ..Default::default()
        };
        if !mode.is_penalized() {
            cfg.fraction = None;
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(FsFgwError::InvalidConfig(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.q >= 1.0 && self.q.is_finite()) {
            return Err(FsFgwError::InvalidConfig(format!(
                "q must be a finite value >= 1, got {}",
                self.q
            )));
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(FsFgwError::InvalidConfig(format!(
                    "lambda must be positive, got {l}"
                )));
            }
        }
        if let Some(f) = self.fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(FsFgwError::InvalidFraction(f));
            }
        }
        if !(self.outer_tol >= 0.0 && self.cg_tol >= 0.0) {
            return Err(FsFgwError::InvalidConfig("tolerances must be nonnegative".into()));
        }
        match self.mode {
            Mode::Lasso | Mode::Ridge => {
                match (self.lambda, self.fraction) {
                    (Some(_), Some(_)) => {
                        return Err(FsFgwError::InvalidConfig(
                            "lambda and suppression fraction are mutually exclusive".into(),
                        ))
                    }
                    (None, None) => return Err(FsFgwError::MissingLambda),
                    _ => {}
                }
                if self.groups.is_some() {
                    return Err(FsFgwError::InvalidConfig(format!(
                        "groups are only used by group_simplex, not {}",
                        self.mode
                    )));
                }
            }
            Mode::Simplex | Mode::GroupSimplex => {
                if self.lambda.is_some() || self.fraction.is_some() {
                    return Err(FsFgwError::InvalidConfig(format!(
                        "{} mode takes neither lambda nor a suppression fraction",
                        self.mode
                    )));
                }
                match (self.mode, &self.groups) {
                    (Mode::GroupSimplex, None) => {
                        return Err(FsFgwError::InvalidConfig(
                            "group_simplex mode requires groups".into(),
                        ))
                    }
                    (Mode::Simplex, Some(_)) => {
                        return Err(FsFgwError::InvalidConfig(
                            "groups are only used by group_simplex".into(),
                        ))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        assert!(FsFgwConfig::default().validate().is_ok());
        assert!(FsFgwConfig::with_mode(Mode::Simplex).validate().is_ok());
    }

    #[test]
    fn simplex_forbids_lambda() {
        let mut cfg = FsFgwConfig::with_mode(Mode::Simplex);
        cfg.lambda = Some(1.0);
        assert!(matches!(cfg.validate(), Err(FsFgwError::InvalidConfig(_))));
    }

    #[test]
    fn group_simplex_needs_groups() {
        let cfg = FsFgwConfig::with_mode(Mode::GroupSimplex);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn penalized_modes_need_lambda_or_fraction() {
        let mut cfg = FsFgwConfig::with_mode(Mode::Ridge);
        cfg.fraction = None;
        assert!(matches!(cfg.validate(), Err(FsFgwError::MissingLambda)));
        cfg.lambda = Some(0.5);
        assert!(cfg.validate().is_ok());
        cfg.fraction = Some(0.2);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn fraction_out_of_range() {
        let cfg = FsFgwConfig {
            fraction: Some(1.0),
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(FsFgwError::InvalidFraction(_))));
    }
}
