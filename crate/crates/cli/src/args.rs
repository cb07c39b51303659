use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use fsfgw::{FeatureNorm, FsFgwConfig, FsFgwError, Groups, Mode, Result};

#[derive(Parser, Debug)]
#[command(name = "fsfgw", version, about = "Feature-selected fused Gromov-Wasserstein distances")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve one pair of structured objects.
    Solve {
        x: PathBuf,
        y: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Planted-feature recovery studies on random geometric graphs.
    #[command(subcommand)]
    Synthetic(SyntheticCommand),
    /// All-pairs distance matrix over a directory of object files.
    Pairwise {
        dir: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Compare redistricting plans over a precinct graph.
    #[command(subcommand)]
    Redistrict(RedistrictCommand),
}

#[derive(Subcommand, Debug)]
pub enum SyntheticCommand {
    /// Solve one synthetic pair and report the separation of the weights.
    Recover {
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Separation per mode over a range of planted shifts.
    DeltaSweep {
        #[command(flatten)]
        spec: SpecArgs,
        /// `start:end:count` (inclusive, evenly spaced) or a comma list.
        #[arg(long, default_value = "0.1:5.0:25")]
        deltas: String,
        #[arg(long, value_delimiter = ',', default_value = "lasso,ridge,simplex,group_simplex")]
        modes: Vec<Mode>,
        /// Seeds per delta, starting at --seed.
        #[arg(long, default_value_t = 1)]
        reps: u64,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Detection rates over a sweep of suppression fractions.
    Roc {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5,0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95")]
        fracs: Vec<f64>,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

#[derive(Subcommand, Debug)]
pub enum RedistrictCommand {
    /// Match the districts of two plans and solve every matched pair.
    Compare {
        #[command(flatten)]
        graph: GraphArgs,
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// All-pairs plan distances.
    Matrix {
        #[command(flatten)]
        graph: GraphArgs,
        /// Plan files, or directories holding `plan_*.csv` files.
        #[arg(required = true)]
        plans: Vec<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Complete-linkage clustering of plans by plan distance.
    Cluster {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(required = true)]
        plans: Vec<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

#[derive(Args, Debug)]
pub struct GraphArgs {
    #[arg(long)]
    pub nodes: PathBuf,
    #[arg(long)]
    pub edges: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct SpecArgs {
    #[arg(long, default_value_t = 40)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub d: usize,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 2.0)]
    pub delta: f64,
    /// Connection radius of the random geometric graphs.
    #[arg(long, default_value_t = 0.3)]
    pub radius: f64,
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,
    #[arg(long, default_value_t = Mode::Lasso)]
    pub mode: Mode,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Suppression fraction used to calibrate lambda (default 0.3).
    #[arg(long = "f")]
    pub fraction: Option<f64>,
    /// JSON array of zero-based feature index blocks.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    /// Feature cost normalization; per_feature for synthetic runs and
    /// per_pair otherwise when omitted.
    #[arg(long)]
    pub norm: Option<FeatureNorm>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Parallel solves; all cores when omitted.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value_t = 50)]
    pub max_outer_iter: usize,
    /// Extra random starts for the initial classical plan.
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

impl SolverArgs {
    /// The solver configuration these flags describe. `groups` is used for
    /// group_simplex when no --groups file is given.
    pub fn config(&self, d: usize, default_norm: FeatureNorm, groups: Option<Groups>) -> Result<FsFgwConfig> {
        let penalized = self.mode.is_penalized();
        if !penalized && (self.lambda.is_some() || self.fraction.is_some()) {
            return Err(FsFgwError::InvalidConfig(format!(
                "{} mode takes neither --lambda nor --f",
                self.mode
            )));
        }
        let fraction = match (penalized, self.lambda, self.fraction) {
            (true, None, None) => Some(0.3),
            (_, _, f) => f,
        };
        let groups = match (self.mode, &self.groups) {
            (Mode::GroupSimplex, Some(path)) => Some(fsfgw::io::read_groups(path, d)?),
            (Mode::GroupSimplex, None) => Some(groups.ok_or_else(|| {
                FsFgwError::InvalidConfig("group_simplex mode requires --groups".into())
            })?),
            (_, Some(_)) => {
                return Err(FsFgwError::InvalidConfig(format!(
                    "--groups is only used by group_simplex, not {}",
                    self.mode
                )))
            }
            (_, None) => None,
        };
        let cfg = FsFgwConfig {
            alpha: self.alpha,
            q: self.q,
            mode: self.mode,
            lambda: self.lambda,
            fraction,
            groups,
            max_outer_iter: self.max_outer_iter,
            feature_norm: self.norm.unwrap_or(default_norm),
            seed: self.seed,
            restarts: self.restarts,
            ..Default::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `start:end:count` or `a,b,c`.
pub fn parse_deltas(text: &str) -> Result<Vec<f64>> {
    let bad = || FsFgwError::InvalidConfig(format!("cannot parse deltas '{text}'"));
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [start, end, count] => {
            let start: f64 = start.trim().parse().map_err(|_| bad())?;
            let end: f64 = end.trim().parse().map_err(|_| bad())?;
            let count: usize = count.trim().parse().map_err(|_| bad())?;
            match count {
                0 => Err(bad()),
                1 => Ok(vec![start]),
                _ => Ok((0..count)
                    .map(|i| start + (end - start) * i as f64 / (count - 1) as f64)
                    .collect()),
            }
        }
        [list] => list.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect(),
        _ => Err(bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_grids() {
        assert_eq!(parse_deltas("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_deltas("0.5,2").unwrap(), vec![0.5, 2.0]);
        assert_eq!(parse_deltas("0.1:5.0:25").unwrap().len(), 25);
        assert!(parse_deltas("1:2").is_err());
        assert!(parse_deltas("0:1:0").is_err());
    }
}
