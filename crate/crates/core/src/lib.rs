//! Feature-selected fused Gromov-Wasserstein distances between attributed
//! graphs, with an exact transport solver, a conditional-gradient FGW solver
//! and closed-form suppression-weight updates.

pub mod config;
pub mod error;
pub mod features;
pub mod fgw;
pub mod io;
pub mod object;
pub mod pipelines;
pub mod suppression;
pub mod transport;
pub mod weights;

pub use config::FsFgwConfig;
pub use error::{FsFgwError, Result};
pub use features::FeatureNorm;
pub use object::{StructuredObject, TransportPlan};
pub use suppression::{solve_classical_fgw, solve_fsfgw, SolveResult};
pub use weights::{Groups, Mode, SuppressionWeights};
