//! Experiment drivers built on the solver.

pub mod assignment;
pub mod cluster;
pub mod geodesic;
pub mod pairwise;
pub mod redistrict;
pub mod synthetic;
