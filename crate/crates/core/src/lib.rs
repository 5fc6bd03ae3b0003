//! Exact verification and chart-switching integration for Okamoto–Painlevé pairs.

pub mod atlas;
pub mod cli;
pub mod hamiltonian;
pub mod integrator;
pub mod kodaira_spencer;
pub mod lattice;
pub mod painleve_db;
pub mod ratfunc;
pub mod report;
