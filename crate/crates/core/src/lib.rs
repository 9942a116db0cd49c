//! Equilibrium effort in networks of perishable information goods.

pub mod empirics;
pub mod equilibrium;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod numerics;

pub use equilibrium::{
    certify_uniqueness, multi_start, solve, stability_analytic, stability_perturbation,
    symmetric_equilibrium, tau_hat, verify_equilibrium, EquilibriumResult, Initialization,
    Schedule, SolverConfig, SweepOrder,
};
pub use error::{Error, Result};
pub use graph::{make_family, EffortProfile, Graph, GraphFamily};
pub use numerics::ModelParams;
