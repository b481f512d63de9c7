//! Statistical verification of the simulated ensembles.

pub mod checks;
pub mod convergence;
pub mod density;
pub mod stats;
pub mod suite;
pub mod summary;
pub mod timechange;

pub use checks::{
    born_rule_test, entropy_identity_test, entropy_slope_test, independence_test, martingale_test,
    observable_variance_test, potential_test,
};
pub use convergence::{ancillary_identity_test, convergence_study, ConvergenceRow};
pub use density::{density_matrices, density_test, expected_density, DensityMatrices};
pub use suite::{verify_run, Report, TestOutcome};
pub use summary::EnsembleSummary;
pub use timechange::{timechange_equivalence_test, TimechangeResult};
