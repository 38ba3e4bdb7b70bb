//! Settings, deterministic cyclic mechanism models, parameterized object
//! models, and the solution sets and distributions of mechanized models.

pub mod distribution;
pub mod json;
pub mod model;
pub mod setting;
pub mod solve;
pub mod value;

use thiserror::Error;

pub use distribution::{
    distribution, exact_distribution, solution_distributions, solutions, Distribution, DistributionMode,
    EmpiricalDist, ExactDist, SolveConfig, SolveMethod,
};
pub use model::{
    induce_scm, AnalyticSolutions, DeterministicScm, InducedScm, MechanizedScm, NoiseDist, ObjectVar,
    ParameterizedScm,
};
pub use setting::{project, Setting};
pub use solve::{solve_enumerate, solve_enumerate_grid, solve_fixed_point, FixedPoint, ENUMERATION_LIMIT};
pub use value::{Domain, Layer, Value, VarId, DEFAULT_GRID_STEP, VALUE_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScmError {
    #[error("domain of {var} is not finite; supply a grid or use sampling")]
    NonFiniteDomain { var: String },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("setting leaves variables unassigned: {}", missing.join(", "))]
    IncompleteSolution { missing: Vec<String> },
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("value {value} is outside the domain of {var}")]
    ValueOutOfDomain { var: String, value: String },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid intervention: {0}")]
    InvalidIntervention(String),
    #[error("enumeration of {size:e} settings exceeds the limit of {limit}")]
    EnumerationTooLarge { size: f64, limit: usize },
    #[error("model document: {0}")]
    Json(String),
}
