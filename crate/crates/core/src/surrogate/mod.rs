//! Learned country-level abstraction of the voting world: `δ̂` by
//! regression (or plug-in), `α̂ = φ(λ)` by a ReLU network trained through the
//! closed-form equilibrium.

pub mod adam;
pub mod delta;
pub mod eval;
pub mod loss;
pub mod network;
pub mod train;

pub use adam::{Adam, AdamConfig};
pub use delta::{estimate_delta, ols, plug_in_delta, regress_delta, DeltaEstimate, DeltaMethod, OlsFit};
pub use eval::{baseline_q, evaluate, stochasticity_floor, CountryReport, EvalReport, StochasticityFloor};
pub use loss::{loss_and_gradient, ne_backward, ne_batch};
pub use network::{Gradients, Init, OmegaNetwork, HIDDEN_WIDTHS, INPUT_SCALE};
pub use train::{fit, generate_dataset, solve_dataset, train, Dataset, TrainConfig, TrainOutcome};

use crate::voting::VotingError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SurrogateError {
    #[error(transparent)]
    Voting(#[from] VotingError),
    #[error("country {country}: Q_W variance {variance:e} across the regression runs is too small")]
    DegenerateDesign { country: usize, variance: f64 },
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("non-finite {what}{}", epoch.map(|e| format!(" in epoch {e}")).unwrap_or_default())]
    NonFinite { epoch: Option<usize>, what: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
