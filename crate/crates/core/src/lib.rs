pub mod abstraction;
pub mod examples;
pub mod experiment;
pub mod rationality;
pub mod scalar;
pub mod scm;
pub mod surrogate;
pub mod voting;

pub use scalar::Scalar;

pub type Real = f64;
pub type Population = voting::Population<Real>;
pub type Intervention = voting::Intervention<Real>;
pub type OmegaNetwork = surrogate::OmegaNetwork<Real>;
