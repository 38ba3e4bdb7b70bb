//! Ground-truth datasets and minibatch training of the network.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::delta::{estimate_delta, DeltaEstimate};
use super::loss::loss_and_gradient;
use super::network::{Init, OmegaNetwork};
use super::SurrogateError;
use crate::scalar::{derive_seed, Scalar};
use crate::voting::{sample_interventions, solve, Intervention, Mechanism, MedianConfig, NeResult, Population};

/// Sub-seed streams derived from the training seed.
pub mod streams {
    pub const DELTA: u64 = 1;
    pub const TRAIN_INTERVENTIONS: u64 = 2;
    pub const TRAIN_DICTATORS: u64 = 3;
    pub const INIT: u64 = 4;
    pub const SHUFFLE: u64 = 5;
    pub const TEST_INTERVENTIONS: u64 = 6;
    pub const TEST_DICTATORS: u64 = 7;
    pub const BASELINE: u64 = 8;
    pub const FLOOR: u64 = 9;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub init: Init,
    pub input_scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_train: 1000,
            n_test: 500,
            epochs: 100,
            batch: 32,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            init: Init::FanInUniform,
            input_scale: super::network::INPUT_SCALE,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), SurrogateError> {
        if self.n_train == 0 || self.n_test == 0 || self.epochs == 0 || self.batch == 0 {
            return Err(SurrogateError::InvalidConfig(
                "n_train, n_test, epochs and batch must be positive".into(),
            ));
        }
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !(ok(self.lr) && ok(self.eps) && ok(self.input_scale) && (0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return Err(SurrogateError::InvalidConfig("invalid optimizer constants".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

/// Interventions paired with their ground-truth equilibria.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    pub interventions: Vec<Intervention<T>>,
    pub ne: Vec<NeResult<T>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn len(&self) -> usize {
        self.interventions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interventions.is_empty()
    }

    pub fn lambdas(&self) -> Array2<T> {
        rows(self.interventions.iter().map(|iv| iv.lambda.as_slice()))
    }

    pub fn targets(&self) -> Array2<T> {
        rows(self.ne.iter().map(|ne| ne.q.as_slice()))
    }
}

fn rows<'a, T: Scalar>(it: impl ExactSizeIterator<Item = &'a [T]>) -> Array2<T> {
    let n = it.len();
    let flat: Vec<T> = it.flat_map(|r| r.iter().copied()).collect();
    let width = flat.len().checked_div(n).unwrap_or(0);
    Array2::from_shape_vec((n, width), flat).expect("rectangular rows")
}

/// Solves every intervention in parallel. Intervention `j` uses the dictator
/// seed `derive_seed(seed, j)`.
pub fn solve_dataset<T: Scalar>(
    mechanism: Mechanism,
    pop: &Population<T>,
    interventions: Vec<Intervention<T>>,
    seed: u64,
    median: &MedianConfig,
) -> Result<Dataset<T>, SurrogateError> {
    let ne = interventions
        .par_iter()
        .enumerate()
        .map(|(j, iv)| solve(mechanism, pop, iv, derive_seed(seed, j as u64), median))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset { interventions, ne })
}

pub fn generate_dataset<T: Scalar>(
    mechanism: Mechanism,
    pop: &Population<T>,
    n: usize,
    intervention_seed: u64,
    dictator_seed: u64,
    median: &MedianConfig,
) -> Result<Dataset<T>, SurrogateError> {
    let ivs = sample_interventions(pop, intervention_seed, n)?;
    solve_dataset(mechanism, pop, ivs, dictator_seed, median)
}

/// Minibatch Adam on `data` with `δ̂` fixed. Returns the mean per-sample
/// loss of each epoch.
pub fn fit<T: Scalar>(
    net: &mut OmegaNetwork<T>,
    data: &Dataset<T>,
    delta: &[T],
    cfg: &TrainConfig,
) -> Result<Vec<f64>, SurrogateError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(SurrogateError::InvalidConfig("empty training set".into()));
    }
    let x = data.lambdas();
    let y = data.targets();
    let mut opt = Adam::new(net, cfg.adam());
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, streams::SHUFFLE));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch) {
            let xb = x.select(Axis(0), chunk);
            let yb = y.select(Axis(0), chunk);
            let (loss, grads) = loss_and_gradient(net, xb.view(), yb.view(), delta).map_err(|e| match e {
                SurrogateError::NonFinite { what, .. } => SurrogateError::NonFinite {
                    epoch: Some(epoch),
                    what,
                },
                other => other,
            })?;
            total += loss.as_f64();
            opt.step(net, &grads);
        }
        if !net.is_finite() {
            return Err(SurrogateError::NonFinite {
                epoch: Some(epoch),
                what: "parameters".into(),
            });
        }
        curve.push(total / data.len() as f64);
    }
    Ok(curve)
}

pub struct TrainOutcome<T> {
    pub net: OmegaNetwork<T>,
    pub delta: DeltaEstimate<T>,
    pub curve: Vec<f64>,
    pub data: Dataset<T>,
}

/// Estimates `δ̂`, solves `n_train` ground-truth equilibria and fits a
/// freshly initialized network.
pub fn train<T: Scalar>(
    pop: &Population<T>,
    mechanism: Mechanism,
    cfg: &TrainConfig,
    median: &MedianConfig,
) -> Result<TrainOutcome<T>, SurrogateError> {
    cfg.validate()?;
    let delta = estimate_delta(mechanism, pop, derive_seed(cfg.seed, streams::DELTA), median)?;
    let data = generate_dataset(
        mechanism,
        pop,
        cfg.n_train,
        derive_seed(cfg.seed, streams::TRAIN_INTERVENTIONS),
        derive_seed(cfg.seed, streams::TRAIN_DICTATORS),
        median,
    )?;
    let mut net = OmegaNetwork::standard_with(pop.total(), pop.n_countries(), cfg.init, derive_seed(cfg.seed, streams::INIT))?;
    net.input_scale = T::of(cfg.input_scale);
    let curve = fit(&mut net, &data, &delta.delta_hat, cfg)?;
    Ok(TrainOutcome {
        net,
        delta,
        curve,
        data,
    })
}
