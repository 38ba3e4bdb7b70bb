//! Test-set evaluation against the constant `λ = 0` baseline.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::delta::{DeltaEstimate, DeltaMethod};
use super::loss::ne_batch;
use super::network::OmegaNetwork;
use super::train::{streams, Dataset};
use super::SurrogateError;
use crate::scalar::{derive_seed, Scalar};
use crate::voting::{median_residual, random_dictator_ne, solve, Intervention, Mechanism, MedianConfig, Population};

/// Dictator draws averaged for the random-dictator baseline.
pub const BASELINE_DRAWS: usize = 10_000;
pub const FLOOR_REDRAWS: usize = 100;
pub const FLOOR_INTERVENTIONS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountryReport {
    pub country: usize,
    pub citizens: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mae_delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mae_alpha: Option<f64>,
    pub mae_q: f64,
    pub baseline_mae_q: f64,
}

/// Smallest expected error any deterministic predictor can reach on a
/// stochastic mechanism, estimated from repeated dictator draws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StochasticityFloor {
    pub interventions: usize,
    pub redraws: usize,
    /// Mean over interventions of `Σ_c E|q_c - median(q_c)|`.
    pub mae: f64,
    /// Mean over interventions of `Σ_c Var(q_c)`.
    pub variance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mechanism: Mechanism,
    pub n_test: usize,
    /// Mean over test interventions of `Σ_c |q̂_c - q_c|`.
    pub model_mae: f64,
    pub baseline_mae: f64,
    pub improvement: f64,
    pub delta_method: DeltaMethod,
    pub delta_hat: Vec<f64>,
    pub baseline_q: Vec<f64>,
    pub per_country: Vec<CountryReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stochasticity_floor: Option<StochasticityFloor>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_fixed_point_residual: Option<f64>,
}

/// Equilibrium predicted constantly by the baseline: the `λ = 0`
/// equilibrium, averaged over dictator draws for the random dictator.
pub fn baseline_q<T: Scalar>(
    pop: &Population<T>,
    mechanism: Mechanism,
    seed: u64,
    median: &MedianConfig,
) -> Result<Vec<f64>, SurrogateError> {
    let zero = Intervention::zeros(pop.total());
    if mechanism != Mechanism::Dictator {
        let ne = solve(mechanism, pop, &zero, seed, median)?;
        return Ok(ne.q.iter().map(|x| x.as_f64()).collect());
    }
    let draws = (0..BASELINE_DRAWS)
        .into_par_iter()
        .map(|k| random_dictator_ne(pop, &zero, derive_seed(seed, k as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut mean = vec![0.0; pop.n_countries()];
    for ne in &draws {
        for (m, q) in mean.iter_mut().zip(&ne.q) {
            *m += q.as_f64();
        }
    }
    Ok(mean.into_iter().map(|m| m / BASELINE_DRAWS as f64).collect())
}

pub fn stochasticity_floor<T: Scalar>(
    pop: &Population<T>,
    interventions: &[Intervention<T>],
    seed: u64,
) -> Result<StochasticityFloor, SurrogateError> {
    let n = interventions.len().min(FLOOR_INTERVENTIONS);
    let per = interventions[..n]
        .par_iter()
        .enumerate()
        .map(|(j, iv)| {
            let draws = (0..FLOOR_REDRAWS)
                .map(|r| random_dictator_ne(pop, iv, derive_seed(derive_seed(seed, j as u64), r as u64)))
                .collect::<Result<Vec<_>, _>>()?;
            let (mut mad, mut var) = (0.0, 0.0);
            for c in 0..pop.n_countries() {
                let mut xs: Vec<f64> = draws.iter().map(|ne| ne.q[c].as_f64()).collect();
                xs.sort_by(f64::total_cmp);
                let med = xs[(xs.len() - 1) / 2];
                let mean = xs.iter().sum::<f64>() / xs.len() as f64;
                mad += xs.iter().map(|x| (x - med).abs()).sum::<f64>() / xs.len() as f64;
                var += xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
            }
            Ok::<_, SurrogateError>((mad, var))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let k = per.len().max(1) as f64;
    Ok(StochasticityFloor {
        interventions: n,
        redraws: FLOOR_REDRAWS,
        mae: per.iter().map(|p| p.0).sum::<f64>() / k,
        variance: per.iter().map(|p| p.1).sum::<f64>() / k,
    })
}

/// Scores the network on `test`. `seed` drives the baseline and floor
/// dictator draws.
pub fn evaluate<T: Scalar>(
    net: &OmegaNetwork<T>,
    delta: &DeltaEstimate<T>,
    pop: &Population<T>,
    mechanism: Mechanism,
    test: &Dataset<T>,
    seed: u64,
    median: &MedianConfig,
) -> Result<EvalReport, SurrogateError> {
    if test.is_empty() {
        return Err(SurrogateError::InvalidConfig("empty test set".into()));
    }
    let c = pop.n_countries();
    let n = test.len() as f64;
    let alpha_hat = net.forward_batch(test.lambdas().view())?;
    let q_hat = ne_batch(alpha_hat.view(), &delta.delta_hat);
    let q = test.targets();
    let base = baseline_q(pop, mechanism, derive_seed(seed, streams::BASELINE), median)?;
    let col_mae = |pred: &Array2<T>, truth: &Array2<T>, k: usize| {
        pred.column(k)
            .iter()
            .zip(truth.column(k))
            .map(|(a, b)| (*a - *b).abs().as_f64())
            .sum::<f64>()
            / n
    };
    let truth_params = if mechanism == Mechanism::Vcg {
        let zero = Intervention::zeros(pop.total());
        let exact_delta = pop.aggregate_params(&zero)?.delta;
        let alpha = test
            .interventions
            .iter()
            .map(|iv| pop.aggregate_params(iv).map(|p| p.alpha))
            .collect::<Result<Vec<_>, _>>()?;
        let alpha = Array2::from_shape_vec((test.len(), c), alpha.concat()).expect("rectangular");
        Some((exact_delta, alpha))
    } else {
        None
    };
    let per_country: Vec<CountryReport> = (0..c)
        .map(|k| CountryReport {
            country: k,
            citizens: pop.countries[k].size(),
            mae_delta: truth_params
                .as_ref()
                .map(|(d, _)| (delta.delta_hat[k] - d[k]).abs().as_f64()),
            mae_alpha: truth_params.as_ref().map(|(_, a)| col_mae(&alpha_hat, a, k)),
            mae_q: col_mae(&q_hat, &q, k),
            baseline_mae_q: q.column(k).iter().map(|x| (x.as_f64() - base[k]).abs()).sum::<f64>() / n,
        })
        .collect();
    let model_mae: f64 = per_country.iter().map(|r| r.mae_q).sum();
    let baseline_mae: f64 = per_country.iter().map(|r| r.baseline_mae_q).sum();
    let stochasticity_floor = if mechanism == Mechanism::Dictator {
        Some(stochasticity_floor(pop, &test.interventions, derive_seed(seed, streams::FLOOR))?)
    } else {
        None
    };
    let max_fixed_point_residual = (mechanism == Mechanism::Median).then(|| {
        test.interventions
            .iter()
            .zip(&test.ne)
            .map(|(iv, ne)| median_residual(pop, iv, &ne.q))
            .fold(0.0, f64::max)
    });
    Ok(EvalReport {
        mechanism,
        n_test: test.len(),
        model_mae,
        baseline_mae,
        improvement: 1.0 - model_mae / baseline_mae,
        delta_method: delta.method,
        delta_hat: delta.delta_hat.iter().map(|x| x.as_f64()).collect(),
        baseline_q: base,
        per_country,
        stochasticity_floor,
        max_fixed_point_residual,
    })
}
