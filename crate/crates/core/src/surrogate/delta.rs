//! Estimation of the spillover coefficients `δ_c`.

use serde::{Deserialize, Serialize};

use super::SurrogateError;
use crate::scalar::Scalar;
use crate::voting::{solve, zero_on_country_interventions, Mechanism, MedianConfig, Population};

/// Interventions per country used by the regression.
pub const DELTA_RUNS: usize = 10;
/// Minimum variance of `Q_W` across the regression runs.
pub const MIN_DESIGN_VARIANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMethod {
    Regression,
    PlugIn,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeltaEstimate<T> {
    pub delta_hat: Vec<T>,
    pub method: DeltaMethod,
    /// Standard error of each fitted slope (zero for the plug-in).
    pub slope_se: Vec<f64>,
    /// `(Q_W, q_c)` pairs behind each country's fit.
    pub pairs: Vec<Vec<(f64, f64)>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OlsFit {
    pub intercept: f64,
    pub slope: f64,
    pub slope_se: f64,
}

/// Ordinary least squares `y = intercept + slope · x`.
pub fn ols(x: &[f64], y: &[f64]) -> Option<OlsFit> {
    let n = x.len() as f64;
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx / n < MIN_DESIGN_VARIANCE {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = if x.len() > 2 {
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(OlsFit {
        intercept,
        slope,
        slope_se,
    })
}

/// `δ̂_c = mean_i d_{ci} / b_{ci}`.
pub fn plug_in_delta<T: Scalar>(pop: &Population<T>) -> DeltaEstimate<T> {
    let delta_hat = pop
        .countries
        .iter()
        .map(|c| {
            let s = c.citizens.iter().fold(T::zero(), |s, z| s + z.d / z.b);
            s / T::of(c.size() as f64)
        })
        .collect();
    DeltaEstimate {
        delta_hat,
        method: DeltaMethod::PlugIn,
        slope_se: vec![0.0; pop.n_countries()],
        pairs: vec![Vec::new(); pop.n_countries()],
    }
}

/// Per country: solve `DELTA_RUNS` equilibria with that country untouched
/// and regress `q_c` on `Q_W`; `δ̂_c = -slope`.
pub fn regress_delta<T: Scalar>(
    mechanism: Mechanism,
    pop: &Population<T>,
    seed: u64,
    median: &MedianConfig,
) -> Result<DeltaEstimate<T>, SurrogateError> {
    let mut delta_hat = Vec::with_capacity(pop.n_countries());
    let mut slope_se = Vec::with_capacity(pop.n_countries());
    let mut pairs = Vec::with_capacity(pop.n_countries());
    for c in 0..pop.n_countries() {
        let ivs = zero_on_country_interventions(pop, c, seed, DELTA_RUNS)?;
        let mut xy = Vec::with_capacity(ivs.len());
        for (k, iv) in ivs.iter().enumerate() {
            let ne = solve(mechanism, pop, iv, crate::scalar::derive_seed(seed, k as u64), median)?;
            xy.push((ne.q_w.as_f64(), ne.q[c].as_f64()));
        }
        let (x, y): (Vec<f64>, Vec<f64>) = xy.iter().copied().unzip();
        let fit = ols(&x, &y).ok_or_else(|| {
            let n = x.len() as f64;
            let m = x.iter().sum::<f64>() / n;
            SurrogateError::DegenerateDesign {
                country: c,
                variance: x.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / n,
            }
        })?;
        delta_hat.push(T::of(-fit.slope));
        slope_se.push(fit.slope_se);
        pairs.push(xy);
    }
    Ok(DeltaEstimate {
        delta_hat,
        method: DeltaMethod::Regression,
        slope_se,
        pairs,
    })
}

/// Regression for VCG and median voting, plug-in for the random dictator.
pub fn estimate_delta<T: Scalar>(
    mechanism: Mechanism,
    pop: &Population<T>,
    seed: u64,
    median: &MedianConfig,
) -> Result<DeltaEstimate<T>, SurrogateError> {
    match mechanism {
        Mechanism::Dictator => Ok(plug_in_delta(pop)),
        _ => regress_delta(mechanism, pop, seed, median),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voting::{Citizen, Country};

    #[test]
    fn ols_recovers_a_line() {
        let fit = ols(&[0.0, 1.0, 2.0, 3.0], &[1.0, 0.5, 0.0, -0.5]).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-15 && (fit.intercept - 1.0).abs() < 1e-15);
        assert!(fit.slope_se < 1e-12);
        assert!(ols(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }

    #[test]
    fn plug_in_is_mean_ratio() {
        let pop = Population {
            countries: vec![Country {
                citizens: vec![Citizen { a: 0.5, b: 1.0, d: 0.1 }, Citizen { a: 0.5, b: 1.0, d: 0.3 }],
            }],
        };
        assert!((plug_in_delta(&pop).delta_hat[0] - 0.2f64).abs() < 1e-15);
    }
}
