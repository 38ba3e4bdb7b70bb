//! Citizen-level pollution game: population generation, interventions on
//! citizen preferences, and Nash equilibria under VCG, median and
//! random-dictator voting.
//!
//! Citizen `i` of country `c` has utility `a q_c - b q_c² - d Q_W²` with
//! `Q_W = Σ_c q_c`. An intervention replaces `a` with `a - λ`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::scalar::{derive_seed, Scalar};

/// Upper bound of a single citizen's intervention.
pub const LAMBDA_MAX: f64 = 0.1;
pub const BETA_CONCENTRATION: f64 = 10.0;
pub const DEFAULT_DAMPING: f64 = 0.3;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VotingError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("citizen {citizen} of country {country} has negative preference a - λ = {value}")]
    NegativePreference { country: usize, citizen: usize, value: f64 },
    #[error("median iteration did not converge after {iterations} iterations (step {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("intervention has {got} entries, population has {expected} citizens")]
    ShapeMismatch { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Vcg,
    Median,
    Dictator,
}

impl Mechanism {
    pub const ALL: [Mechanism; 3] = [Mechanism::Vcg, Mechanism::Median, Mechanism::Dictator];

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Vcg => "vcg",
            Mechanism::Median => "median",
            Mechanism::Dictator => "dictator",
        }
    }

    pub fn is_stochastic(self) -> bool {
        self == Mechanism::Dictator
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mechanism {
    type Err = VotingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "vcg" => Ok(Mechanism::Vcg),
            "median" => Ok(Mechanism::Median),
            "dictator" | "random-dictator" | "random_dictator" => Ok(Mechanism::Dictator),
            other => Err(VotingError::InvalidConfig(format!("unknown mechanism {other}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Citizen<T> {
    pub a: T,
    pub b: T,
    pub d: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Country<T> {
    pub citizens: Vec<Citizen<T>>,
}

impl<T> Country<T> {
    pub fn size(&self) -> usize {
        self.citizens.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Population<T> {
    pub countries: Vec<Country<T>>,
}

impl<T: Scalar> Population<T> {
    pub fn n_countries(&self) -> usize {
        self.countries.len()
    }

    pub fn total(&self) -> usize {
        self.countries.iter().map(Country::size).sum()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.countries.iter().map(Country::size).collect()
    }

    /// Index of each country's first citizen in a flat intervention vector.
    pub fn offsets(&self) -> Vec<usize> {
        self.countries
            .iter()
            .scan(0, |acc, c| {
                let start = *acc;
                *acc += c.size();
                Some(start)
            })
            .collect()
    }

    /// Ground-truth country parameters `(A_c/B_c, D_c/B_c)` of the summed
    /// (truthfully reported) citizen coefficients.
    pub fn aggregate_params(&self, iv: &Intervention<T>) -> Result<CountryParams<T>, VotingError> {
        self.validate(iv)?;
        let mut alpha = Vec::with_capacity(self.n_countries());
        let mut delta = Vec::with_capacity(self.n_countries());
        for (c, lam) in self.countries.iter().zip(self.blocks(iv)) {
            let (mut a, mut b, mut d) = (T::zero(), T::zero(), T::zero());
            for (z, &l) in c.citizens.iter().zip(lam) {
                a = a + z.a - l;
                b = b + z.b;
                d = d + z.d;
            }
            alpha.push(a / b);
            delta.push(d / b);
        }
        Ok(CountryParams { alpha, delta })
    }

    /// Per-country slices of a flat intervention vector.
    pub fn blocks<'a>(&self, iv: &'a Intervention<T>) -> Vec<&'a [T]> {
        let mut out = Vec::with_capacity(self.n_countries());
        let mut rest = iv.lambda.as_slice();
        for c in &self.countries {
            let (head, tail) = rest.split_at(c.size());
            out.push(head);
            rest = tail;
        }
        out
    }

    /// Checks length and that no citizen's preference turns negative.
    pub fn validate(&self, iv: &Intervention<T>) -> Result<(), VotingError> {
        if iv.lambda.len() != self.total() {
            return Err(VotingError::ShapeMismatch {
                expected: self.total(),
                got: iv.lambda.len(),
            });
        }
        for (c, (country, lam)) in self.countries.iter().zip(self.blocks(iv)).enumerate() {
            for (i, (z, &l)) in country.citizens.iter().zip(lam).enumerate() {
                let v = z.a - l;
                if !(v >= T::zero()) {
                    return Err(VotingError::NegativePreference {
                        country: c,
                        citizen: i,
                        value: v.as_f64(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Sampling ranges. `b` is divided by the country size and `d` by the number
/// of countries; `size_sigma` is the log-scale spread of country sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamRanges {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub d: [f64; 2],
    pub size_sigma: f64,
}

impl Default for ParamRanges {
    fn default() -> Self {
        ParamRanges {
            a: [0.35, 0.65],
            b: [7.0, 13.0],
            d: [0.05, 0.15],
            size_sigma: 0.5,
        }
    }
}

impl ParamRanges {
    fn validate(&self) -> Result<(), VotingError> {
        let ok = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        if !(ok(self.a) && ok(self.b) && ok(self.d)) {
            return Err(VotingError::InvalidConfig("parameter ranges must be finite and ordered".into()));
        }
        if self.a[0] < 0.0 || self.d[0] < 0.0 || self.b[0] <= 0.0 {
            return Err(VotingError::InvalidConfig("need a ≥ 0, b > 0, d ≥ 0".into()));
        }
        if !(self.size_sigma.is_finite() && self.size_sigma >= 0.0) {
            return Err(VotingError::InvalidConfig("size_sigma must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Splits `total` into `weights`-proportional positive integers by the
/// largest-remainder method, after giving every part one unit.
pub fn apportion(weights: &[f64], total: usize) -> Vec<usize> {
    let n = weights.len();
    let spare = (total - n) as f64;
    let sum: f64 = weights.iter().sum();
    let raw: Vec<f64> = weights.iter().map(|w| w / sum * spare).collect();
    let mut out: Vec<usize> = raw.iter().map(|r| 1 + r.floor() as usize).collect();
    let mut left = total - out.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        let (fi, fj) = (raw[i] - raw[i].floor(), raw[j] - raw[j].floor());
        fj.total_cmp(&fi).then(i.cmp(&j))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        out[i] += 1;
        left -= 1;
    }
    out
}

pub fn generate_population<T: Scalar>(
    seed: u64,
    n_countries: usize,
    total_citizens: usize,
    ranges: &ParamRanges,
) -> Result<Population<T>, VotingError> {
    if n_countries == 0 || total_citizens < n_countries {
        return Err(VotingError::InvalidConfig(format!(
            "need 1 ≤ n_countries ≤ total_citizens, got {n_countries} and {total_citizens}"
        )));
    }
    ranges.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lognormal = LogNormal::new(0.0, ranges.size_sigma).map_err(|e| VotingError::InvalidConfig(e.to_string()))?;
    let weights: Vec<f64> = (0..n_countries).map(|_| lognormal.sample(&mut rng)).collect();
    let sizes = apportion(&weights, total_citizens);
    let c = n_countries as f64;
    let mut uniform = |r: [f64; 2], scale: f64| T::of(rng.random_range(r[0]..=r[1]) / scale);
    let countries = sizes
        .iter()
        .map(|&n| Country {
            citizens: (0..n)
                .map(|_| Citizen {
                    a: uniform(ranges.a, 1.0),
                    b: uniform(ranges.b, n as f64),
                    d: uniform(ranges.d, c),
                })
                .collect(),
        })
        .collect();
    Ok(Population { countries })
}

/// Per-citizen reductions `λ_{ci}` of the linear preference, flattened in
/// country order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intervention<T> {
    pub lambda: Vec<T>,
}

impl<T: Scalar> Intervention<T> {
    pub fn zeros(n: usize) -> Self {
        Intervention {
            lambda: vec![T::zero(); n],
        }
    }
}

/// Country-level coefficients `α_c = A_c/B_c`, `δ_c = D_c/B_c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountryParams<T> {
    pub alpha: Vec<T>,
    pub delta: Vec<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Diagnostics {
    Exact,
    Median { iterations: usize, residual: f64 },
    Dictator { indices: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeResult<T> {
    pub q: Vec<T>,
    pub q_w: T,
    pub diagnostics: Diagnostics,
}

/// `Q_W = ½ Σ α_c / (1 + Σ δ_c)` and `q_c = α_c/2 - δ_c Q_W`. `Q_W` is
/// reported as the sum of the `q_c`, which equals the closed form up to
/// rounding.
pub fn ne_from_params<T: Scalar>(p: &CountryParams<T>) -> NeResult<T> {
    let half = T::of(0.5);
    let sum_a = p.alpha.iter().fold(T::zero(), |s, &a| s + a);
    let sum_d = p.delta.iter().fold(T::zero(), |s, &d| s + d);
    let closed = half * sum_a / (T::one() + sum_d);
    let q: Vec<T> = p.alpha.iter().zip(&p.delta).map(|(&a, &d)| half * a - d * closed).collect();
    let q_w = q.iter().fold(T::zero(), |s, &x| s + x);
    NeResult {
        q,
        q_w,
        diagnostics: Diagnostics::Exact,
    }
}

pub fn vcg_ne<T: Scalar>(pop: &Population<T>, iv: &Intervention<T>) -> Result<NeResult<T>, VotingError> {
    Ok(ne_from_params(&pop.aggregate_params(iv)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MedianConfig {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MedianConfig {
    fn default() -> Self {
        MedianConfig {
            damping: DEFAULT_DAMPING,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// A citizen's individually optimal `q_c` given the other countries' total:
/// `(a - λ - 2 d Q_{-c}) / (2 (b + d))`.
pub fn citizen_vote<T: Scalar>(z: &Citizen<T>, lambda: T, q_others: T) -> T {
    let two = T::of(2.0);
    (z.a - lambda - two * z.d * q_others) / (two * (z.b + z.d))
}

/// Lower median; `buf` is reordered.
fn lower_median<T: Scalar>(buf: &mut [T]) -> T {
    let k = (buf.len() - 1) / 2;
    let (_, m, _) = buf.select_nth_unstable_by(k, |x, y| x.partial_cmp(y).expect("finite votes"));
    *m
}

/// Median vote of every country at pollution levels `q`.
pub fn median_targets<T: Scalar>(pop: &Population<T>, iv: &Intervention<T>, q: &[T]) -> Vec<T> {
    let total = q.iter().fold(T::zero(), |s, &x| s + x);
    let mut buf = Vec::new();
    pop.countries
        .iter()
        .zip(pop.blocks(iv))
        .zip(q)
        .map(|((c, lam), &qc)| {
            let others = total - qc;
            buf.clear();
            buf.extend(c.citizens.iter().zip(lam).map(|(z, &l)| citizen_vote(z, l, others)));
            lower_median(&mut buf)
        })
        .collect()
}

/// Largest `|median vote - q_c|` at `q`.
pub fn median_residual<T: Scalar>(pop: &Population<T>, iv: &Intervention<T>, q: &[T]) -> f64 {
    median_targets(pop, iv, q)
        .iter()
        .zip(q)
        .map(|(&t, &x)| (t - x).abs().as_f64())
        .fold(0.0, f64::max)
}

/// Damped simultaneous best response to the median vote, from `q = 0`,
/// until the step's 2-norm is at most `tol`.
pub fn median_ne<T: Scalar>(
    pop: &Population<T>,
    iv: &Intervention<T>,
    cfg: &MedianConfig,
) -> Result<NeResult<T>, VotingError> {
    pop.validate(iv)?;
    if !(cfg.damping > 0.0 && cfg.damping <= 1.0) || !(cfg.tol > 0.0) || cfg.max_iter == 0 {
        return Err(VotingError::InvalidConfig(format!(
            "median solver needs damping in (0, 1], tol > 0, max_iter ≥ 1; got {cfg:?}"
        )));
    }
    let damping = T::of(cfg.damping);
    let mut q = vec![T::zero(); pop.n_countries()];
    let mut step = f64::INFINITY;
    for it in 1..=cfg.max_iter {
        let targets = median_targets(pop, iv, &q);
        let mut sq = T::zero();
        for (x, t) in q.iter_mut().zip(targets) {
            let s = damping * (t - *x);
            *x = *x + s;
            sq = sq + s * s;
        }
        step = sq.sqrt().as_f64();
        if !step.is_finite() {
            break;
        }
        if step <= cfg.tol {
            let q_w = q.iter().fold(T::zero(), |s, &x| s + x);
            return Ok(NeResult {
                q,
                q_w,
                diagnostics: Diagnostics::Median {
                    iterations: it,
                    residual: step,
                },
            });
        }
    }
    Err(VotingError::NoConvergence {
        iterations: cfg.max_iter,
        residual: step,
    })
}

/// Country parameters when citizen `indices[c]` decides for country `c`.
pub fn dictator_params<T: Scalar>(
    pop: &Population<T>,
    iv: &Intervention<T>,
    indices: &[usize],
) -> Result<CountryParams<T>, VotingError> {
    pop.validate(iv)?;
    let mut alpha = Vec::with_capacity(indices.len());
    let mut delta = Vec::with_capacity(indices.len());
    for ((c, lam), &i) in pop.countries.iter().zip(pop.blocks(iv)).zip(indices) {
        let z = c.citizens.get(i).ok_or_else(|| {
            VotingError::InvalidConfig(format!("dictator index {i} out of range for country of size {}", c.size()))
        })?;
        alpha.push((z.a - lam[i]) / z.b);
        delta.push(z.d / z.b);
    }
    Ok(CountryParams { alpha, delta })
}

pub fn draw_dictators<T: Scalar>(pop: &Population<T>, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pop.countries.iter().map(|c| rng.random_range(0..c.size())).collect()
}

pub fn random_dictator_ne<T: Scalar>(
    pop: &Population<T>,
    iv: &Intervention<T>,
    seed: u64,
) -> Result<NeResult<T>, VotingError> {
    let indices = draw_dictators(pop, seed);
    let mut ne = ne_from_params(&dictator_params(pop, iv, &indices)?);
    ne.diagnostics = Diagnostics::Dictator { indices };
    Ok(ne)
}

/// Ground-truth equilibrium under `mechanism`. `seed` only matters for the
/// random dictator.
pub fn solve<T: Scalar>(
    mechanism: Mechanism,
    pop: &Population<T>,
    iv: &Intervention<T>,
    seed: u64,
    median: &MedianConfig,
) -> Result<NeResult<T>, VotingError> {
    match mechanism {
        Mechanism::Vcg => vcg_ne(pop, iv),
        Mechanism::Median => median_ne(pop, iv, median),
        Mechanism::Dictator => random_dictator_ne(pop, iv, seed),
    }
}

fn positive_beta(rng: &mut ChaCha8Rng, mean: f64) -> Result<f64, VotingError> {
    if !(mean > 0.0 && mean < 1.0) {
        return Err(VotingError::InvalidConfig(format!("beta mean {mean} outside (0, 1)")));
    }
    let beta = Beta::new(mean * BETA_CONCENTRATION, (1.0 - mean) * BETA_CONCENTRATION)
        .map_err(|e| VotingError::InvalidConfig(e.to_string()))?;
    loop {
        let x: f64 = beta.sample(rng);
        if x > 0.0 {
            return Ok(x);
        }
    }
}

fn sample_one<T: Scalar>(pop: &Population<T>, rng: &mut ChaCha8Rng, zero: Option<usize>) -> Result<Intervention<T>, VotingError> {
    let mut lambda = Vec::with_capacity(pop.total());
    for (c, country) in pop.countries.iter().enumerate() {
        let mean = loop {
            let m: f64 = rng.random_range(0.0..LAMBDA_MAX);
            if m > 0.0 {
                break m;
            }
        };
        if zero == Some(c) {
            lambda.extend(std::iter::repeat_n(T::zero(), country.size()));
            continue;
        }
        for _ in 0..country.size() {
            let x = positive_beta(rng, mean / LAMBDA_MAX)?;
            lambda.push(T::of(x * LAMBDA_MAX));
        }
    }
    Ok(Intervention { lambda })
}

/// `n` draws: per-country mean `λ_c ~ U[0, 0.1)`, citizen values
/// `0.1 · Beta(10 μ, 10 (1 - μ))` with `μ = 10 λ_c`.
pub fn sample_interventions<T: Scalar>(
    pop: &Population<T>,
    seed: u64,
    n: usize,
) -> Result<Vec<Intervention<T>>, VotingError> {
    if n == 0 {
        return Err(VotingError::InvalidConfig("need at least one intervention".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sample_one(pop, &mut rng, None)).collect()
}

/// Like [`sample_interventions`] with country `c`'s block zero.
pub fn zero_on_country_interventions<T: Scalar>(
    pop: &Population<T>,
    c: usize,
    seed: u64,
    n: usize,
) -> Result<Vec<Intervention<T>>, VotingError> {
    if c >= pop.n_countries() {
        return Err(VotingError::InvalidConfig(format!(
            "country {c} out of range for {} countries",
            pop.n_countries()
        )));
    }
    if n == 0 {
        return Err(VotingError::InvalidConfig("need at least one intervention".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, c as u64));
    (0..n).map(|_| sample_one(pop, &mut rng, Some(c))).collect()
}
