//! Independent numerical oracles: a golden-section best response for the
//! country game and central-difference gradients for the surrogate loss.

#![allow(dead_code)]

use coagency::surrogate::{ne_batch, OmegaNetwork};
use coagency::voting::CountryParams;
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Country utility divided by `B_c`: `α q - q² - δ (q + others)²`.
pub fn country_utility(alpha: f64, delta: f64, q: f64, others: f64) -> f64 {
    alpha * q - q * q - delta * (q + others).powi(2)
}

/// Maximizer of a concave function on `[lo, hi]` by golden-section search.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-12 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    (lo + hi) / 2.0
}

pub fn random_params(rng: &mut ChaCha8Rng) -> CountryParams<f64> {
    let c = rng.random_range(1..=6);
    CountryParams {
        alpha: (0..c).map(|_| rng.random_range(0.0..20.0)).collect(),
        delta: (0..c).map(|_| rng.random_range(0.0..1.0)).collect(),
    }
}

/// Best response of country `c` to the others' total, by golden section.
pub fn best_response(p: &CountryParams<f64>, c: usize, others: f64) -> f64 {
    golden_section(|q| country_utility(p.alpha[c], p.delta[c], q, others), -50.0, 50.0)
}

/// Loss evaluated through the forward pass only.
pub fn loss_only(net: &OmegaNetwork<f64>, x: &Array2<f64>, y: &Array2<f64>, delta: &[f64]) -> f64 {
    let alpha = net.forward_batch(x.view()).unwrap();
    let q = ne_batch(alpha.view(), delta);
    (&q - y).mapv(|e| e * e).sum()
}

/// Central differences over every parameter.
pub fn numeric_gradient(net: &OmegaNetwork<f64>, x: &Array2<f64>, y: &Array2<f64>, delta: &[f64], h: f64) -> Vec<f64> {
    let base = net.params_flat();
    let mut probe = net.clone();
    let mut out = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + h;
        probe.set_params_flat(&p).unwrap();
        let up = loss_only(&probe, x, y, delta);
        p[i] = base[i] - h;
        probe.set_params_flat(&p).unwrap();
        let down = loss_only(&probe, x, y, delta);
        out.push((up - down) / (2.0 * h));
    }
    out
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-300)
}

/// Small network with random biases, redrawn until no hidden pre-activation
/// lies within `1e-3` of the ReLU kink, where central differences are invalid.
pub fn random_gradient_config(rng: &mut ChaCha8Rng) -> (OmegaNetwork<f64>, Array2<f64>, Array2<f64>, Vec<f64>) {
    loop {
        let inputs = rng.random_range(2..=6);
        let countries = 3;
        let rows = rng.random_range(1..=5);
        let mut net = OmegaNetwork::<f64>::new(&[inputs, 4, 4, countries], rng.random()).unwrap();
        for b in &mut net.biases {
            b.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
        let x = Array2::from_shape_fn((rows, inputs), |_| rng.random_range(0.0..0.1));
        let y = Array2::from_shape_fn((rows, countries), |_| rng.random_range(-1.0..1.0));
        let delta = (0..countries).map(|_| rng.random_range(0.0..1.0)).collect();
        let cache = net.forward_cached(x.view()).unwrap();
        let hidden = &cache.pre[..cache.pre.len() - 1];
        if hidden.iter().all(|z| z.iter().all(|v| v.abs() > 1e-3)) {
            return (net, x, y, delta);
        }
    }
}
