//! Fully connected ReLU network mapping a citizen-level intervention to
//! country-level `α̂`.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SurrogateError;
use crate::scalar::Scalar;

pub const HIDDEN_WIDTHS: [usize; 4] = [128, 256, 256, 128];
/// Weight initialization scheme.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Weights `U(±sqrt(6 / (fan_in + fan_out)))`, biases zero.
    #[default]
    GlorotUniform,
    /// Weights and biases `U(±1 / sqrt(fan_in))`.
    FanInUniform,
}

/// Default factor applied to inputs before the first layer.
pub const INPUT_SCALE: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct OmegaNetwork<T> {
    /// `weights[l]` has shape `(fan_in, fan_out)`.
    pub weights: Vec<Array2<T>>,
    pub biases: Vec<Array1<T>>,
    pub input_scale: T,
}

/// Parameter-shaped gradient (or optimizer moment) buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub weights: Vec<Array2<T>>,
    pub biases: Vec<Array1<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(net: &OmegaNetwork<T>) -> Self {
        Gradients {
            weights: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: net.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    /// Flattened in the order of [`OmegaNetwork::params_flat`].
    pub fn flat(&self) -> Vec<T> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|x| x.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|x| x.is_finite()))
    }
}

/// Activations kept by [`OmegaNetwork::forward_cached`] for the backward pass.
pub struct ForwardCache<T> {
    /// Input to each layer (the scaled input first).
    pub inputs: Vec<Array2<T>>,
    /// Pre-activations of each layer.
    pub pre: Vec<Array2<T>>,
    pub output: Array2<T>,
}

impl<T: Scalar> OmegaNetwork<T> {
    /// Glorot-uniform weights, zero biases.
    pub fn new(widths: &[usize], seed: u64) -> Result<Self, SurrogateError> {
        Self::with_init(widths, Init::GlorotUniform, seed)
    }

    pub fn with_init(widths: &[usize], init: Init, seed: u64) -> Result<Self, SurrogateError> {
        check_widths(widths)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(widths.len() - 1);
        let mut biases = Vec::with_capacity(widths.len() - 1);
        for w in widths.windows(2) {
            let (limit, bias_limit) = match init {
                Init::GlorotUniform => ((6.0 / (w[0] + w[1]) as f64).sqrt(), 0.0),
                Init::FanInUniform => {
                    let l = 1.0 / (w[0] as f64).sqrt();
                    (l, l)
                }
            };
            weights.push(Array2::from_shape_simple_fn((w[0], w[1]), || {
                T::of(rng.random_range(-limit..limit))
            }));
            biases.push(if bias_limit > 0.0 {
                Array1::from_shape_simple_fn(w[1], || T::of(rng.random_range(-bias_limit..bias_limit)))
            } else {
                Array1::zeros(w[1])
            });
        }
        Ok(OmegaNetwork {
            weights,
            biases,
            input_scale: T::of(INPUT_SCALE),
        })
    }

    /// `[input, 128, 256, 256, 128, output]`.
    pub fn standard(input: usize, output: usize, seed: u64) -> Result<Self, SurrogateError> {
        Self::standard_with(input, output, Init::GlorotUniform, seed)
    }

    pub fn standard_with(input: usize, output: usize, init: Init, seed: u64) -> Result<Self, SurrogateError> {
        let mut widths = vec![input];
        widths.extend(HIDDEN_WIDTHS);
        widths.push(output);
        Self::with_init(&widths, init, seed)
    }

    pub fn zeros(widths: &[usize]) -> Result<Self, SurrogateError> {
        check_widths(widths)?;
        Ok(OmegaNetwork {
            weights: widths.windows(2).map(|w| Array2::zeros((w[0], w[1]))).collect(),
            biases: widths[1..].iter().map(|&n| Array1::zeros(n)).collect(),
            input_scale: T::of(INPUT_SCALE),
        })
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.weights[0].nrows()];
        w.extend(self.weights.iter().map(Array2::ncols));
        w
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.last().expect("at least one layer").ncols()
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(Array2::len).sum::<usize>() + self.biases.iter().map(Array1::len).sum::<usize>()
    }

    pub fn params_flat(&self) -> Vec<T> {
        Gradients {
            weights: self.weights.clone(),
            biases: self.biases.clone(),
        }
        .flat()
    }

    pub fn set_params_flat(&mut self, flat: &[T]) -> Result<(), SurrogateError> {
        if flat.len() != self.n_params() {
            return Err(SurrogateError::ShapeMismatch {
                expected: self.n_params(),
                got: flat.len(),
            });
        }
        let mut it = flat.iter().copied();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().chain(b.iter_mut()).for_each(|x| *x = it.next().expect("length checked"));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|x| x.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    /// `α̂` for one intervention.
    pub fn forward(&self, lambda: &[T]) -> Result<Vec<T>, SurrogateError> {
        let x = ArrayView2::from_shape((1, lambda.len()), lambda).expect("row vector");
        Ok(self.forward_batch(x)?.row(0).to_vec())
    }

    /// One row of `α̂` per row of `x`.
    pub fn forward_batch(&self, x: ArrayView2<T>) -> Result<Array2<T>, SurrogateError> {
        Ok(self.forward_cached(x)?.output)
    }

    pub fn forward_cached(&self, x: ArrayView2<T>) -> Result<ForwardCache<T>, SurrogateError> {
        if x.ncols() != self.input_dim() {
            return Err(SurrogateError::ShapeMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let last = self.weights.len() - 1;
        let mut inputs = Vec::with_capacity(self.weights.len());
        let mut pre = Vec::with_capacity(self.weights.len());
        let mut a = &x * self.input_scale;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = a.dot(w) + b;
            let next = if l < last { z.mapv(|v| v.max(T::zero())) } else { z.clone() };
            inputs.push(a);
            pre.push(z);
            a = next;
        }
        Ok(ForwardCache {
            inputs,
            pre,
            output: a,
        })
    }

    /// Parameter gradient given `grad_out = ∂L/∂output` for the cached batch.
    pub fn backward(&self, cache: &ForwardCache<T>, grad_out: ArrayView2<T>) -> Gradients<T> {
        let n = self.weights.len();
        let mut gw = Vec::with_capacity(n);
        let mut gb = Vec::with_capacity(n);
        let mut g = grad_out.to_owned();
        for l in (0..n).rev() {
            if l < n - 1 {
                Zip::from(&mut g)
                    .and(&cache.pre[l])
                    .for_each(|gi, &z| {
                        if z <= T::zero() {
                            *gi = T::zero();
                        }
                    });
            }
            gw.push(cache.inputs[l].t().dot(&g));
            gb.push(g.sum_axis(Axis(0)));
            if l > 0 {
                g = g.dot(&self.weights[l].t());
            }
        }
        gw.reverse();
        gb.reverse();
        Gradients {
            weights: gw,
            biases: gb,
        }
    }
}

fn check_widths(widths: &[usize]) -> Result<(), SurrogateError> {
    if widths.len() < 2 || widths.contains(&0) {
        return Err(SurrogateError::InvalidConfig(format!(
            "network widths must have at least two positive entries, got {widths:?}"
        )));
    }
    Ok(())
}
