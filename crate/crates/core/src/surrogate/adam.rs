use super::network::{Gradients, OmegaNetwork};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

pub struct Adam<T> {
    cfg: AdamConfig,
    t: i32,
    m: Gradients<T>,
    v: Gradients<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(net: &OmegaNetwork<T>, cfg: AdamConfig) -> Self {
        Adam {
            cfg,
            t: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, net: &mut OmegaNetwork<T>, g: &Gradients<T>) {
        self.t += 1;
        let (b1, b2) = (T::of(self.cfg.beta1), T::of(self.cfg.beta2));
        let one = T::one();
        let c1 = one - b1.powi(self.t);
        let c2 = one - b2.powi(self.t);
        let (lr, eps) = (T::of(self.cfg.lr), T::of(self.cfg.eps));
        let update = |p: &mut T, m: &mut T, v: &mut T, g: T| {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            *p = *p - lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for l in 0..net.weights.len() {
            ndarray::Zip::from(&mut net.weights[l])
                .and(&mut self.m.weights[l])
                .and(&mut self.v.weights[l])
                .and(&g.weights[l])
                .for_each(|p, m, v, &g| update(p, m, v, g));
            ndarray::Zip::from(&mut net.biases[l])
                .and(&mut self.m.biases[l])
                .and(&mut self.v.biases[l])
                .and(&g.biases[l])
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn first_step_moves_by_learning_rate_against_gradient_sign() {
        let mut net = OmegaNetwork::<f64>::zeros(&[1, 2]).unwrap();
        let mut opt = Adam::new(&net, AdamConfig::default());
        let g = Gradients {
            weights: vec![array![[3.0, -0.5]]],
            biases: vec![array![0.0, 2.0]],
        };
        opt.step(&mut net, &g);
        assert!((net.weights[0][[0, 0]] + 1e-3).abs() < 1e-9);
        assert!((net.weights[0][[0, 1]] - 1e-3).abs() < 1e-9);
        assert_eq!(net.biases[0][0], 0.0);
        assert_eq!(opt.steps(), 1);
    }
}
