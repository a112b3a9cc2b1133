//! Parameter update rules.

use ndarray::ArrayD;

use super::params::{GradBuffer, ParamStore};

/// Stochastic gradient descent with heavy-ball momentum:
/// `v = momentum * v + g; p -= lr * v`.
#[derive(Debug, Clone)]
pub struct SgdMomentum {
    pub lr: f64,
    pub momentum: f64,
    velocity: Vec<ArrayD<f64>>,
}

impl SgdMomentum {
    pub fn new(lr: f64, momentum: f64, ps: &ParamStore) -> Self {
        SgdMomentum {
            lr,
            momentum,
            velocity: ps.iter().map(|(_, v)| ArrayD::zeros(v.raw_dim())).collect(),
        }
    }

    pub fn step(&mut self, ps: &mut ParamStore, grads: &GradBuffer) {
        let (lr, momentum) = (self.lr, self.momentum);
        for ((value, g), v) in ps.tensors_mut().zip(grads.iter()).zip(self.velocity.iter_mut()) {
            v.zip_mut_with(g, |v, &g| *v = momentum * *v + g);
            value.zip_mut_with(v, |p, &v| *p -= lr * v);
        }
    }
}

/// Adam with the usual bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<ArrayD<f64>>,
    v: Vec<ArrayD<f64>>,
}

impl Adam {
    pub fn new(lr: f64, ps: &ParamStore) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: ps.iter().map(|(_, v)| ArrayD::zeros(v.raw_dim())).collect(),
            v: ps.iter().map(|(_, v)| ArrayD::zeros(v.raw_dim())).collect(),
        }
    }

    pub fn step(&mut self, ps: &mut ParamStore, grads: &GradBuffer) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let (lr, beta1, beta2, eps) = (self.lr, self.beta1, self.beta2, self.eps);
        for (((value, g), m), v) in ps
            .tensors_mut()
            .zip(grads.iter())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            m.zip_mut_with(g, |m, &g| *m = beta1 * *m + (1.0 - beta1) * g);
            v.zip_mut_with(g, |v, &g| *v = beta2 * *v + (1.0 - beta2) * g * g);
            ndarray::Zip::from(value).and(&*m).and(&*v).for_each(|p, &m, &v| {
                *p -= lr * (m / bc1) / ((v / bc2).sqrt() + eps);
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::ParamId;
    use ndarray::ArrayD;

    fn quadratic_setup() -> (ParamStore, ParamId) {
        let mut ps = ParamStore::new();
        let id = ps.register("x", ArrayD::from_elem(vec![1], 5.0));
        (ps, id)
    }

    /// Minimize f(x) = x^2 / 2, gradient x.
    #[test]
    fn sgd_converges_on_quadratic() {
        let (mut ps, id) = quadratic_setup();
        let mut opt = SgdMomentum::new(0.1, 0.9, &ps);
        for _ in 0..500 {
            let mut gb = GradBuffer::zeros_like(&ps);
            gb.add_to(id, &ps.value(id).clone());
            opt.step(&mut ps, &gb);
        }
        assert!(ps.value(id)[[0]].abs() < 1e-6);
    }

    #[test]
    fn adam_converges_on_quadratic() {
        let (mut ps, id) = quadratic_setup();
        let mut opt = Adam::new(0.1, &ps);
        for _ in 0..600 {
            let mut gb = GradBuffer::zeros_like(&ps);
            gb.add_to(id, &ps.value(id).clone());
            opt.step(&mut ps, &gb);
        }
        assert!(ps.value(id)[[0]].abs() < 1e-4);
    }
}
