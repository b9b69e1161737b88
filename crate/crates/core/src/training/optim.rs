use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Gradients, ParamStore};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Rmsprop,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "rmsprop" => Ok(OptimizerKind::Rmsprop),
            other => Err(Error::Unknown {
                kind: "optimizer",
                name: other.into(),
            }),
        }
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
pub const RMSPROP_DECAY: f64 = 0.9;
pub const RMSPROP_EPS: f64 = 1e-8;

/// One Adam update with bias correction; `t` is the 1-based step count.
pub fn adam_step(params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64], lr: f64, t: u64) {
    let c1 = 1.0 - ADAM_BETA1.powi(t as i32);
    let c2 = 1.0 - ADAM_BETA2.powi(t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

/// One RMSprop update.
pub fn rmsprop_step(params: &mut [f64], grads: &[f64], cache: &mut [f64], lr: f64) {
    for i in 0..params.len() {
        let g = grads[i];
        cache[i] = RMSPROP_DECAY * cache[i] + (1.0 - RMSPROP_DECAY) * g * g;
        params[i] -= lr * g / (cache[i].sqrt() + RMSPROP_EPS);
    }
}

/// Per-parameter optimizer state for a whole [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    t: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, store: &ParamStore) -> Self {
        let zeros: Vec<Vec<f64>> = store.iter().map(|(_, _, t)| vec![0.0; t.len()]).collect();
        Optimizer {
            kind,
            t: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn reset(&mut self) {
        self.t = 0;
        for buf in self.first.iter_mut().chain(self.second.iter_mut()) {
            buf.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    /// Applies one update. Non-finite gradients abort before anything changes.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients, lr: f64) -> Result<()> {
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient passed to the optimizer".into()));
        }
        if grads.len() != store.len() {
            return Err(Error::shape(
                "optimizer",
                "gradients do not match parameters",
            ));
        }
        self.t += 1;
        for (k, (param, grad)) in store.values_mut().zip(grads.iter()).enumerate() {
            match self.kind {
                OptimizerKind::Adam => adam_step(
                    param.data_mut(),
                    grad.data(),
                    &mut self.first[k],
                    &mut self.second[k],
                    lr,
                    self.t,
                ),
                OptimizerKind::Rmsprop => {
                    rmsprop_step(param.data_mut(), grad.data(), &mut self.second[k], lr)
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    /// Scalar simulation: returns the last step size after `n` steps of a
    /// constant gradient.
    fn simulate(kind: OptimizerKind, g: f64, lr: f64, n: usize) -> f64 {
        let (mut p, mut m, mut v) = ([0.0], [0.0], [0.0]);
        let mut last = 0.0;
        for t in 1..=n {
            let before = p[0];
            match kind {
                OptimizerKind::Adam => adam_step(&mut p, &[g], &mut m, &mut v, lr, t as u64),
                OptimizerKind::Rmsprop => rmsprop_step(&mut p, &[g], &mut v, lr),
            }
            last = p[0] - before;
        }
        last
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        for kind in [OptimizerKind::Adam, OptimizerKind::Rmsprop] {
            assert_eq!(simulate(kind, 0.0, 0.01, 10), 0.0);
        }
    }

    #[test]
    fn adam_first_step() {
        let (mut p, mut m, mut v) = ([0.0], [0.0], [0.0]);
        adam_step(&mut p, &[1.0], &mut m, &mut v, 0.001, 1);
        assert!((p[0] + 0.001 / (1.0 + 1e-8)).abs() < 1e-18);
    }

    #[test]
    fn constant_gradient_step_tends_to_lr() {
        for g in [0.01, 1.0, 250.0] {
            let expect = 0.002 * g / (g + 1e-8);
            let adam = simulate(OptimizerKind::Adam, g, 0.002, 5000);
            assert!((adam.abs() - expect).abs() < 1e-12, "adam g={g}: {adam}");
            let rms = simulate(OptimizerKind::Rmsprop, g, 0.002, 500);
            assert!((rms.abs() - expect).abs() < 1e-12, "rmsprop g={g}: {rms}");
            assert!(rms < 0.0 && adam < 0.0);
        }
        let neg = simulate(OptimizerKind::Rmsprop, -3.0, 0.002, 500);
        assert!((neg - 0.002 * 3.0 / (3.0 + 1e-8)).abs() < 1e-12);
    }

    #[test]
    fn rmsprop_is_gradient_scale_free() {
        let a = simulate(OptimizerKind::Rmsprop, 0.5, 0.001, 400);
        let b = simulate(OptimizerKind::Rmsprop, 0.5 * 37.0, 0.001, 400);
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn zero_lr_leaves_params_unchanged() {
        let mut store = ParamStore::new();
        let id = store
            .insert(
                "w",
                Tensor::from_rows(&[&[1.5, -0.0], &[3.25e-7, 8.0]]).unwrap(),
            )
            .unwrap();
        let before = store.clone();
        let mut grads = store.zero_grads();
        grads
            .get_mut(id)
            .data_mut()
            .copy_from_slice(&[0.3, -2.0, 1e6, 0.0]);
        for kind in [OptimizerKind::Adam, OptimizerKind::Rmsprop] {
            let mut opt = Optimizer::new(kind, &store);
            opt.step(&mut store, &grads, 0.0).unwrap();
            assert_eq!(store.get(id).data(), before.get(id).data());
        }
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut store = ParamStore::new();
        let id = store.insert("w", Tensor::vector(vec![1.0, 2.0])).unwrap();
        let before = store.clone();
        let mut grads = store.zero_grads();
        grads.get_mut(id).data_mut()[1] = f64::NAN;
        let mut opt = Optimizer::new(OptimizerKind::Adam, &store);
        assert!(opt.step(&mut store, &grads, 0.1).is_err());
        assert_eq!(store, before);
        assert_eq!(opt.steps_taken(), 0);
    }
}
