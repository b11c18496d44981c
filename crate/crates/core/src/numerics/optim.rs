use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// A trainable tensor with its gradient and AdamW moment accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
    first_moment: Matrix,
    second_moment: Matrix,
}

impl ParamTensor {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        let (r, c) = value.shape();
        Self {
            name: name.into(),
            value,
            grad: Matrix::zeros(r, c),
            first_moment: Matrix::zeros(r, c),
            second_moment: Matrix::zeros(r, c),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.shape()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    /// Drop optimizer history, keeping the value.
    pub fn reset_state(&mut self) {
        self.zero_grad();
        self.first_moment.fill(0.0);
        self.second_moment.fill(0.0);
    }
}

/// Anything that owns a fixed, ordered list of parameter tensors.
pub trait Parameters {
    fn params(&self) -> Vec<&ParamTensor>;
    fn params_mut(&mut self) -> Vec<&mut ParamTensor>;

    fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }
}

impl Parameters for Vec<ParamTensor> {
    fn params(&self) -> Vec<&ParamTensor> {
        self.iter().collect()
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.iter_mut().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamW {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

impl AdamW {
    /// One bias-corrected step with decoupled weight decay. Gradients are
    /// zeroed afterwards. A non-finite gradient aborts before anything moves.
    pub fn step(&self, params: &mut [&mut ParamTensor], lr: f64, step_index: u64) -> Result<()> {
        assert!(step_index >= 1, "AdamW step index starts at 1");
        if let Some(bad) = params.iter().find(|p| !p.grad.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of {}", bad.name)));
        }
        let t = step_index as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for p in params.iter_mut() {
            let ParamTensor {
                value,
                grad,
                first_moment,
                second_moment,
                ..
            } = &mut **p;
            let it = value
                .as_mut_slice()
                .iter_mut()
                .zip(grad.as_slice())
                .zip(first_moment.as_mut_slice())
                .zip(second_moment.as_mut_slice());
            for (((w, &g), m), v) in it {
                *w -= lr * self.weight_decay * *w;
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
            grad.fill(0.0);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(w: f64) -> ParamTensor {
        ParamTensor::new("w", Matrix::new(1, 1, vec![w]).unwrap())
    }

    #[test]
    fn zero_grad_zero_decay_is_identity() {
        let opt = AdamW {
            weight_decay: 0.0,
            ..AdamW::default()
        };
        let mut p = ParamTensor::new("m", Matrix::new(2, 2, vec![1.0, -2.0, 0.5, 3.0]).unwrap());
        let before = p.value.clone();
        for t in 1..=5 {
            opt.step(&mut [&mut p], 0.1, t).unwrap();
        }
        assert_eq!(p.value, before);
    }

    #[test]
    fn moves_against_gradient_and_clears_it() {
        let opt = AdamW {
            weight_decay: 0.0,
            ..AdamW::default()
        };
        let mut p = scalar(1.0);
        p.grad[(0, 0)] = 1.0;
        opt.step(&mut [&mut p], 0.1, 1).unwrap();
        assert!(p.value[(0, 0)] < 1.0);
        assert_eq!(p.grad[(0, 0)], 0.0);
    }

    #[test]
    fn converges_on_quadratic() {
        let opt = AdamW {
            weight_decay: 0.0,
            ..AdamW::default()
        };
        let mut p = scalar(0.0);
        for t in 1..=1000 {
            let w = p.value[(0, 0)];
            p.grad[(0, 0)] = 2.0 * (w - 3.0);
            opt.step(&mut [&mut p], 0.05, t).unwrap();
        }
        assert!((p.value[(0, 0)] - 3.0).abs() <= 1e-2, "{:?}", p.value);
    }

    #[test]
    fn non_finite_gradient_aborts_and_names_tensor() {
        let opt = AdamW::default();
        let mut a = scalar(1.0);
        let mut b = ParamTensor::new("bad", Matrix::zeros(1, 1));
        a.grad[(0, 0)] = 1.0;
        b.grad.as_mut_slice()[0] = f64::NAN;
        let err = opt.step(&mut [&mut a, &mut b], 0.1, 1).unwrap_err();
        assert!(err.to_string().contains("bad"));
        assert_eq!(a.value[(0, 0)], 1.0);
    }
}
