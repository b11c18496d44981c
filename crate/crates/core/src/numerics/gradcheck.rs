use crate::numerics::Parameters;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.tensors.iter().all(|t| t.passed)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().fold(0.0, |m, t| m.max(t.max_rel_error))
    }
}

/// Compares the analytic gradients currently stored in `params` against
/// central differences of `f`. Relative error is `|a - n| / max(1, |a|, |n|)`.
pub fn finite_diff_check<P, F>(params: &mut P, mut f: F, epsilon: f64, tolerance: f64) -> GradCheckReport
where
    P: Parameters,
    F: FnMut(&P) -> f64,
{
    assert!(
        (1e-7..=1e-3).contains(&epsilon),
        "finite-difference epsilon {epsilon} outside [1e-7, 1e-3]"
    );
    let count = params.params().len();
    let mut tensors = Vec::with_capacity(count);
    for t in 0..count {
        let (name, analytic) = {
            let p = &params.params()[t];
            (p.name.clone(), p.grad.as_slice().to_vec())
        };
        let mut worst = 0.0f64;
        for (e, &a) in analytic.iter().enumerate() {
            let orig = params.params()[t].value.as_slice()[e];
            params.params_mut()[t].value.as_mut_slice()[e] = orig + epsilon;
            let up = f(params);
            params.params_mut()[t].value.as_mut_slice()[e] = orig - epsilon;
            let down = f(params);
            params.params_mut()[t].value.as_mut_slice()[e] = orig;
            let n = (up - down) / (2.0 * epsilon);
            let rel = (a - n).abs() / 1f64.max(a.abs()).max(n.abs());
            worst = worst.max(rel);
        }
        tensors.push(TensorCheck {
            name,
            max_rel_error: worst,
            passed: worst <= tolerance,
        });
    }
    GradCheckReport { tensors }
}
