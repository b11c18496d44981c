use crate::error::{Error, Result};
use crate::numerics::{Matrix, ParamTensor, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `d × d`, applied as `H Wᵀ`.
    pub weight: ParamTensor,
    /// `1 × d`.
    pub bias: ParamTensor,
}

/// `depth` ReLU layers of width `d`; depth 0 passes input through.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderStack {
    pub layers: Vec<Layer>,
}

impl EncoderStack {
    pub fn new(dim: usize, depth: usize, rng: &mut Rng) -> Self {
        let layers = (0..depth)
            .map(|l| Layer {
                weight: ParamTensor::new(format!("encoder.{l}.weight"), Matrix::xavier(dim, dim, rng)),
                bias: ParamTensor::new(format!("encoder.{l}.bias"), Matrix::zeros(1, dim)),
            })
            .collect();
        Self { layers }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }
}

/// Forward values of every layer: `inputs[l]` is `Hˡ` (so `inputs[0] = E`)
/// and `pre[l]` the pre-activation that produced `Hˡ⁺¹`.
#[derive(Debug, Clone)]
pub struct EncodedStack {
    pub inputs: Vec<Matrix>,
    pub pre: Vec<Matrix>,
}

impl EncodedStack {
    pub fn output(&self) -> &Matrix {
        self.inputs.last().expect("stack keeps its input")
    }
}

pub fn encode(e: &Matrix, stack: &EncoderStack) -> Result<EncodedStack> {
    let mut inputs = vec![e.clone()];
    let mut pre = Vec::with_capacity(stack.depth());
    for layer in &stack.layers {
        let h = inputs.last().unwrap();
        let mut z = h.matmul_t(&layer.weight.value)?;
        let b = layer.bias.value.as_slice();
        if b.len() != z.cols() {
            return Err(Error::Shape {
                op: "encode bias",
                left: z.shape(),
                right: layer.bias.shape(),
            });
        }
        for i in 0..z.rows() {
            for (x, bj) in z.row_mut(i).iter_mut().zip(b) {
                *x += bj;
            }
        }
        let mut out = z.clone();
        out.as_mut_slice().iter_mut().for_each(|x| *x = x.max(0.0));
        pre.push(z);
        inputs.push(out);
    }
    Ok(EncodedStack { inputs, pre })
}

/// Returns the gradient with respect to the stack input `E`.
pub(crate) fn encode_backward(stack: &mut EncoderStack, enc: &EncodedStack, mut d_h: Matrix) -> Result<Matrix> {
    if enc.pre.len() != stack.depth() {
        return Err(Error::MissingCache("encoder stack"));
    }
    for (l, layer) in stack.layers.iter_mut().enumerate().rev() {
        let z = &enc.pre[l];
        for (g, &zv) in d_h.as_mut_slice().iter_mut().zip(z.as_slice()) {
            if zv <= 0.0 {
                *g = 0.0;
            }
        }
        let d_w = d_h.t_matmul(&enc.inputs[l])?;
        layer.weight.grad.add_assign(&d_w)?;
        for i in 0..d_h.rows() {
            for (b, &g) in layer.bias.grad.as_mut_slice().iter_mut().zip(d_h.row(i)) {
                *b += g;
            }
        }
        d_h = d_h.matmul(&layer.weight.value)?;
    }
    Ok(d_h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random(rows: usize, cols: usize, rng: &mut Rng, lo: f64) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.uniform(lo, 1.0)).collect();
        Matrix::new(rows, cols, data).unwrap()
    }

    #[test]
    fn depth_zero_passes_through() {
        let mut rng = Rng::new(1);
        let e = random(3, 4, &mut rng, -1.0);
        let out = encode(&e, &EncoderStack::new(4, 0, &mut rng)).unwrap();
        assert_eq!(out.output(), &e);
    }

    #[test]
    fn identity_layer_fixes_non_negative_input() {
        let mut rng = Rng::new(1);
        let mut stack = EncoderStack::new(3, 1, &mut rng);
        stack.layers[0].weight.value = Matrix::identity(3);
        let e = random(4, 3, &mut rng, 0.0);
        assert_eq!(encode(&e, &stack).unwrap().output(), &e);
    }

    #[test]
    fn matches_straight_line_evaluation() {
        let mut rng = Rng::new(8);
        let mut stack = EncoderStack::new(5, 2, &mut rng);
        for l in &mut stack.layers {
            l.bias.value = random(1, 5, &mut rng, -0.5);
        }
        let e = random(6, 5, &mut rng, -1.0);
        let got = encode(&e, &stack).unwrap();
        // Coordinate-by-coordinate evaluation written independently.
        let mut h: Vec<Vec<f64>> = (0..6).map(|i| e.row(i).to_vec()).collect();
        for l in &stack.layers {
            h = h
                .iter()
                .map(|row| {
                    (0..5)
                        .map(|o| {
                            let mut s = l.bias.value[(0, o)];
                            for (k, x) in row.iter().enumerate() {
                                s += l.weight.value[(o, k)] * x;
                            }
                            if s > 0.0 {
                                s
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect();
        }
        for (i, row) in h.iter().enumerate() {
            for (a, b) in row.iter().zip(got.output().row(i)) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn positively_homogeneous_without_bias() {
        let mut rng = Rng::new(21);
        let stack = EncoderStack::new(6, 2, &mut rng);
        let e = random(5, 6, &mut rng, -1.0);
        let base = encode(&e, &stack).unwrap();
        for t in [0.5, 2.0, 7.3] {
            let mut scaled = e.clone();
            scaled.scale(t);
            let out = encode(&scaled, &stack).unwrap();
            for (a, b) in out.output().as_slice().iter().zip(base.output().as_slice()) {
                assert!((a - t * b).abs() <= 1e-9 * (t * b).abs().max(1e-12) + 1e-15);
            }
        }
    }
}
