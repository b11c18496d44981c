use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numerics::{Container, Matrix, ParamTensor, Parameters, Payload, StoredTensor, FORMAT_QUANTIZED};

/// Symmetric int8 tensor: `value ≈ scale × q`, `|q| ≤ 127`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTensor {
    pub rows: usize,
    pub cols: usize,
    pub scale: f64,
    pub values: Vec<i8>,
}

impl QuantizedTensor {
    pub fn dequantize(&self) -> Matrix {
        let data = self.values.iter().map(|&q| self.scale * q as f64).collect();
        Matrix::new(self.rows, self.cols, data).expect("finite scale times int8 is finite")
    }
}

/// Rounds a positive scale up to 44 significant bits. With at most 7 more
/// bits from `|q| ≤ 127`, every `scale × q` is then exact, and re-quantizing
/// a dequantized tensor recovers the same scale bit for bit.
fn snap_scale(scale: f64) -> f64 {
    const DROP: u32 = 52 - 43;
    let bits = scale.to_bits();
    let low = bits & ((1 << DROP) - 1);
    if low == 0 {
        scale
    } else {
        f64::from_bits((bits & !((1 << DROP) - 1)) + (1 << DROP))
    }
}

/// `scale = max|w| / 127` (1 for an all-zero tensor), round half to even.
pub fn quantize_matrix(m: &Matrix) -> Result<QuantizedTensor> {
    if !m.is_finite() {
        return Err(Error::NonFinite("weight tensor".into()));
    }
    let max = m.max_abs();
    let scale = if max == 0.0 { 1.0 } else { snap_scale(max / 127.0) };
    let values = m
        .as_slice()
        .iter()
        .map(|&w| {
            let q = (w / scale).round_ties_even().clamp(-127.0, 127.0);
            // keep whichever lattice neighbour is truly nearest
            let best = [q - 1.0, q + 1.0].into_iter().filter(|c| c.abs() <= 127.0).fold(q, |b, c| {
                if (w - c * scale).abs() < (w - b * scale).abs() {
                    c
                } else {
                    b
                }
            });
            best as i8
        })
        .collect();
    Ok(QuantizedTensor {
        rows: m.rows(),
        cols: m.cols(),
        scale,
        values,
    })
}

/// A model whose every tensor is stored as int8.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedModel {
    template: ModelParams,
    pub tensors: Vec<(String, QuantizedTensor)>,
}

pub fn quantize(model: &ModelParams) -> Result<QuantizedModel> {
    let tensors = model
        .params()
        .into_iter()
        .map(|p| {
            quantize_matrix(&p.value)
                .map(|q| (p.name.clone(), q))
                .map_err(|_| Error::NonFinite(format!("weights of {}", p.name)))
        })
        .collect::<Result<_>>()?;
    Ok(QuantizedModel {
        template: model.clone(),
        tensors,
    })
}

/// Back to `f64` for inference.
pub fn dequantize(q: &QuantizedModel) -> ModelParams {
    let mut m = q.template.clone();
    for p in m.params_mut() {
        let (_, t) = q.tensors.iter().find(|(n, _)| *n == p.name).expect("one tensor per parameter");
        *p = ParamTensor::new(p.name.clone(), t.dequantize());
    }
    m
}

impl QuantizedModel {
    pub fn to_container(&self) -> Container {
        let mut c = self.template.to_container();
        c.version = FORMAT_QUANTIZED;
        c.tensors = self
            .tensors
            .iter()
            .map(|(name, t)| StoredTensor {
                name: name.clone(),
                rows: t.rows,
                cols: t.cols,
                payload: Payload::Int8 {
                    scale: t.scale,
                    values: t.values.clone(),
                },
            })
            .collect();
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let template = ModelParams::from_container(c)?;
        let tensors = c
            .tensors
            .iter()
            .map(|t| match &t.payload {
                Payload::Int8 { scale, values } if *scale > 0.0 && values.iter().all(|&v| v != i8::MIN) => Ok((
                    t.name.clone(),
                    QuantizedTensor {
                        rows: t.rows,
                        cols: t.cols,
                        scale: *scale,
                        values: values.clone(),
                    },
                )),
                _ => Err(Error::Format(format!("tensor {} is not a valid int8 tensor", t.name))),
            })
            .collect::<Result<_>>()?;
        Ok(Self { template, tensors })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::numerics::Rng;

    #[test]
    fn zero_tensor() {
        let q = quantize_matrix(&Matrix::zeros(2, 3)).unwrap();
        assert_eq!(q.scale, 1.0);
        assert!(q.values.iter().all(|&v| v == 0));
    }

    #[test]
    fn lattice_points_round_trip() {
        let m = Matrix::new(1, 2, vec![-127.0, 127.0]).unwrap();
        let q = quantize_matrix(&m).unwrap();
        assert_eq!(q.scale, 1.0);
        assert_eq!(q.values, vec![-127, 127]);
        assert_eq!(q.dequantize(), m);
    }

    #[test]
    fn ties_round_to_even() {
        // scale 1: 2.5 → 2, 3.5 → 4, -0.5 → 0
        let m = Matrix::new(1, 4, vec![2.5, 3.5, -0.5, 127.0]).unwrap();
        assert_eq!(quantize_matrix(&m).unwrap().values, vec![2, 4, 0, 127]);
    }

    #[test]
    fn error_bound_on_random_tensors() {
        let mut rng = Rng::new(10);
        for _ in 0..1000 {
            let n = rng.range(1, 64);
            let mag = 10f64.powf(rng.uniform(-6.0, 3.0));
            let m = Matrix::new(1, n, (0..n).map(|_| rng.uniform(-mag, mag)).collect()).unwrap();
            let q = quantize_matrix(&m).unwrap();
            assert!(q.scale > 0.0);
            let back = q.dequantize();
            for (w, d) in m.as_slice().iter().zip(back.as_slice()) {
                assert!((w - d).abs() <= q.scale / 2.0, "{w} {d} {}", q.scale);
            }
            // fixed point of the lattice
            let again = quantize_matrix(&back).unwrap();
            assert_eq!(again, q);
            assert_eq!(again.dequantize(), back);
        }
    }

    #[test]
    fn non_finite_is_rejected() {
        let cfg = ModelConfig {
            dim: 3,
            att_dim: 3,
            aff_dim: 3,
            depth: 1,
            attention: true,
        };
        let mut m = ModelParams::new(cfg, ["a".to_string()], &mut Rng::new(1)).unwrap();
        m.affinity.anaphor.value.as_mut_slice()[0] = f64::INFINITY;
        let err = quantize(&m).unwrap_err();
        assert!(err.to_string().contains("affinity.anaphor"));
    }

    #[test]
    fn model_level_fixed_point_and_container() {
        let cfg = ModelConfig {
            dim: 4,
            att_dim: 3,
            aff_dim: 3,
            depth: 2,
            attention: true,
        };
        let m = ModelParams::new(cfg, ["a".to_string(), "b".to_string()], &mut Rng::new(5)).unwrap();
        let q = quantize(&m).unwrap();
        let d = dequantize(&q);
        assert_eq!(dequantize(&quantize(&d).unwrap()), d);
        let c = q.to_container();
        let bytes = c.to_bytes();
        let back = Container::read_from(&mut bytes.as_slice()).unwrap();
        assert_eq!(QuantizedModel::from_container(&back).unwrap().tensors, q.tensors);
        assert_eq!(ModelParams::from_container(&back).unwrap(), d);
    }
}
