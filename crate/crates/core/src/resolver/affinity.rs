use crate::encoder::{span_repr, span_repr_backward, TokenRepresentations};
use crate::error::{Error, Result};
use crate::numerics::{softmax_row, Matrix, ParamTensor, Rng};
use crate::textmodel::MentionSpan;

/// Separate projection heads for the antecedent and anaphor roles.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityParams {
    /// `3d × d_aff`
    pub antecedent: ParamTensor,
    /// `3d × d_aff`
    pub anaphor: ParamTensor,
}

impl AffinityParams {
    pub fn new(span_dim: usize, aff_dim: usize, rng: &mut Rng) -> Self {
        Self {
            antecedent: ParamTensor::new("affinity.antecedent", Matrix::xavier(span_dim, aff_dim, rng)),
            anaphor: ParamTensor::new("affinity.anaphor", Matrix::xavier(span_dim, aff_dim, rng)),
        }
    }

    pub fn dim(&self) -> usize {
        self.antecedent.value.cols()
    }
}

/// Per-anaphor scores over candidates `[ε, 0, 1, .., j-1]`. Candidate slot 0
/// is the dummy antecedent; slot `i + 1` is mention `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    raw: Vec<Vec<f64>>,
    attn: Vec<Vec<f64>>,
}

impl AffinityMatrix {
    /// `raw[j]` must hold `j + 1` scores with the dummy's score (slot 0) exactly 0.
    pub fn from_raw(raw: Vec<Vec<f64>>) -> Result<Self> {
        for (j, row) in raw.iter().enumerate() {
            if row.len() != j + 1 {
                return Err(Error::Shape {
                    op: "affinity row",
                    left: (j, row.len()),
                    right: (j, j + 1),
                });
            }
            if row[0] != 0.0 {
                return Err(Error::Config(format!("dummy score of anaphor {j} must be 0")));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("affinity row {j}")));
            }
        }
        let attn = raw.iter().map(|r| softmax_row(r)).collect::<Result<_>>()?;
        Ok(Self { raw, attn })
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn raw(&self, anaphor: usize) -> &[f64] {
        &self.raw[anaphor]
    }

    pub fn attn(&self, anaphor: usize) -> &[f64] {
        &self.attn[anaphor]
    }

    pub fn attn_rows(&self) -> &[Vec<f64>] {
        &self.attn
    }
}

/// Forward values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct AffinityForward {
    pub matrix: AffinityMatrix,
    pub spans: Vec<MentionSpan>,
    pub span_reprs: Matrix,
    pub antecedent: Matrix,
    pub anaphor: Matrix,
    pub scale: f64,
}

/// `raw_j[i] = (g_i U)·(g_j V) / √d` for `i < j`, `raw_j[ε] = 0`.
pub fn affinity(spans: &[MentionSpan], reps: &TokenRepresentations, proj: &AffinityParams, d: usize) -> Result<AffinityMatrix> {
    Ok(affinity_forward(spans, reps, proj, d)?.matrix)
}

pub(crate) fn affinity_forward(
    spans: &[MentionSpan],
    reps: &TokenRepresentations,
    proj: &AffinityParams,
    d: usize,
) -> Result<AffinityForward> {
    if d == 0 {
        return Err(Error::Config("affinity scale dimension must be positive".into()));
    }
    let span_dim = 3 * reps.dim();
    if proj.antecedent.value.rows() != span_dim || proj.anaphor.shape() != proj.antecedent.shape() {
        return Err(Error::Shape {
            op: "affinity projections",
            left: proj.antecedent.shape(),
            right: (span_dim, proj.anaphor.value.cols()),
        });
    }
    let mut g = Matrix::zeros(spans.len(), span_dim);
    for (m, &s) in spans.iter().enumerate() {
        g.row_mut(m).copy_from_slice(&span_repr(reps, s)?);
    }
    let u = g.matmul(&proj.antecedent.value)?;
    let v = g.matmul(&proj.anaphor.value)?;
    let scale = 1.0 / (d as f64).sqrt();
    let raw = (0..spans.len())
        .map(|j| {
            std::iter::once(0.0)
                .chain((0..j).map(|i| crate::numerics::dot_product(u.row(i), v.row(j)) * scale))
                .collect()
        })
        .collect();
    Ok(AffinityForward {
        matrix: AffinityMatrix::from_raw(raw)?,
        spans: spans.to_vec(),
        span_reprs: g,
        antecedent: u,
        anaphor: v,
        scale,
    })
}

/// Backpropagates `d_raw` (same layout as the raw rows) into the projection
/// gradients and returns the gradient on the token representations.
pub(crate) fn affinity_backward(
    proj: &mut AffinityParams,
    fwd: &AffinityForward,
    d_raw: &[Vec<f64>],
    token_count: usize,
) -> Result<Matrix> {
    let (m, a) = fwd.antecedent.shape();
    let mut d_u = Matrix::zeros(m, a);
    let mut d_v = Matrix::zeros(m, a);
    for (j, row) in d_raw.iter().enumerate() {
        for (i, &g) in row.iter().enumerate().skip(1) {
            if g == 0.0 {
                continue;
            }
            let ant = i - 1;
            let c = g * fwd.scale;
            for k in 0..a {
                d_u[(ant, k)] += c * fwd.anaphor[(j, k)];
                d_v[(j, k)] += c * fwd.antecedent[(ant, k)];
            }
        }
    }
    proj.antecedent.grad.add_assign(&fwd.span_reprs.t_matmul(&d_u)?)?;
    proj.anaphor.grad.add_assign(&fwd.span_reprs.t_matmul(&d_v)?)?;
    let mut d_g = d_u.matmul_t(&proj.antecedent.value)?;
    d_g.add_assign(&d_v.matmul_t(&proj.anaphor.value)?)?;
    let mut d_r = Matrix::zeros(token_count, fwd.span_reprs.cols() / 3);
    for (mi, &s) in fwd.spans.iter().enumerate() {
        span_repr_backward(d_g.row(mi), s, &mut d_r)?;
    }
    Ok(d_r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_reps(n: usize, d: usize, rng: &mut Rng) -> TokenRepresentations {
        let data = (0..n * d).map(|_| rng.uniform(-1.0, 1.0)).collect();
        TokenRepresentations::from_matrix(Matrix::new(n, d, data).unwrap())
    }

    #[test]
    fn single_mention_has_only_dummy() {
        let mut rng = Rng::new(1);
        let reps = random_reps(3, 2, &mut rng);
        let p = AffinityParams::new(6, 4, &mut rng);
        let a = affinity(&[MentionSpan::new(1, 1)], &reps, &p, 4).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a.attn(0), &[1.0]);
    }

    #[test]
    fn zero_representations_are_uniform() {
        let mut rng = Rng::new(1);
        let reps = TokenRepresentations::from_matrix(Matrix::zeros(5, 2));
        let p = AffinityParams::new(6, 4, &mut rng);
        let spans: Vec<_> = (0..5).map(|i| MentionSpan::new(i, i)).collect();
        let a = affinity(&spans, &reps, &p, 4).unwrap();
        for j in 0..5 {
            assert!(a.raw(j).iter().all(|&x| x == 0.0));
            for &p in a.attn(j) {
                assert!((p - 1.0 / (j as f64 + 1.0)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn matches_direct_exp_over_sum() {
        let mut rng = Rng::new(77);
        let d = 3;
        let reps = random_reps(8, d, &mut rng);
        let p = AffinityParams::new(3 * d, 5, &mut rng);
        let spans = vec![
            MentionSpan::new(0, 1),
            MentionSpan::new(2, 2),
            MentionSpan::new(3, 5),
            MentionSpan::new(6, 6),
            MentionSpan::new(6, 7),
        ];
        let a = affinity(&spans, &reps, &p, 5).unwrap();
        let g: Vec<Vec<f64>> = spans.iter().map(|&s| span_repr(&reps, s).unwrap()).collect();
        let proj = |m: &Matrix, x: &[f64]| -> Vec<f64> { (0..m.cols()).map(|k| (0..x.len()).map(|r| x[r] * m[(r, k)]).sum()).collect() };
        for j in 0..spans.len() {
            let v = proj(&p.anaphor.value, &g[j]);
            let mut scores = vec![0.0];
            for gi in &g[..j] {
                let u = proj(&p.antecedent.value, gi);
                scores.push(u.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>() / 5f64.sqrt());
            }
            let z: f64 = scores.iter().map(|s| s.exp()).sum();
            for (i, s) in scores.iter().enumerate() {
                assert!((a.attn(j)[i] - s.exp() / z).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn from_raw_validates() {
        assert!(AffinityMatrix::from_raw(vec![vec![0.0], vec![0.0]]).is_err());
        assert!(AffinityMatrix::from_raw(vec![vec![0.5]]).is_err());
        assert!(AffinityMatrix::from_raw(vec![]).unwrap().is_empty());
    }
}
