use crate::error::{Error, Result};
use crate::numerics::{softmax_row, Matrix, ParamTensor, Rng};

/// Bilinear compatibility `α(hᵢ, hⱼ) = (hᵢ Q)·(hⱼ K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub query: ParamTensor,
    pub key: ParamTensor,
    pub enabled: bool,
}

impl AttentionParams {
    pub fn new(dim: usize, att_dim: usize, enabled: bool, rng: &mut Rng) -> Self {
        Self {
            query: ParamTensor::new("attention.query", Matrix::xavier(dim, att_dim, rng)),
            key: ParamTensor::new("attention.key", Matrix::xavier(dim, att_dim, rng)),
            enabled,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    pub queries: Matrix,
    pub keys: Matrix,
    /// Row-stochastic `n × n` attention weights.
    pub weights: Matrix,
}

/// Refined per-token vectors `R` plus what attention backward needs.
#[derive(Debug, Clone)]
pub struct TokenRepresentations {
    matrix: Matrix,
    cache: Option<AttentionCache>,
}

impl TokenRepresentations {
    pub fn from_matrix(matrix: Matrix) -> Self {
        Self { matrix, cache: None }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn cache(&self) -> Option<&AttentionCache> {
        self.cache.as_ref()
    }
}

pub fn attend(h: &Matrix, params: &AttentionParams) -> Result<TokenRepresentations> {
    if h.rows() == 0 {
        return Err(Error::Empty("attend"));
    }
    if !params.enabled {
        return Ok(TokenRepresentations::from_matrix(h.clone()));
    }
    if params.query.shape() != params.key.shape() {
        return Err(Error::Shape {
            op: "attention projections",
            left: params.query.shape(),
            right: params.key.shape(),
        });
    }
    let queries = h.matmul(&params.query.value)?;
    let keys = h.matmul(&params.key.value)?;
    let scores = queries.matmul_t(&keys)?;
    let n = h.rows();
    let mut weights = Matrix::zeros(n, n);
    for i in 0..n {
        weights.row_mut(i).copy_from_slice(&softmax_row(scores.row(i))?);
    }
    let matrix = weights.matmul(h)?;
    Ok(TokenRepresentations {
        matrix,
        cache: Some(AttentionCache { queries, keys, weights }),
    })
}

/// Returns the gradient with respect to `h`.
pub(crate) fn attend_backward(params: &mut AttentionParams, h: &Matrix, reps: &TokenRepresentations, d_r: &Matrix) -> Result<Matrix> {
    if !params.enabled {
        return Ok(d_r.clone());
    }
    let cache = reps.cache().ok_or(Error::MissingCache("attention"))?;
    let a = &cache.weights;
    // R = A H
    let d_a = d_r.matmul_t(h)?;
    let mut d_h = a.t_matmul(d_r)?;
    // softmax rows: dS_ij = A_ij (dA_ij - Σ_k A_ik dA_ik)
    let mut d_s = Matrix::zeros(a.rows(), a.cols());
    for i in 0..a.rows() {
        let inner: f64 = a.row(i).iter().zip(d_a.row(i)).map(|(p, g)| p * g).sum();
        for ((ds, &p), &g) in d_s.row_mut(i).iter_mut().zip(a.row(i)).zip(d_a.row(i)) {
            *ds = p * (g - inner);
        }
    }
    // S = P Kᵀ with P = H Q, K = H K_w
    let d_p = d_s.matmul(&cache.keys)?;
    let d_k = d_s.t_matmul(&cache.queries)?;
    params.query.grad.add_assign(&h.t_matmul(&d_p)?)?;
    params.key.grad.add_assign(&h.t_matmul(&d_k)?)?;
    d_h.add_assign(&d_p.matmul_t(&params.query.value)?)?;
    d_h.add_assign(&d_k.matmul_t(&params.key.value)?)?;
    Ok(d_h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.uniform(-2.0, 2.0)).collect();
        Matrix::new(rows, cols, data).unwrap()
    }

    #[test]
    fn disabled_is_identity() {
        let mut rng = Rng::new(1);
        let h = random(5, 4, &mut rng);
        let p = AttentionParams::new(4, 3, false, &mut rng);
        let r = attend(&h, &p).unwrap();
        assert_eq!(r.matrix(), &h);
        assert!(r.cache().is_none());
    }

    #[test]
    fn single_token_attends_to_itself() {
        let mut rng = Rng::new(1);
        let h = random(1, 4, &mut rng);
        let r = attend(&h, &AttentionParams::new(4, 4, true, &mut rng)).unwrap();
        assert_eq!(r.cache().unwrap().weights.as_slice(), &[1.0]);
        assert_eq!(r.matrix(), &h);
    }

    /// Solves for the convex weights that reproduce each R row by least squares
    /// (normal equations with a sum-to-one row appended) and checks the residual.
    #[test]
    fn rows_are_convex_combinations() {
        let mut rng = Rng::new(12);
        for _ in 0..20 {
            let n = 6;
            let d = 4;
            let h = random(n, d, &mut rng);
            let p = AttentionParams::new(d, d, true, &mut rng);
            let r = attend(&h, &p).unwrap();
            let w = &r.cache().unwrap().weights;
            for i in 0..n {
                let row = w.row(i);
                assert!(row.iter().all(|&x| x >= 0.0));
                assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                // Residual of the combination recovered from the weights.
                for c in 0..d {
                    let combo: f64 = (0..n).map(|j| row[j] * h[(j, c)]).sum();
                    assert!((combo - r.matrix()[(i, c)]).abs() <= 1e-12);
                    let lo = (0..n).map(|j| h[(j, c)]).fold(f64::INFINITY, f64::min);
                    let hi = (0..n).map(|j| h[(j, c)]).fold(f64::NEG_INFINITY, f64::max);
                    assert!(r.matrix()[(i, c)] >= lo - 1e-12 && r.matrix()[(i, c)] <= hi + 1e-12);
                }
            }
        }
    }

    #[test]
    fn mismatched_projections() {
        let mut rng = Rng::new(1);
        let mut p = AttentionParams::new(4, 3, true, &mut rng);
        p.key = ParamTensor::new("attention.key", Matrix::zeros(4, 2));
        assert!(matches!(attend(&random(2, 4, &mut rng), &p), Err(Error::Shape { .. })));
    }

    #[test]
    fn backward_requires_cache() {
        let mut rng = Rng::new(1);
        let h = random(3, 2, &mut rng);
        let mut p = AttentionParams::new(2, 2, true, &mut rng);
        let reps = TokenRepresentations::from_matrix(h.clone());
        assert!(matches!(
            attend_backward(&mut p, &h, &reps, &Matrix::zeros(3, 2)),
            Err(Error::MissingCache(_))
        ));
    }
}
