use crate::encoder::TokenRepresentations;
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::textmodel::MentionSpan;

/// `[R_start, R_end, mean(R_start..=R_end)]`, length `3d`.
pub fn span_repr(reps: &TokenRepresentations, span: MentionSpan) -> Result<Vec<f64>> {
    let r = reps.matrix();
    check(span, r.rows())?;
    let d = r.cols();
    let mut out = Vec::with_capacity(3 * d);
    out.extend_from_slice(r.row(span.start));
    out.extend_from_slice(r.row(span.end));
    let mut mean = vec![0.0; d];
    for t in span.start..=span.end {
        for (m, x) in mean.iter_mut().zip(r.row(t)) {
            *m += x;
        }
    }
    let w = span.width() as f64;
    out.extend(mean.into_iter().map(|m| m / w));
    Ok(out)
}

/// Adds the gradient of a span vector back onto the token rows of `d_r`.
pub fn span_repr_backward(d_g: &[f64], span: MentionSpan, d_r: &mut Matrix) -> Result<()> {
    check(span, d_r.rows())?;
    let d = d_r.cols();
    if d_g.len() != 3 * d {
        return Err(Error::Shape {
            op: "span_repr_backward",
            left: (1, d_g.len()),
            right: (1, 3 * d),
        });
    }
    let w = span.width() as f64;
    for (x, g) in d_r.row_mut(span.start).iter_mut().zip(&d_g[..d]) {
        *x += g;
    }
    for (x, g) in d_r.row_mut(span.end).iter_mut().zip(&d_g[d..2 * d]) {
        *x += g;
    }
    for t in span.start..=span.end {
        for (x, g) in d_r.row_mut(t).iter_mut().zip(&d_g[2 * d..]) {
            *x += g / w;
        }
    }
    Ok(())
}

fn check(span: MentionSpan, n: usize) -> Result<()> {
    if span.start > span.end || span.end >= n {
        return Err(Error::InvalidDocument {
            doc: format!("span [{}, {}]", span.start, span.end),
            msg: format!("span outside {n} tokens"),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn reps(rows: Vec<Vec<f64>>) -> TokenRepresentations {
        TokenRepresentations::from_matrix(Matrix::from_rows(&rows).unwrap())
    }

    #[test]
    fn width_one_repeats_row() {
        let r = reps(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(span_repr(&r, MentionSpan::new(1, 1)).unwrap(), vec![3.0, 4.0, 3.0, 4.0, 3.0, 4.0]);
    }

    #[test]
    fn constant_rows() {
        let r = reps(vec![vec![0.5, -1.0]; 4]);
        assert_eq!(span_repr(&r, MentionSpan::new(0, 3)).unwrap(), [0.5, -1.0].repeat(3));
    }

    #[test]
    fn mean_matches_naive_average() {
        let mut rng = Rng::new(3);
        for _ in 0..50 {
            let n = rng.range(1, 10);
            let d = rng.range(1, 6);
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.uniform(-3.0, 3.0)).collect()).collect();
            let r = reps(rows.clone());
            let s = rng.range(0, n - 1);
            let e = rng.range(s, n - 1);
            let g = span_repr(&r, MentionSpan::new(s, e)).unwrap();
            for c in 0..d {
                let mut total = 0.0;
                let mut count = 0.0;
                for row in &rows[s..=e] {
                    total += row[c];
                    count += 1.0;
                }
                assert!((g[2 * d + c] - total / count).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn out_of_range() {
        let r = reps(vec![vec![1.0]]);
        assert!(span_repr(&r, MentionSpan::new(0, 1)).is_err());
    }
}
