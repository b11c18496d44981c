use serde::Serialize;
use web_time::Instant;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::resolver::{resolve_all, ResolveConfig};
use crate::textmodel::Document;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub repetitions: usize,
    pub tokens: usize,
    /// Wall seconds per repetition over the whole document set.
    pub seconds: Vec<f64>,
    pub tokens_per_second_min: f64,
    pub tokens_per_second_median: f64,
    pub tokens_per_second_max: f64,
    /// Every repetition produced the same clusters.
    pub deterministic: bool,
}

/// Times `repetitions` passes over `docs` after one untimed warm-up pass.
pub fn benchmark(
    model: &ModelParams,
    docs: &[Document],
    repetitions: usize,
    config: &ResolveConfig,
    threads: usize,
) -> Result<BenchReport> {
    if repetitions < 3 {
        return Err(Error::Config("benchmark needs at least 3 repetitions".into()));
    }
    let tokens: usize = docs.iter().map(Document::len).sum();
    let reference: Vec<_> = resolve_all(docs, model, config, threads)?.into_iter().map(|r| r.clusters).collect();
    let mut seconds = Vec::with_capacity(repetitions);
    let mut deterministic = true;
    for _ in 0..repetitions {
        let start = Instant::now();
        let out = resolve_all(docs, model, config, threads)?;
        seconds.push(start.elapsed().as_secs_f64());
        deterministic &= out.iter().map(|r| &r.clusters).eq(reference.iter());
    }
    let mut rates: Vec<f64> = seconds
        .iter()
        .map(|&s| if s > 0.0 { tokens as f64 / s } else { f64::INFINITY })
        .collect();
    rates.sort_by(f64::total_cmp);
    Ok(BenchReport {
        repetitions,
        tokens,
        tokens_per_second_min: rates[0],
        tokens_per_second_median: rates[rates.len() / 2],
        tokens_per_second_max: rates[rates.len() - 1],
        seconds,
        deterministic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::numerics::Rng;
    use crate::textmodel::generate_synthetic_corpus;

    #[test]
    fn three_reps_one_doc() {
        let docs = generate_synthetic_corpus(1, 1, 40, 20).unwrap();
        let m = ModelParams::new(ModelConfig::default(), docs[0].tokens.clone(), &mut Rng::new(1)).unwrap();
        let r = benchmark(&m, &docs, 3, &ResolveConfig::default(), 1).unwrap();
        assert_eq!(r.seconds.len(), 3);
        assert!(r.deterministic);
        assert!(r.tokens_per_second_min <= r.tokens_per_second_median);
        assert!(benchmark(&m, &docs, 2, &ResolveConfig::default(), 1).is_err());
    }
}
