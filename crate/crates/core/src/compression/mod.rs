//! Global magnitude pruning, symmetric per-tensor int8 quantization, and a
//! side-by-side comparison of compressed against full models.

mod prune;
mod quantize;

use serde::Serialize;
use web_time::Instant;

pub use prune::{is_prunable, prune, prune_tensors, sparsity, SparsityMask};
pub use quantize::{dequantize, quantize, quantize_matrix, QuantizedModel, QuantizedTensor};

use crate::error::Result;
use crate::evaluation::{score_resolutions, EvalReport};
use crate::model::ModelParams;
use crate::resolver::{resolve_all, ResolveConfig};
use crate::textmodel::Document;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompressionReport {
    pub full: EvalReport,
    pub compressed: EvalReport,
    /// `(compressed - full)` link F1 in percentage points.
    pub delta_f1_points: f64,
    /// Compressed tokens/second divided by full tokens/second.
    pub throughput_ratio: f64,
}

fn timed_eval(model: &ModelParams, docs: &[Document], config: &ResolveConfig) -> Result<EvalReport> {
    let start = Instant::now();
    let resolutions = resolve_all(docs, model, config, 1)?;
    let secs = start.elapsed().as_secs_f64();
    let mut report = score_resolutions(docs, &resolutions, config.mode)?;
    let tokens: usize = docs.iter().map(Document::len).sum();
    report.tokens_per_second = Some(if secs > 0.0 { tokens as f64 / secs } else { f64::INFINITY });
    Ok(report)
}

/// Resolves `docs` with both models; inference always runs in `f64`, so a
/// quantized model is passed in dequantized form.
pub fn eval_compressed(
    full: &ModelParams,
    compressed: &ModelParams,
    docs: &[Document],
    config: &ResolveConfig,
) -> Result<CompressionReport> {
    let full_report = timed_eval(full, docs, config)?;
    let comp_report = timed_eval(compressed, docs, config)?;
    let ratio = match (comp_report.tokens_per_second, full_report.tokens_per_second) {
        (Some(c), Some(f)) if f > 0.0 && f.is_finite() && c.is_finite() => c / f,
        _ => 1.0,
    };
    Ok(CompressionReport {
        delta_f1_points: (comp_report.link_f1 - full_report.link_f1) * 100.0,
        full: full_report,
        compressed: comp_report,
        throughput_ratio: ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::numerics::Rng;
    use crate::textmodel::generate_synthetic_corpus;

    #[test]
    fn identical_copy_has_zero_delta() {
        let docs = generate_synthetic_corpus(10, 1, 40, 20).unwrap();
        let m = ModelParams::new(ModelConfig::default(), docs.iter().flat_map(|d| d.tokens.clone()), &mut Rng::new(2)).unwrap();
        let r = eval_compressed(&m, &m.clone(), &docs, &ResolveConfig::default()).unwrap();
        assert_eq!(r.delta_f1_points, 0.0);
        assert_eq!(r.full.link_f1, r.compressed.link_f1);
    }
}
