use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numerics::{Matrix, Parameters};

/// Every tensor except the embedding table and biases is subject to pruning.
pub fn is_prunable(name: &str) -> bool {
    name != "embedding" && !name.ends_with("bias")
}

/// Keep-flags per pruned tensor (`true` = weight survives).
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SparsityMask {
    pub target_sparsity: f64,
    pub masks: Vec<(String, Vec<bool>)>,
}

impl SparsityMask {
    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    /// Re-zeroes masked weights.
    pub fn apply(&self, model: &mut ModelParams) -> Result<()> {
        for p in model.params_mut() {
            if let Some((_, keep)) = self.masks.iter().find(|(n, _)| *n == p.name) {
                if keep.len() != p.value.len() {
                    return Err(Error::Shape {
                        op: "sparsity mask",
                        left: (1, keep.len()),
                        right: p.shape(),
                    });
                }
                for (w, &k) in p.value.as_mut_slice().iter_mut().zip(keep) {
                    if !k {
                        *w = 0.0;
                    }
                }
            }
        }
        Ok(())
    }

    /// True when every masked weight of `model` is exactly zero.
    pub fn holds(&self, model: &ModelParams) -> bool {
        model.params().iter().all(|p| match self.masks.iter().find(|(n, _)| *n == p.name) {
            Some((_, keep)) => p.value.as_slice().iter().zip(keep).all(|(w, k)| *k || *w == 0.0),
            None => true,
        })
    }
}

/// Zeroes the `ceil(target · total)` smallest-magnitude entries across all
/// tensors (ties: earlier tensor, then earlier element). Returns keep-flags.
pub fn prune_tensors(tensors: &mut [&mut Matrix], target: f64) -> Vec<Vec<bool>> {
    assert!((0.0..1.0).contains(&target), "target sparsity {target} outside [0, 1)");
    let total: usize = tensors.iter().map(|t| t.len()).sum();
    let k = (target * total as f64).ceil() as usize;
    let mut keep: Vec<Vec<bool>> = tensors.iter().map(|t| vec![true; t.len()]).collect();
    if k == 0 {
        return keep;
    }
    let mut order: Vec<(f64, usize, usize)> = tensors
        .iter()
        .enumerate()
        .flat_map(|(ti, t)| t.as_slice().iter().enumerate().map(move |(e, w)| (w.abs(), ti, e)))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    for &(_, ti, e) in &order[..k] {
        tensors[ti].as_mut_slice()[e] = 0.0;
        keep[ti][e] = false;
    }
    keep
}

/// Global magnitude pruning over all prunable tensors.
pub fn prune(model: &ModelParams, target_sparsity: f64) -> Result<(ModelParams, SparsityMask)> {
    if !(0.0..1.0).contains(&target_sparsity) {
        return Err(Error::Config(format!("target sparsity {target_sparsity} outside [0, 1)")));
    }
    let mut pruned = model.clone();
    if target_sparsity == 0.0 {
        return Ok((pruned, SparsityMask::default()));
    }
    let mut params: Vec<_> = pruned.params_mut().into_iter().filter(|p| is_prunable(&p.name)).collect();
    let names: Vec<String> = params.iter().map(|p| p.name.clone()).collect();
    let mut values: Vec<&mut Matrix> = params.iter_mut().map(|p| &mut p.value).collect();
    let keep = prune_tensors(&mut values, target_sparsity);
    Ok((
        pruned,
        SparsityMask {
            target_sparsity,
            masks: names.into_iter().zip(keep).collect(),
        },
    ))
}

/// Zero fraction over the prunable tensors.
pub fn sparsity(model: &ModelParams) -> f64 {
    let (zeros, total) = model
        .params()
        .iter()
        .filter(|p| is_prunable(&p.name))
        .fold((0usize, 0usize), |(z, t), p| {
            (z + p.value.as_slice().iter().filter(|&&w| w == 0.0).count(), t + p.value.len())
        });
    if total == 0 {
        0.0
    } else {
        zeros as f64 / total as f64
    }
}
