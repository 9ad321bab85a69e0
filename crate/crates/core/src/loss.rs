//! Universal posteriors and partial-label losses.
//!
//! A dataset label `y` is a partial label over the universal classes it
//! maps to. Its posterior is the sum of their softmax posteriors and the
//! NLL+ loss is the negative log of that sum. The loss is evaluated as a
//! difference of two log-sum-exps so it stays finite for large logits.

use crate::error::{Error, Result};
use crate::taxonomy::{LabelRef, MappingSet};

fn check_finite(logits: &[f64]) -> Result<()> {
    match logits.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::InvalidLogit(i)),
        None => Ok(()),
    }
}

fn check_mapped(mapped: &[usize], len: usize) -> Result<()> {
    if mapped.is_empty() {
        return Err(Error::UnmappedLabel);
    }
    if let Some(&u) = mapped.iter().find(|&&u| u >= len) {
        return Err(Error::InvalidInput(format!("mapped class {u} outside {len} logits")));
    }
    Ok(())
}

/// `ln Σ exp(v)` with max subtraction; `-inf` for an empty input.
pub fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Softmax over universal logits.
pub fn universal_posteriors(logits: &[f64]) -> Result<Vec<f64>> {
    check_finite(logits)?;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = exp.iter().sum();
    Ok(exp.into_iter().map(|e| e / z).collect())
}

/// Posterior of a dataset class: the summed posteriors of its mapped
/// universal classes.
pub fn dataset_posterior(post: &[f64], label: LabelRef, maps: &MappingSet) -> Result<f64> {
    let mapped = maps.get(label);
    check_mapped(mapped, post.len())?;
    Ok(mapped.iter().map(|&u| post[u]).sum())
}

/// NLL+ for the label `label` under `maps` (over logit positions).
pub fn nll_plus(logits: &[f64], label: LabelRef, maps: &MappingSet) -> Result<f64> {
    nll_plus_over(logits, maps.get(label))
}

/// `lse(all logits) - lse(mapped logits)`.
pub fn nll_plus_over(logits: &[f64], mapped: &[usize]) -> Result<f64> {
    check_finite(logits)?;
    check_mapped(mapped, logits.len())?;
    let all = log_sum_exp(logits.iter().copied());
    let pos = log_sum_exp(mapped.iter().map(|&u| logits[u]));
    Ok((all - pos).max(0.0))
}

/// Standard negative log-likelihood of a single target class.
pub fn nll(logits: &[f64], target: usize) -> Result<f64> {
    nll_plus_over(logits, &[target])
}

pub fn nll_plus_grad(logits: &[f64], label: LabelRef, maps: &MappingSet) -> Result<Vec<f64>> {
    nll_plus_grad_over(logits, maps.get(label))
}

/// `∂L/∂s_v = P(v | x) − P(v | y, x)`, where the second term is the
/// softmax restricted to the mapped set (zero outside it).
pub fn nll_plus_grad_over(logits: &[f64], mapped: &[usize]) -> Result<Vec<f64>> {
    check_finite(logits)?;
    check_mapped(mapped, logits.len())?;
    let all = log_sum_exp(logits.iter().copied());
    let pos = log_sum_exp(mapped.iter().map(|&u| logits[u]));
    let mut grad: Vec<f64> = logits.iter().map(|s| (s - all).exp()).collect();
    for &u in mapped {
        grad[u] -= (logits[u] - pos).exp();
    }
    Ok(grad)
}

/// Loss and gradient in one pass.
pub fn nll_plus_with_grad(logits: &[f64], mapped: &[usize]) -> Result<(f64, Vec<f64>)> {
    Ok((nll_plus_over(logits, mapped)?, nll_plus_grad_over(logits, mapped)?))
}

/// Per-class probability maps over an `height × width` grid, stored
/// class-major.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskStack {
    pub classes: usize,
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl MaskStack {
    pub fn new(classes: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != classes * height * width {
            return Err(Error::InvalidInput(format!(
                "mask stack needs {} values, got {}",
                classes * height * width,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidProbability(*v));
        }
        Ok(MaskStack {
            classes,
            height,
            width,
            values,
        })
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn map(&self, class: usize) -> &[f64] {
        let n = self.pixels();
        &self.values[class * n..(class + 1) * n]
    }
}

/// A dataset-class mask recovered by max aggregation, with the universal
/// class that attains the max at every pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregatedMask {
    pub values: Vec<f64>,
    pub argmax: Vec<usize>,
}

impl AggregatedMask {
    /// Routes a per-pixel upstream gradient to the winning class only.
    pub fn backward(&self, upstream: &[f64], classes: usize) -> Vec<f64> {
        let n = self.values.len();
        let mut grad = vec![0.0; classes * n];
        for (px, (&g, &u)) in upstream.iter().zip(&self.argmax).enumerate() {
            grad[u * n + px] += g;
        }
        grad
    }
}

pub fn aggregate_mask_max(stack: &MaskStack, label: LabelRef, maps: &MappingSet) -> Result<AggregatedMask> {
    aggregate_mask_max_over(stack, maps.get(label))
}

/// `m_y[i,j] = max_{u ∈ mapped} m_u[i,j]`; ties go to the lowest class id.
pub fn aggregate_mask_max_over(stack: &MaskStack, mapped: &[usize]) -> Result<AggregatedMask> {
    check_mapped(mapped, stack.classes)?;
    let mut order = mapped.to_vec();
    order.sort_unstable();
    let n = stack.pixels();
    let mut values = vec![f64::NEG_INFINITY; n];
    let mut argmax = vec![order[0]; n];
    for &u in &order {
        for (px, &v) in stack.map(u).iter().enumerate() {
            if v > values[px] {
                values[px] = v;
                argmax[px] = u;
            }
        }
    }
    Ok(AggregatedMask { values, argmax })
}

const BCE_EPS: f64 = 1e-12;

/// Binary cross-entropy of probability `p` against a 0/1 target.
pub fn binary_cross_entropy(p: f64, target: f64) -> f64 {
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
}

/// BCE evaluated on a sigmoid logit, with its derivative with respect to
/// the logit (`σ(z) − t`).
pub fn binary_cross_entropy_logit(z: f64, target: f64) -> (f64, f64) {
    // ln(1 + e^z) - t z
    let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
    (softplus - target * z, sigmoid(z) - target)
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Joint posterior of a class and a dataset from a per-dataset class head
/// and a dataset-recognition head.
pub fn two_head_joint(class_given_dataset: f64, dataset_prob: f64) -> Result<f64> {
    for p in [class_given_dataset, dataset_prob] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability(p));
        }
    }
    Ok(class_given_dataset * dataset_prob)
}
