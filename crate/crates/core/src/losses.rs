//! Regression and classification objectives.

use alloc::vec::Vec;

use crate::math::{exp, log1p};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The regression weights searched when selecting `λ`.
pub const LAMBDA_GRID: [f64; 8] = [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4];

pub fn validate_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig("lambda must be finite and non-negative"))
    }
}

pub fn mse(y: &[f64], y_star: &[f64]) -> Result<f64> {
    if y.len() != y_star.len() {
        return Err(Error::LengthMismatch { expected: y.len(), found: y_star.len() });
    }
    if y.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let sum: f64 = y.iter().zip(y_star).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / y.len() as f64)
}

fn argmax(logits: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (k, &l) in logits.iter().enumerate() {
        if l > best.1 {
            best = (k, l);
        }
    }
    best
}

/// `(argmax, max, Σ_{k≠argmax} exp(l_k − max))`.
fn split_max(logits: &[f64]) -> (usize, f64, f64) {
    let (arg, max) = argmax(logits);
    let rest = logits
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != arg)
        .map(|(_, &l)| exp(l - max))
        .sum();
    (arg, max, rest)
}

pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let (_, max, rest) = split_max(logits);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + log1p(rest)
}

/// Writes `softmax(logits)` into `out`.
pub fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = exp(l - max);
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = alloc::vec![0.0; logits.len()];
    softmax_into(logits, &mut out);
    out
}

/// Writes `softmax(logits)` into `probs` and returns `-log probs[class]`.
/// The caller guarantees `class < logits.len()`.
pub(crate) fn softmax_cross_entropy_into(logits: &[f64], class: usize, probs: &mut [f64]) -> f64 {
    let (arg, max) = argmax(logits);
    let mut rest = 0.0;
    for (k, (p, &l)) in probs.iter_mut().zip(logits).enumerate() {
        *p = exp(l - max);
        if k != arg {
            rest += *p;
        }
    }
    let inv = 1.0 / (1.0 + rest);
    probs.iter_mut().for_each(|p| *p *= inv);
    (max - logits[class]) + log1p(rest)
}

/// `-log softmax(logits)[class]`, via max-subtracted log-sum-exp.
pub fn softmax_cross_entropy(logits: &[f64], class: usize) -> Result<f64> {
    if class >= logits.len() {
        return Err(Error::ClassIndex { class, classes: logits.len() });
    }
    let (_, max, rest) = split_max(logits);
    Ok((max - logits[class]) + log1p(rest))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub mse: f64,
    /// Mean cross-entropy over kept samples; zero when none were kept.
    pub cross_entropy: f64,
    pub combined: f64,
    pub lambda: f64,
    pub kept_count: usize,
}

/// Logits and true class of one sample selected for the classification term.
#[derive(Debug, Clone, Copy)]
pub struct ClassTarget<'a> {
    pub logits: &'a [f64],
    pub class: usize,
}

/// `λ·MSE + mean CE` over the kept samples.
pub fn combined_loss(y_star: &[f64], y: &[f64], kept: &[ClassTarget<'_>], lambda: f64) -> Result<LossBreakdown> {
    validate_lambda(lambda)?;
    let mse = mse(y, y_star)?;
    let mut ce_sum = 0.0;
    for t in kept {
        ce_sum += softmax_cross_entropy(t.logits, t.class)?;
    }
    Ok(breakdown(mse, ce_sum, kept.len(), lambda))
}

pub(crate) fn breakdown(mse: f64, ce_sum: f64, kept_count: usize, lambda: f64) -> LossBreakdown {
    let cross_entropy = if kept_count > 0 { ce_sum / kept_count as f64 } else { 0.0 };
    LossBreakdown { mse, cross_entropy, combined: lambda * mse + cross_entropy, lambda, kept_count }
}

/// Tolerance on `Σ prior = 1` accepted by [`l_extra_diagnostic`].
pub const PRIOR_TOLERANCE: f64 = 1e-9;

/// Discrete imbalance gap `log p̃(y_c) − log Σ_k softmax(logits)_k · p̃(y_k)`.
///
/// A diagnostic only; it is never differentiated.
pub fn l_extra_diagnostic(logits: &[f64], true_class: usize, prior: &[f64]) -> Result<f64> {
    if logits.len() != prior.len() {
        return Err(Error::LengthMismatch { expected: logits.len(), found: prior.len() });
    }
    if true_class >= logits.len() {
        return Err(Error::ClassIndex { class: true_class, classes: logits.len() });
    }
    let sum: f64 = prior.iter().sum();
    let normalized = (sum - 1.0).abs() <= PRIOR_TOLERANCE;
    if !normalized || prior.iter().any(|p| p.is_nan() || *p < 0.0) {
        return Err(Error::PriorNotNormalized { sum });
    }
    if prior[true_class] <= 0.0 {
        return Err(Error::ZeroPrior { class: true_class });
    }
    // Σ_k s_k p_k / p_c = 1 + Σ_{k≠c} s_k (p_k / p_c − 1), which avoids
    // cancelling two nearly equal logarithms when the classifier is confident.
    let lse = log_sum_exp(logits);
    let p_c = prior[true_class];
    let excess: f64 = logits
        .iter()
        .zip(prior)
        .enumerate()
        .filter(|&(k, _)| k != true_class)
        .map(|(_, (&l, &p))| exp(l - lse) * (p / p_c - 1.0))
        .sum();
    Ok(-log1p(excess))
}
