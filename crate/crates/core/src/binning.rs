//! Target discretization for the auxiliary classification loss.
//!
//! Targets are first cut into `C` uniform bins over the training range. For
//! the balanced variant the bins are then merged by histogram equalization:
//! bin `k` goes to `⌊(C/N)·Σ_{j≤k} H(j)⌋`, and the distinct values are
//! re-indexed to `0..C̄`. Equalization alone leaves residual imbalance, so
//! each equalized class `k` also gets a keep probability
//! `ρ(k) = min_j H(j) / H(k)` used to subsample the classification loss.

use alloc::vec::Vec;

use rand::distributions::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Values this far outside the outer edges are clamped instead of rejected.
pub const EDGE_SLACK: f64 = 1e-9;

/// `C + 1` equally spaced edges with `edges[0] = y_min` and `edges[C] = y_max`.
pub fn uniform_bins(y_min: f64, y_max: f64, classes: usize) -> Result<Vec<f64>> {
    if !(y_min.is_finite() && y_max.is_finite()) || y_min >= y_max {
        return Err(Error::InvalidRange { lo: y_min, hi: y_max });
    }
    if classes < 2 {
        return Err(Error::InvalidConfig("at least two classes are required"));
    }
    let width = y_max - y_min;
    let mut edges: Vec<f64> = (0..=classes).map(|i| y_min + width * (i as f64 / classes as f64)).collect();
    edges[classes] = y_max;
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidRange { lo: y_min, hi: y_max });
    }
    Ok(edges)
}

/// Index `k` with `edges[k] <= y < edges[k + 1]`; the last bin is closed on the right.
pub fn assign_class(edges: &[f64], y: f64) -> Result<usize> {
    let classes = edges.len().saturating_sub(1);
    if classes == 0 {
        return Err(Error::InvalidConfig("bin edges need at least two entries"));
    }
    let (lo, hi) = (edges[0], edges[classes]);
    if !(y >= lo - EDGE_SLACK && y <= hi + EDGE_SLACK) {
        return Err(Error::OutOfRange { value: y, lo, hi });
    }
    let above = edges.partition_point(|&e| e <= y);
    Ok(above.saturating_sub(1).min(classes - 1))
}

pub fn histogram(edges: &[f64], ys: impl IntoIterator<Item = f64>) -> Result<Vec<u64>> {
    let mut counts = alloc::vec![0u64; edges.len().saturating_sub(1)];
    for y in ys {
        counts[assign_class(edges, y)?] += 1;
    }
    Ok(counts)
}

/// Result of histogram equalization over the original bins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Equalization {
    /// `⌊(C/N)·Σ_{j≤k} H(j)⌋` for every original bin.
    pub raw: Vec<u64>,
    /// Dense equalized class of every original bin.
    pub mapping: Vec<usize>,
    pub classes: usize,
}

/// Merges neighbouring bins so that merged counts are as even as possible.
///
/// Empty bins join the class of the nearest non-empty bin to their left
/// (or the first class when they lead), so every equalized class is populated.
pub fn equalize(hist: &[u64]) -> Result<Equalization> {
    let classes = hist.len() as u64;
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut cumulative = 0u64;
    let raw: Vec<u64> = hist
        .iter()
        .map(|&h| {
            cumulative += h;
            // Exact floor((C / N) · cumulative) in integer arithmetic.
            ((classes as u128 * cumulative as u128) / total as u128) as u64
        })
        .collect();

    let mut mapping = Vec::with_capacity(hist.len());
    let mut current: Option<(u64, usize)> = None;
    for (&h, &q) in hist.iter().zip(&raw) {
        if h > 0 {
            current = match current {
                Some((prev_q, idx)) if prev_q == q => Some((q, idx)),
                Some((_, idx)) => Some((q, idx + 1)),
                None => Some((q, 0)),
            };
        }
        mapping.push(current.map_or(0, |(_, idx)| idx));
    }
    let dense = current.map_or(0, |(_, idx)| idx + 1);
    Ok(Equalization { raw, mapping, classes: dense })
}

/// Exact keep probability `min_count / count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeepProbability {
    pub min_count: u64,
    pub count: u64,
}

impl KeepProbability {
    pub const ALWAYS: Self = Self { min_count: 1, count: 1 };

    #[inline]
    pub fn value(self) -> f64 {
        self.min_count as f64 / self.count as f64
    }
}

pub fn keep_probabilities(hist: &[u64]) -> Result<Vec<KeepProbability>> {
    if let Some(class) = hist.iter().position(|&h| h == 0) {
        return Err(Error::EmptyClass { class });
    }
    let min_count = *hist.iter().min().ok_or(Error::EmptyDataset)?;
    Ok(hist.iter().map(|&count| KeepProbability { min_count, count }).collect())
}

/// Draws `u ~ U(0, 1)` and keeps the sample when `u <= rho`.
pub fn bernoulli_keep<R: Rng + ?Sized>(rho: f64, rng: &mut R) -> bool {
    let u: f64 = rng.sample(Open01);
    u <= rho
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    /// Uniform bins used as-is; every sample enters the classification loss.
    Plain,
    /// Equalized bins with per-class keep probabilities.
    Balanced,
}

/// Immutable class design derived from the training targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScheme {
    pub kind: SchemeKind,
    pub edges: Vec<f64>,
    /// Class index of each original bin.
    pub mapping: Vec<usize>,
    /// Number of distinct classes after the mapping.
    pub classes: usize,
    /// Training samples per mapped class.
    pub counts: Vec<u64>,
    pub keep: Vec<KeepProbability>,
}

impl ClassScheme {
    /// Uniform bins over the range of `ys` with no merging.
    pub fn plain(ys: &[f64], bins: usize) -> Result<Self> {
        let edges = training_edges(ys, bins)?;
        let counts = histogram(&edges, ys.iter().copied())?;
        Ok(Self {
            kind: SchemeKind::Plain,
            mapping: (0..bins).collect(),
            classes: bins,
            keep: alloc::vec![KeepProbability::ALWAYS; bins],
            edges,
            counts,
        })
    }

    /// Uniform bins, equalized, with keep probabilities on the merged histogram.
    pub fn balanced(ys: &[f64], bins: usize) -> Result<Self> {
        let edges = training_edges(ys, bins)?;
        let original = histogram(&edges, ys.iter().copied())?;
        let eq = equalize(&original)?;
        let mut counts = alloc::vec![0u64; eq.classes];
        for (k, &h) in original.iter().enumerate() {
            counts[eq.mapping[k]] += h;
        }
        let keep = keep_probabilities(&counts)?;
        Ok(Self { kind: SchemeKind::Balanced, edges, mapping: eq.mapping, classes: eq.classes, counts, keep })
    }

    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn class_of(&self, y: f64) -> Result<usize> {
        Ok(self.mapping[assign_class(&self.edges, y)?])
    }

    /// Empirical class prior from the training counts.
    pub fn class_prior(&self) -> Vec<f64> {
        let total: u64 = self.counts.iter().sum();
        self.counts.iter().map(|&c| c as f64 / total as f64).collect()
    }

    pub fn keep_values(&self) -> Vec<f64> {
        self.keep.iter().map(|k| k.value()).collect()
    }
}

fn training_edges(ys: &[f64], bins: usize) -> Result<Vec<f64>> {
    let (lo, hi) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| (lo.min(y), hi.max(y)));
    if ys.is_empty() {
        return Err(Error::EmptyDataset);
    }
    uniform_bins(lo, hi, bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_bin_examples() {
        assert_eq!(uniform_bins(0.0, 4.0, 4).unwrap(), [0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(uniform_bins(-1.5, 1.5, 2).unwrap(), [-1.5, 0.0, 1.5]);
        let e = uniform_bins(0.0, 1.0, 1024).unwrap();
        assert_eq!(e.len(), 1025);
        assert!(e.windows(2).all(|w| ((w[1] - w[0]) - 1.0 / 1024.0).abs() < 1e-15));
        assert!(matches!(uniform_bins(1.0, 1.0, 4), Err(Error::InvalidRange { .. })));
        assert!(matches!(uniform_bins(2.0, 1.0, 4), Err(Error::InvalidRange { .. })));
    }

    #[test]
    fn assign_examples() {
        assert_eq!(assign_class(&[0.0, 1.0, 2.0], 0.5).unwrap(), 0);
        assert_eq!(assign_class(&[0.0, 1.0, 2.0], 1.0).unwrap(), 1);
        assert_eq!(assign_class(&[0.0, 1.0, 2.0], 2.0).unwrap(), 1);
        assert_eq!(assign_class(&[0.0, 1.0, 2.0, 3.0, 4.0], 2.999).unwrap(), 2);
        assert_eq!(assign_class(&[0.0, 1.0, 2.0], 2.0 + 5e-10).unwrap(), 1);
        assert_eq!(assign_class(&[0.0, 1.0, 2.0], -5e-10).unwrap(), 0);
        assert!(matches!(assign_class(&[0.0, 1.0, 2.0], 2.1), Err(Error::OutOfRange { .. })));
        assert!(assign_class(&[0.0, 1.0, 2.0], f64::NAN).is_err());
    }

    #[test]
    fn equalize_balanced_is_identity() {
        let eq = equalize(&[2, 2, 2, 2]).unwrap();
        assert_eq!(eq.raw, [1, 2, 3, 4]);
        assert_eq!(eq.mapping, [0, 1, 2, 3]);
        assert_eq!(eq.classes, 4);
    }

    #[test]
    fn equalize_skewed_merges() {
        let eq = equalize(&[4, 2, 1, 1]).unwrap();
        assert_eq!(eq.raw, [2, 3, 3, 4]);
        assert_eq!(eq.mapping, [0, 1, 1, 2]);
        assert_eq!(eq.classes, 3);
    }

    #[test]
    fn equalize_handles_empty_bins() {
        let eq = equalize(&[0, 0, 5, 0, 3, 0]).unwrap();
        assert_eq!(eq.mapping, [0, 0, 0, 0, 1, 1]);
        assert_eq!(eq.classes, 2);
        assert_eq!(equalize(&[0, 0]), Err(Error::EmptyDataset));
    }

    #[test]
    fn keep_probability_examples() {
        let k = keep_probabilities(&[4, 2, 2]).unwrap();
        assert_eq!(k.iter().map(|k| k.value()).collect::<Vec<_>>(), [0.5, 1.0, 1.0]);
        assert!(keep_probabilities(&[7, 7, 7]).unwrap().iter().all(|k| k.value() == 1.0));
        let k = keep_probabilities(&[1, 1000]).unwrap();
        assert_eq!(k[0].value(), 1.0);
        assert_eq!(k[1].value(), 0.001);
        assert_eq!(keep_probabilities(&[3, 0]), Err(Error::EmptyClass { class: 1 }));
    }

    #[test]
    fn bernoulli_certain_and_frequency() {
        let mut rng = crate::rng::seeded(1);
        assert!((0..1000).all(|_| bernoulli_keep(1.0, &mut rng)));
        let mut rng = crate::rng::seeded(2);
        let kept = (0..10_000).filter(|_| bernoulli_keep(0.5, &mut rng)).count();
        assert!((kept as f64 / 10_000.0 - 0.5).abs() <= 0.02, "{kept}");
        let a: Vec<bool> = (0..64).map({
            let mut r = crate::rng::seeded(3);
            move |_| bernoulli_keep(0.3, &mut r)
        }).collect();
        let b: Vec<bool> = (0..64).map({
            let mut r = crate::rng::seeded(3);
            move |_| bernoulli_keep(0.3, &mut r)
        }).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn warning_case_without_equalization() {
        // Populated edges, a dominant peak and near-empty bins in between.
        let hist = [400, 1, 1, 1, 1, 1, 6000, 1, 1, 1, 1, 1, 400];
        let min_keep = |h: &[u64]| keep_probabilities(h).unwrap().iter().map(|k| k.value()).fold(1.0, f64::min);
        let raw_min = min_keep(&hist);
        assert!(raw_min < 0.01);
        let eq = equalize(&hist).unwrap();
        let mut merged = alloc::vec![0u64; eq.classes];
        for (k, &h) in hist.iter().enumerate() {
            merged[eq.mapping[k]] += h;
        }
        assert_eq!(merged, [405, 6005, 400]);
        assert!(raw_min < min_keep(&merged));
    }

    #[test]
    fn last_populated_bin_is_never_merged() {
        // The cumulative floor reaches C only at the last populated bin, so a
        // rare final bin survives equalization unchanged.
        let eq = equalize(&[1, 1, 1, 5000, 1, 1]).unwrap();
        assert_eq!(*eq.raw.last().unwrap(), 6);
        assert_ne!(eq.mapping[4], eq.mapping[5]);
    }

    #[test]
    fn balanced_scheme_from_targets() {
        let mut ys: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        ys.extend(core::iter::repeat(0.505).take(900));
        let s = ClassScheme::balanced(&ys, 16).unwrap();
        assert!(s.classes <= 16);
        assert_eq!(s.counts.iter().sum::<u64>(), ys.len() as u64);
        assert!((s.class_prior().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let p = ClassScheme::plain(&ys, 16).unwrap();
        assert_eq!(p.classes, 16);
        assert!(p.keep.iter().all(|&k| k == KeepProbability::ALWAYS));
        assert!(ClassScheme::plain(&[], 4).is_err());
    }

    proptest! {
        #[test]
        fn equalized_counts_meet_min_after_keep(hist in proptest::collection::vec(0u64..500, 2..64)) {
            prop_assume!(hist.iter().sum::<u64>() > 0);
            let eq = equalize(&hist).unwrap();
            prop_assert!(eq.classes <= hist.len());
            prop_assert!(eq.mapping.windows(2).all(|w| w[0] <= w[1]));
            let mut merged = alloc::vec![0u64; eq.classes];
            for (k, &h) in hist.iter().enumerate() {
                merged[eq.mapping[k]] += h;
            }
            let keep = keep_probabilities(&merged).unwrap();
            let min = *merged.iter().min().unwrap();
            for (h, k) in merged.iter().zip(&keep) {
                // H(k)·ρ(k) = min H, exactly, in rational arithmetic.
                prop_assert_eq!(h * k.min_count, min * k.count);
                prop_assert!(k.value() > 0.0 && k.value() <= 1.0);
            }
            prop_assert!(keep.iter().any(|k| k.value() == 1.0));
        }

        #[test]
        fn monotone_merge(ys in proptest::collection::vec(-1.5..1.5f64, 2..300), bins in 2usize..64) {
            prop_assume!(ys.iter().any(|&y| y != ys[0]));
            let s = ClassScheme::balanced(&ys, bins).unwrap();
            let mut sorted = ys.clone();
            sorted.sort_by(f64::total_cmp);
            let classes: Vec<usize> = sorted.iter().map(|&y| s.class_of(y).unwrap()).collect();
            prop_assert!(classes.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn uniform_histogram_equalizes_to_identity(count in 1u64..1000, bins in 2usize..128) {
            let eq = equalize(&alloc::vec![count; bins]).unwrap();
            prop_assert_eq!(eq.mapping, (0..bins).collect::<Vec<_>>());
        }
    }
}
