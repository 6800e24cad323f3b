//! Independent oracles shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use regcls_core::model::{init_model, BatchItem, ModelState};

/// Brute-force histogram equalization: `(mapping, equalized counts)`.
pub fn brute_equalize(hist: &[u64]) -> (Vec<usize>, Vec<u64>) {
    let c = hist.len() as u128;
    let n: u128 = hist.iter().map(|&h| h as u128).sum();
    let mut raw = Vec::with_capacity(hist.len());
    for k in 0..hist.len() {
        let cum: u128 = hist[..=k].iter().map(|&h| h as u128).sum();
        let mut q = 0u128;
        while (q + 1) * n <= c * cum {
            q += 1;
        }
        raw.push(q);
    }
    // Rank of each populated bin's value among the distinct populated values.
    let mut distinct: Vec<u128> = (0..hist.len()).filter(|&k| hist[k] > 0).map(|k| raw[k]).collect();
    distinct.sort_unstable();
    distinct.dedup();
    let mut mapping = vec![0usize; hist.len()];
    for k in 0..hist.len() {
        let owner = (0..=k).rev().find(|&j| hist[j] > 0);
        mapping[k] = match owner {
            Some(j) => distinct.iter().position(|&v| v == raw[j]).unwrap(),
            None => 0,
        };
    }
    let mut counts = vec![0u64; distinct.len()];
    for k in 0..hist.len() {
        counts[mapping[k]] += hist[k];
    }
    (mapping, counts)
}

/// `(numerator, denominator)` of `min_j H(j) / H(k)`.
pub fn brute_keep(counts: &[u64]) -> Vec<(u64, u64)> {
    let mut min = u64::MAX;
    for &h in counts {
        if h < min {
            min = h;
        }
    }
    counts.iter().map(|&h| (min, h)).collect()
}

/// Relative error with a floor on the scale, so exact zeros compare cleanly.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Largest relative error between analytic and central-difference gradients.
pub fn gradient_error(model: &ModelState, batch: &[BatchItem], lambda: f64, step: f64) -> (f64, usize) {
    let (grad, _) = model.backward(batch, lambda).unwrap();
    let mut probe = model.clone();
    let mut worst = (0.0, 0);
    for i in 0..model.params.len() {
        let base = model.params[i];
        probe.params[i] = base + step;
        let up = probe.batch_loss(batch, lambda).unwrap().combined;
        probe.params[i] = base - step;
        let down = probe.batch_loss(batch, lambda).unwrap().combined;
        probe.params[i] = base;
        let err = relative_error(grad[i], (up - down) / (2.0 * step));
        if err > worst.0 {
            worst = (err, i);
        }
    }
    worst
}

/// Random histogram with 2..=64 bins, up to 10⁵ samples, some empty bins and varying skew.
pub fn random_histogram(rng: &mut ChaCha8Rng) -> Vec<u64> {
    let classes = rng.gen_range(2..=64);
    let total: u64 = rng.gen_range(1..=100_000);
    let skew: f64 = rng.gen_range(0.0..4.0);
    let weights: Vec<f64> = (0..classes)
        .map(|_| if rng.gen_bool(0.15) { 0.0 } else { rng.gen::<f64>().powf(skew * 2.0) })
        .collect();
    let sum: f64 = weights.iter().sum();
    let mut hist: Vec<u64> =
        weights.iter().map(|w| if sum > 0.0 { (total as f64 * w / sum).round() as u64 } else { 0 }).collect();
    if hist.iter().all(|&h| h == 0) {
        hist[rng.gen_range(0..classes)] = total;
    }
    hist
}

/// Gradient-check case number `draw`: the head alternates on and off and λ
/// cycles through 0, 1 and 100, so every combination appears.
pub fn random_case(rng: &mut ChaCha8Rng, draw: u64) -> (ModelState, Vec<BatchItem>, f64) {
    let lambdas = [0.0, 1.0, 1e2];
    let head = if draw % 2 == 0 { None } else { Some(rng.gen_range(2..=12)) };
    let lambda = lambdas[draw as usize % lambdas.len()];
    let model = init_model(head, draw).unwrap();
    let n = rng.gen_range(1..=16);
    let batch = (0..n)
        .map(|_| BatchItem {
            x: rng.gen_range(-1.0..=1.0),
            y: rng.gen_range(-1.5..=1.5),
            class: head.filter(|_| rng.gen_bool(0.7)).map(|c| rng.gen_range(0..c)),
        })
        .collect();
    (model, batch, lambda)
}
