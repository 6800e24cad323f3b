//! The 1-6-16-1 ReLU regressor with an optional training-time
//! classification head on the 16-wide hidden layer.
//!
//! Parameters live in one flat buffer so that AdamW moments, gradients and
//! serialized weights share a single layout:
//!
//! | segment | shape            |
//! |---------|------------------|
//! | `w1`    | 6 × 1            |
//! | `b1`    | 6                |
//! | `w2`    | 16 × 6           |
//! | `b2`    | 16               |
//! | `w3`    | 1 × 16           |
//! | `b3`    | 1                |
//! | `wc`    | C̄ × 16 (head)    |
//! | `bc`    | C̄ (head)         |
//!
//! Matrices are row-major `(out, in)`.

use alloc::vec::Vec;
use core::ops::Range;

use crate::math::sqrt;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::losses::{self, LossBreakdown};
use crate::rng::{stream, Stream};
use crate::{Error, Result};

pub const HIDDEN1: usize = 6;
pub const HIDDEN2: usize = 16;

const W1: Range<usize> = 0..HIDDEN1;
const B1: Range<usize> = W1.end..W1.end + HIDDEN1;
const W2: Range<usize> = B1.end..B1.end + HIDDEN2 * HIDDEN1;
const B2: Range<usize> = W2.end..W2.end + HIDDEN2;
const W3: Range<usize> = B2.end..B2.end + HIDDEN2;
const B3: Range<usize> = W3.end..W3.end + 1;

/// Parameter count of the regression trunk.
pub const TRUNK_LEN: usize = B3.end;

fn head_weights(classes: usize) -> Range<usize> {
    TRUNK_LEN..TRUNK_LEN + classes * HIDDEN2
}

fn head_biases(classes: usize) -> Range<usize> {
    let w = head_weights(classes);
    w.end..w.end + classes
}

pub fn param_len(head: Option<usize>) -> usize {
    TRUNK_LEN + head.map_or(0, |c| c * (HIDDEN2 + 1))
}

/// Weight (as opposed to bias) segments, which receive weight decay.
fn weight_segments(head: Option<usize>) -> impl Iterator<Item = Range<usize>> {
    [Some(W1), Some(W2), Some(W3), head.map(head_weights)].into_iter().flatten()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    /// Number of classes of the head, if one is attached.
    pub head: Option<usize>,
    pub params: Vec<f64>,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    pub step_count: u64,
}

/// Uniform `±1/√fan_in` initialization. The trunk and head draw from
/// separate streams of `seed`, so the trunk does not depend on the head.
pub fn init_model(head: Option<usize>, seed: u64) -> Result<ModelState> {
    if head == Some(0) {
        return Err(Error::InvalidConfig("classification head needs at least one class"));
    }
    let len = param_len(head);
    let mut params = alloc::vec![0.0; len];
    let mut rng = stream(seed, Stream::TrunkInit);
    for (range, fan_in) in [(W1, 1), (B1, 1), (W2, HIDDEN1), (B2, HIDDEN1), (W3, HIDDEN2), (B3, HIDDEN2)] {
        fill_uniform(&mut params[range], fan_in, &mut rng);
    }
    if let Some(classes) = head {
        let mut rng = stream(seed, Stream::HeadInit);
        fill_uniform(&mut params[head_weights(classes)], HIDDEN2, &mut rng);
        fill_uniform(&mut params[head_biases(classes)], HIDDEN2, &mut rng);
    }
    Ok(ModelState { head, params, adam_m: alloc::vec![0.0; len], adam_v: alloc::vec![0.0; len], step_count: 0 })
}

fn fill_uniform<R: Rng + ?Sized>(out: &mut [f64], fan_in: usize, rng: &mut R) {
    let bound = 1.0 / sqrt(fan_in as f64);
    for p in out {
        *p = rng.gen_range(-bound..=bound);
    }
}

/// Cached activations of one forward pass through the trunk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hidden {
    pub z1: [f64; HIDDEN1],
    pub h1: [f64; HIDDEN1],
    pub z2: [f64; HIDDEN2],
    pub h2: [f64; HIDDEN2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub y_star: f64,
    pub logits: Option<Vec<f64>>,
    pub hidden: Hidden,
}

#[inline]
fn relu(v: f64) -> f64 {
    if v > 0.0 { v } else { 0.0 }
}

/// Dot product with four independent partial sums.
#[inline]
fn dot16(a: &[f64; HIDDEN2], b: &[f64; HIDDEN2]) -> f64 {
    let mut acc = [0.0; 4];
    for j in (0..HIDDEN2).step_by(4) {
        for l in 0..4 {
            acc[l] += a[j + l] * b[j + l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

/// Trunk-only view used for evaluation. It cannot reach the head.
#[derive(Debug, Clone, Copy)]
pub struct Regressor<'a> {
    trunk: &'a [f64],
}

impl<'a> Regressor<'a> {
    pub fn hidden(&self, x: f64) -> Hidden {
        let p = self.trunk;
        let mut z1 = [0.0; HIDDEN1];
        let mut h1 = [0.0; HIDDEN1];
        for i in 0..HIDDEN1 {
            z1[i] = p[W1.start + i] * x + p[B1.start + i];
            h1[i] = relu(z1[i]);
        }
        let mut z2 = [0.0; HIDDEN2];
        let mut h2 = [0.0; HIDDEN2];
        for i in 0..HIDDEN2 {
            let row = &p[W2.start + i * HIDDEN1..W2.start + (i + 1) * HIDDEN1];
            let mut acc = p[B2.start + i];
            for j in 0..HIDDEN1 {
                acc += row[j] * h1[j];
            }
            z2[i] = acc;
            h2[i] = relu(acc);
        }
        Hidden { z1, h1, z2, h2 }
    }

    #[inline]
    pub fn output(&self, hidden: &Hidden) -> f64 {
        let p = self.trunk;
        let mut acc = p[B3.start];
        for j in 0..HIDDEN2 {
            acc += p[W3.start + j] * hidden.h2[j];
        }
        acc
    }

    pub fn predict(&self, x: f64) -> f64 {
        self.output(&self.hidden(x))
    }

    /// MSE of the regression output over `(x, y)` pairs.
    pub fn mse(&self, samples: impl IntoIterator<Item = (f64, f64)>) -> Result<f64> {
        let mut n = 0usize;
        let mut sum = 0.0;
        for (x, y) in samples {
            let e = self.predict(x) - y;
            sum += e * e;
            n += 1;
        }
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        Ok(sum / n as f64)
    }
}

/// One training example. `class` is `Some` only when the sample enters the
/// classification term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchItem {
    pub x: f64,
    pub y: f64,
    pub class: Option<usize>,
}

impl ModelState {
    pub fn regressor(&self) -> Regressor<'_> {
        Regressor { trunk: &self.params[..TRUNK_LEN] }
    }

    pub fn head_classes(&self) -> Option<usize> {
        self.head
    }

    /// Writes the head logits for `hidden` into `out` (length C̄).
    pub fn logits_into(&self, hidden: &Hidden, out: &mut [f64]) {
        let Some(classes) = self.head else { return };
        let w = &self.params[head_weights(classes)];
        let b = &self.params[head_biases(classes)];
        for ((o, row), &bias) in out.iter_mut().zip(w.chunks_exact(HIDDEN2)).zip(b) {
            let row: &[f64; HIDDEN2] = row.try_into().expect("row width");
            *o = bias + dot16(row, &hidden.h2);
        }
    }

    pub fn forward(&self, x: f64) -> Forward {
        let reg = self.regressor();
        let hidden = reg.hidden(x);
        let y_star = reg.output(&hidden);
        let logits = self.head.map(|c| {
            let mut l = alloc::vec![0.0; c];
            self.logits_into(&hidden, &mut l);
            l
        });
        Forward { y_star, logits, hidden }
    }

    /// Exact gradients of `λ·mean_batch (y − y*)² + mean_kept CE`.
    pub fn backward(&self, batch: &[BatchItem], lambda: f64) -> Result<(Vec<f64>, LossBreakdown)> {
        if batch.is_empty() {
            return Err(Error::EmptyDataset);
        }
        losses::validate_lambda(lambda)?;
        let classes = self.head.unwrap_or(0);
        for item in batch {
            match (item.class, self.head) {
                (Some(_), None) => return Err(Error::InvalidConfig("class labels given to a model without a head")),
                (Some(c), Some(n)) if c >= n => return Err(Error::ClassIndex { class: c, classes: n }),
                _ => {}
            }
        }
        let kept = batch.iter().filter(|b| b.class.is_some()).count();
        let p = &self.params;
        let mut grad = alloc::vec![0.0; p.len()];
        let mut logits = alloc::vec![0.0; classes];
        let mut probs = alloc::vec![0.0; classes];
        let reg_scale = 2.0 * lambda / batch.len() as f64;
        let mut sq_sum = 0.0;
        let mut ce_sum = 0.0;
        let reg = self.regressor();

        for item in batch {
            let h = reg.hidden(item.x);
            let y_star = reg.output(&h);
            let err = y_star - item.y;
            sq_sum += err * err;

            let g_out = reg_scale * err;
            let mut dh2 = [0.0; HIDDEN2];
            for j in 0..HIDDEN2 {
                grad[W3.start + j] += g_out * h.h2[j];
                dh2[j] = g_out * p[W3.start + j];
            }
            grad[B3.start] += g_out;

            if let Some(c) = item.class {
                self.logits_into(&h, &mut logits);
                ce_sum += losses::softmax_cross_entropy_into(&logits, c, &mut probs);
                let inv = 1.0 / kept as f64;
                let (wr, br) = (head_weights(classes), head_biases(classes));
                let (gw, gb) = grad[wr.start..br.end].split_at_mut(classes * HIDDEN2);
                let rows = p[wr].chunks_exact(HIDDEN2).zip(gw.chunks_exact_mut(HIDDEN2));
                for (k, ((row, grow), gbias)) in rows.zip(gb.iter_mut()).enumerate() {
                    let row: &[f64; HIDDEN2] = row.try_into().expect("row width");
                    let grow: &mut [f64; HIDDEN2] = grow.try_into().expect("row width");
                    let d = (probs[k] - if k == c { 1.0 } else { 0.0 }) * inv;
                    for j in 0..HIDDEN2 {
                        grow[j] += d * h.h2[j];
                        dh2[j] += d * row[j];
                    }
                    *gbias += d;
                }
            }

            let mut dh1 = [0.0; HIDDEN1];
            for i in 0..HIDDEN2 {
                if h.z2[i] <= 0.0 {
                    continue;
                }
                let d = dh2[i];
                let row = W2.start + i * HIDDEN1;
                for j in 0..HIDDEN1 {
                    grad[row + j] += d * h.h1[j];
                    dh1[j] += d * p[row + j];
                }
                grad[B2.start + i] += d;
            }
            for i in 0..HIDDEN1 {
                if h.z1[i] <= 0.0 {
                    continue;
                }
                grad[W1.start + i] += dh1[i] * item.x;
                grad[B1.start + i] += dh1[i];
            }
        }
        let loss = losses::breakdown(sq_sum / batch.len() as f64, ce_sum, kept, lambda);
        Ok((grad, loss))
    }

    /// Loss of `backward` without gradients.
    pub fn batch_loss(&self, batch: &[BatchItem], lambda: f64) -> Result<LossBreakdown> {
        let classes = self.head.unwrap_or(0);
        let mut logits = alloc::vec![0.0; classes];
        let reg = self.regressor();
        let (mut sq, mut ce, mut kept) = (0.0, 0.0, 0usize);
        for item in batch {
            let h = reg.hidden(item.x);
            let e = reg.output(&h) - item.y;
            sq += e * e;
            if let Some(c) = item.class {
                if self.head.is_none() {
                    return Err(Error::InvalidConfig("class labels given to a model without a head"));
                }
                self.logits_into(&h, &mut logits);
                ce += losses::softmax_cross_entropy(&logits, c)?;
                kept += 1;
            }
        }
        if batch.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(losses::breakdown(sq / batch.len() as f64, ce, kept, lambda))
    }

    pub fn adam_step(&mut self, grads: &[f64], config: &AdamW) -> Result<()> {
        if grads.len() != self.params.len() {
            return Err(Error::ShapeMismatch { expected: self.params.len(), found: grads.len() });
        }
        self.step_count += 1;
        let mut decay = alloc::vec![false; self.params.len()];
        for r in weight_segments(self.head) {
            decay[r].iter_mut().for_each(|d| *d = true);
        }
        config.update(&mut self.params, grads, &mut self.adam_m, &mut self.adam_v, self.step_count, |i| decay[i]);
        Ok(())
    }
}

/// Adam with decoupled weight decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamW {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        Self { learning_rate, weight_decay, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    /// One update at (1-based) step `t`; `decays(i)` selects parameters that
    /// are shrunk by `1 − lr·wd` before the Adam step.
    pub fn update(
        &self,
        params: &mut [f64],
        grads: &[f64],
        m: &mut [f64],
        v: &mut [f64],
        t: u64,
        decays: impl Fn(usize) -> bool,
    ) {
        let bc1 = 1.0 - crate::math::pow(self.beta1, t as f64);
        let bc2 = 1.0 - crate::math::pow(self.beta2, t as f64);
        let shrink = 1.0 - self.learning_rate * self.weight_decay;
        for i in 0..params.len() {
            let g = grads[i];
            m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
            v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
            if decays(i) {
                params[i] *= shrink;
            }
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            params[i] -= self.learning_rate * m_hat / (sqrt(v_hat) + self.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub weight_decay: f64,
    pub batch_size: usize,
    /// Weight of the regression term.
    pub lambda: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, epochs: 80, weight_decay: 1e-3, batch_size: 256, lambda: 1.0, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidConfig("weight_decay must be non-negative"));
        }
        losses::validate_lambda(self.lambda)
    }

    pub fn optimizer(&self) -> AdamW {
        AdamW::new(self.learning_rate, self.weight_decay)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(state: &mut ModelState, range: Range<usize>, values: &[f64]) {
        state.params[range].copy_from_slice(values);
    }

    #[test]
    fn layout_matches_layer_table() {
        assert_eq!(W1.len() + B1.len(), 12);
        assert_eq!(W2.len() + B2.len(), 112);
        assert_eq!(W3.len() + B3.len(), 17);
        assert_eq!(param_len(Some(4)), 141 + 68);
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = init_model(Some(8), 42).unwrap();
        let b = init_model(Some(8), 42).unwrap();
        assert_eq!(a, b);
        assert!(a.params[W1].iter().all(|w| w.abs() <= 1.0));
        assert!(a.params[W3].iter().all(|w| w.abs() <= 0.25));
        assert!(a.adam_m.iter().chain(&a.adam_v).all(|&m| m == 0.0));
        assert_eq!(a.step_count, 0);
        let plain = init_model(None, 42).unwrap();
        assert_eq!(plain.head, None);
        assert_eq!(plain.params.len(), TRUNK_LEN);
        assert_eq!(&plain.params[..], &a.params[..TRUNK_LEN]);
        assert!(plain.forward(0.3).logits.is_none());
    }

    #[test]
    fn init_outputs_are_finite() {
        for seed in 0..5 {
            let m = init_model(Some(16), seed).unwrap();
            for i in 0..=2000 {
                let f = m.forward(-1.0 + i as f64 / 1000.0);
                assert!(f.y_star.is_finite());
                assert!(f.logits.unwrap().iter().all(|l| l.is_finite()));
            }
        }
    }

    #[test]
    fn zero_weights_give_zero() {
        let mut m = init_model(Some(3), 0).unwrap();
        m.params.iter_mut().for_each(|p| *p = 0.0);
        let f = m.forward(0.77);
        assert_eq!(f.y_star, 0.0);
        assert_eq!(f.logits.unwrap().len(), 3);
    }

    #[test]
    fn single_active_path_is_relu() {
        let mut m = init_model(None, 0).unwrap();
        m.params.iter_mut().for_each(|p| *p = 0.0);
        set(&mut m, W1.start..W1.start + 1, &[1.0]);
        set(&mut m, W2.start..W2.start + 1, &[1.0]);
        set(&mut m, W3.start..W3.start + 1, &[1.0]);
        for x in [-1.0, -0.3, 0.0, 0.25, 1.0] {
            assert_eq!(m.forward(x).y_star, f64::max(x, 0.0));
        }
    }

    #[test]
    fn exact_fit_has_zero_regression_gradient() {
        let m = init_model(None, 3).unwrap();
        let batch: Vec<BatchItem> = [-0.5, 0.1, 0.9]
            .iter()
            .map(|&x| BatchItem { x, y: m.regressor().predict(x), class: None })
            .collect();
        let (g, loss) = m.backward(&batch, 7.0).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        assert_eq!(loss.mse, 0.0);
    }

    #[test]
    fn zero_lambda_silences_output_layer() {
        let m = init_model(Some(4), 5).unwrap();
        let batch = [
            BatchItem { x: 0.2, y: 1.0, class: Some(1) },
            BatchItem { x: -0.7, y: -1.0, class: Some(3) },
        ];
        let (g, _) = m.backward(&batch, 0.0).unwrap();
        assert!(g[W3].iter().chain(&g[B3]).all(|&v| v == 0.0));
        assert!(g[head_weights(4)].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn regression_gradient_is_linear_in_lambda() {
        let m = init_model(None, 9).unwrap();
        let batch = [BatchItem { x: 0.4, y: 0.3, class: None }, BatchItem { x: -0.2, y: -0.8, class: None }];
        let (g1, _) = m.backward(&batch, 1.0).unwrap();
        let (g8, _) = m.backward(&batch, 8.0).unwrap();
        for (a, b) in g1.iter().zip(&g8) {
            assert_eq!(8.0 * a, *b);
        }
    }

    #[test]
    fn backward_rejects_bad_batches() {
        let m = init_model(None, 1).unwrap();
        assert_eq!(m.backward(&[], 1.0).unwrap_err(), Error::EmptyDataset);
        assert!(m.backward(&[BatchItem { x: 0.0, y: 0.0, class: Some(0) }], 1.0).is_err());
        let h = init_model(Some(2), 1).unwrap();
        assert!(matches!(
            h.backward(&[BatchItem { x: 0.0, y: 0.0, class: Some(2) }], 1.0),
            Err(Error::ClassIndex { .. })
        ));
    }

    #[test]
    fn adam_fixed_point_without_gradient() {
        let mut m = init_model(Some(2), 1).unwrap();
        let before = m.params.clone();
        m.adam_step(&alloc::vec![0.0; before.len()], &AdamW::new(0.1, 0.0)).unwrap();
        assert_eq!(m.params, before);
        assert_eq!(m.step_count, 1);
        assert!(matches!(m.adam_step(&[0.0], &AdamW::new(0.1, 0.0)), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn first_adam_step_moves_by_learning_rate() {
        // f(w) = w², w = 1 → g = 2; bias-corrected step is lr·g/(|g| + ε).
        let mut w = [1.0];
        let (mut m, mut v) = ([0.0], [0.0]);
        AdamW::new(0.1, 0.0).update(&mut w, &[2.0], &mut m, &mut v, 1, |_| false);
        assert!(((1.0 - w[0]) - 0.1).abs() < 1e-6);
    }

    #[test]
    fn moments_decay_without_gradient() {
        let opt = AdamW::new(0.01, 0.0);
        let (mut w, mut m, mut v) = ([0.5], [0.0], [0.0]);
        opt.update(&mut w, &[1.0], &mut m, &mut v, 1, |_| false);
        let (m1, v1) = (m[0], v[0]);
        for t in 2..50 {
            opt.update(&mut w, &[0.0], &mut m, &mut v, t, |_| false);
        }
        assert!(m[0].abs() < m1.abs() * 0.01);
        assert!(v[0] < v1);
    }

    #[test]
    fn weight_decay_spares_biases() {
        let mut m = init_model(None, 2).unwrap();
        let before = m.params.clone();
        m.adam_step(&alloc::vec![0.0; TRUNK_LEN], &AdamW::new(0.1, 0.5)).unwrap();
        for i in W1 {
            assert_eq!(m.params[i], before[i] * 0.95);
        }
        assert_eq!(&m.params[B1], &before[B1]);
        assert_eq!(&m.params[B3], &before[B3]);
    }

    #[test]
    fn train_config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { epochs: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { learning_rate: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { lambda: -1.0, ..Default::default() }.validate().is_err());
    }
}
