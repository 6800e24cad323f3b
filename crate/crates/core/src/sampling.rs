//! Dataset construction: clean, noisy and out-of-distribution scenarios
//! crossed with uniform or peaked ("imbalanced") target sampling.
//!
//! Imbalance is realized in target space. A peak region
//! `[center - r·W/2, center + r·W/2]` is placed on the y-axis, where `W` is
//! the width of the function's range and `r` the regime's variance ratio.
//! A fixed fraction of the pool is drawn with `f(x)` inside the region and
//! the rest with `f(x)` outside it, both by rejection sampling on uniform `x`.
//!
//! Split procedure for clean and noisy data: draw the whole pool under the
//! regime, partition it into thirds, then redraw the test inputs uniformly.
//! Validation keeps the training regime.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{stream, LabRng, Stream};
use crate::synth::FunctionParams;
use crate::{Error, Result};

pub const DEFAULT_TOTAL: usize = 30_000;
pub const DEFAULT_PEAK_FRACTION: f64 = 0.75;
/// Peak centers are drawn from this central fraction of the function range.
pub const PEAK_CENTER_SPAN: f64 = 0.8;
/// Consecutive rejections allowed while drawing a single sample.
pub const MAX_CONSECUTIVE_REJECTIONS: u64 = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Clean,
    Noisy,
    Ood,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [ScenarioKind::Clean, ScenarioKind::Noisy, ScenarioKind::Ood];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Clean => "clean",
            ScenarioKind::Noisy => "noisy",
            ScenarioKind::Ood => "ood",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    /// Half-width of the uniform target noise. Zero unless `kind` is noisy.
    pub noise_sigma: f64,
}

impl ScenarioSpec {
    pub const fn clean() -> Self {
        Self { kind: ScenarioKind::Clean, noise_sigma: 0.0 }
    }

    pub const fn ood() -> Self {
        Self { kind: ScenarioKind::Ood, noise_sigma: 0.0 }
    }

    pub fn noisy(noise_sigma: f64) -> Result<Self> {
        let spec = Self { kind: ScenarioKind::Noisy, noise_sigma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let is_noisy = self.kind == ScenarioKind::Noisy;
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::InvalidConfig("noise_sigma must be finite and non-negative"));
        }
        if is_noisy != (self.noise_sigma > 0.0) {
            return Err(Error::InvalidConfig("noise_sigma must be positive exactly when the scenario is noisy"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Uniform,
    Mild,
    Moderate,
    Severe,
}

impl Regime {
    pub const ALL: [Regime; 4] = [Regime::Uniform, Regime::Mild, Regime::Moderate, Regime::Severe];

    /// Width of the peak region as a fraction of the function range.
    pub fn variance_ratio(self) -> Option<f64> {
        match self {
            Regime::Uniform => None,
            Regime::Mild => Some(0.3),
            Regime::Moderate => Some(0.1),
            Regime::Severe => Some(0.03),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::Uniform => "uniform",
            Regime::Mild => "mild",
            Regime::Moderate => "moderate",
            Regime::Severe => "severe",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    pub regime: Regime,
    pub peak_fraction: f64,
    /// Fixed peak center; drawn from the data seed when `None`.
    pub peak_center_y: Option<f64>,
}

impl SamplingSpec {
    pub const fn new(regime: Regime) -> Self {
        Self { regime, peak_fraction: DEFAULT_PEAK_FRACTION, peak_center_y: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak_fraction > 0.0 && self.peak_fraction < 1.0) {
            return Err(Error::InvalidConfig("peak_fraction must lie in (0, 1)"));
        }
        if matches!(self.peak_center_y, Some(c) if !c.is_finite()) {
            return Err(Error::InvalidConfig("peak_center_y must be finite"));
        }
        Ok(())
    }
}

/// Closed target interval that receives the frequent samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakRegion {
    pub center: f64,
    pub lo: f64,
    pub hi: f64,
}

impl PeakRegion {
    pub fn new(center: f64, variance_ratio: f64, range_width: f64) -> Self {
        let half = variance_ratio * range_width / 2.0;
        Self { center, lo: center - half, hi: center + half }
    }

    #[inline]
    pub fn contains(&self, y: f64) -> bool {
        self.lo <= y && y <= self.hi
    }
}

/// A finite union of disjoint closed intervals of `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub intervals: Vec<(f64, f64)>,
}

impl Region {
    pub fn full() -> Self {
        Self { intervals: alloc::vec![(-1.0, 1.0)] }
    }

    pub fn length(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= x && x <= b)
    }

    /// Total length of the intersection with `other`.
    pub fn overlap_length(&self, other: &Region) -> f64 {
        let mut total = 0.0;
        for &(a, b) in &self.intervals {
            for &(c, d) in &other.intervals {
                let lo = a.max(c);
                let hi = b.min(d);
                if hi > lo {
                    total += hi - lo;
                }
            }
        }
        total
    }

    /// Uniform draw over the union.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let total = self.length();
        let mut u = rng.gen::<f64>() * total;
        for &(a, b) in &self.intervals {
            let len = b - a;
            if u < len {
                return a + u;
            }
            u -= len;
        }
        let (_, b) = self.intervals[self.intervals.len() - 1];
        b
    }

    /// `(min, max)` of `f` over a uniform grid laid across the union.
    fn function_range(&self, params: &FunctionParams) -> (f64, f64) {
        let total = self.length();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &(a, b) in &self.intervals {
            let share = (b - a) / total;
            let (l, h) = grid_range_share(params, a, b, share);
            lo = lo.min(l);
            hi = hi.max(h);
        }
        (lo, hi)
    }

    fn merged(mut intervals: Vec<(f64, f64)>) -> Self {
        intervals.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
        for (a, b) in intervals {
            match out.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        Self { intervals: out }
    }
}

fn grid_range_share(params: &FunctionParams, a: f64, b: f64, share: f64) -> (f64, f64) {
    if share >= 1.0 - 1e-12 {
        return params.grid_range_over(a, b);
    }
    let n = crate::math::ceil(crate::synth::GRID_POINTS as f64 * share).max(2.0) as usize;
    let step = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| params.eval_unchecked(a + step * i as f64))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(mn, mx), y| (mn.min(y), mx.max(y)))
}

/// Layout of the out-of-distribution split.
///
/// `[-1, 1]` is cut into `intervals` equal pieces, alternately assigned to
/// training (even indices) and evaluation (odd indices). The first
/// `shared` evaluation pieces are additionally given to training, so the
/// overlap is `shared / (intervals / 2)` of the evaluation length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OodLayout {
    pub intervals: usize,
    pub shared: usize,
}

impl Default for OodLayout {
    fn default() -> Self {
        Self { intervals: 8, shared: 1 }
    }
}

impl OodLayout {
    pub fn validate(&self) -> Result<()> {
        if self.intervals < 2 || self.intervals % 2 != 0 {
            return Err(Error::InvalidConfig("OOD interval count must be even and at least 2"));
        }
        if self.shared == 0 || self.shared > self.intervals / 2 {
            return Err(Error::InvalidConfig("OOD shared interval count must lie in 1..=intervals/2"));
        }
        Ok(())
    }

    pub fn overlap_fraction(&self) -> f64 {
        self.shared as f64 / (self.intervals / 2) as f64
    }

    /// `(training region, evaluation region)`.
    pub fn regions(&self) -> Result<(Region, Region)> {
        self.validate()?;
        let width = 2.0 / self.intervals as f64;
        let piece = |i: usize| (-1.0 + width * i as f64, -1.0 + width * (i + 1) as f64);
        let eval: Vec<_> = (0..self.intervals).filter(|i| i % 2 == 1).map(piece).collect();
        let mut train: Vec<_> = (0..self.intervals).filter(|i| i % 2 == 0).map(piece).collect();
        train.extend(eval.iter().take(self.shared).copied());
        Ok((Region::merged(train), Region::merged(eval)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDataset {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
    pub scenario: ScenarioSpec,
    /// The sampling spec with `peak_center_y` resolved when a peak was used.
    pub sampling: SamplingSpec,
    pub peak: Option<PeakRegion>,
    pub train_region: Region,
    pub eval_region: Region,
    pub seed: u64,
}

impl SplitDataset {
    pub fn train_targets(&self) -> impl Iterator<Item = f64> + '_ {
        self.train.iter().map(|s| s.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetBuilder {
    pub n_total: usize,
    pub ood: OodLayout,
}

impl Default for DatasetBuilder {
    fn default() -> Self {
        Self { n_total: DEFAULT_TOTAL, ood: OodLayout::default() }
    }
}

impl DatasetBuilder {
    pub fn with_total(n_total: usize) -> Self {
        Self { n_total, ..Self::default() }
    }

    /// Dispatches on the scenario kind.
    pub fn build(
        &self,
        params: &FunctionParams,
        scenario: &ScenarioSpec,
        sampling: &SamplingSpec,
        seed: u64,
    ) -> Result<SplitDataset> {
        match scenario.kind {
            ScenarioKind::Ood => self.build_ood(params, scenario, sampling, seed),
            _ => self.build_in_distribution(params, scenario, sampling, seed),
        }
    }

    fn check(&self, scenario: &ScenarioSpec, sampling: &SamplingSpec) -> Result<()> {
        scenario.validate()?;
        sampling.validate()?;
        if self.n_total < 3 {
            return Err(Error::InvalidConfig("n_total must be at least 3"));
        }
        Ok(())
    }

    fn build_in_distribution(
        &self,
        params: &FunctionParams,
        scenario: &ScenarioSpec,
        sampling: &SamplingSpec,
        seed: u64,
    ) -> Result<SplitDataset> {
        if scenario.kind == ScenarioKind::Ood {
            return Err(Error::InvalidConfig("out-of-distribution scenario needs the OOD builder"));
        }
        self.check(scenario, sampling)?;
        let full = Region::full();
        let peak = resolve_peak(params, &full, sampling, seed)?;
        let pool = draw_pool(params, &full, sampling, peak.as_ref(), self.n_total, &mut stream(seed, Stream::TrainPool))?;

        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.shuffle(&mut stream(seed, Stream::Partition));
        let (n_train, n_val) = split_sizes(self.n_total);
        let train_x: Vec<f64> = order[..n_train].iter().map(|&i| pool[i]).collect();
        let val_x: Vec<f64> = order[n_train..n_train + n_val].iter().map(|&i| pool[i]).collect();
        let n_test = self.n_total - n_train - n_val;
        let mut test_rng = stream(seed, Stream::TestInputs);
        let test_x: Vec<f64> = (0..n_test).map(|_| full.sample(&mut test_rng)).collect();

        let mut noise = stream(seed, Stream::Noise);
        Ok(SplitDataset {
            train: label(params, scenario, &train_x, &mut noise),
            val: label(params, scenario, &val_x, &mut noise),
            test: label(params, scenario, &test_x, &mut noise),
            scenario: *scenario,
            sampling: SamplingSpec { peak_center_y: peak.map(|p| p.center), ..*sampling },
            peak,
            train_region: full.clone(),
            eval_region: full,
            seed,
        })
    }

    /// Training inputs come from the training region under the sampling
    /// regime; validation and test inputs are uniform over the evaluation region.
    fn build_ood(
        &self,
        params: &FunctionParams,
        scenario: &ScenarioSpec,
        sampling: &SamplingSpec,
        seed: u64,
    ) -> Result<SplitDataset> {
        if scenario.kind != ScenarioKind::Ood {
            return Err(Error::InvalidConfig("OOD builder called with a non-OOD scenario"));
        }
        self.check(scenario, sampling)?;
        let (train_region, eval_region) = self.ood.regions()?;
        let peak = resolve_peak(params, &train_region, sampling, seed)?;
        let (n_train, n_val) = split_sizes(self.n_total);
        let n_test = self.n_total - n_train - n_val;
        let train_x = draw_pool(params, &train_region, sampling, peak.as_ref(), n_train, &mut stream(seed, Stream::TrainPool))?;
        let mut eval_rng = stream(seed, Stream::EvalPool);
        let val_x: Vec<f64> = (0..n_val).map(|_| eval_region.sample(&mut eval_rng)).collect();
        let mut test_rng = stream(seed, Stream::TestInputs);
        let test_x: Vec<f64> = (0..n_test).map(|_| eval_region.sample(&mut test_rng)).collect();

        let mut noise = stream(seed, Stream::Noise);
        Ok(SplitDataset {
            train: label(params, scenario, &train_x, &mut noise),
            val: label(params, scenario, &val_x, &mut noise),
            test: label(params, scenario, &test_x, &mut noise),
            scenario: *scenario,
            sampling: SamplingSpec { peak_center_y: peak.map(|p| p.center), ..*sampling },
            peak,
            train_region,
            eval_region,
            seed,
        })
    }
}

pub fn build_dataset(
    params: &FunctionParams,
    scenario: &ScenarioSpec,
    sampling: &SamplingSpec,
    seed: u64,
) -> Result<SplitDataset> {
    DatasetBuilder::default().build_in_distribution(params, scenario, sampling, seed)
}

pub fn build_ood_dataset(
    params: &FunctionParams,
    scenario: &ScenarioSpec,
    sampling: &SamplingSpec,
    seed: u64,
) -> Result<SplitDataset> {
    DatasetBuilder::default().build_ood(params, scenario, sampling, seed)
}

/// `(train, val)` sizes; test takes the remainder.
fn split_sizes(n_total: usize) -> (usize, usize) {
    let third = n_total / 3;
    (third, third)
}

fn resolve_peak(
    params: &FunctionParams,
    region: &Region,
    sampling: &SamplingSpec,
    seed: u64,
) -> Result<Option<PeakRegion>> {
    let Some(ratio) = sampling.regime.variance_ratio() else {
        return Ok(None);
    };
    let (lo, hi) = region.function_range(params);
    let width = hi - lo;
    if width.is_nan() || width <= 0.0 {
        return Err(Error::InvalidRange { lo, hi });
    }
    let center = match sampling.peak_center_y {
        Some(c) => c,
        None => {
            let margin = width * (1.0 - PEAK_CENTER_SPAN) / 2.0;
            stream(seed, Stream::PeakCenter).gen_range(lo + margin..=hi - margin)
        }
    };
    Ok(Some(PeakRegion::new(center, ratio, width)))
}

fn draw_pool(
    params: &FunctionParams,
    region: &Region,
    sampling: &SamplingSpec,
    peak: Option<&PeakRegion>,
    n: usize,
    rng: &mut LabRng,
) -> Result<Vec<f64>> {
    let Some(peak) = peak else {
        return Ok((0..n).map(|_| region.sample(rng)).collect());
    };
    let n_peak = crate::math::round(sampling.peak_fraction * n as f64) as usize;
    let mut xs = Vec::with_capacity(n);
    for i in 0..n {
        let inside = i < n_peak;
        xs.push(draw_where(region, rng, |x| peak.contains(params.eval_unchecked(x)) == inside)?);
    }
    Ok(xs)
}

fn draw_where<F: Fn(f64) -> bool>(region: &Region, rng: &mut LabRng, accept: F) -> Result<f64> {
    for _ in 0..MAX_CONSECUTIVE_REJECTIONS {
        let x = region.sample(rng);
        if accept(x) {
            return Ok(x);
        }
    }
    Err(Error::RejectionBudget { what: "inputs for the peak region", attempts: MAX_CONSECUTIVE_REJECTIONS })
}

fn label(params: &FunctionParams, scenario: &ScenarioSpec, xs: &[f64], noise: &mut LabRng) -> Vec<Sample> {
    xs.iter()
        .map(|&x| {
            let clean = params.eval_unchecked(x);
            let y = if scenario.kind == ScenarioKind::Noisy {
                clean + noise.gen_range(-scenario.noise_sigma..=scenario.noise_sigma)
            } else {
                clean
            };
            Sample { x, y }
        })
        .collect()
}
