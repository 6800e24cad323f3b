//! Two-sine ground-truth functions `f(x) = a·sin(c·x) + b·sin(d·x)` on `[-1, 1]`.

use crate::math::sin;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest admissible `|f(x)|` over the domain.
pub const RANGE_BOUND: f64 = 1.5;
/// Number of uniform grid points used for range checks.
pub const GRID_POINTS: usize = 10_001;
/// Rejections tolerated by [`sample_function`] before giving up.
pub const MAX_REJECTIONS: u32 = 10_000;

pub const AMPLITUDE_RANGE: (f64, f64) = (-1.5, 1.5);
pub const FREQUENCY_RANGE: (f64, f64) = (1.0, 12.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionParams {
    pub a: f64,
    pub b: f64,
    /// Angular frequency of the first sine (radians per unit x).
    pub c: f64,
    pub d: f64,
}

impl FunctionParams {
    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    /// Evaluates without the domain check; callers guarantee `x ∈ [-1, 1]`.
    #[inline]
    pub fn eval_unchecked(&self, x: f64) -> f64 {
        self.a * sin(self.c * x) + self.b * sin(self.d * x)
    }

    /// `(min, max)` of `f` over [`GRID_POINTS`] uniform points of `[-1, 1]`.
    pub fn grid_range(&self) -> (f64, f64) {
        self.grid_range_over(-1.0, 1.0)
    }

    /// `(min, max)` of `f` over [`GRID_POINTS`] uniform points of `[lo, hi]`.
    pub fn grid_range_over(&self, lo: f64, hi: f64) -> (f64, f64) {
        let step = (hi - lo) / (GRID_POINTS - 1) as f64;
        (0..GRID_POINTS)
            .map(|i| self.eval_unchecked(lo + step * i as f64))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(mn, mx), y| (mn.min(y), mx.max(y)))
    }

    /// Grid maximum of `|f|`.
    pub fn grid_max_abs(&self) -> f64 {
        let (lo, hi) = self.grid_range();
        lo.abs().max(hi.abs())
    }

    pub fn within_range_bound(&self) -> bool {
        self.grid_max_abs() <= RANGE_BOUND
    }
}

pub fn evaluate(params: &FunctionParams, x: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::Domain { x });
    }
    Ok(params.eval_unchecked(x))
}

/// Draws `a, b ~ U[-1.5, 1.5]` and `c, d ~ U[1, 12]`, resampling until the
/// grid maximum of `|f|` is at most [`RANGE_BOUND`].
pub fn sample_function<R: Rng + ?Sized>(rng: &mut R) -> Result<FunctionParams> {
    for _ in 0..=MAX_REJECTIONS {
        let p = FunctionParams {
            a: rng.gen_range(AMPLITUDE_RANGE.0..=AMPLITUDE_RANGE.1),
            b: rng.gen_range(AMPLITUDE_RANGE.0..=AMPLITUDE_RANGE.1),
            c: rng.gen_range(FREQUENCY_RANGE.0..=FREQUENCY_RANGE.1),
            d: rng.gen_range(FREQUENCY_RANGE.0..=FREQUENCY_RANGE.1),
        };
        if p.within_range_bound() {
            return Ok(p);
        }
    }
    Err(Error::RejectionBudget { what: "function parameters", attempts: MAX_REJECTIONS as u64 })
}

/// The function identified by `seed`.
pub fn function_from_seed(seed: u64) -> Result<FunctionParams> {
    sample_function(&mut crate::rng::stream(seed, crate::rng::Stream::Function))
}
