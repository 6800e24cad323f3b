//! One training run: dataset, class scheme, training and evaluation.

use std::time::Instant;

use regcls_core::model::TrainConfig;
use regcls_core::rng::derive_seed;
use regcls_core::sampling::{DatasetBuilder, OodLayout, Sample, SamplingSpec, ScenarioSpec, SplitDataset};
use regcls_core::synth::{function_from_seed, FunctionParams};
use regcls_core::train::{train, EpochLog, Mode, Task};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

/// Class counts swept in the full grid.
pub const CLASS_COUNTS: [usize; 5] = [4, 16, 64, 256, 1024];

/// Optimizer settings shared by all trials of a grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub epochs: usize,
    pub weight_decay: f64,
    pub batch_size: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let c = TrainConfig::default();
        Self { learning_rate: c.learning_rate, epochs: c.epochs, weight_decay: c.weight_decay, batch_size: c.batch_size }
    }
}

impl TrainSettings {
    pub fn config(&self, lambda: f64, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
            lambda,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub function_seed: u64,
    pub data_seed: u64,
    pub train_seed: u64,
    pub scenario: ScenarioSpec,
    pub sampling: SamplingSpec,
    pub mode: Mode,
    /// Number of uniform bins. Regression-only trials keep it as a column label.
    pub classes: usize,
    pub lambda: f64,
    pub train: TrainSettings,
    pub n_total: usize,
    pub ood: OodLayout,
}

impl TrialSpec {
    pub fn new(function_seed: u64, scenario: ScenarioSpec, sampling: SamplingSpec, mode: Mode, classes: usize) -> Self {
        Self {
            function_seed,
            data_seed: 0,
            train_seed: 0,
            scenario,
            sampling,
            mode,
            classes,
            lambda: 1.0,
            train: TrainSettings::default(),
            n_total: regcls_core::sampling::DEFAULT_TOTAL,
            ood: OodLayout::default(),
        }
        .with_seed(0)
    }

    /// Data from `seed`; initialization and shuffling from a seed derived
    /// from `seed` and the class count, so each class-count column gets its
    /// own training randomness while sharing the data.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.data_seed = seed;
        self.train_seed = derive_seed(seed, self.classes as u64);
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    /// Regression-only trials ignore λ; it is pinned to 1.
    pub fn normalized(mut self) -> Self {
        if self.mode == Mode::Reg {
            self.lambda = 1.0;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.sampling.validate()?;
        self.ood.validate()?;
        if self.mode.uses_classes() && self.classes < 2 {
            return Err(HarnessError::Config(format!("{} needs at least 2 classes, got {}", self.mode.name(), self.classes)));
        }
        if self.n_total < 3 {
            return Err(HarnessError::Config(format!("n_total must be at least 3, got {}", self.n_total)));
        }
        self.train_config().validate()?;
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        self.train.config(self.normalized().lambda, self.train_seed)
    }

    /// First 16 hex digits of the SHA-256 of the normalized spec's JSON.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(&self.normalized()).expect("spec serializes");
        Sha256::digest(&json).iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn function(&self) -> Result<FunctionParams> {
        Ok(function_from_seed(self.function_seed)?)
    }

    pub fn dataset(&self) -> Result<SplitDataset> {
        let builder = DatasetBuilder { n_total: self.n_total, ood: self.ood };
        Ok(builder.build(&self.function()?, &self.scenario, &self.sampling, self.data_seed)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub fingerprint: String,
    pub spec: TrialSpec,
    pub function: FunctionParams,
    pub peak_center: Option<f64>,
    pub test_mse: f64,
    pub val_mse: f64,
    pub train_mse: f64,
    pub initial_train_mse: f64,
    pub trace: Vec<EpochLog>,
    /// Classes seen by the head: `C` for plain bins, `C̄` after equalization.
    pub effective_classes: Option<usize>,
    pub classifier_diverged: bool,
    pub initial_cross_entropy: Option<f64>,
    pub final_cross_entropy: Option<f64>,
    pub wall_time_s: f64,
}

impl TrialResult {
    /// Equality ignoring wall time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        Self { wall_time_s: 0.0, ..self.clone() } == Self { wall_time_s: 0.0, ..other.clone() }
    }
}

fn split_mse(model: &regcls_core::model::ModelState, split: &[Sample], what: &'static str) -> Result<f64> {
    let mse = model.regressor().mse(split.iter().map(|s| (s.x, s.y)))?;
    if !mse.is_finite() {
        return Err(HarnessError::NonFinite(what));
    }
    Ok(mse)
}

/// Builds the data, trains with the final-epoch model and evaluates the
/// regression output.
pub fn run_trial(spec: &TrialSpec) -> Result<TrialResult> {
    let start = Instant::now();
    let spec = spec.normalized();
    spec.validate()?;
    let data = spec.dataset()?;
    let task = Task::for_mode(spec.mode, &data.train, spec.classes)?;
    let outcome = train(&data.train, &task, &spec.train_config())?;
    let model = &outcome.model;
    Ok(TrialResult {
        fingerprint: spec.fingerprint(),
        spec,
        function: spec.function()?,
        peak_center: data.peak.map(|p| p.center),
        test_mse: split_mse(model, &data.test, "test MSE")?,
        val_mse: split_mse(model, &data.val, "validation MSE")?,
        train_mse: split_mse(model, &data.train, "train MSE")?,
        initial_train_mse: outcome.initial_train_mse,
        classifier_diverged: outcome.classifier_diverged(),
        effective_classes: task.scheme.as_ref().map(|s| s.classes),
        initial_cross_entropy: outcome.initial_cross_entropy,
        final_cross_entropy: outcome.final_cross_entropy,
        trace: outcome.trace,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use regcls_core::sampling::Regime;
    use regcls_core::train::KeepRule;

    fn small(mode: Mode) -> TrialSpec {
        let mut s = TrialSpec::new(2, ScenarioSpec::clean(), SamplingSpec::new(Regime::Severe), mode, 16).with_seed(421);
        s.n_total = 1_500;
        s.train.epochs = 5;
        s
    }

    #[test]
    fn regression_ignores_lambda() {
        let a = small(Mode::Reg).with_lambda(100.0);
        let b = small(Mode::Reg).with_lambda(0.5);
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.train_config().lambda, 1.0);
        assert_ne!(small(Mode::RegCls).with_lambda(100.0).fingerprint(), small(Mode::RegCls).fingerprint());
    }

    #[test]
    fn fingerprint_tracks_every_field() {
        let base = small(Mode::RegCls);
        let variants = [
            TrialSpec { function_seed: 3, ..base },
            TrialSpec { data_seed: 1, ..base },
            TrialSpec { train_seed: 1, ..base },
            TrialSpec { classes: 64, ..base },
            TrialSpec { n_total: 1_501, ..base },
            TrialSpec { train: TrainSettings { epochs: 6, ..base.train }, ..base },
            TrialSpec { mode: Mode::RegClsBal, ..base },
        ];
        for v in variants {
            assert_ne!(v.fingerprint(), base.fingerprint());
        }
        assert_eq!(base.fingerprint().len(), 16);
    }

    #[test]
    fn repeated_trial_is_bitwise_identical() {
        let a = run_trial(&small(Mode::RegClsBal)).unwrap();
        let b = run_trial(&small(Mode::RegClsBal)).unwrap();
        assert!(a.same_outcome(&b));
        assert_eq!(a.test_mse.to_bits(), b.test_mse.to_bits());
    }

    #[test]
    fn balanced_severe_records_effective_classes() {
        let r = run_trial(&small(Mode::RegClsBal)).unwrap();
        let c_bar = r.effective_classes.unwrap();
        assert!((1..=16).contains(&c_bar));
        assert!(r.test_mse >= 0.0);
        assert_eq!(r.trace.len(), 5);
    }

    #[test]
    fn inert_classification_matches_regression() {
        // λ = 1 for both; keep probability 0 switches the head off.
        let spec = small(Mode::RegCls);
        let data = spec.dataset().unwrap();
        let cls = Task::for_mode(Mode::RegCls, &data.train, 16).unwrap().with_keep(KeepRule::Fixed(0.0));
        let reg = Task::regression();
        let a = train(&data.train, &cls, &spec.train_config()).unwrap();
        let b = train(&data.train, &reg, &spec.train_config()).unwrap();
        let mse = |m: &regcls_core::model::ModelState| m.regressor().mse(data.test.iter().map(|s| (s.x, s.y))).unwrap();
        assert_eq!(mse(&a.model).to_bits(), mse(&b.model).to_bits());
    }

    #[test]
    fn results_roundtrip_through_json() {
        let r = run_trial(&small(Mode::RegCls)).unwrap();
        let back: TrialResult = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(TrialSpec { classes: 1, ..small(Mode::RegCls) }.validate().is_err());
        assert!(TrialSpec { classes: 1, ..small(Mode::Reg) }.validate().is_ok());
        assert!(TrialSpec { n_total: 2, ..small(Mode::Reg) }.validate().is_err());
        assert!(small(Mode::RegCls).with_lambda(-1.0).validate().is_err());
    }
}
