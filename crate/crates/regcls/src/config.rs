//! Grid configuration files (TOML) and the trial planner.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use regcls_core::losses::{validate_lambda, LAMBDA_GRID};
use regcls_core::sampling::{OodLayout, Regime, SamplingSpec, ScenarioKind, ScenarioSpec, DEFAULT_PEAK_FRACTION, DEFAULT_TOTAL};
use regcls_core::train::Mode;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, IoContext, Result};
use crate::trial::{TrainSettings, TrialSpec, CLASS_COUNTS};

pub const DEFAULT_SEEDS: [u64; 5] = [0, 421, 8125, 2481, 849];
pub const DEFAULT_NOISE_SIGMA: f64 = 0.1;
pub const NOISE_ABLATION_SIGMAS: [f64; 3] = [0.05, 0.1, 0.5];

/// Either a count (seeds `0..n`) or explicit function seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Functions {
    Count(u64),
    Seeds(Vec<u64>),
}

impl Functions {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            Functions::Count(n) => (0..*n).collect(),
            Functions::Seeds(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningRates {
    pub clean: f64,
    pub noisy: f64,
    pub ood: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self { clean: 1e-3, noisy: 1e-2, ood: 1e-4 }
    }
}

impl LearningRates {
    pub fn get(&self, kind: ScenarioKind) -> f64 {
        match kind {
            ScenarioKind::Clean => self.clean,
            ScenarioKind::Noisy => self.noisy,
            ScenarioKind::Ood => self.ood,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainGrid {
    pub learning_rate: LearningRates,
    pub epochs: usize,
    pub weight_decay: f64,
    pub batch_size: usize,
}

impl Default for TrainGrid {
    fn default() -> Self {
        let t = TrainSettings::default();
        Self { learning_rate: LearningRates::default(), epochs: t.epochs, weight_decay: t.weight_decay, batch_size: t.batch_size }
    }
}

impl TrainGrid {
    pub fn settings(&self, kind: ScenarioKind) -> TrainSettings {
        TrainSettings {
            learning_rate: self.learning_rate.get(kind),
            epochs: self.epochs,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub name: String,
    #[serde(default = "default_functions")]
    pub functions: Functions,
    pub scenarios: Vec<ScenarioKind>,
    /// Noise levels of the noisy scenario; each one is its own scenario row.
    #[serde(default = "default_noise_sigmas")]
    pub noise_sigmas: Vec<f64>,
    pub samplings: Vec<Regime>,
    #[serde(default = "default_peak_fraction")]
    pub peak_fraction: f64,
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
    pub class_counts: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_total")]
    pub n_total: usize,
    #[serde(default)]
    pub ood: OodLayout,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub train: TrainGrid,
}

fn default_functions() -> Functions {
    Functions::Count(3)
}
fn default_noise_sigmas() -> Vec<f64> {
    vec![DEFAULT_NOISE_SIGMA]
}
fn default_peak_fraction() -> f64 {
    DEFAULT_PEAK_FRACTION
}
fn default_modes() -> Vec<Mode> {
    Mode::ALL.to_vec()
}
fn default_seeds() -> Vec<u64> {
    DEFAULT_SEEDS.to_vec()
}
fn default_lambdas() -> Vec<f64> {
    LAMBDA_GRID.to_vec()
}
fn default_total() -> usize {
    DEFAULT_TOTAL
}

/// Trial counts of a plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlanSummary {
    pub trials: usize,
    /// Grid cells (one per function, scenario, sampling, class count and seed) per mode.
    pub cells_per_mode: BTreeMap<Mode, usize>,
    pub trials_per_mode: BTreeMap<Mode, usize>,
}

impl GridConfig {
    /// 3 functions × 2 scenarios × 2 samplings × 2 class counts × 3 seeds.
    pub fn desk() -> Self {
        Self {
            name: "desk".into(),
            functions: Functions::Count(3),
            scenarios: vec![ScenarioKind::Clean, ScenarioKind::Noisy],
            noise_sigmas: default_noise_sigmas(),
            samplings: vec![Regime::Uniform, Regime::Severe],
            peak_fraction: DEFAULT_PEAK_FRACTION,
            modes: Mode::ALL.to_vec(),
            class_counts: vec![4, 16],
            seeds: DEFAULT_SEEDS[..3].to_vec(),
            lambdas: vec![1e1, 1e2, 1e3],
            n_total: DEFAULT_TOTAL,
            ood: OodLayout::default(),
            workers: None,
            train: TrainGrid::default(),
        }
    }

    /// 10 functions × 3 scenarios × 4 samplings × 5 class counts × 5 seeds per mode.
    pub fn paper() -> Self {
        Self {
            name: "paper".into(),
            functions: Functions::Count(10),
            scenarios: ScenarioKind::ALL.to_vec(),
            samplings: Regime::ALL.to_vec(),
            class_counts: CLASS_COUNTS.to_vec(),
            seeds: DEFAULT_SEEDS.to_vec(),
            lambdas: LAMBDA_GRID.to_vec(),
            ..Self::desk()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "desk" => Some(Self::desk()),
            "paper" => Some(Self::paper()),
            _ => None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path).at(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.name.trim().is_empty() || self.name.contains(['/', '\\']) {
            return bad(format!("name {:?} must be a non-empty plain file name", self.name));
        }
        let functions = self.functions.seeds();
        for (what, len) in [
            ("functions", functions.len()),
            ("scenarios", self.scenarios.len()),
            ("samplings", self.samplings.len()),
            ("modes", self.modes.len()),
            ("class_counts", self.class_counts.len()),
            ("seeds", self.seeds.len()),
        ] {
            if len == 0 {
                return bad(format!("{what} must not be empty"));
            }
        }
        if self.modes.iter().any(|m| m.uses_classes()) && self.lambdas.is_empty() {
            return bad("lambdas must not be empty when a classification mode is planned".into());
        }
        check_unique("functions", &functions)?;
        check_unique("scenarios", &self.scenarios)?;
        check_unique("samplings", &self.samplings)?;
        check_unique("modes", &self.modes)?;
        check_unique("class_counts", &self.class_counts)?;
        check_unique("seeds", &self.seeds)?;
        check_unique("lambdas", &self.lambdas.iter().map(|l| l.to_bits()).collect::<Vec<_>>())?;
        check_unique("noise_sigmas", &self.noise_sigmas.iter().map(|l| l.to_bits()).collect::<Vec<_>>())?;
        if let Some(&c) = self.class_counts.iter().find(|&&c| c < 2) {
            return bad(format!("class count {c} is below 2"));
        }
        for &l in &self.lambdas {
            validate_lambda(l).map_err(|e| HarnessError::Config(format!("lambda {l}: {e}")))?;
        }
        if self.scenarios.contains(&ScenarioKind::Noisy) && self.noise_sigmas.is_empty() {
            return bad("noise_sigmas must not be empty for the noisy scenario".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        for spec in self.scenario_specs() {
            spec.validate()?;
        }
        for &regime in &self.samplings {
            self.sampling(regime).validate()?;
        }
        self.ood.validate()?;
        for &kind in &self.scenarios {
            self.train.settings(kind).config(1.0, 0).validate()?;
        }
        if self.n_total < 3 {
            return bad(format!("n_total must be at least 3, got {}", self.n_total));
        }
        Ok(())
    }

    /// Scenario rows in config order, with one noisy row per noise level.
    pub fn scenario_specs(&self) -> Vec<ScenarioSpec> {
        self.scenarios
            .iter()
            .flat_map(|&kind| match kind {
                ScenarioKind::Noisy => self
                    .noise_sigmas
                    .iter()
                    .map(|&s| ScenarioSpec { kind, noise_sigma: s })
                    .collect::<Vec<_>>(),
                ScenarioKind::Clean => vec![ScenarioSpec::clean()],
                ScenarioKind::Ood => vec![ScenarioSpec::ood()],
            })
            .collect()
    }

    fn sampling(&self, regime: Regime) -> SamplingSpec {
        SamplingSpec { peak_fraction: self.peak_fraction, ..SamplingSpec::new(regime) }
    }

    /// Every trial of the grid, in a fixed order.
    pub fn plan(&self) -> Result<Vec<TrialSpec>> {
        self.validate()?;
        let mut out = Vec::new();
        for function_seed in self.functions.seeds() {
            for scenario in self.scenario_specs() {
                for &regime in &self.samplings {
                    for &mode in &self.modes {
                        for &classes in &self.class_counts {
                            for &seed in &self.seeds {
                                let mut spec = TrialSpec::new(function_seed, scenario, self.sampling(regime), mode, classes)
                                    .with_seed(seed);
                                spec.train = self.train.settings(scenario.kind);
                                spec.n_total = self.n_total;
                                spec.ood = self.ood;
                                if mode.uses_classes() {
                                    out.extend(self.lambdas.iter().map(|&l| spec.with_lambda(l)));
                                } else {
                                    out.push(spec.normalized());
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn plan_summary(&self) -> Result<PlanSummary> {
        let plan = self.plan()?;
        let cells = self.functions.seeds().len()
            * self.scenario_specs().len()
            * self.samplings.len()
            * self.class_counts.len()
            * self.seeds.len();
        let mut trials_per_mode = BTreeMap::new();
        for spec in &plan {
            *trials_per_mode.entry(spec.mode).or_insert(0) += 1;
        }
        Ok(PlanSummary {
            trials: plan.len(),
            cells_per_mode: self.modes.iter().map(|&m| (m, cells)).collect(),
            trials_per_mode,
        })
    }
}

fn check_unique<T: Ord + std::fmt::Debug>(what: &str, items: &[T]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for item in items {
        if !seen.insert(item) {
            return Err(HarnessError::Config(format!("duplicate entry {item:?} in {what}")));
        }
    }
    Ok(())
}
