//! Mini-batch training of the regressor, optionally with the auxiliary
//! classification loss.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::binning::{bernoulli_keep, ClassScheme};
use crate::losses::{self, LossBreakdown};
use crate::model::{init_model, BatchItem, ModelState, TrainConfig};
use crate::rng::{stream, Stream};
use crate::sampling::Sample;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Regression loss only.
    Reg,
    /// Regression plus cross-entropy over uniform bins.
    RegCls,
    /// Regression plus cross-entropy over equalized bins with keep sampling.
    RegClsBal,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Reg, Mode::RegCls, Mode::RegClsBal];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Reg => "reg",
            Mode::RegCls => "reg_cls",
            Mode::RegClsBal => "reg_cls_bal",
        }
    }

    pub fn uses_classes(self) -> bool {
        self != Mode::Reg
    }
}

/// How samples are selected for the classification term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KeepRule {
    /// Keep probabilities of the class scheme.
    Scheme,
    /// The same probability for every class.
    Fixed(f64),
}

/// Everything besides [`TrainConfig`] that shapes a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub mode: Mode,
    pub scheme: Option<ClassScheme>,
    pub keep: KeepRule,
}

impl Task {
    pub fn regression() -> Self {
        Self { mode: Mode::Reg, scheme: None, keep: KeepRule::Scheme }
    }

    /// Builds the class scheme for `mode` from the training targets.
    pub fn for_mode(mode: Mode, train: &[Sample], bins: usize) -> Result<Self> {
        let ys: Vec<f64> = train.iter().map(|s| s.y).collect();
        let scheme = match mode {
            Mode::Reg => None,
            Mode::RegCls => Some(ClassScheme::plain(&ys, bins)?),
            Mode::RegClsBal => Some(ClassScheme::balanced(&ys, bins)?),
        };
        Ok(Self { mode, scheme, keep: KeepRule::Scheme })
    }

    pub fn with_keep(mut self, keep: KeepRule) -> Self {
        self.keep = keep;
        self
    }

    fn keep_probability(&self, class: usize) -> f64 {
        match (self.keep, &self.scheme) {
            (KeepRule::Fixed(p), _) => p,
            (KeepRule::Scheme, Some(s)) => s.keep[class].value(),
            (KeepRule::Scheme, None) => 0.0,
        }
    }

    /// Whether keep decisions need random draws.
    fn stochastic(&self) -> bool {
        match (self.keep, &self.scheme) {
            (KeepRule::Fixed(p), _) => p < 1.0,
            (KeepRule::Scheme, Some(s)) => s.keep.iter().any(|k| k.min_count != k.count),
            (KeepRule::Scheme, None) => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Sample-weighted means over the epoch's batches.
    pub loss: LossBreakdown,
    /// Mean imbalance-gap diagnostic after the epoch, over the first
    /// [`DIAGNOSTIC_SAMPLES`] training samples.
    pub l_extra: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: ModelState,
    pub trace: Vec<EpochLog>,
    pub initial_train_mse: f64,
    pub final_train_mse: f64,
    /// Mean cross-entropy over all training samples before and after training.
    pub initial_cross_entropy: Option<f64>,
    pub final_cross_entropy: Option<f64>,
}

impl TrainOutcome {
    /// The classifier ended worse than it started.
    pub fn classifier_diverged(&self) -> bool {
        matches!((self.initial_cross_entropy, self.final_cross_entropy), (Some(a), Some(b)) if b > a)
    }
}

/// Training samples (a fixed prefix) used for the per-epoch gap diagnostic.
pub const DIAGNOSTIC_SAMPLES: usize = 512;

fn mean_l_extra(model: &ModelState, items: &[BatchItem], prior: &[f64], logits: &mut [f64]) -> Result<f64> {
    let mut sum = 0.0;
    for item in items {
        let hidden = model.regressor().hidden(item.x);
        model.logits_into(&hidden, logits);
        sum += losses::l_extra_diagnostic(logits, item.class.unwrap_or(0), prior)?;
    }
    Ok(sum / items.len() as f64)
}

pub fn train(samples: &[Sample], task: &Task, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if task.mode.uses_classes() != task.scheme.is_some() {
        return Err(Error::InvalidConfig("class scheme must be present exactly for classification modes"));
    }
    if let KeepRule::Fixed(p) = task.keep {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidConfig("fixed keep probability must lie in [0, 1]"));
        }
    }

    let classes: Vec<Option<usize>> = match &task.scheme {
        Some(s) => samples.iter().map(|x| s.class_of(x.y).map(Some)).collect::<Result<_>>()?,
        None => alloc::vec![None; samples.len()],
    };
    let prior = task.scheme.as_ref().map(ClassScheme::class_prior);

    let mut model = init_model(task.scheme.as_ref().map(|s| s.classes), config.seed)?;
    let optimizer = config.optimizer();
    let full: Vec<BatchItem> = samples
        .iter()
        .zip(&classes)
        .map(|(s, &class)| BatchItem { x: s.x, y: s.y, class })
        .collect();
    let initial = model.batch_loss(&full, config.lambda)?;

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut shuffle_rng = stream(config.seed, Stream::Shuffle);
    let mut keep_rng = stream(config.seed, Stream::Keep);
    let stochastic = task.stochastic();
    let mut trace = Vec::with_capacity(config.epochs);
    let mut batch = Vec::with_capacity(config.batch_size);
    let mut logits = alloc::vec![0.0; model.head.unwrap_or(0)];

    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut sq, mut ce, mut kept_total) = (0.0, 0.0, 0usize);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            for &i in chunk {
                let class = classes[i].filter(|&c| {
                    let rho = task.keep_probability(c);
                    if stochastic { bernoulli_keep(rho, &mut keep_rng) } else { rho >= 1.0 }
                });
                batch.push(BatchItem { class, ..full[i] });
            }
            let (grads, loss) = model.backward(&batch, config.lambda)?;
            model.adam_step(&grads, &optimizer)?;
            sq += loss.mse * batch.len() as f64;
            ce += loss.cross_entropy * loss.kept_count as f64;
            kept_total += loss.kept_count;
        }
        let mut loss = losses::breakdown(sq / samples.len() as f64, ce, kept_total, config.lambda);
        loss.kept_count = kept_total;
        let l_extra = match &prior {
            Some(prior) => Some(mean_l_extra(&model, &full[..full.len().min(DIAGNOSTIC_SAMPLES)], prior, &mut logits)?),
            None => None,
        };
        trace.push(EpochLog { epoch, loss, l_extra });
    }

    let fin = model.batch_loss(&full, config.lambda)?;
    let has_classes = task.scheme.is_some();
    Ok(TrainOutcome {
        model,
        trace,
        initial_train_mse: initial.mse,
        final_train_mse: fin.mse,
        initial_cross_entropy: has_classes.then_some(initial.cross_entropy),
        final_cross_entropy: has_classes.then_some(fin.cross_entropy),
    })
}
