//! Flat CSV tables for plotting.

use std::path::Path;

use regcls_core::sampling::{SplitDataset, Sample};
use serde::Serialize;

use crate::error::{IoContext, Result};
use crate::summary::Summary;

#[derive(Serialize)]
struct PlotRow<'a> {
    scenario: &'a str,
    sampling: &'a str,
    class_count: usize,
    mode: &'a str,
    mean: f64,
    std: f64,
    n: usize,
}

/// One row per (scenario, sampling, class count, mode) with test MSE mean and std.
pub fn write_plotdata(summary: &Summary, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for c in &summary.cells {
        w.serialize(PlotRow {
            scenario: &c.scenario,
            sampling: c.sampling.name(),
            class_count: c.classes,
            mode: c.mode.name(),
            mean: c.mean,
            std: c.std,
            n: c.n,
        })?;
    }
    w.flush().at(path)
}

#[derive(Serialize)]
struct SweepCsv<'a> {
    scenario: &'a str,
    sampling: &'a str,
    mode: &'a str,
    class_count: usize,
    lambda: f64,
    mean_val: f64,
    mean_test: f64,
    n: usize,
}

/// Mean validation and test MSE per λ.
pub fn write_sweep(summary: &Summary, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in &summary.sweep {
        w.serialize(SweepCsv {
            scenario: &r.scenario,
            sampling: r.sampling.name(),
            mode: r.mode.name(),
            class_count: r.classes,
            lambda: r.lambda,
            mean_val: r.mean_val,
            mean_test: r.mean_test,
            n: r.n,
        })?;
    }
    w.flush().at(path)
}

/// Which split of a dataset to export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn samples(self, data: &SplitDataset) -> &[Sample] {
        match self {
            Split::Train => &data.train,
            Split::Val => &data.val,
            Split::Test => &data.test,
        }
    }
}

/// Two columns `x,y`.
pub fn write_samples(samples: &[Sample], out: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y"])?;
    for s in samples {
        w.write_record([s.x.to_string(), s.y.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
