//! Runs planned trials on a worker pool with resumable storage.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::GridConfig;
use crate::error::{HarnessError, Result};
use crate::store::{completed_fingerprints, ResultStore, TrialFailure};
use crate::trial::{run_trial, TrialResult, TrialSpec};

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GridReport {
    pub planned: usize,
    /// Already present in the results directory.
    pub skipped: usize,
    pub completed: usize,
    pub failures: Vec<TrialFailure>,
}

/// Progress notification after each finished trial.
#[derive(Debug)]
pub enum Progress<'a> {
    Done { index: usize, total: usize, result: &'a TrialResult },
    Failed { index: usize, total: usize, failure: &'a TrialFailure },
}

/// Runs `specs` that are not yet stored in `dir`. Failing trials are
/// recorded and reported without stopping the others.
pub fn run_specs(
    specs: &[TrialSpec],
    dir: &Path,
    workers: Option<usize>,
    progress: &(dyn Fn(Progress<'_>) + Sync),
) -> Result<GridReport> {
    let done = completed_fingerprints(dir)?;
    let mut seen = std::collections::BTreeSet::new();
    let pending: Vec<&TrialSpec> =
        specs.iter().filter(|s| seen.insert(s.fingerprint())).filter(|s| !done.contains(&s.fingerprint())).collect();
    let store = ResultStore::open(dir)?;
    let total = pending.len();
    let counter = AtomicUsize::new(0);
    let failures = Mutex::new(Vec::new());
    let write_error = Mutex::new(None);

    let work = || {
        pending.par_iter().for_each(|spec| {
            let outcome = run_trial(spec);
            let index = counter.fetch_add(1, Ordering::Relaxed) + 1;
            let stored = match outcome {
                Ok(result) => {
                    progress(Progress::Done { index, total, result: &result });
                    store.append(&result)
                }
                Err(e) => {
                    let failure = TrialFailure { fingerprint: spec.fingerprint(), spec: **spec, error: e.to_string() };
                    progress(Progress::Failed { index, total, failure: &failure });
                    let r = store.append_failure(&failure);
                    failures.lock().unwrap_or_else(|e| e.into_inner()).push(failure);
                    r
                }
            };
            if let Err(e) = stored {
                write_error.lock().unwrap_or_else(|e| e.into_inner()).get_or_insert(e);
            }
        })
    };
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?
            .install(work),
        None => work(),
    }
    if let Some(e) = write_error.into_inner().unwrap_or_else(|e| e.into_inner()) {
        return Err(e);
    }
    let mut failures = failures.into_inner().unwrap_or_else(|e| e.into_inner());
    failures.sort_by(|a, b| a.fingerprint.cmp(&b.fingerprint));
    Ok(GridReport { planned: seen.len(), skipped: seen.len() - total, completed: total - failures.len(), failures })
}

pub fn run_grid(
    config: &GridConfig,
    dir: &Path,
    workers: Option<usize>,
    progress: &(dyn Fn(Progress<'_>) + Sync),
) -> Result<GridReport> {
    let plan = config.plan()?;
    run_specs(&plan, dir, workers.or(config.workers), progress)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::load_results;
    use regcls_core::sampling::{Regime, ScenarioKind};
    use regcls_core::train::Mode;

    pub(crate) fn tiny() -> GridConfig {
        let mut c = GridConfig::desk();
        c.name = "tiny".into();
        c.functions = crate::config::Functions::Count(1);
        c.scenarios = vec![ScenarioKind::Clean];
        c.samplings = vec![Regime::Severe];
        c.class_counts = vec![4];
        c.seeds = vec![0, 421];
        c.lambdas = vec![1.0, 10.0];
        c.n_total = 900;
        c.train.epochs = 3;
        c
    }

    fn quiet(_: Progress<'_>) {}

    #[test]
    fn resume_skips_completed_trials() {
        let config = tiny();
        let fresh = tempfile::tempdir().unwrap();
        let first = run_grid(&config, fresh.path(), Some(1), &quiet).unwrap();
        assert_eq!((first.planned, first.skipped, first.completed), (10, 0, 10));

        let partial = tempfile::tempdir().unwrap();
        let plan = config.plan().unwrap();
        run_specs(&plan[..4], partial.path(), Some(1), &quiet).unwrap();
        let resumed = run_grid(&config, partial.path(), Some(2), &quiet).unwrap();
        assert_eq!((resumed.skipped, resumed.completed), (4, 6));
        let again = run_grid(&config, partial.path(), None, &quiet).unwrap();
        assert_eq!((again.skipped, again.completed), (10, 0));

        let a = load_results(fresh.path()).unwrap();
        let b = load_results(partial.path()).unwrap();
        assert_eq!(a.len(), b.len());
        assert!(a.iter().zip(&b).all(|(x, y)| x.same_outcome(y)));
    }

    #[test]
    fn failures_are_reported_without_aborting() {
        let dir = tempfile::tempdir().unwrap();
        let plan = tiny().plan().unwrap();
        let mut specs = plan[..3].to_vec();
        let mut broken = specs[0];
        broken.classes = 1;
        broken.mode = Mode::RegCls;
        specs.push(broken);
        let report = run_specs(&specs, dir.path(), Some(1), &quiet).unwrap();
        assert_eq!(report.completed, 3);
        assert_eq!(report.failures.len(), 1);
        assert_eq!(crate::store::load_failures(dir.path()).unwrap().len(), 1);
    }
}
