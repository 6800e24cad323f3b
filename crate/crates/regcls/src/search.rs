//! λ selection on validation MSE.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::trial::{run_trial, TrialSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSearch {
    pub best: f64,
    /// `(λ, mean validation MSE)` in grid order.
    pub scores: Vec<(f64, f64)>,
}

/// λ with the lowest score; ties go to the larger λ and NaN scores lose.
pub fn select_lambda(scores: &[(f64, f64)]) -> Option<f64> {
    let key = |s: f64| if s.is_nan() { f64::INFINITY } else { s };
    scores
        .iter()
        .copied()
        .reduce(|best, cand| {
            let (b, c) = (key(best.1), key(cand.1));
            if c < b || (c == b && cand.0 > best.0) {
                cand
            } else {
                best
            }
        })
        .map(|(lambda, _)| lambda)
}

/// Scores every λ with `score` and keeps the best.
pub fn lambda_search_with(grid: &[f64], mut score: impl FnMut(f64) -> Result<f64>) -> Result<LambdaSearch> {
    if grid.is_empty() {
        return Err(HarnessError::Empty("lambda grid"));
    }
    let scores = grid.iter().map(|&l| Ok((l, score(l)?))).collect::<Result<Vec<_>>>()?;
    let best = select_lambda(&scores).expect("non-empty grid");
    Ok(LambdaSearch { best, scores })
}

/// Mean validation MSE of `base` over `seeds` for every λ in `grid`.
pub fn lambda_search(grid: &[f64], base: &TrialSpec, seeds: &[u64]) -> Result<LambdaSearch> {
    if seeds.is_empty() {
        return Err(HarnessError::Empty("validation seeds"));
    }
    let jobs: Vec<TrialSpec> =
        grid.iter().flat_map(|&l| seeds.iter().map(move |&s| base.with_lambda(l).with_seed(s))).collect();
    let vals = jobs.par_iter().map(|spec| run_trial(spec).map(|r| r.val_mse)).collect::<Result<Vec<_>>>()?;
    let mut chunks = vals.chunks(seeds.len());
    lambda_search_with(grid, |_| {
        let chunk = chunks.next().expect("one chunk per lambda");
        Ok(chunk.iter().sum::<f64>() / chunk.len() as f64)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use regcls_core::losses::LAMBDA_GRID;

    #[test]
    fn single_element_grid() {
        assert_eq!(lambda_search_with(&[3.0], |_| Ok(1.0)).unwrap().best, 3.0);
        assert!(lambda_search_with(&[], |_| Ok(1.0)).is_err());
    }

    #[test]
    fn monotone_oracle_picks_the_largest() {
        let r = lambda_search_with(&LAMBDA_GRID, |l| Ok(1.0 / (1.0 + l))).unwrap();
        assert_eq!(r.best, 1e4);
    }

    #[test]
    fn default_grid_contains_reported_best_values() {
        for l in [1e2, 1e3, 1e4] {
            assert!(LAMBDA_GRID.contains(&l));
        }
    }

    #[test]
    fn ties_prefer_larger_lambda_and_nan_loses() {
        assert_eq!(select_lambda(&[(1.0, 0.5), (10.0, 0.5), (0.1, 0.7)]), Some(10.0));
        assert_eq!(select_lambda(&[(1.0, f64::NAN), (0.1, 3.0)]), Some(0.1));
        assert_eq!(select_lambda(&[]), None);
    }

    #[test]
    fn errors_propagate() {
        let r = lambda_search_with(&[1.0, 2.0], |l| if l > 1.5 { Err(HarnessError::Empty("x")) } else { Ok(0.0) });
        assert!(r.is_err());
    }
}
