//! Aggregate tables over stored trial results.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use regcls_core::sampling::{Regime, ScenarioKind, ScenarioSpec};
use regcls_core::train::Mode;
use serde::{Deserialize, Serialize};

use crate::error::{IoContext, Result};
use crate::export::{write_plotdata, write_sweep};
use crate::metrics::{gap_metric, helps_percentage, mean_std};
use crate::search::select_lambda;
use crate::store::load_results;
use crate::trial::TrialResult;

pub const SUMMARY_JSON: &str = "summary.json";
pub const SUMMARY_MD: &str = "summary.md";
pub const PLOTDATA_CSV: &str = "plotdata.csv";
pub const SWEEP_CSV: &str = "lambda_sweep.csv";

/// Row label of a scenario; noisy rows carry their noise level.
pub fn scenario_label(s: &ScenarioSpec) -> String {
    match s.kind {
        ScenarioKind::Noisy => format!("noisy({})", s.noise_sigma),
        kind => kind.name().to_string(),
    }
}

/// Mean ± std of test MSE for one mode and class count in one scenario/sampling cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStat {
    pub scenario: String,
    pub sampling: Regime,
    pub mode: Mode,
    pub classes: usize,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    /// `(function seed, λ)` chosen on validation; empty for regression.
    pub lambdas: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub scenario: String,
    pub sampling: Regime,
    pub mode: Mode,
    pub gap: f64,
    pub pairs: usize,
}

/// Share of runs over class counts, seeds and λ where the classification
/// loss lowers validation MSE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelpRow {
    pub scenario: String,
    pub sampling: Regime,
    pub mode: Mode,
    pub percentage: f64,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scenario: String,
    pub sampling: Regime,
    pub mode: Mode,
    pub classes: usize,
    pub lambda: f64,
    pub mean_val: f64,
    pub mean_test: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub diverged_classifiers: usize,
    pub cells: Vec<CellStat>,
    pub gaps: Vec<GapRow>,
    pub help: Vec<HelpRow>,
    pub sweep: Vec<SweepRow>,
}

type Row = (String, Regime);
/// `(row, classes, function seed, data seed)` identifies a reg/cls pair.
type PairKey = (String, Regime, usize, u64, u64);

fn pair_key(r: &TrialResult) -> PairKey {
    (scenario_label(&r.spec.scenario), r.spec.sampling.regime, r.spec.classes, r.spec.function_seed, r.spec.data_seed)
}

// λ bits → results over seeds, for one (row, mode, classes, function).
type ByLambda<'a> = BTreeMap<u64, Vec<&'a TrialResult>>;
// Runs at the chosen λ, plus (function, λ) choices, for one (row, mode, classes).
type Selected<'a> = (Vec<&'a TrialResult>, Vec<(u64, f64)>);

impl Summary {
    pub fn from_results(results: &[TrialResult]) -> Self {
        let mut reg: BTreeMap<PairKey, &TrialResult> = BTreeMap::new();
        let mut cls: BTreeMap<(Row, Mode, usize, u64), ByLambda> = BTreeMap::new();
        let mut sorted: Vec<&TrialResult> = results.iter().collect();
        sorted.sort_by(|a, b| a.fingerprint.cmp(&b.fingerprint));
        for r in sorted {
            let s = &r.spec;
            let row = (scenario_label(&s.scenario), s.sampling.regime);
            if s.mode == Mode::Reg {
                reg.insert(pair_key(r), r);
            } else {
                cls.entry((row, s.mode, s.classes, s.function_seed))
                    .or_default()
                    .entry(s.lambda.to_bits())
                    .or_default()
                    .push(r);
            }
        }

        let mut selected: BTreeMap<(Row, Mode, usize), Selected> = BTreeMap::new();
        for (k, runs) in &reg {
            let entry = selected.entry(((k.0.clone(), k.1), Mode::Reg, k.2)).or_default();
            entry.0.push(runs);
        }
        let mut sweep_acc: BTreeMap<(Row, Mode, usize, u64), Vec<&TrialResult>> = BTreeMap::new();
        for ((row, mode, classes, function), by_lambda) in &cls {
            let scores: Vec<(f64, f64)> = by_lambda
                .iter()
                .map(|(&bits, runs)| (f64::from_bits(bits), runs.iter().map(|r| r.val_mse).sum::<f64>() / runs.len() as f64))
                .collect();
            let best = select_lambda(&scores).expect("at least one lambda");
            let entry = selected.entry((row.clone(), *mode, *classes)).or_default();
            entry.0.extend(by_lambda[&best.to_bits()].iter().copied());
            entry.1.push((*function, best));
            for (&bits, runs) in by_lambda {
                sweep_acc.entry((row.clone(), *mode, *classes, bits)).or_default().extend(runs.iter().copied());
            }
        }

        let mut cells = Vec::new();
        let mut gap_pairs: BTreeMap<(Row, Mode), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for (((scenario, sampling), mode, classes), (runs, lambdas)) in &selected {
            let tests: Vec<f64> = runs.iter().map(|r| r.test_mse).collect();
            let (mean, std) = mean_std(&tests).expect("non-empty cell");
            cells.push(CellStat {
                scenario: scenario.clone(),
                sampling: *sampling,
                mode: *mode,
                classes: *classes,
                mean,
                std,
                n: tests.len(),
                lambdas: lambdas.clone(),
            });
            if *mode != Mode::Reg {
                for r in runs {
                    if let Some(base) = reg.get(&pair_key(r)) {
                        let e = gap_pairs.entry(((scenario.clone(), *sampling), *mode)).or_default();
                        e.0.push(base.test_mse);
                        e.1.push(r.test_mse);
                    }
                }
            }
        }
        let gaps = gap_pairs
            .into_iter()
            .map(|(((scenario, sampling), mode), (a, b))| GapRow {
                scenario,
                sampling,
                mode,
                gap: gap_metric(&a, &b).expect("paired, non-empty"),
                pairs: a.len(),
            })
            .collect();

        let mut help_pairs: BTreeMap<(Row, Mode), Vec<(f64, f64)>> = BTreeMap::new();
        for ((row, mode, _, _), by_lambda) in &cls {
            for r in by_lambda.values().flatten() {
                if let Some(base) = reg.get(&pair_key(r)) {
                    help_pairs.entry((row.clone(), *mode)).or_default().push((base.val_mse, r.val_mse));
                }
            }
        }
        let help = help_pairs
            .into_iter()
            .filter_map(|(((scenario, sampling), mode), pairs)| {
                Some(HelpRow { scenario, sampling, mode, percentage: helps_percentage(&pairs)?, pairs: pairs.len() })
            })
            .collect();

        let sweep = sweep_acc
            .into_iter()
            .map(|(((scenario, sampling), mode, classes, bits), runs)| {
                let n = runs.len() as f64;
                SweepRow {
                    scenario,
                    sampling,
                    mode,
                    classes,
                    lambda: f64::from_bits(bits),
                    mean_val: runs.iter().map(|r| r.val_mse).sum::<f64>() / n,
                    mean_test: runs.iter().map(|r| r.test_mse).sum::<f64>() / n,
                    n: runs.len(),
                }
            })
            .collect();

        Summary {
            trials: results.len(),
            diverged_classifiers: results.iter().filter(|r| r.classifier_diverged).count(),
            cells,
            gaps,
            help,
            sweep,
        }
    }

    pub fn cell(&self, scenario: &str, sampling: Regime, mode: Mode, classes: usize) -> Option<&CellStat> {
        self.cells
            .iter()
            .find(|c| c.scenario == scenario && c.sampling == sampling && c.mode == mode && c.classes == classes)
    }

    pub fn gap(&self, scenario: &str, sampling: Regime, mode: Mode) -> Option<&GapRow> {
        self.gaps.iter().find(|g| g.scenario == scenario && g.sampling == sampling && g.mode == mode)
    }

    pub fn help_rate(&self, scenario: &str, sampling: Regime, mode: Mode) -> Option<&HelpRow> {
        self.help.iter().find(|h| h.scenario == scenario && h.sampling == sampling && h.mode == mode)
    }

    /// Markdown tables: rows are scenarios (and class counts), columns are
    /// sampling regimes.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let samplings: Vec<Regime> = {
            let mut v: Vec<Regime> = self.cells.iter().map(|c| c.sampling).collect();
            v.sort();
            v.dedup();
            v
        };
        let mut rows: Vec<(String, usize)> = self.cells.iter().map(|c| (c.scenario.clone(), c.classes)).collect();
        rows.sort();
        rows.dedup();
        let mut modes: Vec<Mode> = self.cells.iter().map(|c| c.mode).collect();
        modes.sort();
        modes.dedup();
        let header = |out: &mut String, first: &[&str]| {
            let cols: Vec<&str> = first.iter().copied().chain(samplings.iter().map(|s| s.name())).collect();
            let _ = writeln!(out, "| {} |", cols.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(cols.len()));
        };

        let _ = writeln!(out, "# Summary\n\n{} trials, {} diverged classifiers.\n", self.trials, self.diverged_classifiers);
        let _ = writeln!(out, "## Test MSE\n\nMean ± std over functions and seeds; λ chosen per function on validation MSE.\n");
        for mode in &modes {
            let _ = writeln!(out, "### {}\n", mode.name());
            header(&mut out, &["scenario", "C"]);
            for (scenario, classes) in &rows {
                let mut line = format!("| {scenario} | {classes} |");
                for &sampling in &samplings {
                    match self.cell(scenario, sampling, *mode, *classes) {
                        Some(c) => {
                            let _ = write!(line, " {:.3e} ± {:.1e} |", c.mean, c.std);
                        }
                        None => line.push_str(" – |"),
                    }
                }
                let _ = writeln!(out, "{line}");
            }
            out.push('\n');
        }

        for (title, body) in [
            ("Gap |reg − reg+cls| (test MSE)", self.gap_lines(&samplings)),
            ("Runs where classification helps (validation MSE, %)", self.help_lines(&samplings)),
        ] {
            if body.is_empty() {
                continue;
            }
            let _ = writeln!(out, "## {title}\n");
            header(&mut out, &["scenario", "mode"]);
            out.push_str(&body);
            out.push('\n');
        }
        out
    }

    fn gap_lines(&self, samplings: &[Regime]) -> String {
        self.row_lines(samplings, |s, r, m| self.gap(s, r, m).map(|g| format!("{:.3e}", g.gap)), self.gaps.iter().map(|g| (&g.scenario, g.mode)))
    }

    fn help_lines(&self, samplings: &[Regime]) -> String {
        self.row_lines(
            samplings,
            |s, r, m| self.help_rate(s, r, m).map(|h| format!("{:.2}", h.percentage)),
            self.help.iter().map(|h| (&h.scenario, h.mode)),
        )
    }

    fn row_lines<'a>(
        &self,
        samplings: &[Regime],
        value: impl Fn(&str, Regime, Mode) -> Option<String>,
        keys: impl Iterator<Item = (&'a String, Mode)>,
    ) -> String {
        let mut keys: Vec<(&String, Mode)> = keys.collect();
        keys.sort();
        keys.dedup();
        let mut out = String::new();
        for (scenario, mode) in keys {
            let mut line = format!("| {scenario} | {} |", mode.name());
            for &s in samplings {
                let _ = write!(line, " {} |", value(scenario, s, mode).unwrap_or_else(|| "–".into()));
            }
            let _ = writeln!(out, "{line}");
        }
        out
    }

    /// Writes the JSON summary, the markdown tables and the plot tables into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).at(dir)?;
        let json = dir.join(SUMMARY_JSON);
        std::fs::write(&json, serde_json::to_string_pretty(self)?).at(&json)?;
        let md = dir.join(SUMMARY_MD);
        std::fs::write(&md, self.to_markdown()).at(&md)?;
        write_plotdata(self, &dir.join(PLOTDATA_CSV))?;
        write_sweep(self, &dir.join(SWEEP_CSV))
    }
}

/// Loads the results in `dir`, writes the summary files next to them and returns the summary.
pub fn summarize_dir(dir: &Path) -> Result<Summary> {
    let summary = Summary::from_results(&load_results(dir)?);
    summary.write(dir)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trial::TrialSpec;
    use regcls_core::sampling::SamplingSpec;

    fn fake(mode: Mode, classes: usize, function: u64, seed: u64, lambda: f64, val: f64, test: f64) -> TrialResult {
        let spec = TrialSpec::new(function, ScenarioSpec::clean(), SamplingSpec::new(Regime::Severe), mode, classes)
            .with_seed(seed)
            .with_lambda(lambda)
            .normalized();
        TrialResult {
            fingerprint: spec.fingerprint(),
            spec,
            function: regcls_core::synth::FunctionParams::new(0.1, 0.2, 3.0, 4.0),
            peak_center: None,
            test_mse: test,
            val_mse: val,
            train_mse: 0.0,
            initial_train_mse: 1.0,
            trace: Vec::new(),
            effective_classes: None,
            classifier_diverged: false,
            initial_cross_entropy: None,
            final_cross_entropy: None,
            wall_time_s: 0.0,
        }
    }

    fn records() -> Vec<TrialResult> {
        let mut v = Vec::new();
        for f in 0..2 {
            for s in [0, 421] {
                let base = 1.0 + f as f64 + s as f64 / 1000.0;
                v.push(fake(Mode::Reg, 4, f, s, 1.0, base, base));
                // λ = 10 wins on validation for f = 0, λ = 100 for f = 1.
                let (v10, v100) = if f == 0 { (0.5, 1.1) } else { (1.1, 0.5) };
                v.push(fake(Mode::RegCls, 4, f, s, 10.0, base * v10, base * 0.7));
                v.push(fake(Mode::RegCls, 4, f, s, 100.0, base * v100, base * 1.2));
            }
        }
        v
    }

    #[test]
    fn selects_lambda_per_function_on_validation() {
        let s = Summary::from_results(&records());
        let cell = s.cell("clean", Regime::Severe, Mode::RegCls, 4).unwrap();
        assert_eq!(cell.lambdas, vec![(0, 10.0), (1, 100.0)]);
        let tests = [1.0 * 0.7, 1.421 * 0.7, 2.0 * 1.2, 2.421 * 1.2];
        let (m, sd) = mean_std(&tests).unwrap();
        assert!((cell.mean - m).abs() < 1e-12 && (cell.std - sd).abs() < 1e-12);
    }

    #[test]
    fn aggregation_matches_recomputation_from_records() {
        let recs = records();
        let s = Summary::from_results(&recs);
        let reg: Vec<f64> = recs.iter().filter(|r| r.spec.mode == Mode::Reg).map(|r| r.test_mse).collect();
        let n = reg.len() as f64;
        let mean = reg.iter().sum::<f64>() / n;
        let std = (reg.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        let cell = s.cell("clean", Regime::Severe, Mode::Reg, 4).unwrap();
        assert!((cell.mean - mean).abs() < 1e-12);
        assert!((cell.std - std).abs() < 1e-12);
        assert_eq!(cell.n, 4);
    }

    #[test]
    fn gap_and_help_rate() {
        let s = Summary::from_results(&records());
        let gap = s.gap("clean", Regime::Severe, Mode::RegCls).unwrap();
        let expected = (0.3 * 1.0 + 0.3 * 1.421 + 0.2 * 2.0 + 0.2 * 2.421) / 4.0;
        assert!((gap.gap - expected).abs() < 1e-12);
        // Validation: λ=10 helps for f=0, λ=100 for f=1; every other pair does not.
        let help = s.help_rate("clean", Regime::Severe, Mode::RegCls).unwrap();
        assert_eq!((help.percentage, help.pairs), (50.0, 8));
        assert_eq!(s.sweep.len(), 2);
    }

    #[test]
    fn summary_is_independent_of_record_order() {
        let mut recs = records();
        let a = Summary::from_results(&recs);
        recs.reverse();
        assert_eq!(Summary::from_results(&recs), a);
    }

    #[test]
    fn markdown_lists_every_mode() {
        let md = Summary::from_results(&records()).to_markdown();
        assert!(md.contains("### reg\n") && md.contains("### reg_cls\n"));
        assert!(md.contains("| clean | 4 |"));
    }

    #[test]
    fn noisy_labels_carry_sigma() {
        assert_eq!(scenario_label(&ScenarioSpec::noisy(0.05).unwrap()), "noisy(0.05)");
        assert_eq!(scenario_label(&ScenarioSpec::ood()), "ood");
    }
}
