use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use regcls::config::{Functions, GridConfig, TrainGrid, DEFAULT_SEEDS, NOISE_ABLATION_SIGMAS};
use regcls::export::{write_plotdata, write_samples, Split};
use regcls::grid::Progress;
use regcls::search::lambda_search;
use regcls::store::load_results;
use regcls::summary::{summarize_dir, Summary, PLOTDATA_CSV};
use regcls::trial::{run_trial, TrialSpec};
use regcls::{run_grid, RESULTS_DIR_ENV};
use regcls_core::losses::LAMBDA_GRID;
use regcls_core::sampling::{Regime, SamplingSpec, ScenarioKind, ScenarioSpec};
use regcls_core::train::Mode;
use serde::de::DeserializeOwned;

#[derive(Parser)]
#[command(name = "regcls", version, about = "Classification-helps-regression experiments on synthetic 1D functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run or summarize a configured grid.
    #[command(subcommand)]
    Grid(GridCommand),
    /// Run a single trial.
    #[command(subcommand)]
    Trial(TrialCommand),
    /// Sweep a hyperparameter.
    #[command(subcommand)]
    Sweep(SweepCommand),
    /// Ablation studies.
    #[command(subcommand)]
    Ablate(AblateCommand),
    /// Export plot tables or datasets.
    #[command(subcommand)]
    Export(ExportCommand),
    /// Print a preset grid config as TOML.
    Preset { name: String },
}

#[derive(Subcommand)]
enum GridCommand {
    /// Run every pending trial of a config (a TOML path or preset name) and summarize.
    Run {
        config: String,
        #[command(flatten)]
        results: ResultsDir,
        #[arg(long)]
        workers: Option<usize>,
        /// Validate and count trials without running them.
        #[arg(long)]
        dry_run: bool,
    },
    /// Recompute summary tables from stored results.
    Summarize { dir: PathBuf },
}

#[derive(Subcommand)]
enum TrialCommand {
    Run {
        #[command(flatten)]
        trial: TrialArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Print the full result record as JSON.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum SweepCommand {
    /// Mean validation MSE over seeds for every λ.
    Lambda {
        #[command(flatten)]
        trial: TrialArgs,
        #[arg(long, value_delimiter = ',', default_values_t = LAMBDA_GRID.to_vec())]
        lambdas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SEEDS.to_vec())]
        seeds: Vec<u64>,
    },
}

#[derive(Subcommand)]
enum AblateCommand {
    /// Grid over the noisy scenario with σ ∈ {0.05, 0.1, 0.5}.
    Noise {
        #[arg(long, default_value_t = 3)]
        functions: u64,
        #[arg(long, value_delimiter = ',', value_parser = parse_enum::<Regime>, default_value = "severe")]
        samplings: Vec<Regime>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![256])]
        classes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SEEDS[..3].to_vec())]
        seeds: Vec<u64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1e1, 1e2, 1e3])]
        lambdas: Vec<f64>,
        #[arg(long, default_value_t = 1e-2)]
        learning_rate: f64,
        #[command(flatten)]
        results: ResultsDir,
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Subcommand)]
enum ExportCommand {
    /// Write class_count/mode/mean/std rows from stored results.
    Plotdata {
        dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write one split of a trial's dataset as `x,y` CSV.
    Dataset {
        #[command(flatten)]
        trial: TrialArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_parser = parse_split, default_value = "train")]
        split: Split,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ResultsDir {
    /// Results root directory.
    #[arg(long = "results", env = RESULTS_DIR_ENV, default_value = "results")]
    root: PathBuf,
}

#[derive(Args)]
struct TrialArgs {
    #[arg(long, default_value_t = 0)]
    function_seed: u64,
    #[arg(long, value_parser = parse_enum::<ScenarioKind>, default_value = "clean")]
    scenario: ScenarioKind,
    #[arg(long, default_value_t = regcls::config::DEFAULT_NOISE_SIGMA)]
    noise_sigma: f64,
    #[arg(long, value_parser = parse_enum::<Regime>, default_value = "severe")]
    sampling: Regime,
    #[arg(long, value_parser = parse_enum::<Mode>, default_value = "reg_cls")]
    mode: Mode,
    #[arg(long, default_value_t = 256)]
    classes: usize,
    /// Defaults to the scenario's learning rate.
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, default_value_t = regcls_core::sampling::DEFAULT_TOTAL)]
    n_total: usize,
}

impl TrialArgs {
    fn spec(&self) -> anyhow::Result<TrialSpec> {
        let scenario = match self.scenario {
            ScenarioKind::Clean => ScenarioSpec::clean(),
            ScenarioKind::Ood => ScenarioSpec::ood(),
            ScenarioKind::Noisy => ScenarioSpec::noisy(self.noise_sigma)?,
        };
        let mut spec = TrialSpec::new(self.function_seed, scenario, SamplingSpec::new(self.sampling), self.mode, self.classes);
        let defaults = TrainGrid::default();
        spec.train = defaults.settings(self.scenario);
        if let Some(v) = self.learning_rate {
            spec.train.learning_rate = v;
        }
        if let Some(v) = self.epochs {
            spec.train.epochs = v;
        }
        if let Some(v) = self.weight_decay {
            spec.train.weight_decay = v;
        }
        if let Some(v) = self.batch_size {
            spec.train.batch_size = v;
        }
        spec.n_total = self.n_total;
        Ok(spec)
    }
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned())).map_err(|e| e.to_string())
}

fn parse_split(s: &str) -> Result<Split, String> {
    match s {
        "train" => Ok(Split::Train),
        "val" => Ok(Split::Val),
        "test" => Ok(Split::Test),
        _ => Err(format!("unknown split {s:?}; expected train, val or test")),
    }
}

fn load_config(arg: &str) -> anyhow::Result<GridConfig> {
    let path = Path::new(arg);
    if path.exists() {
        return GridConfig::load(path).with_context(|| format!("loading {arg}"));
    }
    match GridConfig::preset(arg) {
        Some(c) => Ok(c),
        None => bail!("{arg} is neither a config file nor a preset (desk, paper)"),
    }
}

fn report_progress(p: Progress<'_>) {
    match p {
        Progress::Done { index, total, result } => {
            let s = &result.spec;
            eprintln!(
                "[{index}/{total}] {} {}/{} f{} seed {} C={} λ={:e}: test {:.3e} val {:.3e} ({:.1}s)",
                s.mode.name(),
                regcls::summary::scenario_label(&s.scenario),
                s.sampling.regime.name(),
                s.function_seed,
                s.data_seed,
                s.classes,
                s.lambda,
                result.test_mse,
                result.val_mse,
                result.wall_time_s
            );
        }
        Progress::Failed { index, total, failure } => {
            eprintln!("[{index}/{total}] FAILED {}: {}", failure.fingerprint, failure.error);
        }
    }
}

fn run_config(config: &GridConfig, root: &Path, workers: Option<usize>) -> anyhow::Result<Summary> {
    let dir = root.join(&config.name);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(dir.join("config.toml"), config.to_toml())?;
    let report = run_grid(config, &dir, workers, &report_progress)?;
    eprintln!(
        "{} planned, {} already done, {} completed, {} failed",
        report.planned,
        report.skipped,
        report.completed,
        report.failures.len()
    );
    for f in &report.failures {
        eprintln!("  failed {}: {}", f.fingerprint, f.error);
    }
    let summary = summarize_dir(&dir)?;
    println!("{}", summary.to_markdown());
    eprintln!("results in {}", dir.display());
    Ok(summary)
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Grid(GridCommand::Run { config, results, workers, dry_run }) => {
            let config = load_config(&config)?;
            if dry_run {
                println!("{}", serde_json::to_string_pretty(&config.plan_summary()?)?);
                return Ok(());
            }
            run_config(&config, &results.root, workers)?;
        }
        Command::Grid(GridCommand::Summarize { dir }) => {
            print!("{}", summarize_dir(&dir)?.to_markdown());
        }
        Command::Trial(TrialCommand::Run { trial, seed, lambda, json }) => {
            let spec = trial.spec()?.with_seed(seed).with_lambda(lambda);
            let r = run_trial(&spec)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            } else {
                println!("fingerprint    {}", r.fingerprint);
                println!("function       {:?}", r.function);
                println!("test MSE       {:.6e}", r.test_mse);
                println!("val MSE        {:.6e}", r.val_mse);
                println!("train MSE      {:.6e} (initial {:.6e})", r.train_mse, r.initial_train_mse);
                if let Some(c) = r.effective_classes {
                    println!("classes        {c}");
                }
                if r.classifier_diverged {
                    println!("warning: classifier cross-entropy ended above its initial value");
                }
                println!("wall time      {:.2}s", r.wall_time_s);
            }
        }
        Command::Sweep(SweepCommand::Lambda { trial, lambdas, seeds }) => {
            let base = trial.spec()?;
            let search = lambda_search(&lambdas, &base, &seeds)?;
            println!("lambda,mean_val_mse");
            for (l, v) in &search.scores {
                println!("{l:e},{v:.6e}");
            }
            eprintln!("best lambda {:e}", search.best);
        }
        Command::Ablate(AblateCommand::Noise {
            functions,
            samplings,
            classes,
            seeds,
            lambdas,
            learning_rate,
            results,
            workers,
        }) => {
            let mut config = GridConfig {
                name: "noise-ablation".into(),
                functions: Functions::Count(functions),
                scenarios: vec![ScenarioKind::Noisy],
                noise_sigmas: NOISE_ABLATION_SIGMAS.to_vec(),
                samplings,
                modes: vec![Mode::Reg, Mode::RegCls],
                class_counts: classes,
                seeds,
                lambdas,
                ..GridConfig::desk()
            };
            config.train.learning_rate.noisy = learning_rate;
            config.validate()?;
            run_config(&config, &results.root, workers)?;
        }
        Command::Export(ExportCommand::Plotdata { dir, out }) => {
            let summary = Summary::from_results(&load_results(&dir)?);
            let out = out.unwrap_or_else(|| dir.join(PLOTDATA_CSV));
            write_plotdata(&summary, &out)?;
            eprintln!("wrote {}", out.display());
        }
        Command::Export(ExportCommand::Dataset { trial, seed, split, out }) => {
            let data = trial.spec()?.with_seed(seed).dataset()?;
            let samples = split.samples(&data);
            match out {
                Some(path) => {
                    let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    write_samples(samples, std::io::BufWriter::new(file))?;
                }
                None => {
                    let stdout = std::io::stdout();
                    let mut lock = stdout.lock();
                    write_samples(samples, &mut lock)?;
                    lock.flush()?;
                }
            }
        }
        Command::Preset { name } => match GridConfig::preset(&name) {
            Some(c) => print!("{}", c.to_toml()),
            None => bail!("unknown preset {name:?}; expected desk or paper"),
        },
    }
    Ok(())
}
