//! `scalereg` command-line driver.
//!
//! Every subcommand reads a TOML experiment config, writes CSV and prints the
//! paths it wrote, one per line. Exit status is 0 on success, 1 for bad
//! input or configuration and 2 when the numerics fail.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scalereg::bounds::BoundReport;
use scalereg::config::{ExperimentConfig, LambdaRule};
use scalereg::estimator::{fit, prediction_error};
use scalereg::experiments::{
    bounds_from_config, run_coverage_experiment, run_packing_from_config, run_rate_experiment, with_threads,
    write_packing_csv, Setting, COVERAGE_CI_LEVEL,
};
use scalereg::format::{read_dataset_csv, write_dataset_csv, write_scaled_network, FitRecord};
use scalereg::network::Dataset;
use scalereg::plots::{plot_coverage, plot_rate};
use scalereg::{Error, Result};

/// Default output directory when neither `--out` nor `output` is given.
const OUT_DIR_ENV: &str = "SCALEREG_OUT_DIR";

#[derive(Parser)]
#[command(name = "scalereg", version, about = "Scale-regularized network estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Output file; overrides `output` in the config and $SCALEREG_OUT_DIR.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Worker threads; overrides `threads` in the config.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the estimator on a dataset CSV, or on generated data.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Dataset CSV with columns x0,..,y[,truth].
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Monte Carlo quantile of the effective noise.
    NoiseQuantile {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Tuning parameter and complexity bounds for each sample size.
    Bounds {
        #[command(flatten)]
        common: Common,
    },
    /// Run a study.
    Experiment {
        #[command(subcommand)]
        kind: Experiment,
    },
    /// Generate a teacher network and a noisy dataset from it.
    Teacher {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum Experiment {
    /// Prediction error against sample size.
    Rate {
        #[command(flatten)]
        common: Common,
    },
    /// Frequency of the prediction guarantee holding, per sample size.
    Coverage {
        #[command(flatten)]
        common: Common,
    },
    /// Greedy packings against the entropy bound.
    Packing {
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
    }
}

struct Job {
    cfg: ExperimentConfig,
    out: PathBuf,
}

impl Job {
    fn load(common: &Common, default_name: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::from_path(&common.config)?;
        if common.threads.is_some() {
            cfg.threads = common.threads;
        }
        let out = match (&common.out, &cfg.output) {
            (Some(p), _) | (None, Some(p)) => p.clone(),
            (None, None) => std::env::var_os(OUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_default()
                .join(default_name),
        };
        Ok(Self { cfg, out })
    }

    fn run<T: Send>(&self, f: impl FnOnce(&ExperimentConfig) -> Result<T> + Send) -> Result<T> {
        with_threads(self.cfg.threads, || f(&self.cfg))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    use std::io::Write;
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

/// `dir/stem<suffix>.ext`, keeping the original extension.
fn sibling(path: &Path, suffix: &str, ext: Option<&str>) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let ext = ext
        .map(str::to_string)
        .or_else(|| path.extension().map(|e| e.to_string_lossy().into_owned()));
    let name = match ext {
        Some(e) => format!("{stem}{suffix}.{e}"),
        None => format!("{stem}{suffix}"),
    };
    path.with_file_name(name)
}

/// Dataset from `--data`, or the first design of the grid with replicate 0
/// noise.
fn dataset(s: &Setting, cfg: &ExperimentConfig, data: Option<&Path>) -> Result<Dataset> {
    match data {
        Some(p) => read_dataset_csv(File::open(p)?),
        None => {
            let n = cfg.study.sample_sizes[0];
            let design = s.design(cfg, 0, n)?;
            s.replicate(cfg, &design, 0, 0)
        }
    }
}

fn run(cmd: Command) -> Result<Vec<PathBuf>> {
    match cmd {
        Command::Fit { common, data } => {
            let job = Job::load(&common, "fit.csv")?;
            job.run(|cfg| {
                let s = Setting::from_config(cfg)?;
                let data = dataset(&s, cfg, data.as_deref())?;
                let lambda = s.lambda(cfg, &data, 0)?.lambda;
                let opts = cfg.fit.options(cfg.seed);
                let res = fit(&data, &s.arch, &s.act, s.h, lambda, &opts)?;
                let err_sq = match data.truth() {
                    Some(_) => prediction_error(&res.net, &s.act, &data)?.to_string(),
                    None => String::new(),
                };
                let mut w = csv::Writer::from_writer(create(&job.out)?);
                w.write_record(["n", "lambda", "kappa", "objective", "err_sq", "iterations", "restart"])?;
                w.write_record([
                    data.n().to_string(),
                    lambda.to_string(),
                    res.net.kappa.to_string(),
                    res.objective.to_string(),
                    err_sq,
                    res.iterations.to_string(),
                    res.restart_index.to_string(),
                ])?;
                w.flush()?;
                let record = sibling(&job.out, "", Some("fit"));
                write_text(&record, &FitRecord::new(&res, s.act, s.h, lambda).to_text())?;
                Ok(vec![job.out.clone(), record])
            })
        }
        Command::NoiseQuantile { common, data } => {
            let job = Job::load(&common, "noise_quantile.csv")?;
            job.run(|cfg| {
                let mut cfg = cfg.clone();
                let reps = match cfg.lambda {
                    LambdaRule::MonteCarloQuantile { reps, .. } => reps,
                    _ => 200,
                };
                cfg.lambda = LambdaRule::MonteCarloQuantile { reps, safety: 1.0 };
                let s = Setting::from_config(&cfg)?;
                let data = dataset(&s, &cfg, data.as_deref())?;
                let report = s
                    .lambda(&cfg, &data, 0)?
                    .quantile
                    .expect("the Monte Carlo rule reports its quantile");
                report.write_csv(create(&job.out)?)?;
                eprintln!(
                    "lambda_hat {} ({} reps, t = {}), interval [{}, {}]",
                    report.lambda_hat, report.reps, report.t, report.ci.0, report.ci.1
                );
                Ok(vec![job.out.clone()])
            })
        }
        Command::Bounds { common } => {
            let job = Job::load(&common, "bounds.csv")?;
            let reports = job.run(bounds_from_config)?;
            BoundReport::write_csv(&reports, create(&job.out)?)?;
            Ok(vec![job.out])
        }
        Command::Teacher { common } => {
            let job = Job::load(&common, "teacher.csv")?;
            job.run(|cfg| {
                let s = Setting::from_config(cfg)?;
                let data = dataset(&s, cfg, None)?;
                write_dataset_csv(&data, create(&job.out)?)?;
                let net = sibling(&job.out, "", Some("net"));
                write_text(&net, &write_scaled_network(&s.teacher))?;
                Ok(vec![job.out.clone(), net])
            })
        }
        Command::Experiment { kind } => run_experiment(kind),
    }
}

fn run_experiment(kind: Experiment) -> Result<Vec<PathBuf>> {
    match kind {
        Experiment::Rate { common } => {
            let job = Job::load(&common, "rate.csv")?;
            let report = job.run(run_rate_experiment)?;
            report.write_csv(create(&job.out)?)?;
            eprintln!("slope of log median err vs log n: {}", report.slope);
            if report.failed_fits > 0 {
                eprintln!("{} fits failed", report.failed_fits);
            }
            let mut paths = vec![job.out.clone()];
            if job.cfg.plots {
                let svg = sibling(&job.out, "", Some("svg"));
                plot_rate(&report, &svg)?;
                paths.push(svg);
            }
            Ok(paths)
        }
        Experiment::Coverage { common } => {
            let job = Job::load(&common, "coverage.csv")?;
            let reports = job.run(run_coverage_experiment)?;
            let mut paths = Vec::new();
            for r in &reports {
                let path = if reports.len() == 1 {
                    job.out.clone()
                } else {
                    sibling(&job.out, &format!("_n{}", r.n), None)
                };
                r.write_csv(create(&path)?)?;
                eprintln!(
                    "n {}: coverage {} ({}% interval [{}, {}]), lambda {}",
                    r.n,
                    r.frequency,
                    100.0 * COVERAGE_CI_LEVEL,
                    r.ci.0,
                    r.ci.1,
                    r.lambda
                );
                paths.push(path);
            }
            if job.cfg.plots {
                let svg = sibling(&job.out, "", Some("svg"));
                plot_coverage(&reports, 1.0 - job.cfg.study.t, &svg)?;
                paths.push(svg);
            }
            Ok(paths)
        }
        Experiment::Packing { common } => {
            let job = Job::load(&common, "packing.csv")?;
            let rows = job.run(run_packing_from_config)?;
            write_packing_csv(&rows, create(&job.out)?)?;
            if let Some(r) = rows.iter().find(|r| r.log_packing > r.entropy_bound) {
                eprintln!("wrote {}", job.out.display());
                return Err(Error::CheckFailed(format!("log packing at r = {} exceeds the entropy bound", r.r)));
            }
            Ok(vec![job.out])
        }
    }
}
