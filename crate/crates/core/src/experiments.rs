//! Teacher/data generation and the rate, coverage and packing studies.
//!
//! Every random quantity comes from a stream keyed by the master seed, a
//! purpose tag and the cell indices, so outputs are a pure function of the
//! configuration whatever the thread count.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::distribution::{Beta, ContinuousCDF};

use crate::bounds::{entropy_bound, lipschitz_unit_ball, tuning_lambda, BoundInputs, BoundReport, SubGaussianSpec};
use crate::config::{ExperimentConfig, InputDistribution, LambdaRule};
use crate::effective_noise::{estimate_quantile, NoiseQuantileReport};
use crate::error::{Error, Result};
use crate::estimator::{fit, oracle_bound, prediction_error, random_direction};
use crate::network::{Activation, Architecture, Dataset, NetworkParams, ScaledNetwork};
use crate::regularizers::RegularizerKind;
use crate::rng::{cell_rng, stream_rng, sub_seed, StreamRng};

/// Purpose tags for [`sub_seed`].
mod purpose {
    pub const TEACHER: u64 = 1;
    pub const DESIGN: u64 = 2;
    pub const LAMBDA: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const FIT: u64 = 5;
}

/// Teacher `(κ*, Ω*)` with a random direction rescaled to `h(Ω*) = 1`.
pub fn gen_teacher(
    arch: &Architecture,
    h: RegularizerKind,
    kappa_star: f64,
    seed: u64,
) -> Result<ScaledNetwork> {
    let mut rng = stream_rng(seed, 0);
    let omega = random_direction(arch, h, 1.0, &mut rng);
    let omega = omega.scaled(1.0 / h.value(&omega));
    ScaledNetwork::new(kappa_star, omega)
}

impl InputDistribution {
    pub fn sample<R: Rng + ?Sized>(&self, d: usize, rng: &mut R) -> Vec<f64> {
        match self {
            InputDistribution::GaussianSphere => loop {
                let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    let r = (d as f64).sqrt();
                    break z.into_iter().map(|v| v * r / norm).collect();
                }
            },
            InputDistribution::UniformCube => (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect(),
        }
    }

    pub fn design<R: Rng + ?Sized>(&self, n: usize, d: usize, rng: &mut R) -> Array2<f64> {
        let flat: Vec<f64> = (0..n).flat_map(|_| self.sample(d, rng)).collect();
        Array2::from_shape_vec((n, d), flat).expect("n·d values")
    }
}

/// `y_i = g*(x_i) + u_i` with fresh inputs and noise.
pub fn gen_dataset(
    teacher: &ScaledNetwork,
    act: &Activation,
    input_dist: InputDistribution,
    noise: &SubGaussianSpec,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Empty("dataset"));
    }
    let mut rng = stream_rng(seed, 0);
    let x = input_dist.design(n, teacher.arch().input_dim(), &mut rng);
    let noise = Array1::from(noise.sample_vec(n, &mut rng));
    responses_for(teacher, act, x, &noise)
}

fn responses_for(teacher: &ScaledNetwork, act: &Activation, x: Array2<f64>, noise: &Array1<f64>) -> Result<Dataset> {
    let truth = teacher.forward_batch(act, x.view())?;
    let y = &truth + noise;
    Dataset::new(x, y, Some(truth))
}

/// Model pieces shared by every study.
pub struct Setting {
    pub arch: Architecture,
    pub act: Activation,
    pub h: RegularizerKind,
    pub noise: SubGaussianSpec,
    pub teacher: ScaledNetwork,
}

impl Setting {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let arch = cfg.arch()?;
        let h = cfg.regularizer()?;
        let teacher = gen_teacher(&arch, h, cfg.model.kappa_star, sub_seed(cfg.seed, purpose::TEACHER))?;
        Ok(Self {
            act: cfg.activation()?,
            noise: cfg.noise.spec()?,
            arch,
            h,
            teacher,
        })
    }

    /// Fixed design for sample size index `i`, with truth and zero responses.
    pub fn design(&self, cfg: &ExperimentConfig, i: usize, n: usize) -> Result<Dataset> {
        let mut rng = stream_rng(sub_seed(cfg.seed, purpose::DESIGN), i as u64);
        let x = cfg.inputs.distribution.design(n, self.arch.input_dim(), &mut rng);
        responses_for(&self.teacher, &self.act, x, &Array1::zeros(n))
    }

    fn noise_rng(&self, cfg: &ExperimentConfig, i: usize, rep: usize) -> StreamRng {
        cell_rng(sub_seed(cfg.seed, purpose::NOISE), i as u64, rep as u64)
    }

    /// Design with fresh noise for replicate `rep`.
    pub fn replicate(&self, cfg: &ExperimentConfig, design: &Dataset, i: usize, rep: usize) -> Result<Dataset> {
        let mut rng = self.noise_rng(cfg, i, rep);
        let noise = Array1::from(self.noise.sample_vec(design.n(), &mut rng));
        design.with_responses(design.require_truth()? + &noise)
    }

    /// Tuning parameter on `design` for the configured rule.
    pub fn lambda(&self, cfg: &ExperimentConfig, design: &Dataset, i: usize) -> Result<LambdaChoice> {
        match cfg.lambda {
            LambdaRule::Fixed { value } => Ok(LambdaChoice { lambda: value, quantile: None }),
            LambdaRule::Theoretical { a } => Ok(LambdaChoice {
                lambda: tuning_lambda(
                    design.n(),
                    self.arch.param_count(),
                    self.arch.depth(),
                    self.act.lipschitz(),
                    design.input_norm(),
                    a,
                ),
                quantile: None,
            }),
            LambdaRule::MonteCarloQuantile { reps, safety } => {
                let seed = sub_seed(sub_seed(cfg.seed, purpose::LAMBDA), i as u64);
                let opts = cfg.noise_search.options(seed);
                let report = estimate_quantile(
                    design,
                    &self.noise,
                    &self.arch,
                    &self.act,
                    self.h,
                    cfg.study.t,
                    reps,
                    &opts,
                    seed,
                )?;
                Ok(LambdaChoice {
                    lambda: safety * report.lambda_hat,
                    quantile: Some(report),
                })
            }
        }
    }

    fn fit_seed(&self, cfg: &ExperimentConfig, i: usize, rep: usize) -> u64 {
        sub_seed(sub_seed(cfg.seed, purpose::FIT), ((i as u64) << 32) | rep as u64)
    }
}

pub struct LambdaChoice {
    pub lambda: f64,
    pub quantile: Option<NoiseQuantileReport>,
}

/// One `(n, replicate)` cell of the rate study.
#[derive(Clone, Debug, PartialEq)]
pub struct RateRow {
    pub n: usize,
    pub rep: usize,
    pub err: f64,
    pub err_sq: f64,
    pub lambda: f64,
    pub oracle_bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    /// `(n, median err)` over replicates whose fit succeeded.
    pub medians: Vec<(usize, f64)>,
    /// Least-squares slope of `log median err` against `log n`.
    pub slope: f64,
    /// `(n, λ)`.
    pub lambdas: Vec<(usize, f64)>,
    pub failed_fits: usize,
}

pub const RATE_CSV_HEADER: [&str; 6] = ["n", "rep", "err", "err_sq", "lambda", "oracle_bound"];

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len();
    Some(if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    })
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ols_slope(points: &[(f64, f64)]) -> f64 {
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Fits every `(n, replicate)` cell and records the prediction error.
/// A failed fit yields a row of NaNs instead of aborting the study.
pub fn run_rate_experiment(cfg: &ExperimentConfig) -> Result<RateReport> {
    let s = Setting::from_config(cfg)?;
    let mut rows = Vec::new();
    let mut medians = Vec::new();
    let mut lambdas = Vec::new();
    let mut failed_fits = 0;
    for (i, &n) in cfg.study.sample_sizes.iter().enumerate() {
        let design = s.design(cfg, i, n)?;
        let lambda = s.lambda(cfg, &design, i)?.lambda;
        lambdas.push((n, lambda));
        let cells: Vec<Result<RateRow>> = (0..cfg.study.replicates)
            .into_par_iter()
            .map(|rep| {
                let data = s.replicate(cfg, &design, i, rep)?;
                let opts = cfg.fit.options(s.fit_seed(cfg, i, rep));
                match fit(&data, &s.arch, &s.act, s.h, lambda, &opts) {
                    Ok(res) => {
                        let err = prediction_error(&res.net, &s.act, &data)?;
                        let bound = oracle_bound(&[s.teacher.clone(), res.net], &s.act, &data, lambda)?;
                        Ok(RateRow { n, rep, err, err_sq: err * err, lambda, oracle_bound: bound })
                    }
                    Err(e) if !e.is_input_error() => Ok(RateRow {
                        n,
                        rep,
                        err: f64::NAN,
                        err_sq: f64::NAN,
                        lambda,
                        oracle_bound: f64::NAN,
                    }),
                    Err(e) => Err(e),
                }
            })
            .collect();
        let cells = cells.into_iter().collect::<Result<Vec<_>>>()?;
        let mut errs: Vec<f64> = cells.iter().map(|r| r.err).filter(|e| e.is_finite()).collect();
        failed_fits += cells.len() - errs.len();
        if let Some(m) = median(&mut errs) {
            medians.push((n, m));
        }
        rows.extend(cells);
    }
    let points: Vec<(f64, f64)> = medians
        .iter()
        .filter(|(_, m)| *m > 0.0)
        .map(|&(n, m)| ((n as f64).ln(), m.ln()))
        .collect();
    let slope = if points.len() >= 2 { ols_slope(&points) } else { f64::NAN };
    Ok(RateReport { rows, medians, slope, lambdas, failed_fits })
}

impl RateReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(RATE_CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.rep.to_string(),
                r.err.to_string(),
                r.err_sq.to_string(),
                r.lambda.to_string(),
                r.oracle_bound.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_header(rd: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let got: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if got != expected {
        return Err(Error::parse(1, format!("expected header {}", expected.join(","))));
    }
    Ok(())
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T> {
    rec.get(i)
        .ok_or_else(|| Error::parse(line, format!("missing column {}", i + 1)))?
        .trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("bad value in column {}", i + 1)))
}

pub fn read_rate_csv<R: Read>(input: R) -> Result<Vec<RateRow>> {
    let mut rd = csv::Reader::from_reader(input);
    check_header(&mut rd, &RATE_CSV_HEADER)?;
    rd.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            let line = i + 2;
            Ok(RateRow {
                n: parse_field(&rec, 0, line)?,
                rep: parse_field(&rec, 1, line)?,
                err: parse_field(&rec, 2, line)?,
                err_sq: parse_field(&rec, 3, line)?,
                lambda: parse_field(&rec, 4, line)?,
                oracle_bound: parse_field(&rec, 5, line)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageRow {
    pub rep: usize,
    pub err_sq: f64,
    pub bound: f64,
    pub covered: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageReport {
    pub n: usize,
    pub lambda: f64,
    /// Monte Carlo quantile behind `lambda`, when that rule is used.
    pub lambda_hat: Option<f64>,
    pub rows: Vec<CoverageRow>,
    pub frequency: f64,
    /// Clopper–Pearson interval at level [`COVERAGE_CI_LEVEL`].
    pub ci: (f64, f64),
}

pub const COVERAGE_CSV_HEADER: [&str; 4] = ["rep", "err_sq", "bound", "covered"];
pub const COVERAGE_CI_LEVEL: f64 = 0.95;

/// Exact binomial interval for a success probability.
pub fn clopper_pearson(successes: usize, trials: usize, level: f64) -> Result<(f64, f64)> {
    if trials == 0 || successes > trials {
        return Err(Error::InvalidArgument(format!("{successes} successes in {trials} trials")));
    }
    let alpha = (1.0 - level) / 2.0;
    let (k, m) = (successes as f64, trials as f64);
    let beta = |a: f64, b: f64| Beta::new(a, b).map_err(|e| Error::InvalidArgument(e.to_string()));
    let lo = if successes == 0 { 0.0 } else { beta(k, m - k + 1.0)?.inverse_cdf(alpha) };
    let hi = if successes == trials { 1.0 } else { beta(k + 1.0, m - k)?.inverse_cdf(1.0 - alpha) };
    Ok((lo, hi))
}

/// Coverage of `err² ≤ min over {teacher, fitted} of (err² + 2λκ)` at every
/// sample size in the grid. The design is fixed per sample size; replicates
/// redraw the noise. Failed fits count as not covered.
pub fn run_coverage_experiment(cfg: &ExperimentConfig) -> Result<Vec<CoverageReport>> {
    let s = Setting::from_config(cfg)?;
    let mut reports = Vec::new();
    for (i, &n) in cfg.study.sample_sizes.iter().enumerate() {
        let design = s.design(cfg, i, n)?;
        let choice = s.lambda(cfg, &design, i)?;
        let lambda = choice.lambda;
        let rows: Vec<Result<CoverageRow>> = (0..cfg.study.replicates)
            .into_par_iter()
            .map(|rep| {
                let data = s.replicate(cfg, &design, i, rep)?;
                let opts = cfg.fit.options(s.fit_seed(cfg, i, rep));
                match fit(&data, &s.arch, &s.act, s.h, lambda, &opts) {
                    Ok(res) => {
                        let err = prediction_error(&res.net, &s.act, &data)?;
                        let bound = oracle_bound(&[s.teacher.clone(), res.net], &s.act, &data, lambda)?;
                        let err_sq = err * err;
                        Ok(CoverageRow { rep, err_sq, bound, covered: err_sq <= bound })
                    }
                    Err(e) if !e.is_input_error() => Ok(CoverageRow {
                        rep,
                        err_sq: f64::NAN,
                        bound: f64::NAN,
                        covered: false,
                    }),
                    Err(e) => Err(e),
                }
            })
            .collect();
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        let hits = rows.iter().filter(|r| r.covered).count();
        reports.push(CoverageReport {
            n,
            lambda,
            lambda_hat: choice.quantile.map(|q| q.lambda_hat),
            frequency: hits as f64 / rows.len() as f64,
            ci: clopper_pearson(hits, rows.len(), COVERAGE_CI_LEVEL)?,
            rows,
        });
    }
    Ok(reports)
}

impl CoverageReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(COVERAGE_CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.rep.to_string(),
                r.err_sq.to_string(),
                r.bound.to_string(),
                u8::from(r.covered).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn read_coverage_csv<R: Read>(input: R) -> Result<Vec<CoverageRow>> {
    let mut rd = csv::Reader::from_reader(input);
    check_header(&mut rd, &COVERAGE_CSV_HEADER)?;
    rd.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            let line = i + 2;
            let covered = match parse_field::<u8>(&rec, 3, line)? {
                0 => false,
                1 => true,
                _ => return Err(Error::parse(line, "covered must be 0 or 1")),
            };
            Ok(CoverageRow {
                rep: parse_field(&rec, 0, line)?,
                err_sq: parse_field(&rec, 1, line)?,
                bound: parse_field(&rec, 2, line)?,
                covered,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PackingRow {
    pub r: f64,
    pub packing_2r: usize,
    pub log_packing: f64,
    pub entropy_bound: f64,
}

pub const PACKING_CSV_HEADER: [&str; 4] = ["r", "packing_2r", "log_packing", "entropy_bound"];

/// Largest parameter count accepted by [`run_packing_experiment`].
pub const MAX_PACKING_PARAMS: usize = 3;

fn empirical_distance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n).sqrt()
}

/// Greedy 2r-packings of `{g_Ω : h(Ω) ≤ 1}` under `‖·‖_n`, built from a
/// parameter grid with spacing `1/grid_resolution`. Radii are processed
/// from largest to smallest and each packing extends the previous one, so
/// sizes are nonincreasing in `r`. Rows come back in the order of `radii`.
pub fn run_packing_experiment(
    arch: &Architecture,
    act: &Activation,
    h: RegularizerKind,
    data: &Dataset,
    radii: &[f64],
    grid_resolution: usize,
) -> Result<Vec<PackingRow>> {
    let p = arch.param_count();
    if p > MAX_PACKING_PARAMS {
        return Err(Error::TooManyParameters(p));
    }
    if grid_resolution == 0 || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidArgument("grid resolution and radii must be positive".into()));
    }
    if data.dim() != arch.input_dim() {
        return Err(Error::DimensionMismatch { expected: arch.input_dim(), got: data.dim() });
    }
    let res = grid_resolution as i64;
    let side = (2 * res + 1) as usize;
    let mut functions: Vec<Vec<f64>> = Vec::new();
    for mut idx in 0..side.pow(p as u32) {
        let mut flat = vec![0.0; p];
        for v in flat.iter_mut() {
            *v = ((idx % side) as i64 - res) as f64 / res as f64;
            idx /= side;
        }
        let omega = NetworkParams::from_flat(arch, &flat)?;
        if h.value(&omega) <= 1.0 + 1e-12 {
            functions.push(omega.forward_batch(act, data.inputs())?.to_vec());
        }
    }
    let c = lipschitz_unit_ball(act, arch.depth(), data);
    let mut order: Vec<usize> = (0..radii.len()).collect();
    order.sort_by(|&a, &b| radii[b].total_cmp(&radii[a]));
    let mut centers: Vec<usize> = Vec::new();
    let mut rows = vec![None; radii.len()];
    for k in order {
        let r = radii[k];
        for (j, f) in functions.iter().enumerate() {
            if centers.iter().all(|&cj| empirical_distance(&functions[cj], f) > 2.0 * r) {
                centers.push(j);
            }
        }
        let size = centers.len();
        rows[k] = Some(PackingRow {
            r,
            packing_2r: size,
            log_packing: (size as f64).ln(),
            entropy_bound: entropy_bound(r, c, p)?,
        });
    }
    Ok(rows.into_iter().map(|r| r.expect("every radius visited")).collect())
}

/// Packing study for a configuration with a `[packing]` section.
pub fn run_packing_from_config(cfg: &ExperimentConfig) -> Result<Vec<PackingRow>> {
    cfg.validate()?;
    let pk = cfg
        .packing
        .as_ref()
        .ok_or_else(|| Error::Config("the packing study needs a [packing] section".into()))?;
    let arch = cfg.arch()?;
    let d = arch.input_dim();
    let flat: Vec<f64> = pk.inputs.iter().flatten().copied().collect();
    let x = Array2::from_shape_vec((pk.inputs.len(), d), flat).map_err(|e| Error::Config(e.to_string()))?;
    let data = Dataset::design(x)?;
    run_packing_experiment(&arch, &cfg.activation()?, cfg.regularizer()?, &data, &pk.radii, pk.grid_resolution)
}

pub fn write_packing_csv<W: Write>(rows: &[PackingRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PACKING_CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.r.to_string(),
            r.packing_2r.to_string(),
            r.log_packing.to_string(),
            r.entropy_bound.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_packing_csv<R: Read>(input: R) -> Result<Vec<PackingRow>> {
    let mut rd = csv::Reader::from_reader(input);
    check_header(&mut rd, &PACKING_CSV_HEADER)?;
    rd.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            let line = i + 2;
            Ok(PackingRow {
                r: parse_field(&rec, 0, line)?,
                packing_2r: parse_field(&rec, 1, line)?,
                log_packing: parse_field(&rec, 2, line)?,
                entropy_bound: parse_field(&rec, 3, line)?,
            })
        })
        .collect()
}

/// Bound quantities for every sample size of the study. `‖x‖_n` comes from
/// the generated design unless `[bounds] x_norm_n` is set, and the constant
/// `a` from the theoretical rule (1 for other rules).
pub fn bounds_from_config(cfg: &ExperimentConfig) -> Result<Vec<BoundReport>> {
    let s = Setting::from_config(cfg)?;
    let a = match cfg.lambda {
        LambdaRule::Theoretical { a } => a,
        _ => 1.0,
    };
    cfg.study
        .sample_sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let x_norm_n = match cfg.bounds.x_norm_n {
                Some(v) => v,
                None => s.design(cfg, i, n)?.input_norm(),
            };
            BoundReport::compute(&BoundInputs {
                n,
                param_count: s.arch.param_count(),
                depth: s.arch.depth(),
                a_lip: s.act.lipschitz(),
                x_norm_n,
                a,
                sigma: cfg.bounds.sigma.unwrap_or(1.0),
                delta: cfg.bounds.delta,
                radii: cfg.bounds.radii.clone(),
            })
        })
        .collect()
}

/// Runs `f` on a pool with the configured number of threads, or on the
/// global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(f),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{gaussian_subgauss_params, NoiseSampler};
    use approx::assert_relative_eq;
    use ndarray::array;

    fn cfg(extra: &str) -> ExperimentConfig {
        let text = format!(
            r#"
seed = 11
[model]
widths = [2, 3, 1]
activation = "relu"
kappa_star = 2.0
[noise]
kind = "gaussian"
sigma = 0.1
[study]
sample_sizes = [32, 64]
replicates = 4
t = 0.25
[lambda]
rule = "monte_carlo_quantile"
reps = 8
[fit]
restarts = 2
max_outer_iters = 60
[noise_search]
restarts = 3
{extra}
"#
        );
        ExperimentConfig::from_toml_str(&text).unwrap()
    }

    #[test]
    fn teacher_is_on_the_unit_sphere_and_deterministic() {
        let arch = Architecture::new(vec![4, 4, 3, 1]).unwrap();
        for h in [RegularizerKind::SumL1, RegularizerKind::MaxLayerL1] {
            for seed in 0..20 {
                let t = gen_teacher(&arch, h, 2.0, seed).unwrap();
                assert!((h.value(&t.omega) - 1.0).abs() <= 1e-12);
                assert_eq!(t, gen_teacher(&arch, h, 2.0, seed).unwrap());
            }
        }
        let zero = gen_teacher(&arch, RegularizerKind::SumL1, 0.0, 1).unwrap();
        let x = array![[1.0, 2.0, 3.0, 4.0]];
        assert_eq!(zero.forward_batch(&Activation::Relu, x.view()).unwrap()[0], 0.0);
    }

    #[test]
    fn inputs_follow_their_law() {
        let mut rng = stream_rng(1, 0);
        for _ in 0..100 {
            let x = InputDistribution::GaussianSphere.sample(4, &mut rng);
            assert_relative_eq!(x.iter().map(|v| v * v).sum::<f64>(), 4.0, epsilon = 1e-12);
            let c = InputDistribution::UniformCube.sample(3, &mut rng);
            assert!(c.iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn dataset_examples() {
        let arch = Architecture::new(vec![3, 2, 1]).unwrap();
        let teacher = gen_teacher(&arch, RegularizerKind::SumL1, 3.0, 5).unwrap();
        let quiet = SubGaussianSpec::tight(1.0, NoiseSampler::Rademacher { scale: 0.0 }).unwrap();
        let d = gen_dataset(&teacher, &Activation::Relu, InputDistribution::UniformCube, &quiet, 50, 2).unwrap();
        assert_eq!(d.responses(), d.truth().unwrap());
        assert_eq!(d, gen_dataset(&teacher, &Activation::Relu, InputDistribution::UniformCube, &quiet, 50, 2).unwrap());

        let off = gen_teacher(&arch, RegularizerKind::SumL1, 0.0, 5).unwrap();
        let sigma = 0.7;
        let noise = gaussian_subgauss_params(sigma).unwrap();
        let n = 10_000;
        let d = gen_dataset(&off, &Activation::Relu, InputDistribution::GaussianSphere, &noise, n, 3).unwrap();
        assert!(d.truth().unwrap().iter().all(|&v| v == 0.0));
        let y = d.responses();
        let var = y.dot(y) / n as f64;
        let se = sigma * sigma * (2.0 / n as f64).sqrt();
        assert!((var - sigma * sigma).abs() <= 5.0 * se);
        assert!(gen_dataset(&off, &Activation::Relu, InputDistribution::GaussianSphere, &noise, 0, 3).is_err());
    }

    #[test]
    fn rate_experiment_rows_and_round_trip() {
        let c = cfg("");
        let rep = run_rate_experiment(&c).unwrap();
        assert_eq!(rep.rows.len(), 8);
        assert!(rep.rows.iter().all(|r| r.err.is_finite() && r.err >= 0.0 && r.oracle_bound >= 0.0));
        assert_eq!(rep.medians.len(), 2);
        assert!(rep.slope.is_finite());
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        assert_eq!(read_rate_csv(buf.as_slice()).unwrap(), rep.rows);
    }

    #[test]
    fn noiseless_rate_reaches_optimizer_floor() {
        let c = cfg("").clone();
        let mut c = ExperimentConfig { lambda: LambdaRule::Fixed { value: 0.0 }, ..c };
        c.noise = crate::config::NoiseConfig::Gaussian { sigma: 0.0 };
        c.fit.restarts = Some(16);
        c.fit.max_outer_iters = Some(3000);
        c.fit.abs_tol = Some(1e-18);
        c.fit.rel_tol = Some(1e-14);
        c.study.sample_sizes = vec![64];
        let rep = run_rate_experiment(&c).unwrap();
        let s = Setting::from_config(&c).unwrap();
        let design = s.design(&c, 0, 64).unwrap();
        let signal = crate::network::empirical_norm(&s.teacher, &s.act, &design).unwrap();
        assert!(rep.medians[0].1 <= 1e-3 * signal, "{} vs {signal}", rep.medians[0].1);
    }

    #[test]
    fn coverage_with_huge_lambda_is_trivial() {
        let mut c = cfg("");
        c.lambda = LambdaRule::Fixed { value: 1e6 };
        let reports = run_coverage_experiment(&c).unwrap();
        for r in &reports {
            assert_eq!(r.frequency, 1.0);
            assert!(r.rows.iter().all(|row| row.covered));
        }
        let mut buf = Vec::new();
        reports[0].write_csv(&mut buf).unwrap();
        assert_eq!(read_coverage_csv(buf.as_slice()).unwrap(), reports[0].rows);
    }

    #[test]
    fn coverage_frequency_is_a_probability() {
        let reports = run_coverage_experiment(&cfg("")).unwrap();
        for r in reports {
            assert!((0.0..=1.0).contains(&r.frequency));
            assert!(r.ci.0 <= r.frequency && r.frequency <= r.ci.1);
            assert!(r.lambda_hat.is_some());
        }
    }

    #[test]
    fn experiments_ignore_thread_count() {
        let c = cfg("");
        let a = with_threads(Some(1), || run_rate_experiment(&c)).unwrap();
        let b = with_threads(Some(3), || run_rate_experiment(&c)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn clopper_pearson_examples() {
        let (lo, hi) = clopper_pearson(0, 10, 0.95).unwrap();
        assert_eq!(lo, 0.0);
        assert_relative_eq!(hi, 1.0 - 0.025f64.powf(0.1), epsilon = 1e-9);
        let (lo, hi) = clopper_pearson(10, 10, 0.95).unwrap();
        assert_relative_eq!(lo, 0.025f64.powf(0.1), epsilon = 1e-9);
        assert_eq!(hi, 1.0);
        assert!(clopper_pearson(3, 2, 0.95).is_err());
    }

    #[test]
    fn packing_scalar_relu() {
        let arch = Architecture::new(vec![1, 1, 1]).unwrap();
        let data = Dataset::design(array![[1.0]]).unwrap();
        let radii = [0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5];
        let rows = run_packing_experiment(&arch, &Activation::Relu, RegularizerKind::SumL1, &data, &radii, 100).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].packing_2r <= w[0].packing_2r);
        }
        for r in &rows {
            assert!(r.log_packing <= r.entropy_bound);
        }
        // Values span [−1/4, 1/4], so a 2r-packing with r ≥ 1/4 is a single point.
        assert_eq!(rows.last().unwrap().packing_2r, 1);
        // With r = 0.01 the greedy packing is the 0.02-separated chain on the span.
        assert!(rows[0].packing_2r >= 20);
        let mut buf = Vec::new();
        write_packing_csv(&rows, &mut buf).unwrap();
        assert_eq!(read_packing_csv(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn packing_refuses_large_nets() {
        let arch = Architecture::new(vec![2, 2, 1]).unwrap();
        let data = Dataset::design(array![[1.0, 0.0]]).unwrap();
        assert!(run_packing_experiment(&arch, &Activation::Relu, RegularizerKind::SumL1, &data, &[0.1], 10).is_err());
    }

    #[test]
    fn csv_readers_reject_bad_headers() {
        assert!(read_rate_csv("n,rep\n1,2\n".as_bytes()).is_err());
        assert!(read_coverage_csv("rep,err_sq,bound,covered\n0,1,1,2\n".as_bytes()).is_err());
        assert!(read_packing_csv("r,packing_2r,log_packing,entropy_bound\n0.1,x,0,0\n".as_bytes()).is_err());
    }

    #[test]
    fn bounds_table_for_scalar_network() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            seed = 1
            model = { widths = [1, 1, 1], activation = "relu", kappa_star = 1.0 }
            noise = { kind = "gaussian", sigma = 1.0 }
            study = { sample_sizes = [100] }
            lambda = { rule = "theoretical", a = 1.0 }
            bounds = { x_norm_n = 1.0 }
            "#,
        )
        .unwrap();
        let reps = bounds_from_config(&cfg).unwrap();
        assert_eq!(reps.len(), 1);
        let oracle = 2.0 * 4f64.ln().sqrt() * 200f64.ln() / 10.0;
        assert_relative_eq!(reps[0].lambda_theoretical, oracle, max_relative = 1e-12);
        assert_relative_eq!(reps[0].lambda_theoretical, 1.2477, epsilon = 1e-4);
    }
}
