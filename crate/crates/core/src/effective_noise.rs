//! Monte Carlo estimation of the effective noise
//! `z_h = sup_{h(Ω) ≤ 1} |(2/n) Σ g_Ω(x_i) u_i|` and its upper quantiles.
//!
//! The supremum is nonconvex. [`maximize_inner_product`] returns the best
//! value over several projected-gradient ascents, which is a lower bound on
//! `z_h`; [`envelope`] gives an analytic upper bound.

use std::io::{Read, Write};

use ndarray::{Array1, ArrayView1};
use rayon::prelude::*;
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::bounds::{c_lip1, SubGaussianSpec};
use crate::error::{Error, Result};
use crate::estimator::{flip_output_sign, random_direction};
use crate::network::{rms, Activation, Architecture, Dataset, NetworkParams};
use crate::regularizers::RegularizerKind;
use crate::rng::{stream_rng, StreamRng};

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseOptions {
    pub restarts: usize,
    pub max_iters: usize,
    pub step_init: f64,
    pub backtrack: f64,
    pub sufficient_increase: f64,
    pub rel_tol: f64,
    /// Seed every replicate after the first with the first replicate's argmax.
    pub warm_start: bool,
    pub seed: u64,
}

impl Default for NoiseOptions {
    fn default() -> Self {
        Self {
            restarts: 32,
            max_iters: 500,
            step_init: 1.0,
            backtrack: 0.5,
            sufficient_increase: 1e-4,
            rel_tol: 1e-10,
            warm_start: true,
            seed: 0,
        }
    }
}

impl NoiseOptions {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_iters == 0 {
            return Err(Error::InvalidArgument("restarts and max_iters must be positive".into()));
        }
        if !(self.step_init > 0.0 && self.sufficient_increase > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidArgument("step sizes and tolerances must be positive".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "backtracking factor must lie in (0, 1), got {}",
                self.backtrack
            )));
        }
        Ok(())
    }
}

struct Ascent<'a> {
    data: &'a Dataset,
    act: &'a Activation,
    h: RegularizerKind,
    /// `(2/n) u / ‖u‖_n`.
    coeffs: Array1<f64>,
    opts: &'a NoiseOptions,
}

impl Ascent<'_> {
    fn value(&self, omega: &NetworkParams) -> Result<f64> {
        let g = omega.forward_batch(self.act, self.data.inputs())?;
        let v = self.coeffs.dot(&g);
        if !v.is_finite() {
            return Err(Error::NonFinite("inner product"));
        }
        Ok(v)
    }

    fn climb(&self, mut omega: NetworkParams) -> Result<(NetworkParams, f64)> {
        let mut v = self.value(&omega)?;
        if v < 0.0 {
            flip_output_sign(&mut omega);
            v = -v;
        }
        let mut step = self.opts.step_init;
        for _ in 0..self.opts.max_iters {
            let pass = omega.forward_pass(self.act, self.data.inputs())?;
            let grad = omega.backward(self.act, &pass, self.coeffs.view())?;
            let mut accepted = false;
            while step > 1e-300 {
                let cand = self.h.project_unit_ball(&omega.add_scaled(step, &grad)?);
                let increase = grad.dot(&cand.sub(&omega)?)?;
                if increase <= 0.0 {
                    break;
                }
                let cand_v = self.value(&cand)?;
                if cand_v >= v + self.opts.sufficient_increase * increase {
                    let gain = cand_v - v;
                    omega = cand;
                    v = cand_v;
                    accepted = true;
                    step /= self.opts.backtrack;
                    if gain <= self.opts.rel_tol * v.abs() {
                        return Ok((omega, v));
                    }
                    break;
                }
                step *= self.opts.backtrack;
            }
            if !accepted {
                break;
            }
        }
        Ok((omega, v))
    }
}

fn check_noise(data: &Dataset, noise: ArrayView1<f64>) -> Result<()> {
    if noise.len() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            got: noise.len(),
        });
    }
    if noise.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("noise"));
    }
    Ok(())
}

/// Multistart ascent with starts drawn from `rng`, plus `warm` if given.
/// Returns the best direction (in the unit ball) and its value, which is at
/// least 0 and at most `z_h`.
#[allow(clippy::too_many_arguments)]
pub fn maximize_inner_product_with(
    data: &Dataset,
    noise: ArrayView1<f64>,
    arch: &Architecture,
    act: &Activation,
    h: RegularizerKind,
    opts: &NoiseOptions,
    rng: &mut StreamRng,
    warm: Option<&NetworkParams>,
) -> Result<(NetworkParams, f64)> {
    opts.validate()?;
    check_noise(data, noise)?;
    if arch.input_dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: arch.input_dim(),
            got: data.dim(),
        });
    }
    let mut starts: Vec<NetworkParams> = Vec::with_capacity(opts.restarts + 1);
    if let Some(w) = warm {
        if w.arch() != arch {
            return Err(Error::ArchitectureMismatch(format!("warm start {} vs {}", w.arch(), arch)));
        }
        starts.push(h.project_unit_ball(w));
    }
    for _ in 0..opts.restarts {
        starts.push(random_direction(arch, h, 1.0, rng));
    }
    let scale = rms(&noise.to_owned());
    if scale == 0.0 {
        return Ok((starts.swap_remove(0), 0.0));
    }
    let n = data.n() as f64;
    let ascent = Ascent {
        data,
        act,
        h,
        coeffs: noise.mapv(|u| 2.0 * u / (n * scale)),
        opts,
    };
    let mut best: Option<(NetworkParams, f64)> = None;
    for start in starts {
        let (omega, v) = ascent.climb(start)?;
        if best.as_ref().is_none_or(|(_, b)| v > *b) {
            best = Some((omega, v));
        }
    }
    let (omega, v) = best.expect("at least one start");
    Ok((omega, scale * v))
}

/// [`maximize_inner_product_with`] with starts from stream 0 of `opts.seed`.
pub fn maximize_inner_product(
    data: &Dataset,
    noise: ArrayView1<f64>,
    arch: &Architecture,
    act: &Activation,
    h: RegularizerKind,
    opts: &NoiseOptions,
) -> Result<(NetworkParams, f64)> {
    let mut rng = stream_rng(opts.seed, 0);
    maximize_inner_product_with(data, noise, arch, act, h, opts, &mut rng, None)
}

/// Largest parameter count accepted by [`brute_force_sup_tiny`].
pub const MAX_BRUTE_FORCE_PARAMS: usize = 3;

/// Grid search of the supremum over `{h(Ω) ≤ 1}` with spacing
/// `1/grid_resolution` per coordinate. Refining by an integer factor gives a
/// superset of grid points, so the value is monotone under refinement.
pub fn brute_force_sup_tiny(
    data: &Dataset,
    noise: ArrayView1<f64>,
    arch: &Architecture,
    act: &Activation,
    h: RegularizerKind,
    grid_resolution: usize,
) -> Result<f64> {
    check_noise(data, noise)?;
    let p = arch.param_count();
    if p > MAX_BRUTE_FORCE_PARAMS {
        return Err(Error::TooManyParameters(p));
    }
    if grid_resolution == 0 {
        return Err(Error::InvalidArgument("grid resolution must be positive".into()));
    }
    let res = grid_resolution as i64;
    let side = (2 * res + 1) as usize;
    let coords = |i: usize| (i as i64 - res) as f64 / res as f64;
    let n = data.n() as f64;
    let coeffs = noise.mapv(|u| 2.0 * u / n);
    let total = side.pow(p as u32);
    let best = (0..total)
        .into_par_iter()
        .map(|mut idx| -> Result<f64> {
            let mut flat = vec![0.0; p];
            for v in flat.iter_mut() {
                *v = coords(idx % side);
                idx /= side;
            }
            let omega = NetworkParams::from_flat(arch, &flat)?;
            if h.value(&omega) > 1.0 + 1e-12 {
                return Ok(0.0);
            }
            let g = omega.forward_batch(act, data.inputs())?;
            Ok(coeffs.dot(&g).abs())
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
    Ok(best)
}

/// Upper bound `2 C ‖u‖_n` on `z_h`, where `C` bounds `‖g_Ω‖_n` over the
/// unit ball: `c_Lip1` for `SumL1`, `a_Lip^L ‖x‖_n` for `MaxLayerL1`.
pub fn envelope(data: &Dataset, noise: ArrayView1<f64>, depth: usize, act: &Activation, h: RegularizerKind) -> f64 {
    let c = match h {
        RegularizerKind::SumL1 => c_lip1(act.lipschitz(), depth, data.input_norm()),
        RegularizerKind::MaxLayerL1 => act.lipschitz().powi(depth as i32) * data.input_norm(),
    };
    2.0 * c * rms(&noise.to_owned())
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseQuantileReport {
    pub t: f64,
    pub reps: usize,
    /// Per-replicate lower-bound estimates of `z_h`, in replicate order.
    pub z_values: Vec<f64>,
    /// Per-replicate [`envelope`] values.
    pub envelopes: Vec<f64>,
    pub lambda_hat: f64,
    /// Distribution-free order-statistic interval for the population
    /// quantile at level [`QUANTILE_CI_LEVEL`].
    pub ci: (f64, f64),
    pub opts: NoiseOptions,
}

pub const QUANTILE_CI_LEVEL: f64 = 0.95;

/// 1-based rank `ceil((1 − t) reps)` of the upper empirical quantile.
pub fn quantile_rank(t: f64, reps: usize) -> usize {
    // The small offset keeps e.g. 0.95 · 200 = 190.00000000000003 at 190.
    let raw = ((1.0 - t) * reps as f64 - 1e-9).ceil();
    (raw.max(1.0) as usize).min(reps)
}

/// `ceil((1 − t) reps)`-th order statistic of `values`.
pub fn upper_quantile(values: &[f64], t: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("sample"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[quantile_rank(t, values.len()) - 1])
}

/// Order-statistic interval `[x_(l), x_(u)]` for the `q`-quantile with
/// coverage at least `level`, from the Binomial(m, q) law of the rank.
pub fn quantile_interval(values: &[f64], q: f64, level: f64) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Empty("sample"));
    }
    let m = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let bin = Binomial::new(q, m as u64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let alpha = (1.0 - level) / 2.0;
    // P(x_(j) > ξ) = P(B ≤ j − 1).
    let mut lo = 1;
    for j in 1..=m {
        if bin.cdf(j as u64 - 1) <= alpha {
            lo = j;
        } else {
            break;
        }
    }
    let mut hi = m;
    for j in 1..=m {
        if bin.cdf(j as u64 - 1) >= 1.0 - alpha {
            hi = j;
            break;
        }
    }
    Ok((sorted[lo - 1], sorted[hi.max(lo) - 1]))
}

/// Draws `reps` noise vectors, maximizes each inner product and returns the
/// empirical `(1 − t)` quantile. Replicate `r` uses stream `r` of `seed`
/// for its noise and random starts, so results do not depend on threads.
#[allow(clippy::too_many_arguments)]
pub fn estimate_quantile(
    data: &Dataset,
    noise_model: &SubGaussianSpec,
    arch: &Architecture,
    act: &Activation,
    h: RegularizerKind,
    t: f64,
    reps: usize,
    opts: &NoiseOptions,
    seed: u64,
) -> Result<NoiseQuantileReport> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidArgument(format!("t must lie in (0, 1), got {t}")));
    }
    if (reps as f64) * t < 1.0 - 1e-9 {
        return Err(Error::InvalidArgument(format!("need reps >= 1/t, got reps = {reps}, t = {t}")));
    }
    opts.validate()?;
    let replicate = |r: usize, warm: Option<&NetworkParams>| -> Result<(NetworkParams, f64, f64)> {
        let mut rng = stream_rng(seed, r as u64);
        let noise = Array1::from(noise_model.sample_vec(data.n(), &mut rng));
        let (omega, z) = maximize_inner_product_with(data, noise.view(), arch, act, h, opts, &mut rng, warm)?;
        Ok((omega, z, envelope(data, noise.view(), arch.depth(), act, h)))
    };
    let (first_omega, first_z, first_env) = replicate(0, None)?;
    let warm = opts.warm_start.then_some(&first_omega);
    let rest: Vec<(f64, f64)> = (1..reps)
        .into_par_iter()
        .map(|r| replicate(r, warm).map(|(_, z, e)| (z, e)))
        .collect::<Result<_>>()?;
    let mut z_values = vec![first_z];
    let mut envelopes = vec![first_env];
    for (z, e) in rest {
        z_values.push(z);
        envelopes.push(e);
    }
    let lambda_hat = upper_quantile(&z_values, t)?;
    let ci = quantile_interval(&z_values, 1.0 - t, QUANTILE_CI_LEVEL)?;
    Ok(NoiseQuantileReport {
        t,
        reps,
        z_values,
        envelopes,
        lambda_hat,
        ci,
        opts: opts.clone(),
    })
}

impl NoiseQuantileReport {
    /// `rep,z_value` rows followed by a `t,reps,lambda_hat` summary block.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        w.write_record(["rep", "z_value"])?;
        for (r, z) in self.z_values.iter().enumerate() {
            w.write_record([r.to_string(), z.to_string()])?;
        }
        w.write_record(["t", "reps", "lambda_hat"])?;
        w.write_record([self.t.to_string(), self.reps.to_string(), self.lambda_hat.to_string()])?;
        w.flush()?;
        Ok(())
    }
}

/// Parsed form of the noise CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseCsv {
    pub z_values: Vec<f64>,
    pub t: f64,
    pub reps: usize,
    pub lambda_hat: f64,
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T> {
    rec.get(i)
        .ok_or_else(|| Error::parse(line, format!("missing column {}", i + 1)))?
        .trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("bad value in column {}", i + 1)))
}

pub fn read_noise_csv<R: Read>(input: R) -> Result<NoiseCsv> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let records: Vec<csv::StringRecord> = rd.records().collect::<std::result::Result<_, _>>()?;
    let header = |i: usize| records.get(i).map(|r| r.iter().collect::<Vec<_>>());
    if header(0) != Some(vec!["rep", "z_value"]) {
        return Err(Error::parse(1, "expected header rep,z_value"));
    }
    let summary_at = records
        .iter()
        .position(|r| r.iter().collect::<Vec<_>>() == ["t", "reps", "lambda_hat"])
        .ok_or_else(|| Error::parse(records.len(), "missing summary header t,reps,lambda_hat"))?;
    let mut z_values = Vec::new();
    for (i, rec) in records[1..summary_at].iter().enumerate() {
        let line = i + 2;
        if rec.len() != 2 {
            return Err(Error::parse(line, "expected 2 columns"));
        }
        let rep: usize = field(rec, 0, line)?;
        if rep != i {
            return Err(Error::parse(line, "replicate indices must be 0, 1, 2, ..."));
        }
        z_values.push(field(rec, 1, line)?);
    }
    let line = summary_at + 2;
    let rec = records
        .get(summary_at + 1)
        .ok_or_else(|| Error::parse(line, "missing summary row"))?;
    if rec.len() != 3 || records.len() != summary_at + 2 {
        return Err(Error::parse(line, "summary must be a single row of 3 columns"));
    }
    let out = NoiseCsv {
        z_values,
        t: field(rec, 0, line)?,
        reps: field(rec, 1, line)?,
        lambda_hat: field(rec, 2, line)?,
    };
    if out.reps != out.z_values.len() {
        return Err(Error::parse(line, "reps does not match the number of rows"));
    }
    Ok(out)
}
