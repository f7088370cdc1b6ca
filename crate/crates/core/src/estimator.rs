//! Scale-regularized least squares
//!
//! ```text
//! minimize over κ ≥ 0, h(Ω) ≤ 1:   (1/n) Σ_i (y_i − κ g_Ω(x_i))² + λ κ
//! ```
//!
//! The scale has a closed-form minimizer for fixed direction, so [`fit`]
//! alternates projected gradient descent on `Ω` with an exact `κ` step,
//! from several random starts.

use ndarray::{Array1, Zip};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::network::{rms, Activation, Architecture, Dataset, NetworkParams, ScaledNetwork};
use crate::regularizers::RegularizerKind;
use crate::rng::{stream_rng, StreamRng};

#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    pub max_outer_iters: usize,
    /// Projected gradient steps on the direction per outer iteration.
    pub max_inner_iters: usize,
    pub step_init: f64,
    /// Backtracking factor `β ∈ (0, 1)`.
    pub backtrack: f64,
    /// Armijo sufficient-decrease constant.
    pub sufficient_decrease: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub restarts: usize,
    /// Regularizer value of the random initial direction, in `(0, 1]`.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_outer_iters: 200,
            max_inner_iters: 20,
            step_init: 1.0,
            backtrack: 0.5,
            sufficient_decrease: 1e-4,
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            restarts: 8,
            init_scale: 1.0,
            seed: 0,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = self.max_outer_iters > 0
            && self.max_inner_iters > 0
            && self.restarts > 0
            && self.step_init > 0.0
            && self.abs_tol > 0.0
            && self.rel_tol > 0.0
            && self.sufficient_decrease > 0.0;
        if !positive {
            return Err(Error::InvalidArgument(
                "fit options must all be positive".into(),
            ));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "backtracking factor must lie in (0, 1), got {}",
                self.backtrack
            )));
        }
        if !(self.init_scale > 0.0 && self.init_scale <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "init_scale must lie in (0, 1], got {}",
                self.init_scale
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub net: ScaledNetwork,
    pub objective: f64,
    /// Objective after initialization and after every outer iteration of the
    /// winning restart.
    pub trace: Vec<f64>,
    pub restart_index: usize,
    pub iterations: usize,
    /// Restarts aborted because the objective became non-finite.
    pub failed_restarts: Vec<usize>,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    Ok(())
}

fn objective_from(g: &Array1<f64>, kappa: f64, y: &Array1<f64>, lambda: f64) -> f64 {
    let n = y.len() as f64;
    let sse: f64 = Zip::from(g).and(y).fold(0.0, |acc, &gi, &yi| {
        let r = yi - kappa * gi;
        acc + r * r
    });
    sse / n + lambda * kappa
}

fn optimal_scale_from(g: &Array1<f64>, y: &Array1<f64>, lambda: f64) -> f64 {
    let n = y.len() as f64;
    let curvature = 2.0 * g.dot(g) / n;
    if curvature == 0.0 {
        return 0.0;
    }
    let slope = 2.0 * g.dot(y) / n;
    ((slope - lambda) / curvature).max(0.0)
}

/// `(1/n) Σ (y_i − κ g_Ω(x_i))² + λκ`.
pub fn objective(net: &ScaledNetwork, act: &Activation, data: &Dataset, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let g = net.omega.forward_batch(act, data.inputs())?;
    Ok(objective_from(&g, net.kappa, data.responses(), lambda))
}

/// Exact minimizer over `κ ≥ 0` of the objective for fixed direction:
/// `max(0, ((2/n) Σ y g − λ) / ((2/n) Σ g²))`, or 0 when `g ≡ 0`.
pub fn optimal_scale(omega: &NetworkParams, act: &Activation, data: &Dataset, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let g = omega.forward_batch(act, data.inputs())?;
    Ok(optimal_scale_from(&g, data.responses(), lambda))
}

/// Exact gradient of the objective with respect to `(κ, Ω)`.
pub fn gradient(
    net: &ScaledNetwork,
    act: &Activation,
    data: &Dataset,
    lambda: f64,
) -> Result<(f64, NetworkParams)> {
    check_lambda(lambda)?;
    let pass = net.omega.forward_pass(act, data.inputs())?;
    let n = data.n() as f64;
    let g = pass.output();
    let resid: Array1<f64> = g * net.kappa - data.responses();
    let dkappa = 2.0 * resid.dot(g) / n + lambda;
    let coeffs = resid * (2.0 * net.kappa / n);
    let domega = net.omega.backward(act, &pass, coeffs.view())?;
    Ok((dkappa, domega))
}

/// Random direction on the boundary `{h = radius}`: random signs and
/// Dirichlet(1, …, 1) magnitudes, over all parameters for `SumL1` and per
/// layer for `MaxLayerL1`.
pub fn random_direction<R: Rng + ?Sized>(
    arch: &Architecture,
    h: RegularizerKind,
    radius: f64,
    rng: &mut R,
) -> NetworkParams {
    let mut draw = |count: usize| -> Vec<f64> {
        let mags: Vec<f64> = (0..count).map(|_| Exp1.sample(rng)).collect();
        let total: f64 = mags.iter().sum();
        mags.into_iter()
            .map(|m| {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * radius * m / total
            })
            .collect()
    };
    let flat = match h {
        RegularizerKind::SumL1 => draw(arch.param_count()),
        RegularizerKind::MaxLayerL1 => (0..arch.num_layers())
            .flat_map(|l| {
                let (r, c) = arch.layer_shape(l);
                draw(r * c)
            })
            .collect(),
    };
    NetworkParams::from_flat(arch, &flat).expect("finite by construction")
}

/// Negates the output layer. `g_Ω` changes sign and `h(Ω)` is unchanged.
pub(crate) fn flip_output_sign(omega: &mut NetworkParams) {
    let last = omega.layers().len() - 1;
    omega.layers_mut()[last].mapv_inplace(|v| -v);
}

struct RestartOutcome {
    net: ScaledNetwork,
    objective: f64,
    trace: Vec<f64>,
    iterations: usize,
}

struct Problem<'a> {
    data: &'a Dataset,
    arch: &'a Architecture,
    act: &'a Activation,
    h: RegularizerKind,
    lambda: f64,
    opts: &'a FitOptions,
}

impl Problem<'_> {
    fn outputs(&self, omega: &NetworkParams) -> Result<Array1<f64>> {
        let g = omega.forward_batch(self.act, self.data.inputs())?;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network output"));
        }
        Ok(g)
    }

    fn run(&self, rng: &mut StreamRng) -> Result<RestartOutcome> {
        let y = self.data.responses();
        let mut omega = random_direction(self.arch, self.h, self.opts.init_scale, rng);
        let mut g = self.outputs(&omega)?;
        if g.dot(y) < 0.0 {
            flip_output_sign(&mut omega);
            g.mapv_inplace(|v| -v);
        }
        let mut kappa = optimal_scale_from(&g, y, self.lambda);
        let mut obj = objective_from(&g, kappa, y, self.lambda);
        let mut trace = vec![obj];
        let mut step = self.opts.step_init;
        let mut iterations = 0;

        for _ in 0..self.opts.max_outer_iters {
            iterations += 1;
            let prev = obj;
            if kappa == 0.0 {
                // The objective is flat in Ω at κ = 0; climb the correlation
                // (2/n) Σ y g_Ω until the scale step turns positive.
                let (next, next_g, moved) = self.correlation_ascent(omega, g, &mut step)?;
                omega = next;
                g = next_g;
                if !moved {
                    trace.push(obj);
                    break;
                }
            } else {
                let (next, next_g) = self.direction_descent(omega, g, kappa, &mut step)?;
                omega = next;
                g = next_g;
            }
            kappa = optimal_scale_from(&g, y, self.lambda);
            obj = objective_from(&g, kappa, y, self.lambda);
            if !obj.is_finite() {
                return Err(Error::NonFinite("objective"));
            }
            // The κ step is exact, so obj ≤ prev up to rounding.
            obj = obj.min(prev);
            trace.push(obj);
            let gain = prev - obj;
            if kappa > 0.0 && (gain < self.opts.abs_tol || gain < self.opts.rel_tol * prev.abs()) {
                break;
            }
        }
        let net = ScaledNetwork::new(kappa, omega)?;
        // Recompute so the reported objective is exactly objective(net).
        let objective = objective_from(&self.outputs(&net.omega)?, kappa, y, self.lambda);
        Ok(RestartOutcome {
            net,
            objective,
            trace,
            iterations,
        })
    }

    fn direction_descent(
        &self,
        mut omega: NetworkParams,
        mut g: Array1<f64>,
        kappa: f64,
        step: &mut f64,
    ) -> Result<(NetworkParams, Array1<f64>)> {
        let y = self.data.responses();
        let n = self.data.n() as f64;
        let mut f = objective_from(&g, kappa, y, self.lambda);
        for _ in 0..self.opts.max_inner_iters {
            let pass = omega.forward_pass(self.act, self.data.inputs())?;
            let resid: Array1<f64> = pass.output() * kappa - y;
            let coeffs = resid * (2.0 * kappa / n);
            let grad = omega.backward(self.act, &pass, coeffs.view())?;
            let mut accepted = false;
            while *step > 1e-300 {
                let cand = self.h.project_unit_ball(&omega.add_scaled(-*step, &grad)?);
                let moved = cand.sub(&omega)?;
                let decrease = grad.dot(&moved)?;
                let cand_g = self.outputs(&cand)?;
                let cand_f = objective_from(&cand_g, kappa, y, self.lambda);
                if cand_f.is_finite() && cand_f <= f + self.opts.sufficient_decrease * decrease {
                    let gain = f - cand_f;
                    omega = cand;
                    g = cand_g;
                    f = cand_f;
                    accepted = true;
                    *step /= self.opts.backtrack;
                    if gain <= self.opts.abs_tol.min(self.opts.rel_tol * f.abs()) {
                        return Ok((omega, g));
                    }
                    break;
                }
                *step *= self.opts.backtrack;
            }
            if !accepted {
                break;
            }
        }
        Ok((omega, g))
    }

    fn correlation_ascent(
        &self,
        mut omega: NetworkParams,
        mut g: Array1<f64>,
        step: &mut f64,
    ) -> Result<(NetworkParams, Array1<f64>, bool)> {
        let y = self.data.responses();
        let n = self.data.n() as f64;
        let coeffs = y * (2.0 / n);
        let mut moved_any = false;
        let mut c = coeffs.dot(&g);
        for _ in 0..self.opts.max_inner_iters {
            if c > self.lambda {
                break;
            }
            let pass = omega.forward_pass(self.act, self.data.inputs())?;
            let grad = omega.backward(self.act, &pass, coeffs.view())?;
            let mut accepted = false;
            while *step > 1e-300 {
                let cand = self.h.project_unit_ball(&omega.add_scaled(*step, &grad)?);
                let moved = cand.sub(&omega)?;
                let increase = grad.dot(&moved)?;
                let cand_g = self.outputs(&cand)?;
                let cand_c = coeffs.dot(&cand_g);
                if cand_c >= c + self.opts.sufficient_decrease * increase && increase > 0.0 {
                    omega = cand;
                    g = cand_g;
                    c = cand_c;
                    accepted = true;
                    moved_any = true;
                    *step /= self.opts.backtrack;
                    break;
                }
                *step *= self.opts.backtrack;
            }
            if !accepted {
                break;
            }
        }
        Ok((omega, g, moved_any))
    }
}

/// Fits `(κ̂, Ω̂)` by multistart alternating minimization.
///
/// Restart `r` draws from stream `r` of `opts.seed`. The winner is the
/// smallest objective, ties broken by restart index, so the result does not
/// depend on how restarts are scheduled.
pub fn fit(
    data: &Dataset,
    arch: &Architecture,
    act: &Activation,
    h: RegularizerKind,
    lambda: f64,
    opts: &FitOptions,
) -> Result<FitResult> {
    check_lambda(lambda)?;
    opts.validate()?;
    if arch.input_dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: arch.input_dim(),
            got: data.dim(),
        });
    }
    let problem = Problem {
        data,
        arch,
        act,
        h,
        lambda,
        opts,
    };
    let outcomes: Vec<Result<RestartOutcome>> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(opts.seed, r as u64);
            problem.run(&mut rng)
        })
        .collect();

    let mut failed = Vec::new();
    let mut best: Option<(usize, RestartOutcome)> = None;
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(o) => {
                let better = match &best {
                    None => true,
                    Some((_, b)) => o.objective.total_cmp(&b.objective).is_lt(),
                };
                if better {
                    best = Some((r, o));
                }
            }
            Err(Error::NonFinite(_)) => failed.push(r),
            Err(e) => return Err(e),
        }
    }
    let (restart_index, o) = best.ok_or(Error::AllRestartsFailed(opts.restarts))?;
    Ok(FitResult {
        net: o.net,
        objective: o.objective,
        trace: o.trace,
        restart_index,
        iterations: o.iterations,
        failed_restarts: failed,
    })
}

/// In-sample prediction error `sqrt((1/n) Σ (κ g_Ω(x_i) − g*(x_i))²)`.
pub fn prediction_error(net: &ScaledNetwork, act: &Activation, data: &Dataset) -> Result<f64> {
    let truth = data.require_truth()?;
    let pred = net.forward_batch(act, data.inputs())?;
    Ok(rms(&(pred - truth)))
}

/// `min over candidates of err²(κ g_Ω) + 2λκ`.
pub fn oracle_bound(
    candidates: &[ScaledNetwork],
    act: &Activation,
    data: &Dataset,
    lambda: f64,
) -> Result<f64> {
    check_lambda(lambda)?;
    if candidates.is_empty() {
        return Err(Error::Empty("candidate list"));
    }
    candidates.iter().try_fold(f64::INFINITY, |best, c| {
        let err = prediction_error(c, act, data)?;
        Ok(best.min(err * err + 2.0 * lambda * c.kappa))
    })
}

/// Mean squared prediction error on a holdout sample.
pub fn risk_estimate(net: &ScaledNetwork, act: &Activation, holdout: &Dataset) -> Result<f64> {
    let pred = net.forward_batch(act, holdout.inputs())?;
    let resid = pred - holdout.responses();
    Ok(resid.dot(&resid) / holdout.n() as f64)
}
