//! Closed-form constants: Lipschitz and boundedness constants of network
//! classes, entropy and Dudley-integral bounds, the theoretical tuning
//! parameter, and sub-Gaussian noise models.

use std::f64::consts::E;
use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{Activation, Dataset, NetworkParams};

fn same_arch(theta: &NetworkParams, gamma: &NetworkParams) -> Result<()> {
    if theta.arch() != gamma.arch() {
        return Err(Error::ArchitectureMismatch(format!(
            "{} vs {}",
            theta.arch(),
            gamma.arch()
        )));
    }
    Ok(())
}

/// `max_l Π_{j≠l} (‖W^j‖ ∨ ‖V^j‖)` with spectral norms.
fn excluded_layer_product(theta: &NetworkParams, gamma: &NetworkParams) -> Result<f64> {
    let a = theta.norms()?.spectral;
    let b = gamma.norms()?.spectral;
    let m: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect();
    Ok((0..m.len())
        .map(|l| {
            m.iter()
                .enumerate()
                .filter(|&(j, _)| j != l)
                .map(|(_, v)| v)
                .product::<f64>()
        })
        .fold(0.0, f64::max))
}

fn lipschitz_with_norm(
    theta: &NetworkParams,
    gamma: &NetworkParams,
    act: &Activation,
    x_norm: f64,
) -> Result<f64> {
    same_arch(theta, gamma)?;
    let depth = theta.depth() as f64;
    let prod = excluded_layer_product(theta, gamma)?;
    Ok(2.0 * act.lipschitz().powf(depth) * depth.sqrt() * x_norm * prod)
}

/// `c_Lip(x)` such that `|g_Θ(x) − g_Γ(x)| ≤ c_Lip(x) ‖Θ − Γ‖_F`.
pub fn lipschitz_pointwise(
    theta: &NetworkParams,
    gamma: &NetworkParams,
    act: &Activation,
    x: &[f64],
) -> Result<f64> {
    if x.len() != theta.arch().input_dim() {
        return Err(Error::DimensionMismatch {
            expected: theta.arch().input_dim(),
            got: x.len(),
        });
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    lipschitz_with_norm(theta, gamma, act, norm)
}

/// Empirical version of [`lipschitz_pointwise`] with `‖x‖_n` in place of `‖x‖`,
/// bounding `‖g_Θ − g_Γ‖_n`.
pub fn lipschitz_empirical(
    theta: &NetworkParams,
    gamma: &NetworkParams,
    act: &Activation,
    data: &Dataset,
) -> Result<f64> {
    if data.dim() != theta.arch().input_dim() {
        return Err(Error::DimensionMismatch {
            expected: theta.arch().input_dim(),
            got: data.dim(),
        });
    }
    lipschitz_with_norm(theta, gamma, act, data.input_norm())
}

/// `c_Lip1 = 2 (2 a_Lip / L)^L √L ‖x‖_n`.
pub fn c_lip1(a_lip: f64, depth: usize, x_norm_n: f64) -> f64 {
    let l = depth as f64;
    2.0 * (2.0 * a_lip / l).powf(l) * l.sqrt() * x_norm_n
}

/// Lipschitz and sup-norm constant of the unit-ball class on `data`.
pub fn lipschitz_unit_ball(act: &Activation, depth: usize, data: &Dataset) -> f64 {
    c_lip1(act.lipschitz(), depth, data.input_norm())
}

/// Metric entropy bound `6c²/r² · log(ePr²/c² ∨ 2e)` for the unit-ball class
/// at radius `r`. Zero when `c = 0`.
pub fn entropy_bound(r: f64, c_lip1: f64, p: usize) -> Result<f64> {
    if !(r > 0.0) || !(c_lip1 >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "entropy bound needs r > 0 and c >= 0, got r = {r}, c = {c_lip1}"
        )));
    }
    if c_lip1 == 0.0 {
        return Ok(0.0);
    }
    let c2 = c_lip1 * c_lip1;
    let arg = (E * p as f64 * r * r / c2).max(2.0 * E);
    Ok(6.0 * c2 / (r * r) * arg.ln())
}

/// Dudley integral bound `(5c/2) √log(eP ∨ 2e) · log(8σc/δ)` for
/// `0 < δ ≤ 8σc`. Zero when `c = 0`.
pub fn dudley_bound(delta: f64, sigma: f64, c_lip1: f64, p: usize) -> Result<f64> {
    if !(delta > 0.0) || !(sigma > 0.0) || !(c_lip1 >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dudley bound needs delta > 0, sigma > 0, c >= 0; got {delta}, {sigma}, {c_lip1}"
        )));
    }
    if c_lip1 == 0.0 {
        return Ok(0.0);
    }
    let upper = 8.0 * sigma * c_lip1;
    if delta > upper {
        return Err(Error::InvalidArgument(format!(
            "delta = {delta} exceeds 8 sigma c = {upper}"
        )));
    }
    let width = (E * p as f64).max(2.0 * E).ln().sqrt();
    Ok(2.5 * c_lip1 * width * (upper / delta).ln())
}

/// `a (2a_Lip/L)^L ‖x‖_n √(L log 2P) log(2n)/√n`.
pub fn tuning_lambda(n: usize, p: usize, depth: usize, a_lip: f64, x_norm_n: f64, a: f64) -> f64 {
    let l = depth as f64;
    let n = n as f64;
    a * (2.0 * a_lip / l).powf(l) * x_norm_n * (l * (2.0 * p as f64).ln()).sqrt() * (2.0 * n).ln()
        / n.sqrt()
}

/// Tail bound `exp(−nv/(12K²))` on `P((1/n)Σu_i² ≥ v)`, valid for `v ≥ 2γ²`.
pub fn subgaussian_tail(v: f64, n: usize, k: f64, gamma: f64) -> Result<f64> {
    if !(k > 0.0) || !(gamma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need K > 0 and gamma >= 0, got K = {k}, gamma = {gamma}"
        )));
    }
    if !(v >= 2.0 * gamma * gamma) {
        return Err(Error::InvalidArgument(format!(
            "tail bound holds only for v >= 2 gamma^2 = {}, got {v}",
            2.0 * gamma * gamma
        )));
    }
    Ok((-(n as f64) * v / (12.0 * k * k)).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSampler {
    Gaussian { sigma: f64 },
    /// `±scale` with equal probability.
    Rademacher { scale: f64 },
    /// Uniform on `[−a, a]`.
    Uniform { a: f64 },
}

impl NoiseSampler {
    fn parameter(&self) -> f64 {
        match *self {
            NoiseSampler::Gaussian { sigma } => sigma,
            NoiseSampler::Rademacher { scale } => scale,
            NoiseSampler::Uniform { a } => a,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            NoiseSampler::Gaussian { sigma } => sigma * sigma,
            NoiseSampler::Rademacher { scale } => scale * scale,
            NoiseSampler::Uniform { a } => a * a / 3.0,
        }
    }

    /// `E exp(u²/K²)`, or `None` when it is infinite.
    pub fn square_exp_moment(&self, k: f64) -> Option<f64> {
        let k2 = k * k;
        match *self {
            NoiseSampler::Gaussian { sigma } => {
                let base = 1.0 - 2.0 * sigma * sigma / k2;
                (base > 0.0).then(|| base.powf(-0.5))
            }
            NoiseSampler::Rademacher { scale } => Some((scale * scale / k2).exp()),
            NoiseSampler::Uniform { a } => {
                // (1/a)∫_0^a e^{t²/K²} dt = Σ_j q^j / (j! (2j+1)) with q = a²/K².
                let q = a * a / k2;
                let mut term = 1.0;
                let mut sum = 1.0;
                for j in 1..200 {
                    term *= q / j as f64;
                    let add = term / (2 * j + 1) as f64;
                    sum += add;
                    if add <= f64::EPSILON * sum {
                        break;
                    }
                }
                Some(sum)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseSampler::Gaussian { sigma } => sigma * rng.sample::<f64, _>(StandardNormal),
            NoiseSampler::Rademacher { scale } => {
                if rng.random::<bool>() {
                    scale
                } else {
                    -scale
                }
            }
            NoiseSampler::Uniform { a } => a * (2.0 * rng.random::<f64>() - 1.0),
        }
    }
}

/// Noise law with sub-Gaussian constants `(K, γ)` satisfying
/// `K²(E e^{u²/K²} − 1) ≤ γ²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SubGaussianSpec {
    k: f64,
    gamma: f64,
    sampler: NoiseSampler,
}

impl SubGaussianSpec {
    /// Checks the moment condition analytically, with a relative slack of
    /// 1e-12 on `γ²`.
    pub fn new(k: f64, gamma: f64, sampler: NoiseSampler) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) || !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "need K > 0 and gamma >= 0, got K = {k}, gamma = {gamma}"
            )));
        }
        let param = sampler.parameter();
        if !(param >= 0.0 && param.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise parameter must be nonnegative, got {param}"
            )));
        }
        let required = Self::required_gamma_sq(k, &sampler).ok_or_else(|| {
            Error::InvalidArgument(format!("E exp(u^2/K^2) is infinite for K = {k}"))
        })?;
        if required > gamma * gamma * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "gamma^2 = {} is below K^2(E e^(u^2/K^2) - 1) = {required}",
                gamma * gamma
            )));
        }
        Ok(Self { k, gamma, sampler })
    }

    /// Smallest admissible `γ²` for the given `K`.
    pub fn required_gamma_sq(k: f64, sampler: &NoiseSampler) -> Option<f64> {
        sampler.square_exp_moment(k).map(|m| k * k * (m - 1.0))
    }

    /// Tightest spec for `sampler` at the given `K`.
    pub fn tight(k: f64, sampler: NoiseSampler) -> Result<Self> {
        let g2 = Self::required_gamma_sq(k, &sampler).ok_or_else(|| {
            Error::InvalidArgument(format!("E exp(u^2/K^2) is infinite for K = {k}"))
        })?;
        Self::new(k, g2.max(0.0).sqrt(), sampler)
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn sampler(&self) -> &NoiseSampler {
        &self.sampler
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sampler.sample(rng)
    }

    pub fn sample_vec<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| self.sampler.sample(rng)).collect()
    }
}

/// Gaussian noise with `K = 2σ` and `γ² = K²((1 − 2σ²/K²)^{−1/2} − 1)`.
pub fn gaussian_subgauss_params(sigma: f64) -> Result<SubGaussianSpec> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let k = 2.0 * sigma;
    let gamma_sq = k * k * ((1.0 - 2.0 * sigma * sigma / (k * k)).powf(-0.5) - 1.0);
    SubGaussianSpec::new(k, gamma_sq.sqrt(), NoiseSampler::Gaussian { sigma })
}

/// Plug-in values of the theoretical constants for one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub n: usize,
    pub param_count: usize,
    pub depth: usize,
    pub a_lip: f64,
    pub inputs_norm: f64,
    pub constant_a: f64,
    pub c_lip1: f64,
    pub lambda_theoretical: f64,
    /// `(r, entropy_bound(r))`.
    pub entropy_at: Vec<(f64, f64)>,
    pub dudley: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundInputs {
    pub n: usize,
    pub param_count: usize,
    pub depth: usize,
    pub a_lip: f64,
    pub x_norm_n: f64,
    pub a: f64,
    pub sigma: f64,
    /// Lower limit of the Dudley integral; `None` means `σc_Lip1/(2√n)`.
    pub delta: Option<f64>,
    pub radii: Vec<f64>,
}

pub const BOUND_CSV_HEADER: [&str; 9] =
    ["n", "P", "L", "a_lip", "x_norm_n", "a", "lambda", "c_lip1", "dudley"];

impl BoundReport {
    pub fn compute(inp: &BoundInputs) -> Result<Self> {
        if inp.n == 0 || inp.param_count == 0 || inp.depth == 0 {
            return Err(Error::InvalidArgument("n, P and L must be positive".into()));
        }
        for (name, v) in [("a_lip", inp.a_lip), ("x_norm_n", inp.x_norm_n), ("a", inp.a), ("sigma", inp.sigma)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        let c = c_lip1(inp.a_lip, inp.depth, inp.x_norm_n);
        let delta = inp.delta.unwrap_or(inp.sigma * c / (2.0 * (inp.n as f64).sqrt()));
        let entropy_at = inp
            .radii
            .iter()
            .map(|&r| entropy_bound(r, c, inp.param_count).map(|b| (r, b)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n: inp.n,
            param_count: inp.param_count,
            depth: inp.depth,
            a_lip: inp.a_lip,
            inputs_norm: inp.x_norm_n,
            constant_a: inp.a,
            c_lip1: c,
            lambda_theoretical: tuning_lambda(inp.n, inp.param_count, inp.depth, inp.a_lip, inp.x_norm_n, inp.a),
            entropy_at,
            dudley: dudley_bound(delta, inp.sigma, c, inp.param_count)?,
        })
    }

    pub fn csv_record(&self) -> [String; 9] {
        [
            self.n.to_string(),
            self.param_count.to_string(),
            self.depth.to_string(),
            self.a_lip.to_string(),
            self.inputs_norm.to_string(),
            self.constant_a.to_string(),
            self.lambda_theoretical.to_string(),
            self.c_lip1.to_string(),
            self.dudley.to_string(),
        ]
    }

    /// Header plus one row per report.
    pub fn write_csv<W: Write>(reports: &[BoundReport], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(BOUND_CSV_HEADER)?;
        for r in reports {
            w.write_record(r.csv_record())?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::random_direction;
    use crate::network::{empirical_norm, Architecture};
    use crate::regularizers::RegularizerKind;
    use approx::assert_relative_eq;
    use ndarray::{array, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_net(a: f64, b: f64) -> NetworkParams {
        NetworkParams::from_layers(vec![array![[a]], array![[b]]]).unwrap()
    }

    #[test]
    fn lipschitz_scalar_example() {
        let theta = scalar_net(2.0, 3.0);
        let gamma = scalar_net(1.0, 1.0);
        let c = lipschitz_pointwise(&theta, &gamma, &Activation::Relu, &[1.0]).unwrap();
        assert_relative_eq!(c, 6.0, epsilon = 1e-14);
        let lhs = (theta.forward(&Activation::Relu, array![1.0].view()).unwrap()
            - gamma.forward(&Activation::Relu, array![1.0].view()).unwrap())
        .abs();
        let dist = theta.sub(&gamma).unwrap().dot(&theta.sub(&gamma).unwrap()).unwrap().sqrt();
        assert_eq!(lhs, 5.0);
        assert!(lhs <= c * dist);
        assert_eq!(lipschitz_pointwise(&theta, &theta, &Activation::Relu, &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn lipschitz_rejects_mismatch() {
        let a = scalar_net(1.0, 1.0);
        let b = NetworkParams::zeros(&Architecture::new(vec![2, 1, 1]).unwrap());
        assert!(lipschitz_pointwise(&a, &b, &Activation::Relu, &[1.0]).is_err());
        assert!(lipschitz_pointwise(&a, &a, &Activation::Relu, &[1.0, 2.0]).is_err());
    }

    /// Same quantity written as an explicit loop over excluded layers.
    fn lipschitz_loop(theta: &NetworkParams, gamma: &NetworkParams, a_lip: f64, x_norm: f64) -> f64 {
        let depth = theta.depth();
        let mut best = 0.0f64;
        for excluded in 0..=depth {
            let mut prod = 1.0;
            for j in 0..=depth {
                if j != excluded {
                    let s1 = crate::network::spectral_norm(theta.layer(j).view()).unwrap();
                    let s2 = crate::network::spectral_norm(gamma.layer(j).view()).unwrap();
                    prod *= if s1 > s2 { s1 } else { s2 };
                }
            }
            best = best.max(prod);
        }
        2.0 * a_lip.powi(depth as i32) * (depth as f64).sqrt() * x_norm * best
    }

    #[test]
    fn lipschitz_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let arch = Architecture::new(vec![3, 4, 3, 1]).unwrap();
        for act in Activation::all() {
            for _ in 0..200 {
                let t = random_direction(&arch, RegularizerKind::SumL1, 4.0, &mut rng);
                let g = random_direction(&arch, RegularizerKind::SumL1, 4.0, &mut rng);
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
                let c = lipschitz_pointwise(&t, &g, &act, &x).unwrap();
                let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert_relative_eq!(c, lipschitz_loop(&t, &g, act.lipschitz(), xn), max_relative = 1e-12);
                let xv = ndarray::ArrayView1::from(&x);
                let lhs = (t.forward(&act, xv).unwrap() - g.forward(&act, xv).unwrap()).abs();
                let d = t.sub(&g).unwrap();
                assert!(lhs <= c * d.dot(&d).unwrap().sqrt() * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn empirical_lipschitz_bounds_empirical_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let arch = Architecture::new(vec![2, 3, 1]).unwrap();
        let x = Array2::from_shape_fn((25, 2), |_| rng.random_range(-1.0..1.0));
        let data = Dataset::design(x).unwrap();
        for _ in 0..100 {
            let t = random_direction(&arch, RegularizerKind::SumL1, 2.0, &mut rng);
            let g = random_direction(&arch, RegularizerKind::SumL1, 2.0, &mut rng);
            let c = lipschitz_empirical(&t, &g, &Activation::Tanh, &data).unwrap();
            let dist = crate::network::pred_distance(&t, &g, &Activation::Tanh, &data).unwrap();
            let d = t.sub(&g).unwrap();
            assert!(dist <= c * d.dot(&d).unwrap().sqrt() * (1.0 + 1e-9));
        }
    }

    #[test]
    fn unit_ball_constant_examples() {
        let one = Dataset::design(array![[1.0]]).unwrap();
        assert_relative_eq!(lipschitz_unit_ball(&Activation::Relu, 1, &one), 4.0, epsilon = 1e-15);
        assert_relative_eq!(
            lipschitz_unit_ball(&Activation::Relu, 2, &one),
            2.0 * 2f64.sqrt(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn unit_ball_boundedness_and_pair_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let arch = Architecture::new(vec![3, 5, 4, 1]).unwrap();
        let x = Array2::from_shape_fn((30, 3), |_| rng.random_range(-2.0..2.0));
        let data = Dataset::design(x).unwrap();
        for act in Activation::all() {
            let c = lipschitz_unit_ball(&act, arch.depth(), &data);
            for h in [RegularizerKind::SumL1] {
                for _ in 0..100 {
                    let r = rng.random_range(0.0..=1.0);
                    let o1 = random_direction(&arch, h, r, &mut rng);
                    let o2 = random_direction(&arch, h, 1.0, &mut rng);
                    assert!(empirical_norm(&o1, &act, &data).unwrap() <= c);
                    assert!(lipschitz_empirical(&o1, &o2, &act, &data).unwrap() <= c * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy_bound(0.5, 0.0, 10).unwrap(), 0.0);
        assert_relative_eq!(entropy_bound(4.0, 4.0, 2).unwrap(), 6.0 * (2.0 * E).ln(), epsilon = 1e-12);
        assert_relative_eq!(entropy_bound(4.0, 4.0, 2).unwrap(), 10.159, epsilon = 1e-3);
        assert!(entropy_bound(0.0, 1.0, 2).is_err());
        // Scan past the branch point r² = 2c²/P.
        let c = 3.0;
        let p = 7;
        let start = (2.0 * c * c / p as f64).sqrt();
        let mut prev = f64::INFINITY;
        for i in 0..400 {
            let r = start * (1.0 + i as f64 * 0.05);
            let v = entropy_bound(r, c, p).unwrap();
            assert!(v <= prev + 1e-12);
            prev = v;
        }
    }

    #[test]
    fn dudley_examples() {
        assert_eq!(dudley_bound(32.0, 1.0, 4.0, 2).unwrap(), 0.0);
        let direct = 10.0 * (2.0 * E).ln().sqrt() * 8f64.ln();
        assert_relative_eq!(dudley_bound(4.0, 1.0, 4.0, 2).unwrap(), direct, epsilon = 1e-12);
        assert_relative_eq!(direct, 27.06, epsilon = 1e-2);
        let step = dudley_bound(2.0, 1.0, 4.0, 2).unwrap() - dudley_bound(4.0, 1.0, 4.0, 2).unwrap();
        assert_relative_eq!(step, 10.0 * (2.0 * E).ln().sqrt() * 2f64.ln(), epsilon = 1e-12);
        assert!(dudley_bound(33.0, 1.0, 4.0, 2).is_err());
        assert!(dudley_bound(0.0, 1.0, 4.0, 2).is_err());
        assert_eq!(dudley_bound(1.0, 1.0, 0.0, 2).unwrap(), 0.0);
    }

    #[test]
    fn lambda_examples() {
        let lam = tuning_lambda(100, 2, 1, 1.0, 1.0, 1.0);
        assert_relative_eq!(lam, 2.0 * 4f64.ln().sqrt() * 200f64.ln() / 10.0, epsilon = 1e-14);
        assert_relative_eq!(lam, 1.2477, epsilon = 1e-4);
        for n in [10, 100, 1000] {
            let ratio = tuning_lambda(2 * n, 5, 2, 1.0, 1.3, 0.7) / tuning_lambda(n, 5, 2, 1.0, 1.3, 0.7);
            let nf = n as f64;
            assert_relative_eq!(ratio, (4.0 * nf).ln() / (2f64.sqrt() * (2.0 * nf).ln()), epsilon = 1e-12);
        }
        let ratio = tuning_lambda(50, 49, 2, 1.0, 1.0, 1.0) / tuning_lambda(50, 7, 2, 1.0, 1.0, 1.0);
        assert_relative_eq!(ratio, (98f64.ln() / 14f64.ln()).sqrt(), epsilon = 1e-12);
        assert!(ratio > 1.0 && ratio < 2.0);
    }

    #[test]
    fn lambda_log_space_reimplementation() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..200 {
            let n = rng.random_range(1..100_000);
            let p = rng.random_range(1..10_000);
            let l = rng.random_range(1..6);
            let a_lip: f64 = rng.random_range(0.5..2.0);
            let x: f64 = rng.random_range(0.1..10.0);
            let a: f64 = rng.random_range(0.1..5.0);
            let (nf, lf) = (n as f64, l as f64);
            let log = a.ln() + lf * (2.0 * a_lip / lf).ln() + x.ln() + 0.5 * (lf * (2.0 * p as f64).ln()).ln()
                + (2.0 * nf).ln().ln()
                - 0.5 * nf.ln();
            assert_relative_eq!(tuning_lambda(n, p, l, a_lip, x, a), log.exp(), max_relative = 1e-12);
        }
    }

    #[test]
    fn tail_examples() {
        let (k, g) = (2.0, 1.1);
        assert_relative_eq!(
            subgaussian_tail(2.0 * g * g, 1, k, g).unwrap(),
            (-g * g / (6.0 * k * k)).exp(),
            epsilon = 1e-15
        );
        let v = 3.0;
        let one = subgaussian_tail(v, 10, k, g).unwrap();
        assert_relative_eq!(subgaussian_tail(v, 20, k, g).unwrap(), one * one, max_relative = 1e-14);
        assert!(subgaussian_tail(1.0, 10, k, g).is_err());
    }

    #[test]
    fn gaussian_params() {
        let s = gaussian_subgauss_params(1.0).unwrap();
        assert_eq!(s.k(), 2.0);
        assert_relative_eq!(s.gamma() * s.gamma(), 4.0 * (2f64.sqrt() - 1.0), epsilon = 1e-14);
        assert_relative_eq!(s.gamma() * s.gamma(), 1.6569, epsilon = 1e-4);
        let tiny = gaussian_subgauss_params(1e-9).unwrap();
        assert!(tiny.gamma() < 1e-8);
        assert!(gaussian_subgauss_params(0.0).is_err());
    }

    #[test]
    fn rademacher_and_uniform_moments() {
        let k = 1.5;
        let g2 = SubGaussianSpec::required_gamma_sq(k, &NoiseSampler::Rademacher { scale: 0.7 }).unwrap();
        assert_relative_eq!(g2, k * k * ((0.49f64 / (k * k)).exp() - 1.0), epsilon = 1e-15);
        // Uniform moment against Simpson quadrature of (1/a)∫_0^a e^{t²/K²} dt.
        let a = 1.3;
        let m = 2000;
        let h = a / m as f64;
        let f = |t: f64| (t * t / (k * k)).exp();
        let simpson: f64 = (0..=m)
            .map(|i| {
                let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                w * f(i as f64 * h)
            })
            .sum::<f64>()
            * h
            / 3.0
            / a;
        let series = NoiseSampler::Uniform { a }.square_exp_moment(k).unwrap();
        assert_relative_eq!(series, simpson, max_relative = 1e-10);
    }

    #[test]
    fn spec_validation() {
        let s = NoiseSampler::Gaussian { sigma: 1.0 };
        assert!(SubGaussianSpec::new(1.0, 5.0, s).is_err()); // K² ≤ 2σ²: moment infinite
        assert!(SubGaussianSpec::new(2.0, 1.0, s).is_err()); // γ too small
        assert!(SubGaussianSpec::new(2.0, 1.3, s).is_ok());
        let zero = SubGaussianSpec::tight(1.0, NoiseSampler::Rademacher { scale: 0.0 }).unwrap();
        assert_eq!(zero.gamma(), 0.0);
        assert!(SubGaussianSpec::new(1.0, 1.0, NoiseSampler::Uniform { a: -1.0 }).is_err());
    }

    #[test]
    fn sampler_variances() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let m = 40_000;
        for s in [
            NoiseSampler::Gaussian { sigma: 0.5 },
            NoiseSampler::Rademacher { scale: 2.0 },
            NoiseSampler::Uniform { a: 1.5 },
        ] {
            let draws: Vec<f64> = (0..m).map(|_| s.sample(&mut rng)).collect();
            let var = draws.iter().map(|u| u * u).sum::<f64>() / m as f64;
            let fourth = draws.iter().map(|u| u.powi(4)).sum::<f64>() / m as f64;
            let se = ((fourth - var * var) / m as f64).sqrt();
            assert!((var - s.variance()).abs() <= 5.0 * se.max(1e-12), "{s:?}");
        }
    }

    #[test]
    fn report_csv() {
        let inputs = BoundInputs {
            n: 100,
            param_count: 2,
            depth: 1,
            a_lip: 1.0,
            x_norm_n: 1.0,
            a: 1.0,
            sigma: 1.0,
            delta: None,
            radii: vec![0.5, 4.0],
        };
        let rep = BoundReport::compute(&inputs).unwrap();
        assert_relative_eq!(rep.lambda_theoretical, 1.2477, epsilon = 1e-4);
        assert_eq!(rep.c_lip1, 4.0);
        assert_relative_eq!(rep.entropy_at[1].1, 10.159, epsilon = 1e-3);
        assert!(rep.dudley > 0.0);
        let mut buf = Vec::new();
        BoundReport::write_csv(std::slice::from_ref(&rep), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), BOUND_CSV_HEADER.to_vec());
        let row = rd.records().next().unwrap().unwrap();
        let lam: f64 = row[6].parse().unwrap();
        assert_eq!(lam, rep.lambda_theoretical);
    }
}
