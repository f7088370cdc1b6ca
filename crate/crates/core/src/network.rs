//! Feedforward networks without shifts: `x ↦ W^L φ(… W^1 φ(W^0 x))`.
//!
//! Weight matrices are stored by layer index, so `layers()[l]` is `W^l` with
//! shape `p_{l+1} × p_l`. Everything here is dense and single-output.

use std::fmt;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Depth and widths `p_0, …, p_{L+1}` of a network.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Architecture {
    widths: Vec<usize>,
}

impl Architecture {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 3 {
            return Err(Error::InvalidArchitecture(format!(
                "need at least one hidden layer (3 widths), got {}",
                widths.len()
            )));
        }
        if widths.contains(&0) {
            return Err(Error::InvalidArchitecture("widths must be positive".into()));
        }
        if *widths.last().unwrap() != 1 {
            return Err(Error::InvalidArchitecture("output width must be 1".into()));
        }
        Ok(Self { widths })
    }

    /// Number of hidden layers `L`.
    pub fn depth(&self) -> usize {
        self.widths.len() - 2
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    /// Number of weight matrices, `L + 1`.
    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    /// Shape `(p_{l+1}, p_l)` of `W^l`.
    pub fn layer_shape(&self, l: usize) -> (usize, usize) {
        (self.widths[l + 1], self.widths[l])
    }

    pub fn param_count(&self) -> usize {
        param_count(self)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.widths.iter().map(|p| p.to_string()).collect();
        write!(f, "{}", parts.join("-"))
    }
}

/// Total parameter count `Σ_l p_{l+1} p_l`.
pub fn param_count(arch: &Architecture) -> usize {
    arch.widths.windows(2).map(|w| w[0] * w[1]).sum()
}

/// Coordinatewise activation functions. Each satisfies `φ(0) = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Relu,
    /// `max(0, x) + min(0, c x)` with `c ∈ (0, 1)`.
    LeakyRelu(f64),
    /// `max(0, x) + c (exp(min(0, x)) - 1)` with `c ∈ (0, 1]`.
    Elu(f64),
    Tanh,
    /// SiL / swish, `x / (1 + exp(-x))`.
    Silu,
}

impl Activation {
    pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;
    pub const DEFAULT_ELU_SCALE: f64 = 1.0;

    pub fn leaky_relu() -> Self {
        Activation::LeakyRelu(Self::DEFAULT_LEAKY_SLOPE)
    }

    pub fn elu() -> Self {
        Activation::Elu(Self::DEFAULT_ELU_SCALE)
    }

    /// All five kinds with default shape parameters.
    pub fn all() -> [Activation; 5] {
        [
            Activation::Relu,
            Activation::leaky_relu(),
            Activation::elu(),
            Activation::Tanh,
            Activation::Silu,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::LeakyRelu(_) => "leaky_relu",
            Activation::Elu(_) => "elu",
            Activation::Tanh => "tanh",
            Activation::Silu => "silu",
        }
    }

    /// Parses a kind name; `param` overrides the default shape parameter.
    pub fn from_name(name: &str, param: Option<f64>) -> Result<Self> {
        let act = match name {
            "relu" => Activation::Relu,
            "leaky_relu" => Activation::LeakyRelu(param.unwrap_or(Self::DEFAULT_LEAKY_SLOPE)),
            "elu" => Activation::Elu(param.unwrap_or(Self::DEFAULT_ELU_SCALE)),
            "tanh" => Activation::Tanh,
            "silu" | "swish" => Activation::Silu,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown activation '{other}'"
                )))
            }
        };
        if param.is_some() && !matches!(act, Activation::LeakyRelu(_) | Activation::Elu(_)) {
            return Err(Error::InvalidArgument(format!(
                "activation '{name}' takes no shape parameter"
            )));
        }
        act.validate()?;
        Ok(act)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Activation::LeakyRelu(c) if !(c > 0.0 && c < 1.0) => Err(Error::InvalidArgument(
                format!("leaky_relu slope must lie in (0, 1), got {c}"),
            )),
            Activation::Elu(c) if !(c > 0.0 && c <= 1.0) => Err(Error::InvalidArgument(format!(
                "elu scale must lie in (0, 1], got {c}"
            ))),
            _ => Ok(()),
        }
    }

    /// Lipschitz constant `a_Lip` with respect to the Euclidean norm.
    pub fn lipschitz(&self) -> f64 {
        match self {
            Activation::Silu => 1.1,
            _ => 1.0,
        }
    }

    /// Nonnegative homogeneous of degree one.
    pub fn is_homogeneous(&self) -> bool {
        matches!(self, Activation::Relu | Activation::LeakyRelu(_))
    }

    #[inline]
    pub fn apply(&self, z: f64) -> f64 {
        match *self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu(c) => {
                if z > 0.0 {
                    z
                } else {
                    c * z
                }
            }
            Activation::Elu(c) => {
                if z > 0.0 {
                    z
                } else {
                    c * z.exp_m1()
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Silu => z / (1.0 + (-z).exp()),
        }
    }

    /// Derivative; kinks take the left branch, so `relu'(0) = 0`.
    #[inline]
    pub fn derivative(&self, z: f64) -> f64 {
        match *self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(c) => {
                if z > 0.0 {
                    1.0
                } else {
                    c
                }
            }
            Activation::Elu(c) => {
                if z > 0.0 {
                    1.0
                } else {
                    c * z.exp()
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 + z * (1.0 - s))
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::LeakyRelu(c) | Activation::Elu(c) => write!(f, "{}({c})", self.name()),
            _ => f.write_str(self.name()),
        }
    }
}

/// Weight matrices `(W^0, …, W^L)` of a network.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    arch: Architecture,
    layers: Vec<Array2<f64>>,
}

/// Intermediate values of a batched forward pass, kept for backpropagation.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    /// `Z_l = H_{l-1} W^{l-1 ⊤}` for `l = 1..=L`, one row per sample.
    pre: Vec<Array2<f64>>,
    /// `H_0 = X` and `H_l = φ(Z_l)`.
    post: Vec<Array2<f64>>,
    output: Array1<f64>,
}

impl ForwardPass {
    pub fn output(&self) -> &Array1<f64> {
        &self.output
    }

    pub fn into_output(self) -> Array1<f64> {
        self.output
    }
}

impl NetworkParams {
    pub fn zeros(arch: &Architecture) -> Self {
        let layers = (0..arch.num_layers())
            .map(|l| Array2::zeros(arch.layer_shape(l)))
            .collect();
        Self {
            arch: arch.clone(),
            layers,
        }
    }

    /// Builds parameters from `(W^0, …, W^L)`, inferring the architecture.
    pub fn from_layers(layers: Vec<Array2<f64>>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::InvalidArchitecture(format!(
                "need at least 2 weight matrices, got {}",
                layers.len()
            )));
        }
        let mut widths = vec![layers[0].ncols()];
        for (l, w) in layers.iter().enumerate() {
            if w.ncols() != *widths.last().unwrap() {
                return Err(Error::InvalidArchitecture(format!(
                    "W^{l} has {} columns, previous layer has width {}",
                    w.ncols(),
                    widths.last().unwrap()
                )));
            }
            widths.push(w.nrows());
        }
        let arch = Architecture::new(widths)?;
        if layers.iter().any(|w| w.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("network parameters"));
        }
        Ok(Self { arch, layers })
    }

    /// Builds parameters from a flat vector in (layer, row, column) order.
    pub fn from_flat(arch: &Architecture, values: &[f64]) -> Result<Self> {
        if values.len() != arch.param_count() {
            return Err(Error::DimensionMismatch {
                expected: arch.param_count(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network parameters"));
        }
        let mut offset = 0;
        let layers = (0..arch.num_layers())
            .map(|l| {
                let (r, c) = arch.layer_shape(l);
                let w = Array2::from_shape_vec((r, c), values[offset..offset + r * c].to_vec())
                    .expect("shape checked");
                offset += r * c;
                w
            })
            .collect();
        Ok(Self {
            arch: arch.clone(),
            layers,
        })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn depth(&self) -> usize {
        self.arch.depth()
    }

    pub fn layer(&self, l: usize) -> &Array2<f64> {
        &self.layers[l]
    }

    pub fn layers(&self) -> &[Array2<f64>] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.layers
    }

    /// All entries in (layer, row, column) order.
    pub fn flat(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|w| w.iter().copied()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|w| w.iter())
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    /// Every layer multiplied by `a`.
    pub fn scaled(&self, a: f64) -> Self {
        Self {
            arch: self.arch.clone(),
            layers: self.layers.iter().map(|w| w * a).collect(),
        }
    }

    pub fn map_layers(&self, mut f: impl FnMut(usize, &Array2<f64>) -> Array2<f64>) -> Self {
        Self {
            arch: self.arch.clone(),
            layers: self
                .layers
                .iter()
                .enumerate()
                .map(|(l, w)| f(l, w))
                .collect(),
        }
    }

    fn check_same_arch(&self, other: &Self) -> Result<()> {
        if self.arch != other.arch {
            return Err(Error::ArchitectureMismatch(format!(
                "{} vs {}",
                self.arch, other.arch
            )));
        }
        Ok(())
    }

    /// `self + a * other`.
    pub fn add_scaled(&self, a: f64, other: &Self) -> Result<Self> {
        self.check_same_arch(other)?;
        Ok(Self {
            arch: self.arch.clone(),
            layers: self
                .layers
                .iter()
                .zip(&other.layers)
                .map(|(w, v)| w + &(v * a))
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add_scaled(-1.0, other)
    }

    /// Euclidean inner product over all entries.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_same_arch(other)?;
        Ok(self
            .layers
            .iter()
            .zip(&other.layers)
            .map(|(w, v)| (w * v).sum())
            .sum())
    }

    /// True if some `W^l` is identically zero, which forces `g_Θ ≡ 0`.
    pub fn has_zero_layer(&self) -> bool {
        self.layers.iter().any(|w| w.iter().all(|&v| v == 0.0))
    }

    fn check_input(&self, dim: usize) -> Result<()> {
        if dim != self.arch.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.arch.input_dim(),
                got: dim,
            });
        }
        Ok(())
    }

    /// `g_Θ(x)`.
    pub fn forward(&self, act: &Activation, x: ArrayView1<f64>) -> Result<f64> {
        self.check_input(x.len())?;
        let out = self.outer_unchecked(act, 1, x.to_owned());
        Ok(out)
    }

    /// `g_Θ(x_i)` for every row `x_i` of `inputs`.
    pub fn forward_batch(&self, act: &Activation, inputs: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.check_input(inputs.ncols())?;
        let mut h = inputs.to_owned();
        let last = self.layers.len() - 1;
        for w in &self.layers[..last] {
            let mut z = h.dot(&w.t());
            z.mapv_inplace(|v| act.apply(v));
            h = z;
        }
        Ok(h.dot(&self.layers[last].row(0)))
    }

    /// Batched forward pass that keeps pre- and post-activations.
    pub fn forward_pass(&self, act: &Activation, inputs: ArrayView2<f64>) -> Result<ForwardPass> {
        self.check_input(inputs.ncols())?;
        let last = self.layers.len() - 1;
        let mut pre = Vec::with_capacity(last);
        let mut post = Vec::with_capacity(last + 1);
        post.push(inputs.to_owned());
        for w in &self.layers[..last] {
            let z = post.last().unwrap().dot(&w.t());
            let h = z.mapv(|v| act.apply(v));
            pre.push(z);
            post.push(h);
        }
        let output = post.last().unwrap().dot(&self.layers[last].row(0));
        Ok(ForwardPass { pre, post, output })
    }

    /// `Σ_i c_i ∇_Θ g_Θ(x_i)` for the samples of `pass`, by reverse accumulation.
    pub fn backward(
        &self,
        act: &Activation,
        pass: &ForwardPass,
        coeffs: ArrayView1<f64>,
    ) -> Result<NetworkParams> {
        let n = pass.output.len();
        if coeffs.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: coeffs.len(),
            });
        }
        let last = self.layers.len() - 1;
        let mut grads = vec![Array2::zeros((0, 0)); last + 1];
        // delta: n × p_{l+1}, sensitivity of Σ c_i g(x_i) to the layer output.
        let mut delta = coeffs.to_owned().insert_axis(Axis(1));
        for l in (0..=last).rev() {
            grads[l] = delta.t().dot(&pass.post[l]);
            if l > 0 {
                let mut back = delta.dot(&self.layers[l]);
                Zip::from(&mut back)
                    .and(&pass.pre[l - 1])
                    .for_each(|b, &z| *b *= act.derivative(z));
                delta = back;
            }
        }
        Ok(NetworkParams {
            arch: self.arch.clone(),
            layers: grads,
        })
    }

    fn check_split(&self, l: usize, min: usize, max: usize) -> Result<()> {
        if l < min || l > max {
            return Err(Error::LayerOutOfRange { index: l, min, max });
        }
        Ok(())
    }

    /// Inner subnetwork `S_l g_Θ(x) = φ(W^{l-1} … φ(W^0 x))`; `S_0` is the identity.
    pub fn inner_subnetwork(
        &self,
        act: &Activation,
        l: usize,
        x: ArrayView1<f64>,
    ) -> Result<Array1<f64>> {
        self.check_split(l, 0, self.depth())?;
        self.check_input(x.len())?;
        let mut h = x.to_owned();
        for w in &self.layers[..l] {
            h = w.dot(&h).mapv(|v| act.apply(v));
        }
        Ok(h)
    }

    /// Outer subnetwork `S^l g_Θ(z) = W^L φ(… W^l φ(W^{l-1} z))`, with
    /// `S^{L+1} g_Θ(z) = W^L z`.
    pub fn outer_subnetwork(&self, act: &Activation, l: usize, z: ArrayView1<f64>) -> Result<f64> {
        self.check_split(l, 1, self.depth() + 1)?;
        let expected = self.arch.widths()[l - 1];
        if z.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: z.len(),
            });
        }
        Ok(self.outer_unchecked(act, l, z.to_owned()))
    }

    fn outer_unchecked(&self, act: &Activation, l: usize, z: Array1<f64>) -> f64 {
        let last = self.layers.len() - 1;
        let mut h = z;
        for w in &self.layers[l - 1..last] {
            h = w.dot(&h).mapv(|v| act.apply(v));
        }
        self.layers[last].row(0).dot(&h)
    }

    pub fn norms(&self) -> Result<Norms> {
        let l1 = self.iter().map(|v| v.abs()).sum();
        let frobenius = self.iter().map(|v| v * v).sum::<f64>().sqrt();
        let spectral = self
            .layers
            .iter()
            .map(|w| spectral_norm(w.view()))
            .collect::<Result<Vec<_>>>()?;
        let param_op = spectral.iter().map(|s| s * s).sum::<f64>().sqrt();
        Ok(Norms {
            l1,
            frobenius,
            spectral,
            param_op,
        })
    }
}

/// Entrywise and operator norms of a parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Norms {
    pub l1: f64,
    pub frobenius: f64,
    /// `σ_max(W^l)` indexed by layer.
    pub spectral: Vec<f64>,
    /// `sqrt(Σ_l σ_max(W^l)^2)`.
    pub param_op: f64,
}

pub const POWER_ITERATION_TOL: f64 = 1e-10;
pub const POWER_ITERATION_MAX_ITERS: usize = 10_000;

/// Largest singular value by power iteration on the smaller Gram matrix.
///
/// The first start is the all-ones vector. A second start from a fixed
/// pseudo-random vector covers the case where all-ones is orthogonal to the
/// top singular vector; the larger Rayleigh quotient wins.
pub fn spectral_norm(w: ArrayView2<f64>) -> Result<f64> {
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix"));
    }
    if w.nrows() == 1 || w.ncols() == 1 {
        return Ok(w.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    let gram = if w.ncols() <= w.nrows() {
        w.t().dot(&w)
    } else {
        w.dot(&w.t())
    };
    let k = gram.nrows();
    let ones = Array1::from_elem(k, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_5eed);
    let scrambled: Array1<f64> = (0..k).map(|_| rng.random_range(0.5..1.5)).collect();
    let mut best: f64 = 0.0;
    for start in [ones, scrambled] {
        best = best.max(power_iteration(&gram, start)?);
    }
    Ok(best.max(0.0).sqrt())
}

/// Top eigenvalue of a symmetric positive semidefinite matrix.
fn power_iteration(gram: &Array2<f64>, start: Array1<f64>) -> Result<f64> {
    let mut v = &start / start.dot(&start).sqrt();
    let mut mu = 0.0;
    let mut residual = f64::INFINITY;
    for _ in 0..POWER_ITERATION_MAX_ITERS {
        let gv = gram.dot(&v);
        let norm = gv.dot(&gv).sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let next_mu = v.dot(&gv);
        let diff = &gv - &(&v * next_mu);
        residual = diff.dot(&diff).sqrt();
        let converged = (next_mu - mu).abs() <= POWER_ITERATION_TOL * next_mu.abs();
        mu = next_mu;
        v = gv / norm;
        if converged {
            return Ok(mu);
        }
    }
    Err(Error::PowerIteration {
        iterations: POWER_ITERATION_MAX_ITERS,
        residual,
    })
}

/// Scale/direction pair `(κ, Ω)` representing `κ g_Ω`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledNetwork {
    pub kappa: f64,
    pub omega: NetworkParams,
}

impl ScaledNetwork {
    pub fn new(kappa: f64, omega: NetworkParams) -> Result<Self> {
        if !kappa.is_finite() || kappa < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "scale must be finite and nonnegative, got {kappa}"
            )));
        }
        Ok(Self { kappa, omega })
    }

    pub fn arch(&self) -> &Architecture {
        self.omega.arch()
    }

    /// `κ g_Ω(x)`.
    pub fn forward(&self, act: &Activation, x: ArrayView1<f64>) -> Result<f64> {
        Ok(self.kappa * self.omega.forward(act, x)?)
    }

    pub fn forward_batch(&self, act: &Activation, inputs: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.omega.forward_batch(act, inputs)? * self.kappa)
    }
}

/// Something that maps a batch of inputs to real predictions.
pub trait Predictor {
    fn predict(&self, act: &Activation, inputs: ArrayView2<f64>) -> Result<Array1<f64>>;
}

impl Predictor for NetworkParams {
    fn predict(&self, act: &Activation, inputs: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.forward_batch(act, inputs)
    }
}

impl Predictor for ScaledNetwork {
    fn predict(&self, act: &Activation, inputs: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.forward_batch(act, inputs)
    }
}

/// Prediction distance `‖g_a - g_b‖_n` on the inputs of `data`.
pub fn pred_distance<A, B>(a: &A, b: &B, act: &Activation, data: &Dataset) -> Result<f64>
where
    A: Predictor + ?Sized,
    B: Predictor + ?Sized,
{
    let ga = a.predict(act, data.inputs())?;
    let gb = b.predict(act, data.inputs())?;
    Ok(rms(&(ga - gb)))
}

/// Empirical norm `‖g‖_n`.
pub fn empirical_norm<A: Predictor + ?Sized>(a: &A, act: &Activation, data: &Dataset) -> Result<f64> {
    Ok(rms(&a.predict(act, data.inputs())?))
}

pub(crate) fn rms(v: &Array1<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    (v.dot(v) / v.len() as f64).sqrt()
}

/// Fixed-design regression sample: inputs, responses and optionally the
/// noiseless values `g*(x_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    inputs: Array2<f64>,
    responses: Array1<f64>,
    truth: Option<Array1<f64>>,
}

impl Dataset {
    pub fn new(
        inputs: Array2<f64>,
        responses: Array1<f64>,
        truth: Option<Array1<f64>>,
    ) -> Result<Self> {
        let n = inputs.nrows();
        if n == 0 {
            return Err(Error::Empty("dataset"));
        }
        if responses.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: responses.len(),
            });
        }
        if let Some(t) = &truth {
            if t.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: t.len(),
                });
            }
        }
        let finite = inputs.iter().chain(responses.iter()).all(|v| v.is_finite())
            && truth.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("dataset"));
        }
        Ok(Self {
            inputs,
            responses,
            truth,
        })
    }

    /// Inputs only, responses zero. Useful when only the design matters.
    pub fn design(inputs: Array2<f64>) -> Result<Self> {
        let n = inputs.nrows();
        Self::new(inputs, Array1::zeros(n), None)
    }

    pub fn n(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn inputs(&self) -> ArrayView2<'_, f64> {
        self.inputs.view()
    }

    pub fn responses(&self) -> &Array1<f64> {
        &self.responses
    }

    pub fn truth(&self) -> Option<&Array1<f64>> {
        self.truth.as_ref()
    }

    pub fn require_truth(&self) -> Result<&Array1<f64>> {
        self.truth.as_ref().ok_or(Error::MissingTruth)
    }

    /// Same design with different responses; truth is kept.
    pub fn with_responses(&self, responses: Array1<f64>) -> Result<Self> {
        Self::new(self.inputs.clone(), responses, self.truth.clone())
    }

    /// `‖x‖_n = sqrt(Σ_i ‖x_i‖² / n)`.
    pub fn input_norm(&self) -> f64 {
        (self.inputs.iter().map(|v| v * v).sum::<f64>() / self.n() as f64).sqrt()
    }
}
