//! Conversion between plain parameters `Θ` and scale/direction pairs `(κ, Ω)`.
//!
//! For degree-one homogeneous activations `g_Θ = κ g_Ω` with
//! `κ = h(Θ)^{(L+1)/k}` and `Ω = Θ / κ^{1/(L+1)}`, so `h(Ω) = 1`.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::network::{Activation, NetworkParams, ScaledNetwork};
use crate::regularizers::RegularizerKind;

/// Homogeneity degree `k > 0` of a regularizer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HomogeneitySpec {
    degree: f64,
}

impl HomogeneitySpec {
    pub fn new(degree: f64) -> Result<Self> {
        if !(degree > 0.0 && degree.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "homogeneity degree must be positive, got {degree}"
            )));
        }
        Ok(Self { degree })
    }

    pub fn degree(&self) -> f64 {
        self.degree
    }
}

impl From<RegularizerKind> for HomogeneitySpec {
    fn from(h: RegularizerKind) -> Self {
        Self { degree: h.degree() }
    }
}

/// Output of [`decompose`].
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub net: ScaledNetwork,
    /// Some layer of `Θ` is zero. Then `κ = 0` and `Ω` is `Θ` itself, which
    /// need not lie in the unit ball.
    pub degenerate: bool,
}

/// `κ^{1/(L+1)}`, with `κ = 0` mapped to 0.
fn layer_root(kappa: f64, layers: usize) -> f64 {
    if kappa == 0.0 {
        0.0
    } else {
        (kappa.ln() / layers as f64).exp()
    }
}

pub fn decompose(theta: &NetworkParams, h: RegularizerKind) -> Result<Decomposition> {
    if theta.has_zero_layer() {
        return Ok(Decomposition {
            net: ScaledNetwork::new(0.0, theta.clone())?,
            degenerate: true,
        });
    }
    let value = h.value(theta);
    if !value.is_finite() {
        return Err(Error::NonFinite("regularizer value"));
    }
    let layers = theta.arch().num_layers() as f64;
    let k = HomogeneitySpec::from(h).degree();
    let kappa = (layers / k * value.ln()).exp();
    let root = layer_root(kappa, theta.arch().num_layers());
    let omega = theta.scaled(1.0 / root);
    Ok(Decomposition {
        net: ScaledNetwork::new(kappa, omega)?,
        degenerate: false,
    })
}

/// `Θ = κ^{1/(L+1)} Ω`.
pub fn compose(net: &ScaledNetwork) -> NetworkParams {
    let root = layer_root(net.kappa, net.omega.arch().num_layers());
    net.omega.scaled(root)
}

/// Largest `|g_Θ(x) − κ g_Ω(x)|` over `probes`, where `(κ, Ω)` is the
/// decomposition of `Θ`. Only meaningful for homogeneous activations.
pub fn check_equivalence(
    theta: &NetworkParams,
    act: &Activation,
    h: RegularizerKind,
    probes: &[Array1<f64>],
) -> Result<f64> {
    if !act.is_homogeneous() {
        return Err(Error::NonHomogeneous(act.to_string()));
    }
    let dec = decompose(theta, h)?;
    probes.iter().try_fold(0.0f64, |worst, x| {
        let direct = theta.forward(act, x.view())?;
        let scaled = dec.net.forward(act, x.view())?;
        Ok(worst.max((direct - scaled).abs()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Architecture;
    use approx::assert_relative_eq;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_net(a: f64, b: f64) -> NetworkParams {
        NetworkParams::from_layers(vec![array![[a]], array![[b]]]).unwrap()
    }

    #[test]
    fn zero_layer_is_degenerate() {
        let theta = NetworkParams::from_layers(vec![
            array![[1.0, 2.0], [3.0, 4.0]],
            Array2::zeros((2, 2)),
            array![[1.0, 1.0]],
        ])
        .unwrap();
        let dec = decompose(&theta, RegularizerKind::SumL1).unwrap();
        assert!(dec.degenerate);
        assert_eq!(dec.net.kappa, 0.0);
        assert_eq!(dec.net.omega, theta);
    }

    #[test]
    fn scalar_decomposition() {
        let dec = decompose(&scalar_net(2.0, 3.0), RegularizerKind::SumL1).unwrap();
        assert!(!dec.degenerate);
        assert_relative_eq!(dec.net.kappa, 25.0, max_relative = 1e-14);
        assert_relative_eq!(dec.net.omega.layer(0)[[0, 0]], 0.4, max_relative = 1e-14);
        assert_relative_eq!(dec.net.omega.layer(1)[[0, 0]], 0.6, max_relative = 1e-14);
        assert_relative_eq!(RegularizerKind::SumL1.value(&dec.net.omega), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn unit_norm_is_a_fixed_point() {
        let theta = scalar_net(0.4, 0.6);
        let dec = decompose(&theta, RegularizerKind::SumL1).unwrap();
        assert_relative_eq!(dec.net.kappa, 1.0, epsilon = 1e-15);
        for (a, b) in dec.net.omega.iter().zip(theta.iter()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-15);
        }
    }

    #[test]
    fn compose_examples() {
        let omega = scalar_net(0.4, 0.6);
        let zero = compose(&ScaledNetwork::new(0.0, omega.clone()).unwrap());
        assert!(zero.iter().all(|&v| v == 0.0));
        let theta = compose(&ScaledNetwork::new(25.0, omega.clone()).unwrap());
        assert_relative_eq!(theta.layer(0)[[0, 0]], 2.0, max_relative = 1e-14);
        assert_relative_eq!(theta.layer(1)[[0, 0]], 3.0, max_relative = 1e-14);
        assert_eq!(compose(&ScaledNetwork::new(1.0, omega.clone()).unwrap()), omega);
    }

    #[test]
    fn equivalence_refuses_non_homogeneous() {
        let theta = scalar_net(2.0, 3.0);
        let err = check_equivalence(&theta, &Activation::Tanh, RegularizerKind::SumL1, &[array![1.0]]);
        assert!(matches!(err, Err(Error::NonHomogeneous(_))));
    }

    #[test]
    fn equivalence_on_zero_params() {
        let theta = NetworkParams::zeros(&Architecture::new(vec![3, 2, 1]).unwrap());
        let probes = vec![array![1.0, -1.0, 2.0]];
        assert_eq!(
            check_equivalence(&theta, &Activation::Relu, RegularizerKind::SumL1, &probes).unwrap(),
            0.0
        );
    }

    #[test]
    fn round_trip_preserves_network_function() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let arch = Architecture::new(vec![3, 4, 2, 1]).unwrap();
        for act in [Activation::Relu, Activation::leaky_relu()] {
            for h in [RegularizerKind::SumL1, RegularizerKind::MaxLayerL1] {
                for _ in 0..50 {
                    let flat: Vec<f64> =
                        (0..arch.param_count()).map(|_| rng.random_range(-2.0..2.0)).collect();
                    let theta = NetworkParams::from_flat(&arch, &flat).unwrap();
                    let dec = decompose(&theta, h).unwrap();
                    assert_relative_eq!(h.value(&dec.net.omega), 1.0, epsilon = 1e-12);
                    let back = compose(&dec.net);
                    let x = array![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), 0.5];
                    let a = theta.forward(&act, x.view()).unwrap();
                    let b = back.forward(&act, x.view()).unwrap();
                    assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
                }
            }
        }
    }
}
