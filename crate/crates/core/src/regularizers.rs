//! Regularizers `h` on parameter space and Euclidean projection onto `{h ≤ 1}`.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::network::NetworkParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RegularizerKind {
    /// `Σ_l Σ_{k,j} |W^l_{kj}|`.
    SumL1,
    /// `max_l Σ_{k,j} |W^l_{kj}|`.
    MaxLayerL1,
}

impl RegularizerKind {
    pub fn name(&self) -> &'static str {
        match self {
            RegularizerKind::SumL1 => "sum_l1",
            RegularizerKind::MaxLayerL1 => "max_layer_l1",
        }
    }

    /// Homogeneity degree `k`. Both kinds are norms.
    pub fn degree(&self) -> f64 {
        1.0
    }

    pub fn value(&self, theta: &NetworkParams) -> f64 {
        let per_layer = theta.layers().iter().map(|w| w.iter().map(|v| v.abs()).sum::<f64>());
        match self {
            RegularizerKind::SumL1 => per_layer.sum(),
            RegularizerKind::MaxLayerL1 => per_layer.fold(0.0, f64::max),
        }
    }

    pub fn in_unit_ball(&self, theta: &NetworkParams, tol: f64) -> bool {
        self.value(theta) <= 1.0 + tol
    }

    /// Euclidean projection onto `{h ≤ 1}`.
    ///
    /// `SumL1` projects the concatenated parameter vector onto the unit ℓ1
    /// ball; `MaxLayerL1` projects each layer independently.
    pub fn project_unit_ball(&self, theta: &NetworkParams) -> NetworkParams {
        match self {
            RegularizerKind::SumL1 => {
                let flat = project_l1_ball(&theta.flat(), 1.0);
                NetworkParams::from_flat(theta.arch(), &flat)
                    .expect("projection preserves shape and finiteness")
            }
            RegularizerKind::MaxLayerL1 => theta.map_layers(|_, w| {
                let flat: Vec<f64> = w.iter().copied().collect();
                Array2::from_shape_vec(w.raw_dim(), project_l1_ball(&flat, 1.0))
                    .expect("projection preserves shape")
            }),
        }
    }
}

impl fmt::Display for RegularizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RegularizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum_l1" => Ok(RegularizerKind::SumL1),
            "max_layer_l1" => Ok(RegularizerKind::MaxLayerL1),
            other => Err(Error::InvalidArgument(format!("unknown regularizer '{other}'"))),
        }
    }
}

/// Euclidean projection of `v` onto `{w : ‖w‖_1 ≤ radius}`.
///
/// Sort-based soft thresholding: with `u` the magnitudes sorted in
/// decreasing order, `ρ = max{j : u_j > (Σ_{i≤j} u_i − radius)/j}` and the
/// threshold is `τ = (Σ_{i≤ρ} u_i − radius)/ρ`. The sort is stable, so ties
/// keep their original order.
pub fn project_l1_ball(v: &[f64], radius: f64) -> Vec<f64> {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return v.to_vec();
    }
    let tau = l1_threshold(v, radius);
    v.iter()
        .map(|&x| x.signum() * (x.abs() - tau).max(0.0))
        .collect()
}

/// Soft threshold `τ` for projecting `v` (with `‖v‖_1 > radius`) onto the ℓ1 ball.
pub fn l1_threshold(v: &[f64], radius: f64) -> f64 {
    let mut u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let candidate = (cumsum - radius) / (j + 1) as f64;
        if uj > candidate {
            tau = candidate;
        } else {
            break;
        }
    }
    tau.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Architecture;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn scalar_net(a: f64, b: f64) -> NetworkParams {
        NetworkParams::from_layers(vec![array![[a]], array![[b]]]).unwrap()
    }

    /// Brute force: the threshold τ ∈ [0, max|v|] whose soft-threshold has
    /// ℓ1 norm closest to 1, found by bisection on the monotone map.
    fn threshold_by_bisection(v: &[f64]) -> f64 {
        let l1_at = |t: f64| v.iter().map(|x| (x.abs() - t).max(0.0)).sum::<f64>();
        let (mut lo, mut hi) = (0.0, v.iter().fold(0.0f64, |m, x| m.max(x.abs())));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if l1_at(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn values() {
        let theta = scalar_net(2.0, 3.0);
        assert_eq!(RegularizerKind::SumL1.value(&theta), 5.0);
        assert_eq!(RegularizerKind::MaxLayerL1.value(&theta), 3.0);
        let zero = NetworkParams::zeros(&Architecture::new(vec![2, 2, 1]).unwrap());
        assert_eq!(RegularizerKind::SumL1.value(&zero), 0.0);
        assert_eq!(RegularizerKind::MaxLayerL1.value(&zero), 0.0);
    }

    #[test]
    fn unit_ball_membership() {
        let zero = NetworkParams::zeros(&Architecture::new(vec![1, 1, 1]).unwrap());
        assert!(RegularizerKind::SumL1.in_unit_ball(&zero, 0.0));
        assert!(RegularizerKind::SumL1.in_unit_ball(&scalar_net(0.4, 0.6), 0.0));
        assert!(!RegularizerKind::SumL1.in_unit_ball(&scalar_net(2.0, 3.0), 0.0));
    }

    #[test]
    fn projection_hand_cases() {
        assert_eq!(project_l1_ball(&[3.0, 1.0], 1.0), vec![1.0, 0.0]);
        let p = project_l1_ball(&[0.8, -0.8], 1.0);
        assert_relative_eq!(p[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(p[1], -0.5, epsilon = 1e-15);
        assert_eq!(l1_threshold(&[3.0, 1.0], 1.0), 2.0);
        assert_relative_eq!(l1_threshold(&[0.8, -0.8], 1.0), 0.3, epsilon = 1e-15);
        assert_relative_eq!(threshold_by_bisection(&[3.0, 1.0]), 2.0, epsilon = 1e-12);
        assert_relative_eq!(threshold_by_bisection(&[0.8, -0.8]), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn projection_leaves_interior_points() {
        let theta = scalar_net(0.3, -0.2);
        assert_eq!(RegularizerKind::SumL1.project_unit_ball(&theta), theta);
        assert_eq!(RegularizerKind::MaxLayerL1.project_unit_ball(&theta), theta);
    }

    #[test]
    fn max_layer_projection_is_per_layer() {
        let theta = scalar_net(2.0, -0.5);
        let p = RegularizerKind::MaxLayerL1.project_unit_ball(&theta);
        assert_eq!(p.flat(), vec![1.0, -0.5]);
    }

    #[test]
    fn from_str_round_trip() {
        for kind in [RegularizerKind::SumL1, RegularizerKind::MaxLayerL1] {
            assert_eq!(kind.name().parse::<RegularizerKind>().unwrap(), kind);
        }
        assert!("group_l1".parse::<RegularizerKind>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn threshold_matches_bisection(v in prop::collection::vec(-5.0f64..5.0, 1..20)) {
                let l1: f64 = v.iter().map(|x| x.abs()).sum();
                prop_assume!(l1 > 1.0 + 1e-9);
                prop_assert!((l1_threshold(&v, 1.0) - threshold_by_bisection(&v)).abs() < 1e-9);
            }

            #[test]
            fn projection_is_feasible_and_idempotent(v in prop::collection::vec(-5.0f64..5.0, 1..20)) {
                let p = project_l1_ball(&v, 1.0);
                let l1: f64 = p.iter().map(|x| x.abs()).sum();
                prop_assert!(l1 <= 1.0 + 1e-12);
                let pp = project_l1_ball(&p, 1.0);
                for (a, b) in p.iter().zip(&pp) {
                    prop_assert!((a - b).abs() <= 1e-14);
                }
            }

            #[test]
            fn value_is_homogeneous(v in prop::collection::vec(-5.0f64..5.0, 6), a in 0.0f64..10.0) {
                let arch = Architecture::new(vec![2, 2, 1]).unwrap();
                let theta = NetworkParams::from_flat(&arch, &v).unwrap();
                for kind in [RegularizerKind::SumL1, RegularizerKind::MaxLayerL1] {
                    let lhs = kind.value(&theta.scaled(a));
                    let rhs = a * kind.value(&theta);
                    prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
                    prop_assert!(kind.value(&theta) >= 0.0);
                }
                prop_assert!(RegularizerKind::SumL1.value(&theta) >= RegularizerKind::MaxLayerL1.value(&theta));
                let zero = v.iter().all(|&x| x == 0.0);
                prop_assert_eq!(RegularizerKind::SumL1.value(&theta) == 0.0, zero);
            }
        }
    }
}
