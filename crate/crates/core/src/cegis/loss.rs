//! The certificate training loss: classification on labeled states plus a
//! product-form counterexample penalty.
//!
//! Total loss over datasets `D_spec` and `D_ce`:
//!
//! ```text
//! (1/|D_spec|) sum L_cls(g(x), y)
//!   + lambda * (1/|D_ce|) sum 1[g(x) > 0] 1[g(x') < 0] L_cls(g(x), 0) L_cls(g(x'), 1)
//! ```
//!
//! The counterexample term punishes exactly the pairs that break closedness:
//! it is zero unless the pair currently straddles the decision boundary the
//! wrong way. The empty-`D_ce` mean is defined as 0.

use super::{CeDataset, SpecDataset};
use crate::nn::{sigmoid, softplus, MlpNetwork};
use serde::{Deserialize, Serialize};

/// Binary classification loss selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClsLoss {
    /// `1[1[z >= 0] != y]`.
    ZeroOne,
    /// `z - z*y + log(1 + exp(-z))`, the differentiable surrogate.
    Logistic,
}

impl ClsLoss {
    pub fn eval(&self, z: f64, y: f64) -> f64 {
        match self {
            ClsLoss::ZeroOne => {
                let predicted_one = z >= 0.0;
                let is_one = y >= 0.5;
                if predicted_one != is_one {
                    1.0
                } else {
                    0.0
                }
            }
            ClsLoss::Logistic => z - z * y + softplus(-z),
        }
    }

    /// dL/dz (zero for the 0/1 loss, which is piecewise constant).
    pub fn grad(&self, z: f64, y: f64) -> f64 {
        match self {
            ClsLoss::ZeroOne => 0.0,
            ClsLoss::Logistic => sigmoid(z) - y,
        }
    }
}

/// Counterexample loss on a scored pair.
pub fn ce_loss(cls: ClsLoss, z: f64, zp: f64) -> f64 {
    if z > 0.0 && zp < 0.0 {
        cls.eval(z, 0.0) * cls.eval(zp, 1.0)
    } else {
        0.0
    }
}

/// Full training objective of a candidate network over both datasets.
pub fn loss_total(
    g: &MlpNetwork,
    spec: &SpecDataset,
    ce: &CeDataset,
    lambda: f64,
    cls: ClsLoss,
) -> f64 {
    let mut total = 0.0;
    if !spec.is_empty() {
        let mut s = 0.0;
        for (x, y) in &spec.points {
            let z = g.forward(x).expect("dims")[0];
            s += cls.eval(z, *y as f64);
        }
        total += s / spec.len() as f64;
    }
    if !ce.is_empty() {
        let mut s = 0.0;
        for (x, xp) in &ce.pairs {
            let z = g.forward(x).expect("dims")[0];
            let zp = g.forward(xp).expect("dims")[0];
            s += ce_loss(cls, z, zp);
        }
        total += lambda * s / ce.len() as f64;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::hand_invariant_1d;

    #[test]
    fn empty_ce_single_spec_point_correct_side() {
        // One spec point (x, 1) with g(x) = +5 under the 0/1 loss: total 0.
        let g = hand_invariant_1d(5.0); // g(0) = 5
        let mut spec = SpecDataset::default();
        spec.push(vec![0.0], 1);
        let l = loss_total(&g, &spec, &CeDataset::default(), 1.0, ClsLoss::ZeroOne);
        assert_eq!(l, 0.0);
    }

    #[test]
    fn violated_pair_contributes_product_term() {
        // g(x) = +1, g(x') = -1 with 0/1 loss and lambda = 1: the pair term
        // is 1*1*1*1 = 1.
        let g = hand_invariant_1d(1.0); // g(0) = 1, g(2) = -1
        let mut spec = SpecDataset::default();
        spec.push(vec![0.0], 1); // correct, contributes 0
        let ce = CeDataset {
            pairs: vec![(vec![0.0], vec![2.0])],
        };
        let l = loss_total(&g, &spec, &ce, 1.0, ClsLoss::ZeroOne);
        assert_eq!(l, 1.0);
    }

    #[test]
    fn valid_invariant_has_zero_loss() {
        // Points labeled consistently with a valid invariant: zero 0/1 loss,
        // and no ce pair can straddle the boundary.
        let g = hand_invariant_1d(0.95);
        let mut spec = SpecDataset::default();
        for x in [-0.1, 0.0, 0.1] {
            spec.push(vec![x], 1);
        }
        for x in [-1.4, 1.0, 1.2] {
            spec.push(vec![x], 0);
        }
        let ce = CeDataset {
            pairs: vec![(vec![0.5], vec![0.25]), (vec![0.9], vec![0.45])],
        };
        let l = loss_total(&g, &spec, &ce, 1.0, ClsLoss::ZeroOne);
        assert_eq!(l, 0.0);
    }

    #[test]
    fn loss_is_nonnegative() {
        let g = MlpNetwork::random(&[1, 4, 1], 3).unwrap();
        let mut spec = SpecDataset::default();
        let mut ce = CeDataset::default();
        for i in 0..20 {
            let x = -1.0 + 0.1 * i as f64;
            spec.push(vec![x], (i % 2) as u8);
            ce.pairs.push((vec![x], vec![x + 0.05]));
        }
        for cls in [ClsLoss::ZeroOne, ClsLoss::Logistic] {
            assert!(loss_total(&g, &spec, &ce, 1.0, cls) >= 0.0);
        }
    }

    #[test]
    fn logistic_matches_formula() {
        let z = 0.7;
        assert!((ClsLoss::Logistic.eval(z, 1.0) - (-z).exp().ln_1p()).abs() < 1e-12);
        assert!((ClsLoss::Logistic.eval(z, 0.0) - (z + (-z).exp().ln_1p())).abs() < 1e-12);
    }
}
