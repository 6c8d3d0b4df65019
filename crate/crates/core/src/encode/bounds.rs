//! Interval bound propagation through (interval-weighted) ReLU networks.
//!
//! With weight intervals `[mu - h, mu + h]` this produces per-neuron ranges
//! valid for every weight vector in the box and every input in the given
//! box — exactly what the big-M ReLU encoding needs.

use super::{BoxSet, EncodeError};
use crate::bnn::BnnPolicy;
use crate::nn::MlpNetwork;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, EncodeError> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(EncodeError::BadInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn add(self, other: Interval) -> Interval {
        Interval {
            lo: self.lo + other.lo,
            hi: self.hi + other.hi,
        }
    }

    /// Product of two intervals via the four corner products.
    pub fn mul(self, other: Interval) -> Interval {
        let c = [
            self.lo * other.lo,
            self.lo * other.hi,
            self.hi * other.lo,
            self.hi * other.hi,
        ];
        Interval {
            lo: c.iter().cloned().fold(f64::INFINITY, f64::min),
            hi: c.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn relu(self) -> Interval {
        Interval {
            lo: self.lo.max(0.0),
            hi: self.hi.max(0.0),
        }
    }
}

/// One layer with interval-valued weights and biases.
#[derive(Debug, Clone)]
pub struct IntervalLayer {
    /// rows x cols weight intervals, row-major.
    pub w: Vec<Vec<Interval>>,
    pub b: Vec<Interval>,
}

impl IntervalLayer {
    pub fn out_dim(&self) -> usize {
        self.b.len()
    }

    pub fn in_dim(&self) -> usize {
        self.w.first().map(|r| r.len()).unwrap_or(0)
    }
}

/// Point-interval layers of a deterministic network.
pub fn interval_layers_of_net(net: &MlpNetwork) -> Vec<IntervalLayer> {
    net.layers()
        .iter()
        .map(|l| IntervalLayer {
            w: (0..l.weight.rows())
                .map(|r| {
                    (0..l.weight.cols())
                        .map(|c| Interval::point(l.weight.get(r, c)))
                        .collect()
                })
                .collect(),
            b: l.bias.iter().map(|&v| Interval::point(v)).collect(),
        })
        .collect()
}

/// Weight intervals `[mu - eps*sigma, mu + eps*sigma]` of a BNN policy.
pub fn interval_layers_of_policy(policy: &BnnPolicy, eps_scale: f64) -> Vec<IntervalLayer> {
    policy
        .layers()
        .iter()
        .map(|l| IntervalLayer {
            w: (0..l.weight_mean.rows())
                .map(|r| {
                    (0..l.weight_mean.cols())
                        .map(|c| {
                            let mu = l.weight_mean.get(r, c);
                            let h = eps_scale * l.weight_std.get(r, c);
                            Interval {
                                lo: mu - h,
                                hi: mu + h,
                            }
                        })
                        .collect()
                })
                .collect(),
            b: l
                .bias_mean
                .iter()
                .zip(&l.bias_std)
                .map(|(mu, s)| {
                    let h = eps_scale * s;
                    Interval {
                        lo: mu - h,
                        hi: mu + h,
                    }
                })
                .collect(),
        })
        .collect()
}

/// Per-neuron ranges for every preactivation and post-ReLU value, valid over
/// the whole input box and weight box.
#[derive(Debug, Clone)]
pub struct ActivationBounds {
    pub input: Vec<Interval>,
    /// Preactivation intervals per layer; the last entry is the network
    /// output (affine head, no ReLU).
    pub pre: Vec<Vec<Interval>>,
    /// Post-ReLU intervals for the hidden layers (`pre.len() - 1` entries).
    pub post: Vec<Vec<Interval>>,
}

impl ActivationBounds {
    pub fn output(&self) -> &[Interval] {
        self.pre.last().expect("at least one layer")
    }
}

/// Interval forward pass: interval-matrix times interval-vector products,
/// layer by layer, ReLU clamping between hidden layers.
pub fn propagate_bounds(layers: &[IntervalLayer], input: &BoxSet) -> ActivationBounds {
    assert!(!layers.is_empty(), "no layers to propagate through");
    assert_eq!(
        layers[0].in_dim(),
        input.dim(),
        "input box dim does not match first layer"
    );
    let input_iv: Vec<Interval> = input
        .lower()
        .iter()
        .zip(input.upper())
        .map(|(lo, hi)| Interval { lo: *lo, hi: *hi })
        .collect();

    let mut pre = Vec::with_capacity(layers.len());
    let mut post = Vec::with_capacity(layers.len().saturating_sub(1));
    let mut act = input_iv.clone();
    let last = layers.len() - 1;
    for (k, layer) in layers.iter().enumerate() {
        let mut z = Vec::with_capacity(layer.out_dim());
        for (row, bias) in layer.w.iter().zip(&layer.b) {
            let mut acc = *bias;
            for (w, x) in row.iter().zip(&act) {
                acc = acc.add(w.mul(*x));
            }
            z.push(acc);
        }
        if k < last {
            let a: Vec<Interval> = z.iter().map(|iv| iv.relu()).collect();
            post.push(a.clone());
            act = a;
        }
        pre.push(z);
    }
    ActivationBounds {
        input: input_iv,
        pre,
        post,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{DenseMatrix, Layer};

    #[test]
    fn point_input_zero_eps_collapses_to_forward() {
        let net = MlpNetwork::random(&[2, 4, 1], 3).unwrap();
        let x = vec![0.3, -0.8];
        let input = BoxSet::new(x.clone(), x.clone()).unwrap();
        let b = propagate_bounds(&interval_layers_of_net(&net), &input);
        let y = net.forward(&x).unwrap();
        let out = b.output();
        assert!((out[0].lo - y[0]).abs() < 1e-12);
        assert!((out[0].hi - y[0]).abs() < 1e-12);
    }

    #[test]
    fn interval_weight_times_interval_input() {
        // w in [1,2] (mu=1.5, sigma=0.5, eps=1), input in [-1,3]:
        // preactivation [-2, 6], post-ReLU [0, 6].
        let layer = IntervalLayer {
            w: vec![vec![Interval { lo: 1.0, hi: 2.0 }]],
            b: vec![Interval::point(0.0)],
        };
        let out_layer = IntervalLayer {
            w: vec![vec![Interval::point(1.0)]],
            b: vec![Interval::point(0.0)],
        };
        let input = BoxSet::new(vec![-1.0], vec![3.0]).unwrap();
        let b = propagate_bounds(&[layer, out_layer], &input);
        assert_eq!(b.pre[0][0], Interval { lo: -2.0, hi: 6.0 });
        assert_eq!(b.post[0][0], Interval { lo: 0.0, hi: 6.0 });
    }

    #[test]
    fn monotone_in_input_box() {
        let net = MlpNetwork::random(&[2, 6, 2], 9).unwrap();
        let layers = interval_layers_of_net(&net);
        let small = BoxSet::new(vec![-0.5, -0.5], vec![0.5, 0.5]).unwrap();
        let large = BoxSet::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let bs = propagate_bounds(&layers, &small);
        let bl = propagate_bounds(&layers, &large);
        for (ps, pl) in bs.pre.iter().zip(&bl.pre) {
            for (s, l) in ps.iter().zip(pl) {
                assert!(l.lo <= s.lo + 1e-12);
                assert!(l.hi >= s.hi - 1e-12);
            }
        }
    }

    #[test]
    fn policy_intervals_track_eps() {
        let w = DenseMatrix::new(1, 1, vec![1.0]).unwrap();
        let net = MlpNetwork::new(vec![Layer::new(w, vec![0.0]).unwrap()]).unwrap();
        let _ = net;
        let policy = crate::fixtures::affine_policy_1d(1.0, 0.0, 0.1);
        let layers = interval_layers_of_policy(&policy, 2.0);
        assert!((layers[0].w[0][0].lo - 0.8).abs() < 1e-12);
        assert!((layers[0].w[0][0].hi - 1.2).abs() < 1e-12);
    }
}
