//! Gaussian-posterior BNN policies: weight boxes, sampling and
//! concrete-network instantiation.
//!
//! A policy stores per-parameter posterior means and standard deviations for
//! a ReLU MLP. The interval weight set around the means has per-parameter
//! half-width `eps_scale * sigma_i`, so a value like `2.0` reads as "two
//! standard deviations". Parameters of non-Bayesian layers carry sigma = 0 and
//! produce degenerate intervals.
//!
//! Canonical flattening order everywhere: layer-major, weights row-major,
//! then bias. [`BnnPolicy::instantiate`] and [`MlpNetwork::params_flat`] are
//! mutually inverse under this order.

use crate::nn::{DenseMatrix, Layer, MlpNetwork, NnError};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BnnError {
    #[error("layer {layer}: {what}")]
    Shape { layer: usize, what: String },
    #[error("negative stddev at layer {layer}")]
    NegativeStd { layer: usize },
    #[error("non-Bayesian layer {layer} has nonzero stddev")]
    NonBayesianStd { layer: usize },
    #[error("eps_scale must be finite and >= 0, got {0}")]
    BadEps(f64),
    #[error("parameter vector length {got}, expected {expected}")]
    ParamLength { expected: usize, got: usize },
    #[error("truncated sampling exhausted {draws} draws on parameter {index}")]
    SamplingExhausted { index: usize, draws: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("policy file: {0}")]
    File(String),
}

/// One layer of Gaussian weight posteriors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnnLayer {
    pub weight_mean: DenseMatrix,
    pub weight_std: DenseMatrix,
    pub bias_mean: Vec<f64>,
    pub bias_std: Vec<f64>,
    pub bayesian: bool,
}

/// Gaussian-posterior BNN policy for a ReLU MLP with affine output head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnnPolicy {
    layers: Vec<BnnLayer>,
}

/// Interval weight set: elementwise `[mean - hw, mean + hw]` in canonical
/// flattening order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub half_width: Vec<f64>,
}

impl WeightBox {
    pub fn contains(&self, params: &[f64]) -> bool {
        params.len() == self.lower.len()
            && params
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(p, (lo, hi))| *p >= *lo && *p <= *hi)
    }
}

/// Outcome of whole-vector rejection sampling.
#[derive(Debug, Clone)]
pub struct WeightSample {
    pub params: Vec<f64>,
    pub accepted: bool,
    pub draws_used: usize,
}

impl BnnPolicy {
    pub fn new(layers: Vec<BnnLayer>) -> Result<Self, BnnError> {
        if layers.is_empty() {
            return Err(BnnError::Shape {
                layer: 0,
                what: "policy has no layers".into(),
            });
        }
        for (k, l) in layers.iter().enumerate() {
            let rows = l.weight_mean.rows();
            let cols = l.weight_mean.cols();
            if l.weight_std.rows() != rows || l.weight_std.cols() != cols {
                return Err(BnnError::Shape {
                    layer: k,
                    what: "weight_std shape differs from weight_mean".into(),
                });
            }
            if l.bias_mean.len() != rows || l.bias_std.len() != rows {
                return Err(BnnError::Shape {
                    layer: k,
                    what: "bias length differs from weight rows".into(),
                });
            }
            let stds = l.weight_std.data().iter().chain(l.bias_std.iter());
            for s in stds.clone() {
                if *s < 0.0 || !s.is_finite() {
                    return Err(BnnError::NegativeStd { layer: k });
                }
            }
            if !l.bayesian && stds.clone().any(|s| *s != 0.0) {
                return Err(BnnError::NonBayesianStd { layer: k });
            }
            if k > 0 && cols != layers[k - 1].weight_mean.rows() {
                return Err(BnnError::Shape {
                    layer: k,
                    what: "input dim does not chain with previous layer".into(),
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[BnnLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight_mean.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weight_mean.rows()
    }

    /// Total weight count p.
    pub fn weight_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight_mean.data().len()).sum()
    }

    /// Total bias count q.
    pub fn bias_count(&self) -> usize {
        self.layers.iter().map(|l| l.bias_mean.len()).sum()
    }

    /// p + q.
    pub fn param_count(&self) -> usize {
        self.weight_count() + self.bias_count()
    }

    /// Posterior means in canonical flattening order.
    pub fn mean_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weight_mean.data());
            out.extend_from_slice(&l.bias_mean);
        }
        out
    }

    /// Posterior stddevs in canonical flattening order.
    pub fn std_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weight_std.data());
            out.extend_from_slice(&l.bias_std);
        }
        out
    }

    /// Interval weight set with per-parameter half-width
    /// `eps_scale * sigma_i`. Parameters with sigma = 0 get degenerate
    /// intervals pinned at their mean.
    pub fn weight_box(&self, eps_scale: f64) -> Result<WeightBox, BnnError> {
        if !eps_scale.is_finite() || eps_scale < 0.0 {
            return Err(BnnError::BadEps(eps_scale));
        }
        let mu = self.mean_params();
        let sigma = self.std_params();
        let half_width: Vec<f64> = sigma.iter().map(|s| eps_scale * s).collect();
        let lower = mu.iter().zip(&half_width).map(|(m, h)| m - h).collect();
        let upper = mu.iter().zip(&half_width).map(|(m, h)| m + h).collect();
        Ok(WeightBox {
            lower,
            upper,
            half_width,
        })
    }

    /// One posterior draw: each parameter independently Normal(mu, sigma);
    /// sigma = 0 parameters return mu exactly.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.mean_params()
            .iter()
            .zip(self.std_params())
            .map(|(mu, sigma)| {
                if sigma == 0.0 {
                    *mu
                } else {
                    let z: f64 = rng.sample(StandardNormal);
                    mu + sigma * z
                }
            })
            .collect()
    }

    /// Whole-vector rejection sampling: redraws the full parameter vector
    /// until it lies elementwise inside `bx` or `max_draws` is exhausted
    /// (`accepted = false`; the last draw is returned for diagnostics).
    pub fn rejection_sample<R: Rng + ?Sized>(
        &self,
        bx: &WeightBox,
        rng: &mut R,
        max_draws: usize,
    ) -> WeightSample {
        assert!(max_draws >= 1, "max_draws must be >= 1");
        let mut params = Vec::new();
        for draw in 1..=max_draws {
            params = self.sample(rng);
            if bx.contains(&params) {
                return WeightSample {
                    params,
                    accepted: true,
                    draws_used: draw,
                };
            }
        }
        WeightSample {
            params,
            accepted: false,
            draws_used: max_draws,
        }
    }

    /// Draws from the posterior conditioned on the box, one coordinate at a
    /// time. For independent Gaussian coordinates this yields exactly the
    /// same distribution as whole-vector rejection, at per-coordinate instead
    /// of exponential-in-dimension cost; zero-width intervals return the mean
    /// point mass. Used by rollout simulation where whole-vector acceptance
    /// rates are impractically small.
    pub fn sample_in_box<R: Rng + ?Sized>(
        &self,
        bx: &WeightBox,
        rng: &mut R,
        max_draws_per_coord: usize,
    ) -> Result<Vec<f64>, BnnError> {
        let mu = self.mean_params();
        let sigma = self.std_params();
        let mut out = Vec::with_capacity(mu.len());
        for i in 0..mu.len() {
            if sigma[i] == 0.0 || bx.half_width[i] == 0.0 {
                out.push(mu[i]);
                continue;
            }
            let mut accepted = None;
            for _ in 0..max_draws_per_coord {
                let z: f64 = rng.sample(StandardNormal);
                let v = mu[i] + sigma[i] * z;
                if v >= bx.lower[i] && v <= bx.upper[i] {
                    accepted = Some(v);
                    break;
                }
            }
            match accepted {
                Some(v) => out.push(v),
                None => {
                    return Err(BnnError::SamplingExhausted {
                        index: i,
                        draws: max_draws_per_coord,
                    })
                }
            }
        }
        Ok(out)
    }

    /// Builds the deterministic network for a concrete flat parameter vector.
    pub fn instantiate(&self, params: &[f64]) -> Result<MlpNetwork, BnnError> {
        if params.len() != self.param_count() {
            return Err(BnnError::ParamLength {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut off = 0usize;
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let (rows, cols) = (l.weight_mean.rows(), l.weight_mean.cols());
            let wlen = rows * cols;
            let weight = DenseMatrix::new(rows, cols, params[off..off + wlen].to_vec())?;
            off += wlen;
            let bias = params[off..off + rows].to_vec();
            off += rows;
            layers.push(Layer::new(weight, bias)?);
        }
        Ok(MlpNetwork::new(layers)?)
    }

    /// The deterministic network at the posterior means.
    pub fn mean_network(&self) -> MlpNetwork {
        self.instantiate(&self.mean_params())
            .expect("means instantiate by construction")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&PolicyFile {
            layers: self.layers.clone(),
        })
        .expect("policy serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, BnnError> {
        let file: PolicyFile =
            serde_json::from_str(s).map_err(|e| BnnError::File(e.to_string()))?;
        for (k, l) in file.layers.iter().enumerate() {
            l.weight_mean
                .validate()
                .map_err(|e| BnnError::File(format!("layer {k} weight_mean: {e}")))?;
            l.weight_std
                .validate()
                .map_err(|e| BnnError::File(format!("layer {k} weight_std: {e}")))?;
        }
        Self::new(file.layers)
    }
}

/// Policy file schema: same matrix layout as the network serialization.
#[derive(Serialize, Deserialize)]
struct PolicyFile {
    layers: Vec<BnnLayer>,
}
