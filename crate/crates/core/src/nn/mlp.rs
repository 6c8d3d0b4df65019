//! ReLU multi-layer perceptron with an affine output head.
//!
//! Hidden layers apply `ReLU(Wx + b)`; the last layer is affine so outputs can
//! take negative values (continuous actions, invariant scores). The ReLU
//! subgradient at exactly 0 is taken as 0 throughout.

use super::{DenseMatrix, NnError};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One dense layer: weight matrix plus bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn new(weight: DenseMatrix, bias: Vec<f64>) -> Result<Self, NnError> {
        if bias.len() != weight.rows() {
            return Err(NnError::DataLength {
                rows: weight.rows(),
                cols: 1,
                got: bias.len(),
            });
        }
        if let Some(index) = bias.iter().position(|v| !v.is_finite()) {
            return Err(NnError::NonFinite { index });
        }
        Ok(Self { weight, bias })
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }
}

/// Deterministic ReLU MLP. Immutable after construction; cheap to clone.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    layers: Vec<Layer>,
}

/// Activations recorded by [`MlpNetwork::forward_trace`], consumed by
/// [`MlpNetwork::backprop`].
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    /// Pre-activation `z_k = W_k a_{k-1} + b_k` per layer.
    pub preacts: Vec<Vec<f64>>,
    /// Post-activation per layer (ReLU for hidden, identity for the last).
    pub acts: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("trace has at least one layer")
    }
}

impl MlpNetwork {
    pub fn new(layers: Vec<Layer>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::NoLayers);
        }
        for k in 1..layers.len() {
            let expected = layers[k - 1].out_dim();
            let got = layers[k].in_dim();
            if got != expected {
                return Err(NnError::LayerChain {
                    layer: k,
                    expected,
                    got,
                });
            }
        }
        Ok(Self { layers })
    }

    /// All-zero network with the given layer dimensions, e.g. `[2, 16, 1]`.
    pub fn zeros(dims: &[usize]) -> Result<Self, NnError> {
        if dims.len() < 2 {
            return Err(NnError::NoLayers);
        }
        let layers = dims
            .windows(2)
            .map(|w| Layer {
                weight: DenseMatrix::zeros(w[1], w[0]),
                bias: vec![0.0; w[1]],
            })
            .collect();
        Self::new(layers)
    }

    /// Glorot-uniform initialization, deterministic in `seed`.
    pub fn random(dims: &[usize], seed: u64) -> Result<Self, NnError> {
        if dims.len() < 2 {
            return Err(NnError::NoLayers);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0] as f64, w[1] as f64);
                let limit = (6.0 / (fan_in + fan_out)).sqrt();
                Layer {
                    weight: DenseMatrix::from_fn(w[1], w[0], |_, _| {
                        rng.gen_range(-limit..=limit)
                    }),
                    bias: vec![0.0; w[1]],
                }
            })
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    /// Total number of parameters (weights plus biases over all layers).
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.data().len() + l.bias.len())
            .sum()
    }

    /// Evaluates the network. Hidden layers are `ReLU(Wx+b)`, the last layer
    /// is affine.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        let mut trace = self.forward_trace(input)?;
        Ok(trace.acts.pop().expect("network has layers"))
    }

    /// Forward pass retaining all intermediate activations.
    pub fn forward_trace(&self, input: &[f64]) -> Result<ForwardTrace, NnError> {
        if input.len() != self.input_dim() {
            return Err(NnError::DimensionMismatch {
                layer: 0,
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let last = self.layers.len() - 1;
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut acts = Vec::with_capacity(self.layers.len());
        let mut x = input.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = layer.weight.matvec(&x);
            for (zi, bi) in z.iter_mut().zip(&layer.bias) {
                *zi += bi;
            }
            let a: Vec<f64> = if k == last {
                z.clone()
            } else {
                z.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect()
            };
            preacts.push(z);
            acts.push(a.clone());
            x = a;
        }
        Ok(ForwardTrace {
            input: input.to_vec(),
            preacts,
            acts,
        })
    }

    /// Reverse-mode accumulation from an output cotangent down to a flat
    /// parameter gradient (canonical flattening order). Returns the gradient
    /// and, as a byproduct, dL/d(input).
    pub fn backprop(&self, trace: &ForwardTrace, d_output: &[f64]) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(d_output.len(), self.output_dim(), "cotangent dim mismatch");
        let mut grad = vec![0.0; self.param_count()];
        let last = self.layers.len() - 1;
        // Offsets of each layer's parameter block in the flat vector.
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0usize;
        for l in &self.layers {
            offsets.push(off);
            off += l.weight.data().len() + l.bias.len();
        }

        let mut d_act = d_output.to_vec();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let z = &trace.preacts[k];
            // dL/dz: identity head on the last layer, ReLU mask elsewhere.
            let d_z: Vec<f64> = if k == last {
                d_act.clone()
            } else {
                d_act
                    .iter()
                    .zip(z)
                    .map(|(&d, &zi)| if zi > 0.0 { d } else { 0.0 })
                    .collect()
            };
            let prev_act: &[f64] = if k == 0 {
                &trace.input
            } else {
                &trace.acts[k - 1]
            };
            let (rows, cols) = (layer.weight.rows(), layer.weight.cols());
            let base = offsets[k];
            for r in 0..rows {
                let dz = d_z[r];
                if dz != 0.0 {
                    for c in 0..cols {
                        grad[base + r * cols + c] += dz * prev_act[c];
                    }
                }
                grad[base + rows * cols + r] += dz;
            }
            // Propagate to the previous layer: d_prev = W^T d_z.
            let mut d_prev = vec![0.0; cols];
            for r in 0..rows {
                let dz = d_z[r];
                if dz != 0.0 {
                    for c in 0..cols {
                        d_prev[c] += layer.weight.get(r, c) * dz;
                    }
                }
            }
            d_act = d_prev;
        }
        (grad, d_act)
    }

    /// Canonical flattening: layer-major, weights row-major, then bias.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weight.data());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    /// Inverse of [`params_flat`](Self::params_flat).
    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<(), NnError> {
        if params.len() != self.param_count() {
            return Err(NnError::ParamLength {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        if let Some(index) = params.iter().position(|v| !v.is_finite()) {
            return Err(NnError::NonFinite { index });
        }
        let mut off = 0usize;
        for l in &mut self.layers {
            let (rows, cols) = (l.weight.rows(), l.weight.cols());
            let wlen = rows * cols;
            l.weight =
                DenseMatrix::new(rows, cols, params[off..off + wlen].to_vec()).expect("validated");
            off += wlen;
            l.bias.copy_from_slice(&params[off..off + rows]);
            off += rows;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&NetworkFile::from(self)).expect("network serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, NnError> {
        let file: NetworkFile =
            serde_json::from_str(s).map_err(|e| NnError::InvalidConfig(e.to_string()))?;
        file.try_into()
    }
}

/// On-disk schema: `{"layers":[{"rows":R,"cols":C,"weights":[...],"bias":[...]}]}`
/// with weights in row-major order. serde_json emits shortest round-trip
/// decimals, so finite doubles survive a save/load cycle bit-exactly.
#[derive(Serialize, Deserialize)]
struct NetworkFile {
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl From<&MlpNetwork> for NetworkFile {
    fn from(net: &MlpNetwork) -> Self {
        NetworkFile {
            layers: net
                .layers
                .iter()
                .map(|l| LayerFile {
                    rows: l.weight.rows(),
                    cols: l.weight.cols(),
                    weights: l.weight.data().to_vec(),
                    bias: l.bias.clone(),
                })
                .collect(),
        }
    }
}

impl TryFrom<NetworkFile> for MlpNetwork {
    type Error = NnError;

    fn try_from(file: NetworkFile) -> Result<Self, NnError> {
        let layers = file
            .layers
            .into_iter()
            .map(|l| Layer::new(DenseMatrix::new(l.rows, l.cols, l.weights)?, l.bias))
            .collect::<Result<Vec<_>, _>>()?;
        MlpNetwork::new(layers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net_1_1_1(w0: f64, b0: f64, w1: f64, b1: f64) -> MlpNetwork {
        MlpNetwork::new(vec![
            Layer::new(DenseMatrix::new(1, 1, vec![w0]).unwrap(), vec![b0]).unwrap(),
            Layer::new(DenseMatrix::new(1, 1, vec![w1]).unwrap(), vec![b1]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn zero_network_maps_to_zero() {
        let net = MlpNetwork::zeros(&[3, 4, 2]).unwrap();
        assert_eq!(net.forward(&[1.5, -2.0, 7.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn relu_kills_negative_hidden() {
        let net = net_1_1_1(1.0, 0.0, 1.0, 0.0);
        assert_eq!(net.forward(&[-2.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn seeded_2_2_1_matches_hand_evaluation() {
        let net = MlpNetwork::random(&[2, 2, 1], 0).unwrap();
        let input = [0.3, -0.7];
        // Independent layer-by-layer evaluation with explicit loops.
        let l0 = &net.layers()[0];
        let mut h = [0.0f64; 2];
        for r in 0..2 {
            let mut z = l0.bias[r];
            for c in 0..2 {
                z += l0.weight.get(r, c) * input[c];
            }
            h[r] = z.max(0.0);
        }
        let l1 = &net.layers()[1];
        let mut expected = l1.bias[0];
        for c in 0..2 {
            expected += l1.weight.get(0, c) * h[c];
        }
        let got = net.forward(&input).unwrap()[0];
        assert!((got - expected).abs() < 1e-15, "{got} vs {expected}");
    }

    #[test]
    fn dimension_mismatch_names_layer() {
        let net = MlpNetwork::zeros(&[2, 2]).unwrap();
        let err = net.forward(&[1.0]).unwrap_err();
        assert_eq!(
            err,
            NnError::DimensionMismatch {
                layer: 0,
                expected: 2,
                got: 1
            }
        );
    }

    #[test]
    fn positive_homogeneity_with_zero_biases() {
        let mut net = MlpNetwork::random(&[3, 5, 2], 7).unwrap();
        let mut params = net.params_flat();
        // Zero out every bias entry.
        let mut off = 0;
        for l in net.layers() {
            let wlen = l.weight.data().len();
            for p in params[off + wlen..off + wlen + l.bias.len()].iter_mut() {
                *p = 0.0;
            }
            off += wlen + l.bias.len();
        }
        net.set_params_flat(&params).unwrap();
        let x = [0.4, -1.1, 0.9];
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let y1 = net.forward(&x).unwrap();
        let y2 = net.forward(&x2).unwrap();
        for (a, b) in y1.iter().zip(&y2) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_round_trip() {
        let net = MlpNetwork::random(&[2, 4, 3], 11).unwrap();
        let p = net.params_flat();
        let mut copy = MlpNetwork::zeros(&[2, 4, 3]).unwrap();
        copy.set_params_flat(&p).unwrap();
        assert_eq!(copy, net);
    }

    #[test]
    fn json_round_trip_bit_exact() {
        let net = MlpNetwork::random(&[3, 8, 2], 42).unwrap();
        let back = MlpNetwork::from_json(&net.to_json()).unwrap();
        assert_eq!(back.params_flat(), net.params_flat());
    }
}

