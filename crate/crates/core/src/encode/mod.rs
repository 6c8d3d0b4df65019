//! Translation of networks, weight boxes, dynamics and set memberships into
//! mixed-integer linear programs.
//!
//! The three layers of machinery, bottom up:
//!
//! - interval bound propagation ([`propagate_bounds`]) supplies valid
//!   per-neuron ranges, which become the big-M constants — never hard-coded;
//! - ReLU gadgets and exact network encodings ([`encode_relu`],
//!   [`encode_deterministic_net`], [`encode_bnn_interval`]);
//! - whole verification queries: the input/output reachability system
//!   ([`build_phi`]) and the three positive-invariant checks
//!   ([`build_check1`], [`build_check2`], [`build_check3`]).

mod bounds;
mod checks;
mod net;
mod phi;
mod relu;
mod sets;

pub use bounds::{
    interval_layers_of_net, interval_layers_of_policy, propagate_bounds, ActivationBounds,
    Interval, IntervalLayer,
};
pub use checks::{build_check1, build_check2, build_check3, CheckProblem};
pub use net::{encode_bnn_interval, encode_deterministic_net, encode_net_over_box, encode_policy_over_box, NetVars};
pub use phi::{build_phi, InputSet, PhiProblem};
pub use relu::{encode_clip, encode_relu, ReluGadget};
pub(crate) use relu::relu_output;
pub use sets::{BoxSet, DisjunctiveSet, LinearIneq, PolyhedronSet};

use thiserror::Error;

/// Slack added to interval bounds when they become variable bounds or big-M
/// constants, absorbing the few ULPs of float error in the propagation
/// itself.
pub(crate) const BOUND_PAD: f64 = 1e-9;

/// Margin that stands in for strict inequalities (`g(x) < 0` becomes
/// `g(x) <= -DELTA_STRICT`). Makes the verifier infinitesimally conservative.
pub const DELTA_STRICT: f64 = 1e-6;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EncodeError {
    #[error("box bounds must be finite with lower <= upper (dim {0})")]
    BadBox(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("interval is invalid: [{lo}, {hi}]")]
    BadInterval { lo: f64, hi: f64 },
    #[error("empty disjunction")]
    EmptyDisjunction,
    #[error("angle window [{lo}, {hi}] does not fit a single linear-piece window after shifting")]
    AngleWindow { lo: f64, hi: f64 },
    #[error("non-finite coefficient in linear inequality")]
    NonFinite,
}
