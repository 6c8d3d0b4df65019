//! Safety certification for Bayesian neural network (BNN) control policies.
//!
//! The toolkit answers two questions about a closed-loop system driven by a
//! BNN policy with Gaussian weight posteriors:
//!
//! 1. Given an interval weight set around the posterior means, can any network
//!    drawn from that set map an input region into an unsafe output region?
//!    ([`encode::build_phi`] reduces this to mixed-integer linear feasibility.)
//! 2. Is every trajectory of the closed-loop system safe over an infinite time
//!    horizon when weights are restricted to the set? ([`cegis`] learns a
//!    neural positive-invariant certificate in a counterexample-guided loop.)
//!
//! Certified weight boxes then drive rejection-sampled execution
//! ([`env::rollout`]) and safe-exploration policy improvement ([`serl`]).

pub mod bnn;
pub mod cegis;
pub mod encode;
pub mod env;
pub mod fixtures;
pub mod milp;
pub mod nn;
pub mod serl;

pub use bnn::{BnnPolicy, WeightBox, WeightSample};
pub use milp::{LinExpr, MilpProblem, MilpSolution, MilpVerdict, Relation, Sense, VarId};
pub use nn::{DenseMatrix, MlpNetwork, TrainConfig};
