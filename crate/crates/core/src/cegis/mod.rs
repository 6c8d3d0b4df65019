//! Counterexample-guided learning of neural positive-invariant certificates.
//!
//! The loop alternates a learner (fit a scalar network whose nonnegative
//! sublevel set should be a positive invariant) and a verifier (three MILP
//! checks). Verifier witnesses flow back as training data until every check
//! is infeasible or the time budget runs out.

mod learner;
mod loss;
mod run;
mod verifier;

pub use learner::{init_datasets, train_candidate};
pub use loss::{loss_total, ClsLoss};
pub use run::{eps_search, run_cegis, run_cegis_warm, EpsSearchResult, WarmStart, DEFAULT_EPS_SCHEDULE};
pub use verifier::{verify_candidate, VerifyOutcome};

use crate::encode::EncodeError;
use crate::milp::MilpError;
use crate::nn::{MlpNetwork, NnError, TrainConfig};
use serde::{Deserialize, Serialize};
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CegisError {
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("witness replay failed in {check}: residual {residual}")]
    WitnessReplay { check: &'static str, residual: f64 },
    #[error("{0}")]
    Config(String),
}

/// Labeled state samples: 1 = intended inside the invariant (initial states),
/// 0 = intended outside (unsafe states).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SpecDataset {
    pub points: Vec<(Vec<f64>, u8)>,
}

impl SpecDataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn push(&mut self, x: Vec<f64>, label: u8) {
        debug_assert!(label <= 1);
        self.points.push((x, label));
    }
}

/// Transition counterexamples `(x, x')` returned by the closedness check;
/// every pair was validated against the MILP encoding on replay.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CeDataset {
    pub pairs: Vec<(Vec<f64>, Vec<f64>)>,
}

impl CeDataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Ablation modes for dataset initialization and retraining.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CegisMode {
    /// Pre-train on the initial dataset, then a single verify pass.
    NoRetrain,
    /// Initialize the dataset from initial/unsafe samples only.
    SpecInit,
    /// Additionally label random states by Monte-Carlo reachability.
    Bootstrap,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CegisConfig {
    /// Weight of the counterexample loss term.
    pub lambda: f64,
    pub init_samples_x0: usize,
    pub init_samples_xu: usize,
    pub bootstrap_trajectories: usize,
    pub bootstrap_horizon: usize,
    /// Hidden width of the invariant network.
    pub invariant_hidden: usize,
    pub pretrain: TrainConfig,
    pub retrain: TrainConfig,
    /// Wall-clock budget for the whole loop.
    pub timeout: Duration,
    pub delta_strict: f64,
    pub mode: CegisMode,
    /// Solve verifier MILPs to optimality ("worst" counterexample) rather
    /// than stopping at the first feasible witness.
    pub worst_counterexample: bool,
    /// Per-coordinate draw cap for bootstrap rollouts.
    pub max_draws: usize,
}

impl Default for CegisConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            init_samples_x0: 256,
            init_samples_xu: 256,
            bootstrap_trajectories: 512,
            bootstrap_horizon: 50,
            invariant_hidden: 12,
            pretrain: TrainConfig {
                learning_rate: 5e-3,
                epochs: 400,
                batch_size: 64,
                ..TrainConfig::default()
            },
            retrain: TrainConfig {
                learning_rate: 2e-3,
                epochs: 150,
                batch_size: 64,
                ..TrainConfig::default()
            },
            timeout: Duration::from_secs(600),
            delta_strict: crate::encode::DELTA_STRICT,
            mode: CegisMode::Bootstrap,
            worst_counterexample: true,
            max_draws: 10_000,
        }
    }
}

/// Verifier witness kinds, in the order the checks run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Counterexample {
    /// `x` inside the candidate invariant with a successor outside.
    Transition { x: Vec<f64>, xp: Vec<f64> },
    /// Initial state scored negative.
    Init { x: Vec<f64> },
    /// Unsafe state scored nonnegative.
    Unsafe { x: Vec<f64> },
}

impl Counterexample {
    pub fn kind(&self) -> &'static str {
        match self {
            Counterexample::Transition { .. } => "transition",
            Counterexample::Init { .. } => "init",
            Counterexample::Unsafe { .. } => "unsafe",
        }
    }
}

/// One loop iteration for the run report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Which check fired (`None` on the final passing iteration).
    pub check_fired: Option<String>,
    pub witness: Option<Vec<f64>>,
    pub d_spec: usize,
    pub d_ce: usize,
    pub loss: f64,
    pub solver_ms: u128,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CegisStats {
    pub iterations: usize,
    pub counterexamples: usize,
    pub solver_ms: u128,
    pub records: Vec<IterationRecord>,
}

/// Why a run returned without a certificate. Algorithm-wise this is the
/// fallthrough return, not a proof of unsafety.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnsafeReason {
    Timeout,
    RetrainingDisabled,
}

/// Loop outcome. `Unsafe` keeps the algorithm's return-value name; it means
/// "not certified within budget", never "proven unsafe". A `Safe` outcome
/// carries the certificate and the accumulated datasets (used for
/// warm-starting larger radii and for loss audits).
#[derive(Debug, Clone)]
pub enum CegisOutcome {
    Safe {
        invariant: MlpNetwork,
        spec: SpecDataset,
        ce: CeDataset,
        stats: CegisStats,
    },
    Unsafe {
        reason: UnsafeReason,
        stats: CegisStats,
    },
}

impl CegisOutcome {
    pub fn is_safe(&self) -> bool {
        matches!(self, CegisOutcome::Safe { .. })
    }

    pub fn stats(&self) -> &CegisStats {
        match self {
            CegisOutcome::Safe { stats, .. } | CegisOutcome::Unsafe { stats, .. } => stats,
        }
    }

    pub fn reason(&self) -> Option<UnsafeReason> {
        match self {
            CegisOutcome::Safe { .. } => None,
            CegisOutcome::Unsafe { reason, .. } => Some(*reason),
        }
    }

    pub fn invariant(&self) -> Option<&MlpNetwork> {
        match self {
            CegisOutcome::Safe { invariant, .. } => Some(invariant),
            CegisOutcome::Unsafe { .. } => None,
        }
    }
}
