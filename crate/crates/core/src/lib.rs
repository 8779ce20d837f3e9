//! Regularisation-free Gaussian graphical model inference by sequential
//! graph growth.
//!
//! The loss `f_S(Q) = trace(SQ) - log det Q` is minimised over precision
//! matrices supported on a growing edge set. Each growth step activates the
//! free edge preferred by a selection rule and re-optimises over the enlarged
//! support with exact one- and two-index block updates.
//!
//! ```
//! use graphgrow_core::{grow, SelectionRule, StoppingConfig, SymMatrix};
//!
//! let s = SymMatrix::from_rows(&[
//!     vec![1.0, 0.5, 0.0],
//!     vec![0.5, 1.0, 0.1],
//!     vec![0.0, 0.1, 1.0],
//! ])
//! .unwrap();
//! let trace = grow(&s, SelectionRule::Gsl, &StoppingConfig::default(), 2).unwrap();
//! assert_eq!(trace.steps[0].edge, (0, 1));
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod block_update;
pub mod descent;
pub mod error;
pub mod evaluation;
pub mod growth;
pub mod io;
pub mod matrix;
pub mod rng;
pub mod selection;
pub mod spd;
pub mod support;
pub mod synthetic;

pub use block_update::{update_block, update_order1, update_order2, Block, BlockUpdateResult};
pub use descent::{
    descend, descend_recorded, verify_rate_bound, DescentReport, InnerRule, RateBoundCheck, StepInfo,
    StopReason, StoppingConfig,
};
pub use error::{Error, Result};
pub use evaluation::{
    aggregate, detection_frequency, rank_distribution, score_recovery, stability_ranks, CurveSummary,
    DetectionFrequency, RankDistribution, RecoveryPoint, RecoveryReport, StabilityResult, StabilitySettings,
};
pub use growth::{
    activation_ranks, grow, grow_naive, grow_with, read_trace, run_growth, write_trace, GrowthMethod, GrowthOptions, GrowthStep,
    GrowthTrace, NaiveMethod,
};
pub use matrix::SymMatrix;
pub use selection::{score_bbi, score_fci, score_gs, score_gsl, ScoredCandidate, SelectionRule};
pub use spd::{gaussian_loss, kl_gap, loss_gradient, loss_of, optimal_diagonal_init, RebuildPolicy, SpdPair};
pub use support::{Edge, Support};
pub use synthetic::{
    apply_ridge, build_truth, generate_base, load_external, psd_shift, ridge_covariance, sample_covariance,
    sample_gaussian, Family, GroundTruth, ScenarioSpec,
};
