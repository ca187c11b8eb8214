//! Information-theoretic rate measures for brain-computer interfaces.
//!
//! Channel capacity by Blahut-Arimoto, accuracy-constrained channel
//! design, a confusion asymmetry score, and a synthetic SSVEP
//! identification pipeline for producing confusion matrices.
//!
//! The channel, capacity, design and asymmetry layers are generic over
//! [`Real`] (`f32` or `f64`). Simulation, statistics and file formats work
//! in `f64`.
//!
//! ```
//! use bci_itr::{blahut_arimoto, BaConfig, ChannelMatrixF64};
//!
//! let bsc = ChannelMatrixF64::bsc(0.1).unwrap();
//! let c = blahut_arimoto(&bsc, &BaConfig::default()).unwrap();
//! assert!((c.capacity - 0.531).abs() < 1e-3);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod asymmetry;
pub mod capacity;
pub mod channel;
pub mod design;
pub mod error;
pub mod io;
pub mod linalg;
pub mod real;
pub mod sim;
pub mod stats;

pub use asymmetry::{asymmetry_report, asymmetry_score, delta_itr, stationary_distribution, AsymmetryReport, Smoothing, Stationary};
pub use capacity::{
    binary_capacity, binary_mutual_information, binary_optimal_input, blahut_arimoto, capacity_itr,
    mutual_information_fixed_input, BaConfig, BaStep, BlahutArimoto, CapacityItr, CapacityResult,
};
pub use channel::{
    binary_entropy, conventional_itr, entropy, info_summary, kl_divergence, output_distribution, ChannelMatrix,
    ConventionalItr, Distribution, InfoSummary,
};
pub use design::{
    balanced_matrix, binary_extremal_channels, fano_check, fano_conditional_entropy_bound, fano_error_lower_bound,
    joint_optimize, AccuracyTarget, DesignConfig, DesignResult, FanoCheck, FanoForm, FanoLowerBound,
};
pub use error::{Error, Result};
pub use real::Real;
pub use stats::{ConfusionRecord, ItrMode, Tail};

pub type DistributionF64 = Distribution<f64>;
pub type DistributionF32 = Distribution<f32>;
pub type ChannelMatrixF64 = ChannelMatrix<f64>;
pub type ChannelMatrixF32 = ChannelMatrix<f32>;
pub type BaConfigF64 = BaConfig<f64>;
pub type BaConfigF32 = BaConfig<f32>;
pub type CapacityResultF64 = CapacityResult<f64>;
pub type CapacityResultF32 = CapacityResult<f32>;
pub type DesignResultF64 = DesignResult<f64>;
pub type DesignResultF32 = DesignResult<f32>;
