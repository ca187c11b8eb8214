//! Synthetic SSVEP data and training-based target identification.

pub mod dataset;
pub mod filterbank;
pub mod spatial;
pub mod ti;

pub use dataset::{synth_ssvep, StimulusTable, SynthConfig, TrialDataset};
pub use filterbank::{check_filter_bank, default_band_weight, filter_bank_decompose, FilterBankSpec};
pub use spatial::{sscor_weights, trca_weights, SscorFilter, Trial, TrcaFilter};
pub use ti::{classify, evaluate_loto, pearson, train, Algorithm, Classification, LotoOutcome, Method, SpatialFilters};
