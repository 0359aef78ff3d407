//! Covariance and correlation estimators, and the cross-sectional
//! statistics used to normalize binned returns.

mod correlation;
mod moments;
mod tick;

pub use correlation::{
    average_pairwise_correlation, binwise_correlation, pearson_windowed, PairwiseAverage,
    WindowSpec,
};
pub(crate) use correlation::pearson_matrix;
pub use moments::{
    dispersion, normalize_panel, normalized, temporal_moments, BinMoments, DispersionSeries,
    NormalizationReport,
};
pub use tick::{hayashi_yoshida, realized_correlation, realized_covariance, HyEstimate};
