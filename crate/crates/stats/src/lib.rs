//! Detection and equivalence statistics: Hartigan's dip test with
//! Monte-Carlo p-values, kernel density inflections, two-component Gaussian
//! mixtures with BIC, PELT changepoints, two one-sided tests on Cohen's d,
//! Pearson correlation and the error type ratio.

mod dip;
mod error;
mod gmm;
mod kde;
mod pelt;
mod summary;
mod threshold;
mod tost;

pub use dip::{dip_sorted, dip_statistic, dip_test, dip_test_with, uniform_null, DipResult, DIP_DRAWS};
pub use error::{Result, StatsError};
pub use gmm::{gmm2_bic, Component, GmmFit, GMM_RESTARTS};
pub use kde::{antimode, inflections, kde, kde_inflections, silverman_bandwidth, Kde, KDE_GRID};
pub use pelt::{default_penalty, difference_variance, pelt, MeanShiftCost};
pub use summary::{etr, mean, median, median_filter, pearson, quantile_sorted, variance};
pub use threshold::{
    threshold_report, upper_threshold, ThresholdReport, AGREEMENT_TOLERANCE, TAU_SMOOTHING_WINDOW,
};
pub use tost::{
    sample_size_formula, tost, tost_sample_size, SampleSize, TostResult, STATED_SAMPLE_SIZE,
};
