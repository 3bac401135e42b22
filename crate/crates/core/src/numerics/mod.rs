//! Numerical primitives used across the pipeline.

mod dbscan;
mod geo;
mod kmeans;
mod stats;
mod ttest;

pub use dbscan::{cluster_radius_mean, dbscan, DbscanResult};
pub use geo::{chord_for_distance, haversine, haversine_unchecked, GeoIndex, EARTH_RADIUS_M};
pub use kmeans::{kmeans, squared_distance, LabeledClustering};
pub use stats::{mean, percentile, sample_variance};
pub use ttest::{
    ln_gamma, regularized_incomplete_beta, student_t_cdf, two_sample_t_test,
    welch_t_test_one_sided, Alternative, TTestOutcome,
};
