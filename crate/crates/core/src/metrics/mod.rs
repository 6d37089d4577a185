//! Evaluation of generated samples against real data.
//!
//! All metrics work on raw coordinates: for the 2-D toy data the points are
//! their own feature vectors.

mod coverage;
mod frechet;
mod knn;
mod reconstruction;

pub use coverage::{high_quality_counts, ModeCoverageReport};
pub use frechet::{frechet_distance, gaussian_moments, FrechetResult};
pub use knn::{
    knn_radii, knn_threshold, manifold_membership, partial_recall, precision, recall, KnnManifold, DEFAULT_K,
};
pub use reconstruction::{per_dim_distance, re_score, reconstruction_error, train_autoencoder, AeConfig};
