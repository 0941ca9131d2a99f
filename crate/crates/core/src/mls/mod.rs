//! Scattered-data geometry on the torus, greedy pruning, and pruned
//! moving-least-squares reconstruction.

mod cells;
mod moving;
mod pointset;
mod prune;

pub use moving::{
    bump_weight, default_gamma, mls_evaluate, monomial_exponents, poly_space_dim, reconstruct,
    reconstruct_with, MlsConfig, MlsEvaluator, SPECTRAL_CUTOFF,
};
pub use pointset::{
    default_fill_resolution, fill_distance, fill_distance_probe_error, read_points_csv,
    separation_distance, write_points_csv, PointSet,
};
pub use prune::prune;
