//! Synthetic classification tasks probing geometric expressivity: k-chains
//! and rotated L-fold rings.

mod bench;
mod generators;

pub use bench::{accuracy, format_results, run_benchmark, BenchmarkConfig, BenchmarkResult};
pub use generators::{
    default_angle, distance_multisets_differ, gen_k_chain, gen_rot_sym, min_rigid_rmsd,
    procrustes_rmsd, BenchmarkInstance, Family, DISTINCT_RMSD,
};
