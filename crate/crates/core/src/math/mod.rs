//! Deterministic numeric substrate: tensors, seeded randomness, quantiles,
//! and a symmetric eigensolver. Everything is f64 and bit-reproducible.

pub mod eigen;
pub mod rng;
pub mod stats;
pub mod tensor;

pub use eigen::sym_eigenvalues;
pub use rng::{splitmix64, splitmix64_mix, RandomStream};
pub use stats::{mean, pop_std, quantile, quantile_sorted};
pub use tensor::Tensor;
