//! Tensor-network secret-sharing toolkit: randomized tensor decompositions
//! whose cores act as secret shares, multilinear arithmetic on those shares,
//! and the privacy/fidelity metrics used to evaluate them.

pub mod decomp;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod ops;
pub mod tensor;

pub use tensor::{DenseTensor, Matrix, TensorError};
