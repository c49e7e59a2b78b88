//! Dense and sparse kernels, their adjoints, and the optimizer.

mod adam;
mod gradcheck;
mod matrix;
mod ops;
mod sparse;

pub use adam::AdamState;
pub use gradcheck::{grad_check, GradCheckReport};
pub use matrix::{gemm_into, DenseMatrix, Scalar};
pub use ops::{bce_with_logits, dropout, relu, relu_backward, sigmoid, sigmoid_scalar, softplus};
pub use sparse::{spmm, Csr, NormalizedAdjacency, WeightedCsr};
