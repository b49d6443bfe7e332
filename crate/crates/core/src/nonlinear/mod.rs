//! Nonlinear protocols on shares.

pub mod bits;
pub mod optim;
pub mod rsqrt;
pub mod softmax;

pub use bits::{b2a, bit_decompose, drelu, highest_one_hot, msb, relu, relu_with_mask};
pub use optim::{adam_step, clear_sgd, sgd_step, AdamParams, AdamState, ClearAdam};
pub use rsqrt::{reciprocal, rsqrt, rsqrt_eps, rsqrt_eps_scaled, rsqrt_pow2};
pub use softmax::{row_max, softmax_rows};
