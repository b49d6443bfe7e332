//! Two-party secure sparse matrix multiplication and secure GCN training over
//! additive secret shares in the ring of 64-bit integers.

pub mod bench;
pub mod cli;
pub mod dealer;
pub mod decompose;
pub mod error;
pub mod gcn;
pub mod matrix;
pub mod nonlinear;
pub mod protocols;
pub mod ring;
pub mod runtime;
pub mod smm;

pub use error::{Error, Result};
