//! Residual hyperbolic graph convolution on products of Lorentz models.
//!
//! The crate is `no_std` (it needs `alloc`) and carries every numerical piece
//! of the model: hyperboloid geometry, the Lorentz neural primitives, product
//! manifolds with per-component origins, graph normalization, a small
//! reverse-mode differentiation tape, the network itself with HyperDrop noise,
//! optimizers, a full-batch trainer and the Dirichlet-energy diagnostics.
//!
//! File formats, configuration and the command-line surface live in the `rhgcn`
//! companion crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod autodiff;
pub mod diagnostics;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod lorentz;
pub mod model;
pub mod ops;
pub mod optim;
pub mod product;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use graph::{Csr, NodeDataset, SparseGraph, Splits};
pub use linalg::Matrix;
pub use lorentz::{LorentzPoint, TangentVector, Tolerances};
pub use model::{Activation, ModelConfig, NoiseGranularity, NoiseSpec, Params, RHgcn};
pub use ops::{LorentzBatch, TangentFrame};
pub use product::{ProductPoint, ProductSpec, Signature};

/// Version string stamped into every artifact the tooling writes.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
