//! Exact infinite-width neural tangent kernels for semi-supervised graph
//! convolutional networks.
//!
//! The crate covers the whole pipeline used to study GCN depth through the
//! lens of the NTK:
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`graph`] | graphs and the symmetric-normalized diffusion operator |
//! | [`dataset`] | node datasets, file formats, class grouping and splits |
//! | [`ntk`] | covariance recursions and kernel assembly (vanilla, Skip-PC, Skip-α) |
//! | [`inference`] | kernel-regression node classification |
//! | [`oracle`] | finite-width GCN: forward, gradients, empirical NTK, training |
//! | [`analysis`] | depth sweeps and eigenspace alignment between kernels |
//! | [`verify`] | the oracle battery behind `gcn-ntk verify` |
//!
//! All matrices are dense `f64` ([`Matrix`]).

pub mod analysis;
pub mod dataset;
mod error;
pub mod graph;
pub mod inference;
pub mod linalg;
pub mod matrix_io;
pub mod ntk;
pub mod oracle;
pub mod synthetic;
pub mod verify;

pub use error::{Error, Result};

/// Dense row/column matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Dense column vector.
pub type Vector = nalgebra::DVector<f64>;

pub use analysis::{alignment, alignment_grid, depth_sweep, AlignmentGrid, SweepResult};
pub use dataset::{load_dataset, NodeDataset};
pub use graph::{build_diffusion, DiffusionOperator, Graph};
pub use inference::{accuracy, partition_kernel, predict, KernelPartition, Prediction};
pub use ntk::{
    assemble_ntk, covariance_forward, linear_closed_form, Activation, ArchitectureSpec,
    KernelStack, NtkForm, OutputHead, Variant,
};
pub use oracle::{empirical_ntk, FiniteWidthNet, ForwardTrace};
