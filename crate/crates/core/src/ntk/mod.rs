//! Closed-form kernels of infinitely wide GCNs.
//!
//! [`covariance_forward`] runs the node-covariance recursion for the chosen
//! architecture and [`assemble_ntk`] folds the per-layer terms into the
//! kernel. [`linear_closed_form`] evaluates the linear-activation kernel
//! directly from powers of `S` and serves as an independent cross-check.

mod activation;
mod arch;
mod kernel;
mod output;

pub use activation::{activation_derivative_moment, activation_second_moment, kappa0, kappa1};
pub use arch::{default_c_sigma, Activation, ArchitectureSpec, OutputHead, Variant};
pub use kernel::{
    assemble_ntk, assemble_ntk_with, compute_ntk, covariance_forward, linear_closed_form,
    InvariantReport, KernelStack, NtkForm,
};
pub use output::{
    output_factor, sigmoid_factor_entry, sigmoid_output_factor, truncation_bound,
    SIGMOID_EXPANSION_LIMIT,
};
