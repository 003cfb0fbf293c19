//! Probabilistic-bit (p-bit) Ising solver.
//!
//! Dense Ising problems (MIMO maximum-likelihood detection, Sherrington-Kirkpatrick
//! spin glasses) are sparsified with ferromagnetically coupled copy nodes, sampled
//! with chromatic Gibbs sweeps, and optimized with one- or two-dimensional parallel
//! tempering. A behavioral fixed-point model of the FPGA datapath and its timing is
//! available through [`hwmodel`].
//!
//! Energy convention used throughout:
//! `E(s) = -sum_i h_i s_i - sum_{i<j} J_ij s_i s_j`.

pub mod bench;
pub mod error;
pub mod hwmodel;
pub mod ising;
pub mod mimo;
pub mod sampler;
pub mod tempering;

pub use error::{Error, Result};
pub use ising::{
    ConstraintReport, DenseIsingModel, SparsifiedModel, SpinState,
};
pub use sampler::RandomStream;
