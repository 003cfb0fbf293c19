//! Problem representation: dense Ising models, the MIMO mapping, copy-node
//! sparsification, majority-vote projection and graph coloring.

mod coloring;
pub mod io;
mod model;
mod sparse;

pub use coloring::{greedy_coloring, is_proper};
pub use model::{energy_eval, map_mimo_to_ising, DenseIsingModel, SpinState, WeightScale};
pub(crate) use sparse::project_slice;
pub use sparse::{
    constraint_report, project_majority, sparse_energy_eval, sparsify, sparsify_with, BiasSplit,
    ConstraintReport, ProblemEdge, SparsifiedModel, SparsifiedModelFile,
};
