//! Deterministic grid counterpart of the Monte Carlo solver.

pub mod assemble;
pub mod export;
pub mod grid;
pub mod semigroup;
pub mod solve;

pub use assemble::{
    assemble_e, assemble_e0, assemble_e0_1, assemble_e0_gamma, generator_matrix, DiscreteBilinearForm, FormKind,
    SparseMatrix,
};
pub use grid::{CoeffRule, Grid, GridFunction, NodeClass};
pub use semigroup::{semigroup_pairing, PairingReport, SemigroupOracle};
pub use solve::{
    solve_dirichlet_weak, solve_dirichlet_with, solve_xi_h, solve_xi_h_bhat, solve_xi_h_periodic_1d,
    DirichletSolution, ResolventSystem, SparseLu, XiH,
};
