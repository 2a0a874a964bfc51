//! P1 Lagrange kernels: sparse storage, element assembly and Krylov solvers.

mod assembly;
mod field;
mod solver;
mod sparse;

pub use assembly::{
    boundary_flux, convection, divergence_load, element_divergence, integrate, load_vector, lump,
    lumped_mass, mass, nodal_gradient, stiffness, FemError,
};
pub use field::{FieldError, ScalarField, VectorField};
pub use solver::{solve, solve_with_guess, SolveError, SolveOptions, Solution};
pub use sparse::{dot, norm2, SparseMatrix, SparsityPattern};
