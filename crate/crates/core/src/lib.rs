//! Finite element library for equilibrium configurations of uniaxially
//! constrained Q-tensor nematic liquid crystals.
//!
//! The unknown is a nodal triple `(s, Θ, U)` on a simplicial mesh: a scalar
//! degree of orientation `s`, a line field `Θ = n ⊗ n`, and the auxiliary
//! tensor `U = s Θ`. Equilibria minimize a discrete one-constant energy whose
//! interaction term is a nonstandard nodal double sum over the off-diagonal
//! stiffness couplings; minimization runs as an alternating tangent-flow /
//! projection / convex-split scheme that decreases the energy monotonically on
//! weakly acute meshes.
//!
//! Module map:
//! - [`mesh`]: simplicial meshes, structured generators, P1 stiffness/mass
//!   assembly, weak-acuteness check
//! - [`tensor`]: symmetric d×d tensor algebra, spectral decomposition,
//!   rank-one projection
//! - [`fields`]: nodal fields and the discrete structural condition
//! - [`energy`]: discrete energies, residuals, double well
//! - [`linalg`]: sparse symmetric storage and preconditioned CG
//! - [`flow`]: the alternating gradient flow
//! - [`scenarios`]: preset problems and defect diagnostics
//! - [`io`]: mesh/field/config file formats, VTK and CSV emitters

pub mod energy;
pub mod error;
pub mod fields;
pub mod flow;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod scenarios;
pub mod tensor;

#[cfg(test)]
pub(crate) mod testutil;

pub use energy::{DoubleWell, EnergyBreakdown};
pub use error::Error;
pub use fields::{DirectorField, DiscreteState, LineField, ScalarField, TensorField};
pub use flow::{FlowConfig, FlowReport};
pub use linalg::{SolveReport, SparseSym};
pub use mesh::{SimplicialMesh, StiffnessGraph};
pub use scenarios::Scenario;
pub use tensor::SymTensor;

/// Physical range of the degree of orientation, `[-1/(d-1), 1]`.
pub fn s_range(dim: usize) -> (f64, f64) {
    (-1.0 / (dim as f64 - 1.0), 1.0)
}
