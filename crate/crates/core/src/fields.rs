//! Nodal P1 fields and the discrete structural condition.
//!
//! A [`DiscreteState`] carries the nodal quadruple `(s, n, Θ, U)` with
//! `Θ(x_i) = n(x_i) ⊗ n(x_i)` and `U(x_i) = s(x_i) Θ(x_i)` at every node,
//! and `s` inside the physical range `[-1/(d-1), 1]`. The director `n` is
//! kept alongside `Θ` because the tangent step spans nodal tangent spaces;
//! where a line tensor arrives without an orientation (file import), `n` is
//! recovered as the leading eigenvector of `Θ` under the deterministic sign
//! rule. Line fields are locally orientable at nodes; only the global
//! orientation is obstructed.

use crate::error::{Error, Result};
use crate::mesh::SimplicialMesh;
use crate::s_range;
use crate::tensor::{self, SymTensor};

/// One value per mesh node.
#[derive(Debug, Clone)]
pub struct ScalarField(pub Vec<f64>);

/// One unit vector per node, stored padded to three components.
#[derive(Debug, Clone)]
pub struct DirectorField(pub Vec<[f64; 3]>);

/// One line tensor (`n ⊗ n`) per node.
#[derive(Debug, Clone)]
pub struct LineField(pub Vec<SymTensor>);

/// One symmetric tensor per node.
#[derive(Debug, Clone)]
pub struct TensorField(pub Vec<SymTensor>);

impl ScalarField {
    pub fn constant(n_nodes: usize, v: f64) -> Self {
        ScalarField(vec![v; n_nodes])
    }

    pub fn from_fn(mesh: &SimplicialMesh, f: impl Fn(&[f64]) -> f64) -> Self {
        ScalarField((0..mesh.n_nodes()).map(|i| f(mesh.node(i))).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `δ_ij f = f(x_i) - f(x_j)`.
    pub fn delta(&self, i: usize, j: usize) -> Result<f64> {
        check_index(self.0.len(), i)?;
        check_index(self.0.len(), j)?;
        Ok(self.0[i] - self.0[j])
    }
}

impl DirectorField {
    pub fn constant(n_nodes: usize, n: [f64; 3]) -> Self {
        DirectorField(vec![n; n_nodes])
    }

    pub fn from_fn(mesh: &SimplicialMesh, f: impl Fn(&[f64]) -> [f64; 3]) -> Self {
        DirectorField((0..mesh.n_nodes()).map(|i| f(mesh.node(i))).collect())
    }

    pub fn delta(&self, i: usize, j: usize) -> Result<[f64; 3]> {
        check_index(self.0.len(), i)?;
        check_index(self.0.len(), j)?;
        Ok(tensor::sub3(&self.0[i], &self.0[j]))
    }
}

impl LineField {
    pub fn delta(&self, i: usize, j: usize) -> Result<SymTensor> {
        check_index(self.0.len(), i)?;
        check_index(self.0.len(), j)?;
        Ok(self.0[i].sub(&self.0[j]))
    }
}

impl TensorField {
    pub fn delta(&self, i: usize, j: usize) -> Result<SymTensor> {
        check_index(self.0.len(), i)?;
        check_index(self.0.len(), j)?;
        Ok(self.0[i].sub(&self.0[j]))
    }
}

fn check_index(len: usize, i: usize) -> Result<()> {
    if i >= len {
        return Err(Error::Field(format!("node index {i} out of range (< {len})")));
    }
    Ok(())
}

/// The unknown of the gradient flow: nodal `(s, n, Θ, U)` satisfying the
/// discrete structural condition.
#[derive(Debug, Clone)]
pub struct DiscreteState {
    pub dim: usize,
    pub s: ScalarField,
    pub n: DirectorField,
    pub theta: LineField,
    pub u: TensorField,
}

impl DiscreteState {
    pub fn n_nodes(&self) -> usize {
        self.s.len()
    }

    /// Rebuilds `Θ` and `U` from `(s, n)` at one node.
    pub fn rebuild_node(&mut self, i: usize) {
        let theta = SymTensor::outer(self.dim, &self.n.0[i]);
        self.theta.0[i] = theta;
        self.u.0[i] = theta.scale(self.s.0[i]);
    }

    /// Verifies the discrete structural condition nodally: `s` in range,
    /// `|n| = 1`, `Θ = n ⊗ n`, `U = s Θ`.
    pub fn verify_structural(&self, tol: f64) -> Result<()> {
        let (lo, hi) = s_range(self.dim);
        for i in 0..self.n_nodes() {
            let s = self.s.0[i];
            if !(lo - tol..=hi + tol).contains(&s) {
                return Err(Error::Field(format!(
                    "degree of orientation out of range at node {i}: s = {s:.17} not in [{lo}, {hi}]"
                )));
            }
            let nn = tensor::norm3(&self.n.0[i]);
            if (nn - 1.0).abs() > 1e-10 {
                return Err(Error::Field(format!(
                    "director not unit at node {i}: |n| = {nn:.17}"
                )));
            }
            let outer = SymTensor::outer(self.dim, &self.n.0[i]);
            if outer.sub(&self.theta.0[i]).frob_norm() > 1e-10 {
                return Err(Error::Field(format!(
                    "line tensor at node {i} does not match its director"
                )));
            }
            if self.theta.0[i].scale(s).sub(&self.u.0[i]).frob_norm() > tol * (1.0 + s.abs()) {
                return Err(Error::Field(format!(
                    "structural condition U = s Theta violated at node {i}"
                )));
            }
        }
        Ok(())
    }

    /// Minimum nodal `s` and its node index.
    pub fn min_s(&self) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for (i, &v) in self.s.0.iter().enumerate() {
            if v < best.0 {
                best = (v, i);
            }
        }
        best
    }
}

/// Builds an admissible state from nodal `(s, n)` data: `Θ` and `U` are
/// constructed nodewise.
pub fn make_state(mesh: &SimplicialMesh, s: ScalarField, n: DirectorField) -> Result<DiscreteState> {
    let dim = mesh.dim();
    let nn = mesh.n_nodes();
    if s.len() != nn || n.0.len() != nn {
        return Err(Error::Field(format!(
            "field length mismatch: mesh has {nn} nodes, got s: {}, n: {}",
            s.len(),
            n.0.len()
        )));
    }
    let (lo, hi) = s_range(dim);
    for i in 0..nn {
        let v = s.0[i];
        if !v.is_finite() || !(lo..=hi).contains(&v) {
            return Err(Error::Field(format!(
                "degree of orientation out of range at node {i} ({:?}): s = {v:.17} not in [{lo}, {hi}]",
                mesh.node(i)
            )));
        }
        let len = tensor::norm3(&n.0[i]);
        if (len - 1.0).abs() > 1e-10 {
            return Err(Error::Field(format!(
                "director not unit at node {i}: |n| = {len:.17}"
            )));
        }
        if dim == 2 && n.0[i][2] != 0.0 {
            return Err(Error::Field(format!(
                "2-D director with out-of-plane component at node {i}"
            )));
        }
    }
    let theta = LineField(n.0.iter().map(|ni| SymTensor::outer(dim, ni)).collect());
    let u = TensorField(
        theta
            .0
            .iter()
            .zip(&s.0)
            .map(|(t, &si)| t.scale(si))
            .collect(),
    );
    Ok(DiscreteState {
        dim,
        s,
        n,
        theta,
        u,
    })
}

/// `s̃ = I_h(|s|)` and `Ũ = I_h(|s| Θ)`: the tilde pair satisfies the
/// structural condition with the same line field.
pub fn tilde_state(state: &DiscreteState) -> (ScalarField, TensorField) {
    let s_tilde = ScalarField(state.s.0.iter().map(|v| v.abs()).collect());
    let u_tilde = TensorField(
        state
            .theta
            .0
            .iter()
            .zip(&s_tilde.0)
            .map(|(t, &si)| t.scale(si))
            .collect(),
    );
    (s_tilde, u_tilde)
}

/// Recovers a nodal director from a line tensor as the leading eigenvector
/// (deterministic sign rule).
pub fn director_from_line_tensor(theta: &SymTensor) -> Result<[f64; 3]> {
    let eig = tensor::eig_sym(theta)?;
    Ok(eig.vectors[0])
}

pub type ScalarBc<'a> = Box<dyn Fn(&[f64]) -> f64 + 'a>;
pub type DirectorBc<'a> = Box<dyn Fn(&[f64]) -> [f64; 3] + 'a>;

/// Dirichlet data per boundary region: scalar data on `Γ_s`, director (line)
/// data on `Γ_Θ`. Regions not listed are natural (Neumann) boundaries.
pub struct BoundaryConditions<'a> {
    pub scalar: Vec<(String, ScalarBc<'a>)>,
    pub director: Vec<(String, DirectorBc<'a>)>,
    /// Nondegeneracy floor: director data requires `g >= delta0`.
    pub delta0: f64,
}

impl<'a> BoundaryConditions<'a> {
    pub fn none() -> Self {
        BoundaryConditions {
            scalar: Vec::new(),
            director: Vec::new(),
            delta0: 1e-8,
        }
    }

    pub fn scalar_labels(&self) -> Vec<&str> {
        self.scalar.iter().map(|(l, _)| l.as_str()).collect()
    }

    pub fn director_labels(&self) -> Vec<&str> {
        self.director.iter().map(|(l, _)| l.as_str()).collect()
    }

    /// Nodes of `Γ_s` (scalar Dirichlet part).
    pub fn gamma_s_nodes(&self, mesh: &SimplicialMesh) -> Vec<usize> {
        mesh.boundary_nodes(&self.scalar_labels())
    }

    /// Nodes of `Γ_Θ` (line-field Dirichlet part).
    pub fn gamma_theta_nodes(&self, mesh: &SimplicialMesh) -> Vec<usize> {
        mesh.boundary_nodes(&self.director_labels())
    }
}

/// Overwrites nodal values on labeled boundary regions and re-establishes
/// the structural condition at the touched nodes.
///
/// Scalar data is applied before director data so the compatibility check
/// `g >= delta0` on `Γ_Θ` sees the imposed boundary values.
pub fn apply_dirichlet(
    mesh: &SimplicialMesh,
    state: &mut DiscreteState,
    bc: &BoundaryConditions,
) -> Result<()> {
    for (label, _) in &bc.scalar {
        if !mesh.labels().iter().any(|l| l == label) {
            return Err(Error::Field(format!(
                "boundary region '{label}' named in scalar data does not exist in the mesh"
            )));
        }
    }
    for (label, _) in &bc.director {
        if !mesh.labels().iter().any(|l| l == label) {
            return Err(Error::Field(format!(
                "boundary region '{label}' named in director data does not exist in the mesh"
            )));
        }
    }

    let (lo, hi) = s_range(state.dim);
    for (label, g) in &bc.scalar {
        for i in mesh.boundary_nodes(&[label.as_str()]) {
            let v = g(mesh.node(i));
            if !v.is_finite() || !(lo..=hi).contains(&v) {
                return Err(Error::Field(format!(
                    "boundary value s = {v:.17} out of range at node {i} (region '{label}')"
                )));
            }
            state.s.0[i] = v;
            state.rebuild_node(i);
        }
    }
    for (label, m) in &bc.director {
        for i in mesh.boundary_nodes(&[label.as_str()]) {
            let g_here = state.s.0[i];
            if g_here < bc.delta0 {
                return Err(Error::Field(format!(
                    "line-field data on region '{label}' needs g >= {}, found s = {g_here:.17} at node {i}",
                    bc.delta0
                )));
            }
            let dir = m(mesh.node(i));
            let len = tensor::norm3(&dir);
            if !(len.is_finite() && len > 1e-12) {
                return Err(Error::Field(format!(
                    "degenerate director boundary data at node {i} (region '{label}')"
                )));
            }
            state.n.0[i] = tensor::scale3(&dir, 1.0 / len);
            if state.dim == 2 {
                state.n.0[i][2] = 0.0;
            }
            state.rebuild_node(i);
        }
    }
    Ok(())
}
