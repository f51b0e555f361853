//! Shared helpers for unit tests.

use crate::fields::{make_state, DirectorField, DiscreteState, ScalarField};
use crate::mesh::SimplicialMesh;
use crate::s_range;
use crate::tensor;
use rand::Rng;

pub fn random_unit(rng: &mut impl Rng, dim: usize) -> [f64; 3] {
    loop {
        let mut u = [0.0; 3];
        for x in u.iter_mut().take(dim) {
            *x = rng.gen_range(-1.0..1.0);
        }
        let n = tensor::norm3(&u);
        if n > 0.1 {
            return tensor::scale3(&u, 1.0 / n);
        }
    }
}

/// Random admissible state: nodal s in the physical range (shrunk slightly),
/// random unit directors.
pub fn random_state(rng: &mut impl Rng, mesh: &SimplicialMesh) -> DiscreteState {
    let (lo, hi) = s_range(mesh.dim());
    let s = ScalarField(
        (0..mesh.n_nodes())
            .map(|_| rng.gen_range(lo * 0.999..hi * 0.999))
            .collect(),
    );
    let n = DirectorField(
        (0..mesh.n_nodes())
            .map(|_| random_unit(rng, mesh.dim()))
            .collect(),
    );
    make_state(mesh, s, n).unwrap()
}
