//! Defect diagnostics: winding numbers of line fields along closed node
//! loops and extraction of the singular set `{s = level}`.

use crate::error::{Error, Result};
use crate::fields::{LineField, ScalarField};
use crate::mesh::SimplicialMesh;
use crate::tensor::{self, SymTensor};
use std::collections::HashMap;

/// Orthonormal basis of the plane in which the double angle is measured.
#[derive(Debug, Clone, Copy)]
pub struct PlaneBasis {
    pub u: [f64; 3],
    pub v: [f64; 3],
}

impl PlaneBasis {
    pub fn xy() -> Self {
        PlaneBasis {
            u: [1.0, 0.0, 0.0],
            v: [0.0, 1.0, 0.0],
        }
    }

    pub fn xz() -> Self {
        PlaneBasis {
            u: [1.0, 0.0, 0.0],
            v: [0.0, 0.0, 1.0],
        }
    }

    /// Vertical plane through direction `(cos φ, sin φ, 0)` and `e_z`.
    pub fn vertical(phi: f64) -> Self {
        PlaneBasis {
            u: [phi.cos(), phi.sin(), 0.0],
            v: [0.0, 0.0, 1.0],
        }
    }
}

/// Double angle `2θ` of the in-plane part of a line tensor, together with
/// the in-plane amplitude (`≈ 1` for an in-plane director).
fn double_angle(theta: &SymTensor, basis: &PlaneBasis) -> (f64, f64) {
    let tu = theta.apply(&basis.u);
    let tv = theta.apply(&basis.v);
    let a = tensor::dot3(&basis.u, &tu);
    let b = tensor::dot3(&basis.u, &tv);
    let c = tensor::dot3(&basis.v, &tv);
    let cos2 = a - c;
    let sin2 = 2.0 * b;
    (sin2.atan2(cos2), sin2.hypot(cos2))
}

/// Accumulated winding of a line field along an ordered closed loop of
/// samples: the total increment of the double angle over `4π`, a multiple
/// of 1/2 for a closed loop.
///
/// Errors when the field is nearly out-of-plane at a sample or when two
/// consecutive samples rotate by more than π/4 (under-resolved loop).
pub fn winding_number(samples: &[SymTensor], basis: &PlaneBasis) -> Result<f64> {
    if samples.len() < 3 {
        return Err(Error::Diagnostic("winding loop needs at least 3 samples".into()));
    }
    let mut total = 0.0;
    let (mut prev, amp0) = double_angle(&samples[0], basis);
    if amp0 < 1e-6 {
        return Err(Error::Diagnostic(
            "line field has no in-plane component at loop start".into(),
        ));
    }
    for k in 1..=samples.len() {
        let sample = &samples[k % samples.len()];
        let (angle, amp) = double_angle(sample, basis);
        if amp < 1e-6 {
            return Err(Error::Diagnostic(format!(
                "line field has no in-plane component at loop sample {k}"
            )));
        }
        let mut delta = angle - prev;
        while delta > std::f64::consts::PI {
            delta -= 2.0 * std::f64::consts::PI;
        }
        while delta <= -std::f64::consts::PI {
            delta += 2.0 * std::f64::consts::PI;
        }
        if delta.abs() >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::Diagnostic(format!(
                "under-resolved winding loop: double angle jumps by {delta:.3} rad at sample {k}"
            )));
        }
        total += delta;
        prev = angle;
    }
    Ok(total / (4.0 * std::f64::consts::PI))
}

/// Winding of a nodal line field along a closed loop of node indices.
pub fn winding_around_nodes(
    field: &LineField,
    loop_nodes: &[usize],
    basis: &PlaneBasis,
) -> Result<f64> {
    let samples: Vec<SymTensor> = loop_nodes
        .iter()
        .map(|&i| {
            field
                .0
                .get(i)
                .copied()
                .ok_or_else(|| Error::Diagnostic(format!("loop node {i} out of range")))
        })
        .collect::<Result<_>>()?;
    winding_number(&samples, basis)
}

pub fn nearest_node(mesh: &SimplicialMesh, p: &[f64; 3]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for i in 0..mesh.n_nodes() {
        let q = mesh.node3(i);
        let d = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2) + (q[2] - p[2]).powi(2);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Closed node loop tracking a parametric closed curve by nearest-node
/// sampling (consecutive duplicates removed).
pub fn loop_from_curve(mesh: &SimplicialMesh, curve: &[[f64; 3]]) -> Vec<usize> {
    let mut nodes: Vec<usize> = Vec::with_capacity(curve.len());
    for p in curve {
        let i = nearest_node(mesh, p);
        if nodes.last() != Some(&i) {
            nodes.push(i);
        }
    }
    while nodes.len() > 1 && nodes.first() == nodes.last() {
        nodes.pop();
    }
    nodes
}

/// Circle of `n` samples around `center`, radius `r`, in the plane spanned
/// by `basis`.
pub fn circle_curve(center: &[f64; 3], r: f64, n: usize, basis: &PlaneBasis) -> Vec<[f64; 3]> {
    (0..n)
        .map(|k| {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let mut p = *center;
            for q in 0..3 {
                p[q] += r * (phi.cos() * basis.u[q] + phi.sin() * basis.v[q]);
            }
            p
        })
        .collect()
}

/// Sub-level set `{s_h <= level}` and the iso-set `{s_h = level}` by
/// marching simplices.
#[derive(Debug, Clone)]
pub struct SingularSet {
    /// Elements whose minimum nodal value is below the level.
    pub elements: Vec<usize>,
    /// Facet-connectivity components of that element set.
    pub n_element_components: usize,
    /// Iso-curve segments (2-D meshes).
    pub segments: Vec<[[f64; 3]; 2]>,
    /// Iso-surface triangles (3-D meshes).
    pub triangles: Vec<[[f64; 3]; 3]>,
    /// Connected components of the extracted iso-set.
    pub n_surface_components: usize,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra] = rb;
        }
    }

    fn n_components(&mut self, n: usize) -> usize {
        let mut roots: Vec<usize> = (0..n).map(|k| self.find(k)).collect();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    }
}

fn edge_point(mesh: &SimplicialMesh, a: usize, b: usize, va: f64, vb: f64) -> [f64; 3] {
    let t = va / (va - vb);
    let pa = mesh.node3(a);
    let pb = mesh.node3(b);
    [
        pa[0] + t * (pb[0] - pa[0]),
        pa[1] + t * (pb[1] - pa[1]),
        pa[2] + t * (pb[2] - pa[2]),
    ]
}

/// Extracts `{s = level}` (marching triangles/tetrahedra) together with the
/// sub-level element set. Requires `0 < level < 1`.
pub fn extract_singular_set(
    mesh: &SimplicialMesh,
    s: &ScalarField,
    level: f64,
) -> Result<SingularSet> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Diagnostic(format!(
            "iso level must lie in (0, 1), got {level}"
        )));
    }
    let dim = mesh.dim();
    let vpe = dim + 1;

    // sub-level element set and its facet connectivity
    let elements: Vec<usize> = (0..mesh.n_elements())
        .filter(|&e| {
            mesh.element(e)
                .iter()
                .map(|&v| s.0[v])
                .fold(f64::INFINITY, f64::min)
                <= level
        })
        .collect();
    let mut uf = UnionFind::new(elements.len());
    {
        let mut facet_owner: HashMap<Vec<usize>, usize> = HashMap::new();
        for (sel, &e) in elements.iter().enumerate() {
            let verts = mesh.element(e);
            for skip in 0..vpe {
                let mut key: Vec<usize> = verts
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != skip)
                    .map(|(_, &v)| v)
                    .collect();
                key.sort_unstable();
                if let Some(&other) = facet_owner.get(&key) {
                    uf.union(sel, other);
                } else {
                    facet_owner.insert(key, sel);
                }
            }
        }
    }
    let n_element_components = if elements.is_empty() {
        0
    } else {
        uf.n_components(elements.len())
    };

    // marching simplices; pieces are joined when they share a crossed edge
    let mut segments = Vec::new();
    let mut triangles = Vec::new();
    let mut piece_edges: Vec<Vec<(usize, usize)>> = Vec::new();
    for e in 0..mesh.n_elements() {
        let verts = mesh.element(e);
        let vals: Vec<f64> = verts.iter().map(|&v| s.0[v] - level).collect();
        let mut crossings: Vec<((usize, usize), [f64; 3])> = Vec::new();
        for a in 0..vpe {
            for b in a + 1..vpe {
                // sign convention: zero counts as the upper side
                let sa = vals[a] < 0.0;
                let sb = vals[b] < 0.0;
                if sa != sb {
                    let key = (verts[a].min(verts[b]), verts[a].max(verts[b]));
                    crossings.push((key, edge_point(mesh, verts[a], verts[b], vals[a], vals[b])));
                }
            }
        }
        if dim == 2 {
            if crossings.len() == 2 {
                segments.push([crossings[0].1, crossings[1].1]);
                piece_edges.push(vec![crossings[0].0, crossings[1].0]);
            }
        } else {
            match crossings.len() {
                3 => {
                    triangles.push([crossings[0].1, crossings[1].1, crossings[2].1]);
                    piece_edges.push(crossings.iter().map(|c| c.0).collect());
                }
                4 => {
                    // quad: order the four points into two triangles; the
                    // crossing pairs (a,b) split vertices into 2 + 2, and a
                    // consistent fan keeps the patch connected
                    triangles.push([crossings[0].1, crossings[1].1, crossings[2].1]);
                    triangles.push([crossings[1].1, crossings[2].1, crossings[3].1]);
                    piece_edges.push(crossings.iter().map(|c| c.0).collect());
                    piece_edges.push(crossings.iter().map(|c| c.0).collect());
                }
                _ => {}
            }
        }
    }
    let n_pieces = piece_edges.len();
    let mut uf_surf = UnionFind::new(n_pieces);
    {
        let mut edge_owner: HashMap<(usize, usize), usize> = HashMap::new();
        for (p, edges) in piece_edges.iter().enumerate() {
            for &key in edges {
                if let Some(&other) = edge_owner.get(&key) {
                    uf_surf.union(p, other);
                } else {
                    edge_owner.insert(key, p);
                }
            }
        }
    }
    let n_surface_components = if n_pieces == 0 {
        0
    } else {
        uf_surf.n_components(n_pieces)
    };

    Ok(SingularSet {
        elements,
        n_element_components,
        segments,
        triangles,
        n_surface_components,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_box_mesh, MeshPattern};
    use crate::tensor::SymTensor;

    fn line(theta: f64) -> SymTensor {
        SymTensor::outer(2, &[theta.cos(), theta.sin(), 0.0])
    }

    #[test]
    fn winding_constant_field_is_zero() {
        let samples = vec![line(0.3); 16];
        let w = winding_number(&samples, &PlaneBasis::xy()).unwrap();
        assert_eq!(w, 0.0);
    }

    #[test]
    fn winding_half_defect() {
        // theta = phi/2 around the loop: +1/2 defect
        let samples: Vec<SymTensor> = (0..64)
            .map(|k| {
                let phi = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
                line(phi / 2.0)
            })
            .collect();
        let w = winding_number(&samples, &PlaneBasis::xy()).unwrap();
        assert!((w - 0.5).abs() < 1e-12);
    }

    #[test]
    fn winding_full_defect_and_director_flip_invariance() {
        let samples: Vec<SymTensor> = (0..64)
            .map(|k| {
                let phi = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
                line(phi)
            })
            .collect();
        let w = winding_number(&samples, &PlaneBasis::xy()).unwrap();
        assert!((w - 1.0).abs() < 1e-12);
        // reversing directors leaves the line tensors unchanged
        let flipped: Vec<SymTensor> = (0..64)
            .map(|k| {
                let phi = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
                let n = [-(phi.cos()), -(phi.sin()), 0.0];
                SymTensor::outer(2, &n)
            })
            .collect();
        let wf = winding_number(&flipped, &PlaneBasis::xy()).unwrap();
        assert!((w - wf).abs() < 1e-12);
    }

    #[test]
    fn winding_additivity_two_defects() {
        // field with two +1/2 defects; a loop around both sees +1
        let field = |p: [f64; 2]| -> SymTensor {
            let t0 = 0.5 * (p[1] - 0.0).atan2(p[0] - 0.4);
            let t1 = 0.5 * (p[1] - 0.0).atan2(p[0] + 0.4);
            line(t0 + t1)
        };
        let loop_of = |center: [f64; 2], r: f64| -> Vec<SymTensor> {
            (0..256)
                .map(|k| {
                    let phi = 2.0 * std::f64::consts::PI * k as f64 / 256.0;
                    field([center[0] + r * phi.cos(), center[1] + r * phi.sin()])
                })
                .collect()
        };
        let w_both = winding_number(&loop_of([0.0, 0.0], 1.0), &PlaneBasis::xy()).unwrap();
        let w_right = winding_number(&loop_of([0.4, 0.0], 0.2), &PlaneBasis::xy()).unwrap();
        let w_left = winding_number(&loop_of([-0.4, 0.0], 0.2), &PlaneBasis::xy()).unwrap();
        assert!((w_both - (w_left + w_right)).abs() < 1e-10);
        assert!((w_both - 1.0).abs() < 1e-10);
    }

    #[test]
    fn winding_rejects_under_resolved_loop() {
        let samples: Vec<SymTensor> = (0..4)
            .map(|k| line(k as f64 * std::f64::consts::FRAC_PI_3))
            .collect();
        assert!(winding_number(&samples, &PlaneBasis::xy()).is_err());
    }

    #[test]
    fn singular_set_empty_above_level() {
        let mesh = generate_box_mesh(2, &[0.0, 1.0, 0.0, 1.0], 4, MeshPattern::Crisscross).unwrap();
        let s = ScalarField::constant(mesh.n_nodes(), 0.7);
        let set = extract_singular_set(&mesh, &s, 0.1).unwrap();
        assert!(set.elements.is_empty());
        assert!(set.segments.is_empty());
        assert_eq!(set.n_surface_components, 0);
    }

    #[test]
    fn singular_set_level_validation() {
        let mesh = generate_box_mesh(2, &[0.0, 1.0, 0.0, 1.0], 2, MeshPattern::Crisscross).unwrap();
        let s = ScalarField::constant(mesh.n_nodes(), 0.7);
        assert!(extract_singular_set(&mesh, &s, 0.0).is_err());
        assert!(extract_singular_set(&mesh, &s, 1.0).is_err());
    }

    #[test]
    fn singular_set_linear_crossing_single_tet() {
        // s = z crosses level 0.5 in every tet it spans; a unit cube of one
        // Kuhn cell yields a connected planar patch
        let mesh =
            generate_box_mesh(3, &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0], 1, MeshPattern::Kuhn).unwrap();
        let s = ScalarField((0..mesh.n_nodes()).map(|i| mesh.node(i)[2]).collect());
        let set = extract_singular_set(&mesh, &s, 0.5).unwrap();
        assert!(!set.triangles.is_empty());
        assert_eq!(set.n_surface_components, 1);
        // all triangle vertices at z = 0.5
        for tri in &set.triangles {
            for p in tri {
                assert!((p[2] - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_set_disk_in_square() {
        // s dips below the level inside a disk around the center
        let mesh =
            generate_box_mesh(2, &[0.0, 1.0, 0.0, 1.0], 16, MeshPattern::Crisscross).unwrap();
        let s = ScalarField::from_fn(&mesh, |p| {
            let r = ((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2)).sqrt();
            (r / 0.2).min(1.0) * 0.7
        });
        let set = extract_singular_set(&mesh, &s, 0.1).unwrap();
        assert_eq!(set.n_element_components, 1);
        assert_eq!(set.n_surface_components, 1);
        // the element containing the center is part of the set
        let center_node = nearest_node(&mesh, &[0.5, 0.5, 0.0]);
        assert!(set
            .elements
            .iter()
            .any(|&e| mesh.element(e).contains(&center_node)));
    }

    #[test]
    fn loop_from_curve_dedupes() {
        let mesh = generate_box_mesh(2, &[0.0, 1.0, 0.0, 1.0], 8, MeshPattern::Crisscross).unwrap();
        let curve = circle_curve(&[0.5, 0.5, 0.0], 0.3, 256, &PlaneBasis::xy());
        let nodes = loop_from_curve(&mesh, &curve);
        assert!(nodes.len() > 8);
        for w in nodes.windows(2) {
            assert_ne!(w[0], w[1]);
        }
        assert_ne!(nodes.first(), nodes.last());
    }
}
