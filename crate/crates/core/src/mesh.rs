//! Simplicial meshes, structured generation, and P1 assembly.
//!
//! A mesh stores nodes, (d+1)-vertex simplices, and labeled boundary facets.
//! [`assemble_stiffness`] produces the sparse symmetric coupling graph with
//! the sign convention `k_ij = -∫ ∇φ_i · ∇φ_j` (off-diagonals nonnegative on
//! weakly acute meshes) together with the consistent mass matrix; every
//! discrete energy in this library is a nodal sum over that graph.

use crate::error::{Error, Result};
use std::collections::HashMap;

/// Conforming simplicial mesh with labeled boundary facets.
///
/// Elements are re-oriented to positive signed volume on construction.
/// Boundary facets must each lie on exactly one element, and together they
/// must cover the whole mesh boundary (labels partition the boundary).
#[derive(Debug, Clone)]
pub struct SimplicialMesh {
    dim: usize,
    coords: Vec<f64>,
    elements: Vec<usize>,
    bfacets: Vec<usize>,
    bfacet_label: Vec<u32>,
    labels: Vec<String>,
}

impl SimplicialMesh {
    pub fn new(
        dim: usize,
        coords: Vec<f64>,
        mut elements: Vec<usize>,
        facets: Vec<(Vec<usize>, String)>,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Mesh(format!("unsupported dim {dim}")));
        }
        if coords.len() % dim != 0 {
            return Err(Error::Mesh("coordinate array length not a multiple of dim".into()));
        }
        let n_nodes = coords.len() / dim;
        let vpe = dim + 1;
        if elements.len() % vpe != 0 {
            return Err(Error::Mesh("element array length not a multiple of dim+1".into()));
        }
        for &v in &elements {
            if v >= n_nodes {
                return Err(Error::Mesh(format!("element vertex {v} out of range")));
            }
        }

        // consistent orientation: positive signed volume
        let n_elems = elements.len() / vpe;
        for e in 0..n_elems {
            let verts = &elements[e * vpe..(e + 1) * vpe];
            let sv = signed_volume(dim, &coords, verts);
            if sv == 0.0 || !sv.is_finite() {
                return Err(Error::Mesh(format!("element {e} has zero volume")));
            }
            if sv < 0.0 {
                elements.swap(e * vpe + dim - 1, e * vpe + dim);
            }
        }

        // map sorted facet keys to the number of elements containing them
        let mut facet_count: HashMap<Vec<usize>, usize> = HashMap::new();
        for e in 0..n_elems {
            let verts = &elements[e * vpe..(e + 1) * vpe];
            for skip in 0..vpe {
                let mut key: Vec<usize> = verts
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != skip)
                    .map(|(_, &v)| v)
                    .collect();
                key.sort_unstable();
                *facet_count.entry(key).or_insert(0) += 1;
            }
        }

        let mut labels: Vec<String> = Vec::new();
        let label_of = |name: &str, labels: &mut Vec<String>| -> u32 {
            match labels.iter().position(|l| l == name) {
                Some(k) => k as u32,
                None => {
                    labels.push(name.to_string());
                    (labels.len() - 1) as u32
                }
            }
        };

        let mut bfacets = Vec::with_capacity(facets.len() * dim);
        let mut bfacet_label = Vec::with_capacity(facets.len());
        let mut seen: HashMap<Vec<usize>, ()> = HashMap::new();
        for (fverts, name) in &facets {
            if fverts.len() != dim {
                return Err(Error::Mesh(format!(
                    "boundary facet has {} vertices, expected {dim}",
                    fverts.len()
                )));
            }
            let mut key = fverts.clone();
            key.sort_unstable();
            match facet_count.get(&key) {
                Some(1) => {}
                Some(c) => {
                    return Err(Error::Mesh(format!(
                        "facet {key:?} belongs to {c} elements, not a boundary facet"
                    )))
                }
                None => {
                    return Err(Error::Mesh(format!("facet {key:?} not found in any element")))
                }
            }
            if seen.insert(key, ()).is_some() {
                return Err(Error::Mesh("boundary facet labeled twice".into()));
            }
            bfacets.extend_from_slice(fverts);
            let id = label_of(name, &mut labels);
            bfacet_label.push(id);
        }

        // labels must cover the whole boundary
        let n_boundary: usize = facet_count.values().filter(|&&c| c == 1).count();
        if n_boundary != bfacet_label.len() {
            return Err(Error::Mesh(format!(
                "{} boundary facets in mesh, {} labeled",
                n_boundary,
                bfacet_label.len()
            )));
        }

        Ok(SimplicialMesh {
            dim,
            coords,
            elements,
            bfacets,
            bfacet_label,
            labels,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len() / (self.dim + 1)
    }

    pub fn n_boundary_facets(&self) -> usize {
        self.bfacet_label.len()
    }

    #[inline]
    pub fn node(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Node coordinates padded to 3 components.
    pub fn node3(&self, i: usize) -> [f64; 3] {
        let c = self.node(i);
        let mut out = [0.0; 3];
        out[..self.dim].copy_from_slice(c);
        out
    }

    #[inline]
    pub fn element(&self, e: usize) -> &[usize] {
        let vpe = self.dim + 1;
        &self.elements[e * vpe..(e + 1) * vpe]
    }

    pub fn boundary_facet(&self, f: usize) -> (&[usize], &str) {
        let verts = &self.bfacets[f * self.dim..(f + 1) * self.dim];
        let label = &self.labels[self.bfacet_label[f] as usize];
        (verts, label)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Sorted unique node indices lying on facets with any of the given labels.
    pub fn boundary_nodes(&self, labels: &[&str]) -> Vec<usize> {
        let ids: Vec<u32> = self
            .labels
            .iter()
            .enumerate()
            .filter(|(_, l)| labels.contains(&l.as_str()))
            .map(|(k, _)| k as u32)
            .collect();
        let mut nodes: Vec<usize> = (0..self.n_boundary_facets())
            .filter(|&f| ids.contains(&self.bfacet_label[f]))
            .flat_map(|f| self.bfacets[f * self.dim..(f + 1) * self.dim].iter().copied())
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    /// All boundary node indices, sorted.
    pub fn all_boundary_nodes(&self) -> Vec<usize> {
        let mut nodes: Vec<usize> = self.bfacets.clone();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }
}

fn signed_volume(dim: usize, coords: &[f64], verts: &[usize]) -> f64 {
    let p = |v: usize, k: usize| coords[verts[v] * dim + k];
    if dim == 2 {
        let (ax, ay) = (p(1, 0) - p(0, 0), p(1, 1) - p(0, 1));
        let (bx, by) = (p(2, 0) - p(0, 0), p(2, 1) - p(0, 1));
        0.5 * (ax * by - ay * bx)
    } else {
        let a = [p(1, 0) - p(0, 0), p(1, 1) - p(0, 1), p(1, 2) - p(0, 2)];
        let b = [p(2, 0) - p(0, 0), p(2, 1) - p(0, 1), p(2, 2) - p(0, 2)];
        let c = [p(3, 0) - p(0, 0), p(3, 1) - p(0, 1), p(3, 2) - p(0, 2)];
        let det = a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
            + a[2] * (b[0] * c[1] - b[1] * c[0]);
        det / 6.0
    }
}

/// Per-element P1 data: volume and the constant basis gradients.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub vol: f64,
    /// grads[k] is the gradient of the hat function of local vertex k.
    pub grads: [[f64; 3]; 4],
}

pub fn element_geometry(mesh: &SimplicialMesh, e: usize) -> Result<ElementGeometry> {
    let dim = mesh.dim();
    let verts = mesh.element(e);
    let vol = signed_volume(dim, &mesh.coords, verts);
    if vol <= 0.0 || !vol.is_finite() {
        return Err(Error::Mesh(format!("element {e} has non-positive volume")));
    }
    let mut grads = [[0.0; 3]; 4];
    if dim == 2 {
        // grad of vertex k is the inward normal of the opposite edge / (2 vol)
        let x = |v: usize| mesh.node(verts[v]);
        for k in 0..3 {
            let a = x((k + 1) % 3);
            let b = x((k + 2) % 3);
            grads[k] = [(a[1] - b[1]) / (2.0 * vol), (b[0] - a[0]) / (2.0 * vol), 0.0];
        }
    } else {
        // rows of the inverse edge matrix give grads of vertices 1..3
        let x0 = mesh.node3(verts[0]);
        let mut bmat = [[0.0f64; 3]; 3]; // columns are edge vectors
        for j in 0..3 {
            let xj = mesh.node3(verts[j + 1]);
            for i in 0..3 {
                bmat[i][j] = xj[i] - x0[i];
            }
        }
        let det = 6.0 * vol;
        // rows of inverse via adjugate (inv = adj / det, adj = cofactor^T)
        let cof = |r: usize, c: usize| -> f64 {
            let (r1, r2) = ((r + 1) % 3, (r + 2) % 3);
            let (c1, c2) = ((c + 1) % 3, (c + 2) % 3);
            bmat[r1][c1] * bmat[r2][c2] - bmat[r1][c2] * bmat[r2][c1]
        };
        for j in 0..3 {
            for i in 0..3 {
                grads[j + 1][i] = cof(i, j) / det;
            }
        }
        for i in 0..3 {
            grads[0][i] = -(grads[1][i] + grads[2][i] + grads[3][i]);
        }
    }
    Ok(ElementGeometry { vol, grads })
}

pub fn all_element_geometry(mesh: &SimplicialMesh) -> Result<Vec<ElementGeometry>> {
    (0..mesh.n_elements()).map(|e| element_geometry(mesh, e)).collect()
}

/// Sparse symmetric node-coupling graph: `k_ij = -∫ ∇φ_i · ∇φ_j` and the
/// consistent mass matrix on a shared sparsity pattern (diagonal included).
#[derive(Debug, Clone)]
pub struct StiffnessGraph {
    pub n_nodes: usize,
    pub dim: usize,
    /// Largest element diameter.
    pub h: f64,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    k: Vec<f64>,
    m: Vec<f64>,
}

impl StiffnessGraph {
    #[inline]
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    #[inline]
    pub fn col(&self, idx: usize) -> usize {
        self.col_idx[idx] as usize
    }

    #[inline]
    pub fn k_at(&self, idx: usize) -> f64 {
        self.k[idx]
    }

    #[inline]
    pub fn m_at(&self, idx: usize) -> f64 {
        self.m[idx]
    }

    pub fn entry_index(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_range(i);
        self.col_idx[r.clone()]
            .binary_search(&(j as u32))
            .ok()
            .map(|k| r.start + k)
    }

    pub fn k_entry(&self, i: usize, j: usize) -> f64 {
        self.entry_index(i, j).map_or(0.0, |e| self.k[e])
    }

    pub fn m_entry(&self, i: usize, j: usize) -> f64 {
        self.entry_index(i, j).map_or(0.0, |e| self.m[e])
    }

    /// Iterates ordered off-diagonal pairs `(i, j, k_ij, m_ij)`; each
    /// unordered pair appears twice, matching the double sums `Σ_{i,j}` of
    /// the discrete energies.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        (0..self.n_nodes).flat_map(move |i| {
            self.row_range(i).filter_map(move |idx| {
                let j = self.col(idx);
                (j != i).then(|| (i, j, self.k[idx], self.m[idx]))
            })
        })
    }

    /// Row sum Σ_j k_ij (vanishes by partition of unity).
    pub fn k_row_sum(&self, i: usize) -> f64 {
        self.row_range(i).map(|idx| self.k[idx]).sum()
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Builds a graph from explicit symmetric off-diagonal entries
    /// `(i, j, k_ij, m_ij)` given once per unordered pair; diagonals follow
    /// from vanishing row sums of `k` (masses are left zero). Intended for
    /// synthetic couplings in tests and diagnostics.
    pub fn from_raw(n_nodes: usize, dim: usize, h: f64, entries: &[(usize, usize, f64, f64)]) -> Self {
        let mut cols: Vec<Vec<u32>> = (0..n_nodes).map(|i| vec![i as u32]).collect();
        for &(i, j, _, _) in entries {
            cols[i].push(j as u32);
            cols[j].push(i as u32);
        }
        let mut row_ptr = vec![0usize];
        let mut col_idx = Vec::new();
        for list in cols.iter_mut() {
            list.sort_unstable();
            list.dedup();
            col_idx.extend_from_slice(list);
            row_ptr.push(col_idx.len());
        }
        let mut graph = StiffnessGraph {
            n_nodes,
            dim,
            h,
            row_ptr,
            col_idx,
            k: vec![0.0; 0],
            m: vec![0.0; 0],
        };
        graph.k = vec![0.0; graph.col_idx.len()];
        graph.m = vec![0.0; graph.col_idx.len()];
        for &(i, j, kij, mij) in entries {
            let a = graph.entry_index(i, j).unwrap();
            let b = graph.entry_index(j, i).unwrap();
            graph.k[a] += kij;
            graph.k[b] += kij;
            graph.m[a] += mij;
            graph.m[b] += mij;
        }
        for i in 0..n_nodes {
            let sum: f64 = graph
                .row_range(i)
                .filter(|&idx| graph.col(idx) != i)
                .map(|idx| graph.k[idx])
                .sum();
            let diag = graph.entry_index(i, i).unwrap();
            graph.k[diag] = -sum;
        }
        graph
    }
}

/// Exact P1 stiffness and mass assembly.
pub fn assemble_stiffness(mesh: &SimplicialMesh) -> Result<StiffnessGraph> {
    let dim = mesh.dim();
    let vpe = dim + 1;
    let n = mesh.n_nodes();

    let mut neighbors: Vec<Vec<u32>> = vec![Vec::new(); n];
    for e in 0..mesh.n_elements() {
        let verts = mesh.element(e);
        for &a in verts {
            for &b in verts {
                neighbors[a].push(b as u32);
            }
        }
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx: Vec<u32> = Vec::new();
    row_ptr.push(0usize);
    for list in neighbors.iter_mut() {
        list.sort_unstable();
        list.dedup();
        col_idx.extend_from_slice(list);
        row_ptr.push(col_idx.len());
    }
    let nnz = col_idx.len();
    let mut graph = StiffnessGraph {
        n_nodes: n,
        dim,
        h: 0.0,
        row_ptr,
        col_idx,
        k: vec![0.0; nnz],
        m: vec![0.0; nnz],
    };

    let mass_off = 1.0 / ((dim + 1) as f64 * (dim + 2) as f64);
    let mut h_max: f64 = 0.0;
    for e in 0..mesh.n_elements() {
        let geo = element_geometry(mesh, e)?;
        let verts = mesh.element(e);
        for a in 0..vpe {
            for b in 0..vpe {
                let idx = graph
                    .entry_index(verts[a], verts[b])
                    .expect("entry in adjacency");
                let gg = geo.grads[a][0] * geo.grads[b][0]
                    + geo.grads[a][1] * geo.grads[b][1]
                    + geo.grads[a][2] * geo.grads[b][2];
                graph.k[idx] -= geo.vol * gg;
                graph.m[idx] += geo.vol * mass_off * if a == b { 2.0 } else { 1.0 };
            }
        }
        for a in 0..vpe {
            for b in a + 1..vpe {
                let pa = mesh.node(verts[a]);
                let pb = mesh.node(verts[b]);
                let d2: f64 = (0..dim).map(|q| (pa[q] - pb[q]).powi(2)).sum();
                h_max = h_max.max(d2);
            }
        }
    }
    graph.h = h_max.sqrt();
    Ok(graph)
}

/// Weak-acuteness report: the most negative off-diagonal coupling.
#[derive(Debug, Clone, Copy)]
pub struct AcutenessReport {
    pub is_weakly_acute: bool,
    pub worst_pair: Option<(usize, usize)>,
    pub worst_k: f64,
    pub tol: f64,
}

/// A mesh is weakly acute when `k_ij >= -tol` for every off-diagonal pair.
pub fn check_weak_acuteness(graph: &StiffnessGraph, tol: f64) -> AcutenessReport {
    let mut worst_pair = None;
    let mut worst_k = f64::INFINITY;
    for (i, j, kij, _) in graph.pairs() {
        if kij < worst_k {
            worst_k = kij;
            worst_pair = Some((i, j));
        }
    }
    if worst_pair.is_none() {
        worst_k = 0.0;
    }
    AcutenessReport {
        is_weakly_acute: worst_k >= -tol,
        worst_pair,
        worst_k,
        tol,
    }
}

/// Structured mesh patterns for box domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshPattern {
    /// 2-D: each grid square split into 4 triangles by both diagonals.
    Crisscross,
    /// 3-D: each grid cube split into 6 path tetrahedra.
    Kuhn,
}

impl MeshPattern {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "crisscross" => Ok(MeshPattern::Crisscross),
            "kuhn" => Ok(MeshPattern::Kuhn),
            _ => Err(Error::Config(format!("unknown mesh pattern '{s}'"))),
        }
    }
}

fn uniform_axis(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| {
            let t = i as f64 / n as f64;
            a * (1.0 - t) + b * t
        })
        .collect()
}

/// Structured box mesh: crisscross in 2-D, Kuhn split in 3-D. Boundary facets
/// are labeled `x0, x1, y0, y1` (and `z0, z1` in 3-D) by box face.
pub fn generate_box_mesh(
    dim: usize,
    extents: &[f64],
    n: usize,
    pattern: MeshPattern,
) -> Result<SimplicialMesh> {
    if n < 1 {
        return Err(Error::Mesh("need at least one cell per axis".into()));
    }
    if extents.len() != 2 * dim {
        return Err(Error::Mesh(format!(
            "expected {} extents for dim {dim}",
            2 * dim
        )));
    }
    for a in 0..dim {
        if !(extents[2 * a] < extents[2 * a + 1]) {
            return Err(Error::Mesh("degenerate box".into()));
        }
    }
    let axes: Vec<Vec<f64>> = (0..dim)
        .map(|a| uniform_axis(extents[2 * a], extents[2 * a + 1], n))
        .collect();
    match (dim, pattern) {
        (2, MeshPattern::Crisscross) => crisscross_from_axes(&axes[0], &axes[1]),
        (3, MeshPattern::Kuhn) => kuhn_from_axes(&axes[0], &axes[1], &axes[2]),
        _ => Err(Error::Mesh(format!(
            "unsupported dim {dim} for pattern {pattern:?}"
        ))),
    }
}

/// Crisscross triangulation over an arbitrary tensor grid.
pub fn crisscross_from_axes(xs: &[f64], ys: &[f64]) -> Result<SimplicialMesh> {
    let (nx, ny) = (xs.len() - 1, ys.len() - 1);
    let corner = |i: usize, j: usize| j * (nx + 1) + i;
    let n_corner = (nx + 1) * (ny + 1);
    let center = |i: usize, j: usize| n_corner + j * nx + i;

    let mut coords = Vec::with_capacity(2 * (n_corner + nx * ny));
    for y in ys {
        for x in xs {
            coords.push(*x);
            coords.push(*y);
        }
    }
    for j in 0..ny {
        for i in 0..nx {
            coords.push(0.5 * (xs[i] + xs[i + 1]));
            coords.push(0.5 * (ys[j] + ys[j + 1]));
        }
    }

    let mut elements = Vec::with_capacity(4 * nx * ny * 3);
    for j in 0..ny {
        for i in 0..nx {
            let (bl, br) = (corner(i, j), corner(i + 1, j));
            let (tl, tr) = (corner(i, j + 1), corner(i + 1, j + 1));
            let c = center(i, j);
            for tri in [[bl, br, c], [br, tr, c], [tr, tl, c], [tl, bl, c]] {
                elements.extend_from_slice(&tri);
            }
        }
    }
    finish_box_mesh(2, coords, elements, &[xs[0], xs[nx], ys[0], ys[ny]])
}

/// Kuhn (path tetrahedra) triangulation over an arbitrary tensor grid.
pub fn kuhn_from_axes(xs: &[f64], ys: &[f64], zs: &[f64]) -> Result<SimplicialMesh> {
    let (nx, ny, nz) = (xs.len() - 1, ys.len() - 1, zs.len() - 1);
    let node = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;

    let mut coords = Vec::with_capacity(3 * (nx + 1) * (ny + 1) * (nz + 1));
    for z in zs {
        for y in ys {
            for x in xs {
                coords.push(*x);
                coords.push(*y);
                coords.push(*z);
            }
        }
    }

    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut elements = Vec::with_capacity(6 * nx * ny * nz * 4);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                for perm in PERMS {
                    let mut at = [i, j, k];
                    let mut tet = [node(at[0], at[1], at[2]), 0, 0, 0];
                    for (step, &axis) in perm.iter().enumerate() {
                        at[axis] += 1;
                        tet[step + 1] = node(at[0], at[1], at[2]);
                    }
                    elements.extend_from_slice(&tet);
                }
            }
        }
    }
    finish_box_mesh(
        3,
        coords,
        elements,
        &[xs[0], xs[nx], ys[0], ys[ny], zs[0], zs[nz]],
    )
}

/// Collects once-occurring element facets as the boundary and labels them by
/// the box face their nodes lie on.
fn finish_box_mesh(
    dim: usize,
    coords: Vec<f64>,
    elements: Vec<usize>,
    extents: &[f64],
) -> Result<SimplicialMesh> {
    let classify = |fverts: &[usize]| -> Result<String> {
        for axis in 0..dim {
            for side in 0..2 {
                let target = extents[2 * axis + side];
                if fverts.iter().all(|&v| coords[v * dim + axis] == target) {
                    let name = ["x", "y", "z"][axis];
                    return Ok(format!("{name}{side}"));
                }
            }
        }
        Err(Error::Mesh("boundary facet not on any box face".into()))
    };
    let facets = boundary_facets_of(dim, &elements)?
        .into_iter()
        .map(|f| {
            let label = classify(&f)?;
            Ok((f, label))
        })
        .collect::<Result<Vec<_>>>()?;
    SimplicialMesh::new(dim, coords, elements, facets)
}

/// Once-occurring element facets (each returned with its in-element vertex
/// order), i.e. the mesh boundary.
pub fn boundary_facets_of(dim: usize, elements: &[usize]) -> Result<Vec<Vec<usize>>> {
    let vpe = dim + 1;
    let mut count: HashMap<Vec<usize>, (usize, Vec<usize>)> = HashMap::new();
    for verts in elements.chunks(vpe) {
        for skip in 0..vpe {
            let fverts: Vec<usize> = verts
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != skip)
                .map(|(_, &v)| v)
                .collect();
            let mut key = fverts.clone();
            key.sort_unstable();
            count
                .entry(key)
                .and_modify(|e| e.0 += 1)
                .or_insert((1, fverts));
        }
    }
    let mut out: Vec<Vec<usize>> = count
        .into_values()
        .filter_map(|(c, fverts)| (c == 1).then_some(fverts))
        .collect();
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_square(n: usize) -> SimplicialMesh {
        generate_box_mesh(2, &[0.0, 1.0, 0.0, 1.0], n, MeshPattern::Crisscross).unwrap()
    }

    fn unit_cube(n: usize) -> SimplicialMesh {
        generate_box_mesh(3, &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0], n, MeshPattern::Kuhn).unwrap()
    }

    #[test]
    fn crisscross_counts() {
        let m = unit_square(1);
        assert_eq!(m.n_nodes(), 5);
        assert_eq!(m.n_elements(), 4);
        let m = unit_square(2);
        assert_eq!(m.n_nodes(), 13);
        assert_eq!(m.n_elements(), 16);
        assert_eq!(m.n_boundary_facets(), 8);
    }

    #[test]
    fn kuhn_counts() {
        let m = unit_cube(1);
        assert_eq!(m.n_nodes(), 8);
        assert_eq!(m.n_elements(), 6);
        assert_eq!(m.n_boundary_facets(), 12);
    }

    #[test]
    fn volumes_positive_and_sum_to_domain() {
        for mesh in [unit_square(3), unit_cube(2)] {
            let mut total = 0.0;
            for e in 0..mesh.n_elements() {
                let geo = element_geometry(&mesh, e).unwrap();
                assert!(geo.vol > 0.0);
                total += geo.vol;
            }
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unsupported_dim_rejected() {
        assert!(generate_box_mesh(2, &[0.0, 1.0, 0.0, 1.0], 2, MeshPattern::Kuhn).is_err());
        assert!(generate_box_mesh(3, &[0.0; 6], 2, MeshPattern::Kuhn).is_err());
        assert!(generate_box_mesh(2, &[0.0, 1.0, 0.0, 1.0], 0, MeshPattern::Crisscross).is_err());
    }

    #[test]
    fn degenerate_element_rejected() {
        let coords = vec![0.0, 0.0, 1.0, 0.0, 2.0, 0.0]; // collinear
        let res = SimplicialMesh::new(2, coords, vec![0, 1, 2], vec![]);
        assert!(res.is_err());
    }

    #[test]
    fn reference_triangle_couplings() {
        // (0,0), (1,0), (0,1): k between leg ends = 0, right angle to legs = 1/2
        let coords = vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        let facets = vec![
            (vec![0, 1], "b".to_string()),
            (vec![1, 2], "d".to_string()),
            (vec![2, 0], "l".to_string()),
        ];
        let mesh = SimplicialMesh::new(2, coords, vec![0, 1, 2], facets).unwrap();
        let g = assemble_stiffness(&mesh).unwrap();
        assert!((g.k_entry(1, 2)).abs() < 1e-15);
        assert!((g.k_entry(0, 1) - 0.5).abs() < 1e-15);
        assert!((g.k_entry(0, 2) - 0.5).abs() < 1e-15);
        // mass: diag vol/6, off vol/12 with vol = 1/2
        assert!((g.m_entry(0, 0) - 1.0 / 12.0).abs() < 1e-15);
        assert!((g.m_entry(0, 1) - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn assembly_deterministic() {
        let a = assemble_stiffness(&unit_square(4)).unwrap();
        let b = assemble_stiffness(&unit_square(4)).unwrap();
        assert_eq!(a.k, b.k);
        assert_eq!(a.m, b.m);
    }

    #[test]
    fn row_sums_vanish() {
        for graph in [
            assemble_stiffness(&unit_square(5)).unwrap(),
            assemble_stiffness(&unit_cube(3)).unwrap(),
        ] {
            for i in 0..graph.n_nodes {
                assert!(graph.k_row_sum(i).abs() < 1e-13, "row {i}");
            }
        }
    }

    #[test]
    fn symmetry_of_couplings() {
        let g = assemble_stiffness(&unit_cube(2)).unwrap();
        for (i, j, kij, mij) in g.pairs() {
            assert_eq!(kij, g.k_entry(j, i));
            assert_eq!(mij, g.m_entry(j, i));
        }
    }

    #[test]
    fn mass_matrix_total() {
        // row sums of mass give lumped masses; total = domain measure
        let g = assemble_stiffness(&unit_cube(2)).unwrap();
        let mut total = 0.0;
        for i in 0..g.n_nodes {
            total += g.row_range(i).map(|idx| g.m_at(idx)).sum::<f64>();
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    fn fe_dirichlet_integral(mesh: &SimplicialMesh, s: &[f64]) -> f64 {
        // direct per-element quadrature of |grad s_h|^2 (independent route)
        let mut total = 0.0;
        for e in 0..mesh.n_elements() {
            let geo = element_geometry(mesh, e).unwrap();
            let verts = mesh.element(e);
            let mut grad = [0.0; 3];
            for (k, &v) in verts.iter().enumerate() {
                for q in 0..3 {
                    grad[q] += s[v] * geo.grads[k][q];
                }
            }
            total += geo.vol * (grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2]);
        }
        total
    }

    #[test]
    fn dirichlet_integral_identity() {
        // FE quadrature of |grad s|^2 equals (1/2) sum k_ij (delta_ij s)^2
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (mesh, graph) in [
            (unit_square(4), assemble_stiffness(&unit_square(4)).unwrap()),
            (unit_cube(2), assemble_stiffness(&unit_cube(2)).unwrap()),
        ] {
            for _ in 0..50 {
                let s: Vec<f64> = (0..mesh.n_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let direct = fe_dirichlet_integral(&mesh, &s);
                let nodal: f64 = graph
                    .pairs()
                    .map(|(i, j, kij, _)| 0.5 * kij * (s[i] - s[j]).powi(2))
                    .sum();
                assert!(
                    (direct - nodal).abs() <= 1e-12 * (1.0 + direct.abs()),
                    "direct {direct} vs nodal {nodal}"
                );
            }
        }
    }

    #[test]
    fn crisscross_weakly_acute() {
        let g = assemble_stiffness(&unit_square(4)).unwrap();
        let report = check_weak_acuteness(&g, 0.0);
        assert!(report.is_weakly_acute, "worst {:?}", report.worst_k);
    }

    #[test]
    fn kuhn_weakly_acute() {
        let g = assemble_stiffness(&unit_cube(3)).unwrap();
        let report = check_weak_acuteness(&g, 1e-12);
        assert!(report.is_weakly_acute, "worst {:?}", report.worst_k);
    }

    #[test]
    fn obtuse_triangle_detected() {
        let coords = vec![0.0, 0.0, 1.0, 0.0, -0.5, 0.2];
        let facets = vec![
            (vec![0, 1], "a".to_string()),
            (vec![1, 2], "b".to_string()),
            (vec![2, 0], "c".to_string()),
        ];
        let mesh = SimplicialMesh::new(2, coords, vec![0, 1, 2], facets).unwrap();
        let g = assemble_stiffness(&mesh).unwrap();
        let report = check_weak_acuteness(&g, 1e-12);
        assert!(!report.is_weakly_acute);
        // the long edge (between nodes 1 and 2) carries the negative coupling
        let (i, j) = report.worst_pair.unwrap();
        assert_eq!((i.min(j), i.max(j)), (1, 2));
        assert!(report.worst_k < 0.0);
    }

    #[test]
    fn h_is_max_diameter() {
        let m = unit_square(4);
        let g = assemble_stiffness(&m).unwrap();
        // crisscross: longest edge is the cell side
        assert!((g.h - 0.25).abs() < 1e-14);
        let c = unit_cube(2);
        let g = assemble_stiffness(&c).unwrap();
        // Kuhn tets contain the main diagonal of each cube
        assert!((g.h - 3.0f64.sqrt() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn boundary_nodes_by_label() {
        let m = unit_square(2);
        let left = m.boundary_nodes(&["x0"]);
        assert_eq!(left.len(), 3);
        for &v in &left {
            assert_eq!(m.node(v)[0], 0.0);
        }
        let all = m.all_boundary_nodes();
        assert_eq!(all.len(), 8);
    }

    #[test]
    fn facet_validation() {
        // facet not on the boundary is rejected
        let coords = vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let elements = vec![0, 1, 2, 1, 3, 2];
        let facets = vec![
            (vec![0, 1], "b".into()),
            (vec![1, 2], "diag".into()), // interior edge
            (vec![1, 3], "r".into()),
            (vec![3, 2], "t".into()),
            (vec![2, 0], "l".into()),
        ];
        assert!(SimplicialMesh::new(2, coords.clone(), elements.clone(), facets).is_err());
        // missing a boundary facet is rejected too
        let facets = vec![
            (vec![0, 1], "b".into()),
            (vec![1, 3], "r".into()),
            (vec![3, 2], "t".into()),
        ];
        assert!(SimplicialMesh::new(2, coords, elements, facets).is_err());
    }
}
