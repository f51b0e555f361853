//! Reference mesh for the colloidal-inclusion experiment: a square-section
//! prism with a spherical hole.
//!
//! Recipe: a tensor-product grid, fine near the inclusion and geometrically
//! graded away from it, split into Kuhn path tetrahedra (weakly acute on
//! boxes). Grid nodes falling inside the sphere are dropped together with
//! every tetrahedron touching them; the nodes left on the hole surface are
//! projected radially onto the sphere, which polygonizes the inclusion
//! boundary. The fine spacing controls the first-layer collar and is the
//! calibration knob for the initial interaction energy of the scenario.

use crate::error::{Error, Result};
use crate::mesh::{boundary_facets_of, SimplicialMesh};

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Cross-section extents `[-0.25 sqrt(2), 0.75 sqrt(2)]` per axis.
pub const CROSS_LO: f64 = -0.25 * SQRT2;
pub const CROSS_HI: f64 = 0.75 * SQRT2;
/// Prism height 6 centered about z = 0.
pub const HEIGHT_HALF: f64 = 3.0;
/// Inclusion center and radius.
pub const CENTER: [f64; 3] = [SQRT2 / 4.0, SQRT2 / 4.0, 0.0];
pub const RADIUS: f64 = 0.283 / SQRT2;

/// Boundary label of the inclusion surface.
pub const INCLUSION_LABEL: &str = "inclusion";

/// Geometric knobs of the reference recipe.
#[derive(Debug, Clone, Copy)]
pub struct SaturnRecipe {
    /// Grid spacing in the fine box around the inclusion.
    pub fine_h: f64,
    /// Half-extent of the fine box (in x, y around the center; in z around 0).
    pub fine_half: f64,
    /// Geometric growth ratio of cell sizes outside the fine box.
    pub growth: f64,
}

impl Default for SaturnRecipe {
    fn default() -> Self {
        SaturnRecipe {
            fine_h: 0.0215,
            fine_half: 0.34,
            growth: 1.45,
        }
    }
}

/// Monotone coordinate axis: uniform `fine_h` cells on
/// `[fine_lo, fine_hi]`, geometrically growing cells out to `[lo, hi]`
/// (tail steps rescaled so the end points are hit exactly).
fn graded_axis(lo: f64, hi: f64, fine_lo: f64, fine_hi: f64, fine_h: f64, growth: f64) -> Vec<f64> {
    assert!(lo <= fine_lo && fine_lo < fine_hi && fine_hi <= hi);
    let n_fine = ((fine_hi - fine_lo) / fine_h).round().max(1.0) as usize;
    let h = (fine_hi - fine_lo) / n_fine as f64;

    let tail = |span: f64| -> Vec<f64> {
        // steps h*g, h*g^2, ... covering span, rescaled to land exactly
        let mut steps = Vec::new();
        let mut acc = 0.0;
        let mut step = h;
        while acc < span - 1e-12 {
            step *= growth;
            steps.push(step);
            acc += step;
        }
        if steps.is_empty() {
            return steps;
        }
        let scale = span / acc;
        steps.iter().map(|s| s * scale).collect()
    };

    let mut coords = Vec::new();
    // left tail (reversed so the axis is ascending)
    let left = tail(fine_lo - lo);
    coords.push(lo);
    let mut x = lo;
    for s in left.iter().rev() {
        x += s;
        coords.push(x);
    }
    // force the fine-region start to be exact
    *coords.last_mut().unwrap() = fine_lo;
    for k in 1..=n_fine {
        coords.push(fine_lo + h * k as f64);
    }
    *coords.last_mut().unwrap() = fine_hi;
    let right = tail(hi - fine_hi);
    let mut x = fine_hi;
    for s in &right {
        x += s;
        coords.push(x);
    }
    *coords.last_mut().unwrap() = hi;
    coords.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    coords
}

/// Builds the reference prism-with-inclusion mesh.
pub fn saturn_reference_mesh(recipe: &SaturnRecipe) -> Result<SimplicialMesh> {
    let c = CENTER;
    let r = RADIUS;
    let xs = graded_axis(
        CROSS_LO,
        CROSS_HI,
        c[0] - recipe.fine_half,
        c[0] + recipe.fine_half,
        recipe.fine_h,
        recipe.growth,
    );
    let ys = graded_axis(
        CROSS_LO,
        CROSS_HI,
        c[1] - recipe.fine_half,
        c[1] + recipe.fine_half,
        recipe.fine_h,
        recipe.growth,
    );
    let zs = graded_axis(
        -HEIGHT_HALF,
        HEIGHT_HALF,
        -recipe.fine_half,
        recipe.fine_half,
        recipe.fine_h,
        recipe.growth,
    );

    let (nx, ny, nz) = (xs.len() - 1, ys.len() - 1, zs.len() - 1);
    let node_id = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;
    let n_grid = (nx + 1) * (ny + 1) * (nz + 1);

    let mut coords = vec![0.0f64; 3 * n_grid];
    for (k, z) in zs.iter().enumerate() {
        for (j, y) in ys.iter().enumerate() {
            for (i, x) in xs.iter().enumerate() {
                let id = node_id(i, j, k);
                coords[3 * id] = *x;
                coords[3 * id + 1] = *y;
                coords[3 * id + 2] = *z;
            }
        }
    }

    fn dist_to(coords: &[f64], id: usize, c: &[f64; 3]) -> f64 {
        let p = &coords[3 * id..3 * id + 3];
        ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + (p[2] - c[2]).powi(2)).sqrt()
    }
    let inside: Vec<bool> = (0..n_grid).map(|id| dist_to(&coords, id, &c) < r).collect();

    // Kuhn split, dropping tetrahedra that touch interior nodes
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut elements: Vec<usize> = Vec::new();
    let mut touches_hole = vec![false; n_grid];
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                for perm in PERMS {
                    let mut at = [i, j, k];
                    let mut tet = [node_id(at[0], at[1], at[2]), 0, 0, 0];
                    for (step, &axis) in perm.iter().enumerate() {
                        at[axis] += 1;
                        tet[step + 1] = node_id(at[0], at[1], at[2]);
                    }
                    if tet.iter().any(|&v| inside[v]) {
                        for &v in &tet {
                            if !inside[v] {
                                touches_hole[v] = true;
                            }
                        }
                    } else {
                        elements.extend_from_slice(&tet);
                    }
                }
            }
        }
    }

    // project hole-surface nodes radially onto the sphere
    for id in 0..n_grid {
        if touches_hole[id] && !inside[id] {
            let d = dist_to(&coords, id, &c);
            if d > 1e-12 {
                let scale = r / d;
                for q in 0..3 {
                    coords[3 * id + q] = c[q] + (coords[3 * id + q] - c[q]) * scale;
                }
            }
        }
    }

    // drop unused nodes and compact indices
    let mut used = vec![false; n_grid];
    for &v in &elements {
        used[v] = true;
    }
    let mut remap = vec![usize::MAX; n_grid];
    let mut new_coords = Vec::new();
    let mut count = 0usize;
    for id in 0..n_grid {
        if used[id] {
            remap[id] = count;
            new_coords.extend_from_slice(&coords[3 * id..3 * id + 3]);
            count += 1;
        }
    }
    for v in elements.iter_mut() {
        *v = remap[*v];
    }

    // positive orientation before validity checks (Kuhn permutation parity
    // flips half the tets)
    for tet in elements.chunks_mut(4) {
        if signed_vol(&new_coords, tet) < 0.0 {
            tet.swap(2, 3);
        }
    }
    for (e, tet) in elements.chunks(4).enumerate() {
        let v = signed_vol(&new_coords, tet);
        if v <= 1e-16 {
            return Err(Error::Mesh(format!(
                "inclusion projection degenerated element {e} (volume {v:.3e}); refine the recipe"
            )));
        }
    }

    // classify boundary facets: sphere surface or box face
    let on_sphere = |v: usize| -> bool {
        let p = &new_coords[3 * v..3 * v + 3];
        let d = ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + (p[2] - c[2]).powi(2)).sqrt();
        (d - r).abs() < 1e-9
    };
    let facets = boundary_facets_of(3, &elements)?
        .into_iter()
        .map(|f| {
            if f.iter().all(|&v| on_sphere(v)) {
                return Ok((f, INCLUSION_LABEL.to_string()));
            }
            for (axis, (lo, hi)) in [
                (0usize, (CROSS_LO, CROSS_HI)),
                (1, (CROSS_LO, CROSS_HI)),
                (2, (-HEIGHT_HALF, HEIGHT_HALF)),
            ] {
                for (side, target) in [(0usize, lo), (1, hi)] {
                    if f.iter().all(|&v| new_coords[3 * v + axis] == target) {
                        let name = ["x", "y", "z"][axis];
                        return Ok((f, format!("{name}{side}")));
                    }
                }
            }
            Err(Error::Mesh(
                "boundary facet neither on the inclusion nor on a box face".into(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    SimplicialMesh::new(3, new_coords, elements, facets)
}

fn signed_vol(coords: &[f64], tet: &[usize]) -> f64 {
    let p = |v: usize, q: usize| coords[3 * tet[v] + q];
    let a = [p(1, 0) - p(0, 0), p(1, 1) - p(0, 1), p(1, 2) - p(0, 2)];
    let b = [p(2, 0) - p(0, 0), p(2, 1) - p(0, 1), p(2, 2) - p(0, 2)];
    let c = [p(3, 0) - p(0, 0), p(3, 1) - p(0, 1), p(3, 2) - p(0, 2)];
    (a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0]))
        / 6.0
}

/// Outward normal of the inclusion at a point of its surface.
pub fn inclusion_normal(p: &[f64]) -> [f64; 3] {
    let mut v = [p[0] - CENTER[0], p[1] - CENTER[1], p[2] - CENTER[2]];
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if n < 1e-14 {
        return [0.0, 0.0, 1.0];
    }
    for q in v.iter_mut() {
        *q /= n;
    }
    v
}
