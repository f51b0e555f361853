//! Dense symmetric d×d tensor algebra for d ∈ {2, 3}.
//!
//! Provides the spectral decomposition (closed-form, trigonometric for 3×3),
//! the rank-one projection `Π(A) = (λ₁ - λ₂) v₁ ⊗ v₁`, construction of
//! uniaxial tensors `s (n ⊗ n - I/d)`, and the trace-power rank oracle.
//! Directors are stored as `[f64; 3]` with a trailing zero in 2-D.

use crate::error::{Error, Result};

/// Symmetric tensor, upper triangle stored row-major.
///
/// 3-D layout: `[a00, a01, a02, a11, a12, a22]`; 2-D uses the first three
/// slots `[a00, a01, a11]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymTensor {
    dim: usize,
    v: [f64; 6],
}

impl SymTensor {
    pub fn zero(dim: usize) -> Self {
        assert!(dim == 2 || dim == 3, "SymTensor supports d = 2, 3");
        SymTensor { dim, v: [0.0; 6] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut t = Self::zero(dim);
        for i in 0..dim {
            t.set(i, i, 1.0);
        }
        t
    }

    pub fn from_entries(dim: usize, entries: &[f64]) -> Self {
        let mut t = Self::zero(dim);
        let n = dim * (dim + 1) / 2;
        assert_eq!(entries.len(), n);
        t.v[..n].copy_from_slice(entries);
        t
    }

    /// Outer product `u ⊗ u`.
    pub fn outer(dim: usize, u: &[f64; 3]) -> Self {
        let mut t = Self::zero(dim);
        for i in 0..dim {
            for j in i..dim {
                t.set(i, j, u[i] * u[j]);
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        if self.dim == 2 {
            // (0,0) (0,1) (1,1)
            i + j
        } else {
            // (0,0) (0,1) (0,2) (1,1) (1,2) (2,2)
            match (i, j) {
                (0, j) => j,
                (1, j) => 2 + j,
                _ => 5,
            }
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.v[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, val: f64) {
        let k = self.idx(i, j);
        self.v[k] = val;
    }

    pub fn entries(&self) -> &[f64] {
        &self.v[..self.dim * (self.dim + 1) / 2]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn add(&self, other: &SymTensor) -> SymTensor {
        debug_assert_eq!(self.dim, other.dim);
        let mut t = *self;
        for k in 0..6 {
            t.v[k] += other.v[k];
        }
        t
    }

    pub fn sub(&self, other: &SymTensor) -> SymTensor {
        debug_assert_eq!(self.dim, other.dim);
        let mut t = *self;
        for k in 0..6 {
            t.v[k] -= other.v[k];
        }
        t
    }

    pub fn scale(&self, a: f64) -> SymTensor {
        let mut t = *self;
        for k in 0..6 {
            t.v[k] *= a;
        }
        t
    }

    /// Frobenius inner product `A : B`.
    pub fn frob_dot(&self, other: &SymTensor) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.get(i, j) * other.get(i, j);
            }
        }
        s
    }

    pub fn frob_norm2(&self) -> f64 {
        self.frob_dot(self)
    }

    pub fn frob_norm(&self) -> f64 {
        self.frob_norm2().sqrt()
    }

    /// Matrix-vector product.
    pub fn apply(&self, u: &[f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[i] += self.get(i, j) * u[j];
            }
        }
        out
    }

    /// `tr(A^k)` for k = 1, 2, 3.
    pub fn trace_power(&self, k: usize) -> f64 {
        match k {
            1 => self.trace(),
            // tr(A²) = |A|_F² for symmetric A
            2 => self.frob_norm2(),
            3 => {
                let mut s = 0.0;
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        for l in 0..self.dim {
                            s += self.get(i, j) * self.get(j, l) * self.get(l, i);
                        }
                    }
                }
                s
            }
            _ => panic!("trace_power supports k = 1..3"),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|x| x.is_finite())
    }

    /// Operator 2-norm (largest eigenvalue magnitude).
    pub fn op_norm(&self) -> f64 {
        let eig = eig_sym(self).expect("finite tensor");
        (0..self.dim).map(|i| eig.lambda[i].abs()).fold(0.0, f64::max)
    }
}

/// Spectral decomposition of a symmetric tensor: eigenvalues in descending
/// order with orthonormal eigenvectors. Only the first `d` slots are
/// meaningful in 2-D.
#[derive(Debug, Clone, Copy)]
pub struct EigenDecomp {
    pub dim: usize,
    pub lambda: [f64; 3],
    pub vectors: [[f64; 3]; 3],
}

// ---- small vector helpers -------------------------------------------------

#[inline]
pub fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm3(a: &[f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

#[inline]
pub fn scale3(a: &[f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn add3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn normalize3(a: &[f64; 3]) -> [f64; 3] {
    let n = norm3(a);
    scale3(a, 1.0 / n)
}

/// Deterministic sign convention: the largest-magnitude component is made
/// positive (first index wins ties).
fn fix_sign(v: &mut [f64; 3]) {
    let mut idx = 0;
    for k in 1..3 {
        if v[k].abs() > v[idx].abs() {
            idx = k;
        }
    }
    if v[idx] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Deterministic unit vector orthogonal to `w` (|w| = 1): Gram-Schmidt of the
/// coordinate axis least aligned with `w`.
fn any_orthogonal(w: &[f64; 3], dim: usize) -> [f64; 3] {
    if dim == 2 {
        return [-w[1], w[0], 0.0];
    }
    let mut axis = 0;
    for k in 1..3 {
        if w[k].abs() < w[axis].abs() {
            axis = k;
        }
    }
    let mut e = [0.0; 3];
    e[axis] = 1.0;
    let v = sub3(&e, &scale3(w, dot3(w, &e)));
    normalize3(&v)
}

/// Null vector of a (near-)singular symmetric 3×3 matrix, given as rows.
/// Falls back to the orthogonal complement of the largest row when the rank
/// deficiency exceeds one.
fn null_vector_3(rows: &[[f64; 3]; 3], row_scale: f64) -> [f64; 3] {
    let c01 = cross3(&rows[0], &rows[1]);
    let c12 = cross3(&rows[1], &rows[2]);
    let c20 = cross3(&rows[2], &rows[0]);
    let (mut best, mut best_n) = (c01, norm3(&c01));
    if norm3(&c12) > best_n {
        best = c12;
        best_n = norm3(&c12);
    }
    if norm3(&c20) > best_n {
        best = c20;
        best_n = norm3(&c20);
    }
    let floor = 1e4 * f64::EPSILON * row_scale * row_scale;
    if best_n > floor {
        return scale3(&best, 1.0 / best_n);
    }
    // rank <= 1: null space is the plane orthogonal to the largest row
    let mut w = rows[0];
    for r in rows.iter().skip(1) {
        if norm3(r) > norm3(&w) {
            w = *r;
        }
    }
    if norm3(&w) > 1e4 * f64::EPSILON * row_scale {
        any_orthogonal(&normalize3(&w), 3)
    } else {
        [1.0, 0.0, 0.0]
    }
}

/// Spectral decomposition with analytic eigenvalues (quadratic formula in 2-D,
/// trigonometric form in 3-D). Eigenvalues are returned in descending order;
/// eigenvectors carry the deterministic sign convention.
pub fn eig_sym(a: &SymTensor) -> Result<EigenDecomp> {
    if !a.is_finite() {
        return Err(Error::Field("eig_sym: non-finite entries".into()));
    }
    match a.dim {
        2 => Ok(eig_sym_2(a)),
        _ => Ok(eig_sym_3(a)),
    }
}

/// Polishes an orthonormal frame with a few Jacobi rotations on the projected
/// matrix. The closed-form construction leaves sqrt(eps)-level mixing inside
/// nearly degenerate eigenspaces; the rotations resolve it to roundoff while
/// preserving orthonormality exactly.
fn jacobi_polish(a: &SymTensor, vecs: &mut [[f64; 3]; 3]) {
    let dim = a.dim();
    let scale = 1.0 + a.entries().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for _ in 0..4 {
        let mut rotated = false;
        for p in 0..dim {
            for q in p + 1..dim {
                let av_q = a.apply(&vecs[q]);
                let bpq = dot3(&vecs[p], &av_q);
                if bpq.abs() <= 2.0 * f64::EPSILON * scale {
                    continue;
                }
                let bpp = dot3(&vecs[p], &a.apply(&vecs[p]));
                let bqq = dot3(&vecs[q], &av_q);
                let tau = (bqq - bpp) / (2.0 * bpq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..3 {
                    let (vp, vq) = (vecs[p][k], vecs[q][k]);
                    vecs[p][k] = c * vp - s * vq;
                    vecs[q][k] = s * vp + c * vq;
                }
                rotated = true;
            }
        }
        if !rotated {
            break;
        }
    }
}

/// Rayleigh quotients recover full precision where the closed-form roots
/// split degenerate eigenvalues at the sqrt(eps) level; the frame is then
/// re-sorted descending and signs are normalized.
fn refine_and_order(a: &SymTensor, mut vecs: [[f64; 3]; 3]) -> EigenDecomp {
    let dim = a.dim();
    jacobi_polish(a, &mut vecs);
    let mut lam = [0.0f64; 3];
    for i in 0..dim {
        lam[i] = dot3(&vecs[i], &a.apply(&vecs[i]));
    }
    // insertion sort, descending
    for i in 1..dim {
        let mut k = i;
        while k > 0 && lam[k] > lam[k - 1] {
            lam.swap(k, k - 1);
            vecs.swap(k, k - 1);
            k -= 1;
        }
    }
    for v in vecs.iter_mut().take(dim) {
        fix_sign(v);
    }
    EigenDecomp {
        dim,
        lambda: lam,
        vectors: vecs,
    }
}

fn eig_sym_2(a: &SymTensor) -> EigenDecomp {
    let (p, q, r) = (a.get(0, 0), a.get(0, 1), a.get(1, 1));
    let mean = 0.5 * (p + r);
    let half_diff = 0.5 * (p - r);
    let root = half_diff.hypot(q);
    let l1 = mean + root;

    let v1 = if root <= f64::EPSILON * (1.0 + mean.abs()) {
        [1.0, 0.0, 0.0]
    } else {
        // pick the better-conditioned of the two analytic expressions
        let c1 = [q, l1 - p, 0.0];
        let c2 = [l1 - r, q, 0.0];
        if norm3(&c1) >= norm3(&c2) {
            normalize3(&c1)
        } else {
            normalize3(&c2)
        }
    };
    let v2 = [-v1[1], v1[0], 0.0];
    let mut out = refine_and_order(a, [v1, v2, [0.0, 0.0, 1.0]]);
    out.vectors[2] = [0.0, 0.0, 1.0];
    out
}

fn eig_sym_3(a: &SymTensor) -> EigenDecomp {
    let scale = a.entries().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return EigenDecomp {
            dim: 3,
            lambda: [0.0; 3],
            vectors: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        };
    }

    let q = a.trace() / 3.0;
    let off2 = a.get(0, 1).powi(2) + a.get(0, 2).powi(2) + a.get(1, 2).powi(2);
    let p2 = (a.get(0, 0) - q).powi(2)
        + (a.get(1, 1) - q).powi(2)
        + (a.get(2, 2) - q).powi(2)
        + 2.0 * off2;
    let p = (p2 / 6.0).sqrt();

    if p <= 20.0 * f64::EPSILON * scale {
        // triple eigenvalue
        return EigenDecomp {
            dim: 3,
            lambda: [q, q, q],
            vectors: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        };
    }

    // B = (A - qI)/p has eigenvalues 2 cos(phi + 2k pi / 3)
    let b = |i: usize, j: usize| (a.get(i, j) - if i == j { q } else { 0.0 }) / p;
    let det_b = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(1, 2))
        - b(0, 1) * (b(0, 1) * b(2, 2) - b(1, 2) * b(0, 2))
        + b(0, 2) * (b(0, 1) * b(1, 2) - b(1, 1) * b(0, 2));
    let r = (det_b / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;

    let l1 = q + 2.0 * p * phi.cos();
    let l3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let l2 = 3.0 * q - l1 - l3;

    let rows_of = |lam: f64| -> [[f64; 3]; 3] {
        let mut rows = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                rows[i][j] = a.get(i, j) - if i == j { lam } else { 0.0 };
            }
        }
        rows
    };

    let gap12 = l1 - l2;
    let gap23 = l2 - l3;
    let multiple = 40.0 * f64::EPSILON * scale;

    // resolve the better-isolated extreme eigenvalue first
    let (v_first, lam_rest, first_is_top) = if gap12 >= gap23 {
        (null_vector_3(&rows_of(l1), scale), l3, true)
    } else {
        (null_vector_3(&rows_of(l3), scale), l1, false)
    };
    let rest_gap = if first_is_top { gap23 } else { gap12 };

    let v_other = if rest_gap <= multiple {
        any_orthogonal(&v_first, 3)
    } else {
        let raw = null_vector_3(&rows_of(lam_rest), scale);
        let proj = sub3(&raw, &scale3(&v_first, dot3(&raw, &v_first)));
        if norm3(&proj) > 1e-8 {
            normalize3(&proj)
        } else {
            any_orthogonal(&v_first, 3)
        }
    };
    let v_mid = cross3(&v_first, &v_other);

    let (v1, v2, v3) = if first_is_top {
        (v_first, v_mid, v_other)
    } else {
        (v_other, v_mid, v_first)
    };
    refine_and_order(a, [v1, v2, v3])
}

/// Rank-one projection `Π(A) = (λ₁ - λ₂) v₁ ⊗ v₁`.
///
/// The result is positive semidefinite with rank ≤ 1; line tensors are fixed
/// points. `Π` is Lipschitz with constant 3 in the operator 2-norm, so nearly
/// degenerate leading eigenvalues need no special casing: the prefactor
/// vanishes with the gap.
pub fn project_rank_one(a: &SymTensor) -> SymTensor {
    let eig = eig_sym(a).expect("finite tensor");
    let gap = (eig.lambda[0] - eig.lambda[1]).max(0.0);
    SymTensor::outer(a.dim, &eig.vectors[0]).scale(gap)
}

/// Uniaxial tensor `Q = s (n ⊗ n - I/d)` for a unit director `n`.
pub fn uniaxial(s: f64, n: &[f64; 3], dim: usize) -> Result<SymTensor> {
    let len = norm3(n);
    if (len - 1.0).abs() > 1e-12 {
        return Err(Error::Field(format!(
            "uniaxial: director has norm {len:.17}, expected 1"
        )));
    }
    let q = SymTensor::outer(dim, n).sub(&SymTensor::identity(dim).scale(1.0 / dim as f64));
    Ok(q.scale(s))
}

/// Trace-power rank test: `M` has rank ≤ 1 iff `tr(M^k) = (tr M)^k` for
/// k = 2..d. Tolerances scale with `(1 + |tr M|)^k`.
pub fn is_rank_le_one(m: &SymTensor, tol: f64) -> bool {
    let t = m.trace();
    for k in 2..=m.dim {
        let lhs = m.trace_power(k);
        let rhs = t.powi(k as i32);
        if (lhs - rhs).abs() > tol * (1.0 + t.abs()).powi(k as i32) {
            return false;
        }
    }
    true
}

/// A validated line tensor `n ⊗ n`: unit trace, rank one.
#[derive(Debug, Clone, Copy)]
pub struct LineTensor(SymTensor);

impl LineTensor {
    pub fn from_director(n: &[f64; 3], dim: usize) -> Result<Self> {
        let len = norm3(n);
        if (len - 1.0).abs() > 1e-10 {
            return Err(Error::Field(format!(
                "line tensor: director has norm {len:.17}, expected 1"
            )));
        }
        Ok(LineTensor(SymTensor::outer(dim, n)))
    }

    /// Validates trace = 1 and rank ≤ 1 within `tol`.
    pub fn try_new(t: SymTensor, tol: f64) -> Result<Self> {
        if (t.trace() - 1.0).abs() > tol || !is_rank_le_one(&t, tol) {
            return Err(Error::Field(
                "line tensor: not unit-trace rank-one".into(),
            ));
        }
        Ok(LineTensor(t))
    }

    pub fn as_sym(&self) -> &SymTensor {
        &self.0
    }

    pub fn into_sym(self) -> SymTensor {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_sym(rng: &mut impl Rng, dim: usize, scale: f64) -> SymTensor {
        let mut t = SymTensor::zero(dim);
        for i in 0..dim {
            for j in i..dim {
                t.set(i, j, rng.gen_range(-scale..scale));
            }
        }
        t
    }

    fn random_unit(rng: &mut impl Rng, dim: usize) -> [f64; 3] {
        loop {
            let mut u = [0.0; 3];
            for x in u.iter_mut().take(dim) {
                *x = rng.gen_range(-1.0..1.0);
            }
            let n = norm3(&u);
            if n > 0.1 {
                return scale3(&u, 1.0 / n);
            }
        }
    }

    fn check_decomp(a: &SymTensor, eig: &EigenDecomp) {
        let scale = 1.0 + a.frob_norm();
        // descending
        for i in 1..a.dim() {
            assert!(eig.lambda[i - 1] >= eig.lambda[i] - 1e-12 * scale);
        }
        // orthonormality
        for i in 0..a.dim() {
            for j in 0..a.dim() {
                let d = dot3(&eig.vectors[i], &eig.vectors[j]);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-12, "orthonormality {d}");
            }
        }
        // residual and reconstruction
        let mut recon = SymTensor::zero(a.dim());
        for i in 0..a.dim() {
            let av = a.apply(&eig.vectors[i]);
            let lv = scale3(&eig.vectors[i], eig.lambda[i]);
            assert!(
                norm3(&sub3(&av, &lv)) <= 1e-12 * scale,
                "residual {}",
                norm3(&sub3(&av, &lv))
            );
            recon = recon.add(&SymTensor::outer(a.dim(), &eig.vectors[i]).scale(eig.lambda[i]));
        }
        assert!(recon.sub(a).frob_norm() <= 1e-11 * scale);
    }

    #[test]
    fn eig_diagonal_2d() {
        let a = SymTensor::from_entries(2, &[3.0, 0.0, 1.0]);
        let eig = eig_sym(&a).unwrap();
        assert_eq!(eig.lambda[0], 3.0);
        assert_eq!(eig.lambda[1], 1.0);
        assert_eq!(eig.vectors[0], [1.0, 0.0, 0.0]);
        assert_eq!(eig.vectors[1], [0.0, 1.0, 0.0]);
    }

    #[test]
    fn eig_offdiag_2d() {
        // [[0,1],[1,0]]: lambda = (1,-1), v1 = (1,1)/sqrt(2)
        let a = SymTensor::from_entries(2, &[0.0, 1.0, 0.0]);
        let eig = eig_sym(&a).unwrap();
        assert!((eig.lambda[0] - 1.0).abs() < 1e-15);
        assert!((eig.lambda[1] + 1.0).abs() < 1e-15);
        let s = 1.0 / 2.0f64.sqrt();
        assert!((eig.vectors[0][0] - s).abs() < 1e-15);
        assert!((eig.vectors[0][1] - s).abs() < 1e-15);
    }

    #[test]
    fn eig_identity_3d() {
        let eig = eig_sym(&SymTensor::identity(3)).unwrap();
        for i in 0..3 {
            assert!((eig.lambda[i] - 1.0).abs() < 1e-15);
        }
        check_decomp(&SymTensor::identity(3), &eig);
    }

    #[test]
    fn eig_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for dim in [2, 3] {
            for _ in 0..2000 {
                let a = random_sym(&mut rng, dim, 4.0);
                let eig = eig_sym(&a).unwrap();
                check_decomp(&a, &eig);
            }
        }
    }

    #[test]
    fn eig_near_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            // two nearly equal eigenvalues in a random frame
            let u = random_unit(&mut rng, 3);
            let v = any_orthogonal(&u, 3);
            let w = cross3(&u, &v);
            let eps = 10f64.powf(rng.gen_range(-16.0..-8.0));
            let l = [1.0, 1.0 - eps, rng.gen_range(-1.0..0.5)];
            let mut a = SymTensor::zero(3);
            for (k, dir) in [u, v, w].iter().enumerate() {
                a = a.add(&SymTensor::outer(3, dir).scale(l[k]));
            }
            let eig = eig_sym(&a).unwrap();
            check_decomp(&a, &eig);
        }
    }

    #[test]
    fn eig_rejects_non_finite() {
        let mut a = SymTensor::zero(2);
        a.set(0, 0, f64::NAN);
        assert!(eig_sym(&a).is_err());
    }

    #[test]
    fn projection_examples() {
        // diag(2,1,0) -> diag(1,0,0)
        let a = SymTensor::from_entries(3, &[2.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let p = project_rank_one(&a);
        let expect = SymTensor::from_entries(3, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(p.sub(&expect).frob_norm() < 1e-14);

        // identity -> zero
        let p = project_rank_one(&SymTensor::identity(3));
        assert!(p.frob_norm() < 1e-14);
    }

    #[test]
    fn projection_invariant_on_line_tensors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dim in [2, 3] {
            for _ in 0..1000 {
                let n = random_unit(&mut rng, dim);
                let theta = SymTensor::outer(dim, &n);
                let p = project_rank_one(&theta);
                assert!(p.sub(&theta).frob_norm() < 1e-12);
            }
        }
    }

    #[test]
    fn projection_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let a = random_sym(&mut rng, 3, 2.0);
            let p = project_rank_one(&a);
            let pp = project_rank_one(&p);
            assert!(pp.sub(&p).frob_norm() < 1e-10 * (1.0 + p.frob_norm()));
        }
    }

    #[test]
    fn projection_lipschitz_sampled() {
        // operator-norm Lipschitz constant 3, sampled
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let a = random_sym(&mut rng, 3, 2.0);
            let mut b = a;
            for i in 0..3 {
                for j in i..3 {
                    let pert: f64 = rng.gen_range(-1.0..1.0);
                    b.set(i, j, b.get(i, j) + pert * 10f64.powf(rng.gen_range(-8.0..0.0)));
                }
            }
            let lhs = project_rank_one(&a).sub(&project_rank_one(&b)).op_norm();
            let rhs = 3.0 * a.sub(&b).op_norm() + 1e-10;
            assert!(lhs <= rhs, "lipschitz violated: {lhs} > {rhs}");
        }
    }

    #[test]
    fn uniaxial_examples() {
        // s=1, n=e1, d=2 -> diag(1/2, -1/2)
        let q = uniaxial(1.0, &[1.0, 0.0, 0.0], 2).unwrap();
        assert!((q.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((q.get(1, 1) + 0.5).abs() < 1e-15);
        assert!(q.get(0, 1).abs() < 1e-15);

        // s=0 -> zero
        let q = uniaxial(0.0, &[0.0, 1.0, 0.0], 3).unwrap();
        assert!(q.frob_norm() < 1e-15);

        // non-unit director rejected
        assert!(uniaxial(1.0, &[1.0, 1.0, 0.0], 2).is_err());
    }

    #[test]
    fn uniaxial_frob_norm_3d() {
        // |n x n - I/3|_F^2 = 2/3 for any unit n
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let n = random_unit(&mut rng, 3);
            let q = uniaxial(1.0, &n, 3).unwrap();
            assert!((q.frob_norm2() - 2.0 / 3.0).abs() < 1e-13);
        }
    }

    #[test]
    fn rank_oracle_examples() {
        let mut m = SymTensor::zero(3);
        m.set(0, 0, 2.0);
        assert!(is_rank_le_one(&m, 1e-10));

        let d110 = SymTensor::from_entries(3, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(!is_rank_le_one(&d110, 1e-10));

        assert!(is_rank_le_one(&SymTensor::zero(3), 1e-10));
    }

    #[test]
    fn rank_oracle_matches_eigenvalue_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let tol = 1e-9;
        for rank in 0..=3usize {
            for _ in 0..10_000 / 4 {
                let mut m = SymTensor::zero(3);
                let mut dirs: Vec<[f64; 3]> = Vec::new();
                while dirs.len() < rank {
                    let mut u = random_unit(&mut rng, 3);
                    for d in &dirs {
                        u = sub3(&u, &scale3(d, dot3(d, &u)));
                    }
                    if norm3(&u) > 0.3 {
                        dirs.push(normalize3(&u));
                    }
                }
                for d in &dirs {
                    let lam = loop {
                        let l: f64 = rng.gen_range(-2.0..2.0);
                        if l.abs() > 1e-3 {
                            break l;
                        }
                    };
                    m = m.add(&SymTensor::outer(3, d).scale(lam));
                }
                let eig = eig_sym(&m).unwrap();
                let eig_rank = (0..3).filter(|&i| eig.lambda[i].abs() > tol).count();
                assert_eq!(is_rank_le_one(&m, tol), eig_rank <= 1, "rank {rank}");
            }
        }
    }

    #[test]
    fn line_tensor_validation() {
        let n = [0.6, 0.8, 0.0];
        let lt = LineTensor::from_director(&n, 2).unwrap();
        assert!((lt.as_sym().trace() - 1.0).abs() < 1e-14);
        assert!(LineTensor::from_director(&[1.0, 1.0, 0.0], 2).is_err());
        assert!(LineTensor::try_new(SymTensor::identity(3), 1e-10).is_err());
    }
}

