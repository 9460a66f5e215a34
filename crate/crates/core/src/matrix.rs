//! Small dense kernels for 8x8 Jacobians and 8x7 tangent frames.

use std::ops::{Index, IndexMut, Mul};

use crate::octonion::Octonion;

/// Pivot ratio below which a matrix is treated as numerically singular and
/// its adjugate is assembled from minors instead of `det * inverse`.
const SINGULAR_PIVOT_RATIO: f64 = 1e-10;

/// LU factorisation with partial pivoting of an `N x N` matrix.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Lu<const N: usize> {
    lu: [[f64; N]; N],
    perm: [usize; N],
    sign: f64,
    min_pivot: f64,
    max_pivot: f64,
}

impl<const N: usize> Lu<N> {
    pub(crate) fn new(mut a: [[f64; N]; N]) -> Self {
        let mut perm = [0usize; N];
        for (i, p) in perm.iter_mut().enumerate() {
            *p = i;
        }
        let mut sign = 1.0;
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot: f64 = 0.0;
        for k in 0..N {
            let mut p = k;
            let mut best = a[k][k].abs();
            for (r, row) in a.iter().enumerate().skip(k + 1) {
                if row[k].abs() > best {
                    best = row[k].abs();
                    p = r;
                }
            }
            if p != k {
                a.swap(p, k);
                perm.swap(p, k);
                sign = -sign;
            }
            let pivot = a[k][k];
            min_pivot = min_pivot.min(pivot.abs());
            max_pivot = max_pivot.max(pivot.abs());
            if pivot == 0.0 {
                continue;
            }
            for r in k + 1..N {
                let factor = a[r][k] / pivot;
                a[r][k] = factor;
                if factor != 0.0 {
                    for c in k + 1..N {
                        a[r][c] -= factor * a[k][c];
                    }
                }
            }
        }
        Lu { lu: a, perm, sign, min_pivot, max_pivot }
    }

    pub(crate) fn det(&self) -> f64 {
        let mut d = self.sign;
        for k in 0..N {
            d *= self.lu[k][k];
        }
        d
    }

    pub(crate) fn is_well_conditioned(&self) -> bool {
        self.max_pivot > 0.0 && self.min_pivot > SINGULAR_PIVOT_RATIO * self.max_pivot
    }

    /// Solves `A x = b`.
    pub(crate) fn solve(&self, b: &[f64; N]) -> [f64; N] {
        let mut x = [0.0; N];
        for i in 0..N {
            x[i] = b[self.perm[i]];
        }
        for i in 0..N {
            for k in 0..i {
                x[i] -= self.lu[i][k] * x[k];
            }
        }
        for i in (0..N).rev() {
            for k in i + 1..N {
                x[i] -= self.lu[i][k] * x[k];
            }
            x[i] /= self.lu[i][i];
        }
        x
    }

    /// Solves `A^T x = b`.
    pub(crate) fn solve_transpose(&self, b: &[f64; N]) -> [f64; N] {
        // A = P^T L U, so A^T x = b  <=>  U^T L^T (P x) = b.
        let mut y = *b;
        for i in 0..N {
            for k in 0..i {
                y[i] -= self.lu[k][i] * y[k];
            }
            y[i] /= self.lu[i][i];
        }
        for i in (0..N).rev() {
            for k in i + 1..N {
                y[i] -= self.lu[k][i] * y[k];
            }
        }
        let mut x = [0.0; N];
        for i in 0..N {
            x[self.perm[i]] = y[i];
        }
        x
    }
}

pub(crate) fn det<const N: usize>(a: [[f64; N]; N]) -> f64 {
    Lu::new(a).det()
}

/// Real 8x8 matrix, row-major. For Jacobians entry `(i, j)` is `d f_i / d x_j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RealMatrix8(pub [[f64; 8]; 8]);

impl RealMatrix8 {
    pub const ZERO: RealMatrix8 = RealMatrix8([[0.0; 8]; 8]);

    pub fn identity() -> Self {
        Self::scaled_identity(1.0)
    }

    pub fn scaled_identity(s: f64) -> Self {
        let mut m = [[0.0; 8]; 8];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = s;
        }
        RealMatrix8(m)
    }

    pub fn transpose(&self) -> Self {
        let mut t = [[0.0; 8]; 8];
        for (i, row) in self.0.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                t[j][i] = *x;
            }
        }
        RealMatrix8(t)
    }

    pub fn determinant(&self) -> f64 {
        det(self.0)
    }

    /// Determinant of the 7x7 matrix left after deleting `row` and `col`.
    pub fn minor(&self, row: usize, col: usize) -> f64 {
        let mut m = [[0.0; 7]; 7];
        for (ri, r) in (0..8).filter(|&r| r != row).enumerate() {
            for (ci, c) in (0..8).filter(|&c| c != col).enumerate() {
                m[ri][ci] = self.0[r][c];
            }
        }
        det(m)
    }

    /// Cofactor matrix `C_ij = (-1)^(i+j) minor(i, j)`, built from minors.
    pub fn cofactor_by_minors(&self) -> Self {
        let mut c = [[0.0; 8]; 8];
        for (i, row) in c.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                let s = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                *x = s * self.minor(i, j);
            }
        }
        RealMatrix8(c)
    }

    /// Adjugate (transposed cofactor matrix), so that `adj(M) M = det(M) I`.
    ///
    /// Uses `det(M) M^-1` when the LU pivots are well separated from zero and
    /// falls back to explicit minors otherwise, which keeps singular inputs
    /// exact (e.g. the zero matrix maps to zero).
    pub fn adjugate(&self) -> Self {
        let lu = Lu::new(self.0);
        if !lu.is_well_conditioned() {
            return self.cofactor_by_minors().transpose();
        }
        let d = lu.det();
        let mut adj = [[0.0; 8]; 8];
        for j in 0..8 {
            let mut e = [0.0; 8];
            e[j] = d;
            let col = lu.solve(&e);
            for i in 0..8 {
                adj[i][j] = col[i];
            }
        }
        RealMatrix8(adj)
    }

    /// `cof(M) v`, the cofactor matrix applied to `v` (equals `adj(M)^T v`).
    ///
    /// This is the map carrying a surface element through `M`:
    /// the element of `M T` is `cof(M)` times the element of `T`.
    pub fn cofactor_apply(&self, v: &[f64; 8]) -> [f64; 8] {
        let lu = Lu::new(self.0);
        if lu.is_well_conditioned() {
            let d = lu.det();
            let mut x = lu.solve_transpose(v);
            for xi in &mut x {
                *xi *= d;
            }
            x
        } else {
            self.cofactor_by_minors().apply(v)
        }
    }

    pub fn apply(&self, v: &[f64; 8]) -> [f64; 8] {
        let mut out = [0.0; 8];
        for (o, row) in out.iter_mut().zip(self.0.iter()) {
            *o = row.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &RealMatrix8) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Column `j` as an octonion.
    pub fn column(&self, j: usize) -> Octonion {
        let mut c = [0.0; 8];
        for (i, x) in c.iter_mut().enumerate() {
            *x = self.0[i][j];
        }
        Octonion(c)
    }

    pub fn set_column(&mut self, j: usize, v: &Octonion) {
        for i in 0..8 {
            self.0[i][j] = v.0[i];
        }
    }
}

impl Mul for RealMatrix8 {
    type Output = RealMatrix8;
    fn mul(self, rhs: RealMatrix8) -> RealMatrix8 {
        let mut out = [[0.0; 8]; 8];
        for i in 0..8 {
            for k in 0..8 {
                let a = self.0[i][k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..8 {
                    out[i][j] += a * rhs.0[k][j];
                }
            }
        }
        RealMatrix8(out)
    }
}

impl Index<(usize, usize)> for RealMatrix8 {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for RealMatrix8 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.0[i][j]
    }
}

/// Eight-by-seven frame of tangent vectors (columns).
pub type Tangents = [[f64; 7]; 8];

/// `M T` for an 8x8 matrix and an 8x7 frame.
pub fn map_tangents(m: &RealMatrix8, t: &Tangents) -> Tangents {
    let mut out = [[0.0; 7]; 8];
    for i in 0..8 {
        for k in 0..8 {
            let a = m.0[i][k];
            if a == 0.0 {
                continue;
            }
            for j in 0..7 {
                out[i][j] += a * t[k][j];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng) -> RealMatrix8 {
        let mut m = [[0.0; 8]; 8];
        for x in m.iter_mut().flatten() {
            *x = rng.gen_range(-1.0..1.0);
        }
        RealMatrix8(m)
    }

    #[test]
    fn adjugate_of_scaled_identity() {
        assert_eq!(RealMatrix8::identity().adjugate(), RealMatrix8::identity());
        let a = RealMatrix8::scaled_identity(2.0).adjugate();
        assert!(a.max_abs_diff(&RealMatrix8::scaled_identity(128.0)) < 1e-12);
    }

    #[test]
    fn adjugate_identity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let m = random_matrix(&mut rng);
            let lhs = m.adjugate() * m;
            let rhs = RealMatrix8::scaled_identity(m.determinant());
            let scale = m.max_abs().powi(7).max(1.0);
            assert!(lhs.max_abs_diff(&rhs) <= 1e-9 * scale);
        }
    }

    #[test]
    fn adjugate_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m = random_matrix(&mut rng);
            let fast = m.adjugate();
            let slow = m.cofactor_by_minors().transpose();
            assert!(fast.max_abs_diff(&slow) < 1e-10);
        }
    }

    #[test]
    fn singular_adjugate() {
        assert_eq!(RealMatrix8::ZERO.adjugate(), RealMatrix8::ZERO);
        // rank 7: adjugate has rank one and still satisfies adj(M) M = 0
        let mut m = RealMatrix8::identity();
        m.0[7][7] = 0.0;
        let adj = m.adjugate();
        assert_eq!(adj.0[7][7], 1.0);
        assert!((adj * m).max_abs() < 1e-15);
    }

    #[test]
    fn cofactor_apply_matches_transposed_adjugate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_matrix(&mut rng);
        let v = [0.3, -0.1, 0.7, 0.2, -0.5, 0.9, 0.0, 1.1];
        let a = m.cofactor_apply(&v);
        let b = m.adjugate().transpose().apply(&v);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn lu_transpose_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_matrix(&mut rng);
        let b = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let x = Lu::new(m.0).solve_transpose(&b);
        let back = m.transpose().apply(&x);
        for (x, y) in back.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}
