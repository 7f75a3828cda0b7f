//! Dense and band-limited LU factorization, orthonormalization and a few
//! small matrix helpers shared by the model, baseline and recovery modules.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type RMat = DMatrix<f64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Square matrix in LAPACK-style band storage, with `kl` extra rows above
/// the upper band for the fill-in produced by row interchanges.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    data: Vec<Complex64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            ld,
            data: vec![ZERO; ld * n],
        }
    }

    /// Copies the band `(kl, ku)` of `a`; entries outside it are ignored.
    pub fn from_dense(a: &CMat, kl: usize, ku: usize) -> Self {
        let mut b = BandMatrix::zeros(a.nrows(), kl, ku);
        b.add_scaled(a, Complex64::new(1.0, 0.0));
        b
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i + self.kl + self.ku - j + j * self.ld
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if i + self.ku >= j && i <= j + self.kl {
            self.data[self.at(i, j)]
        } else {
            ZERO
        }
    }

    /// `self[(i, j)] += v`. Panics outside the band.
    pub fn add_at(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(i + self.ku >= j && i <= j + self.kl, "({i}, {j}) outside band ({}, {})", self.kl, self.ku);
        let k = self.at(i, j);
        self.data[k] += v;
    }

    pub fn to_dense(&self) -> CMat {
        CMat::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// `self * x`.
    pub fn mul(&self, x: &CMat) -> CMat {
        assert_eq!(x.nrows(), self.n, "band product of the wrong size");
        let mut y = CMat::zeros(self.n, x.ncols());
        for c in 0..x.ncols() {
            for j in 0..self.n {
                let xj = x[(j, c)];
                if xj == ZERO {
                    continue;
                }
                for i in j.saturating_sub(self.ku)..self.n.min(j + self.kl + 1) {
                    y[(i, c)] += self.data[self.at(i, j)] * xj;
                }
            }
        }
        y
    }

    /// `self += w * a` on the band.
    pub fn add_scaled(&mut self, a: &CMat, w: Complex64) {
        assert_eq!(a.shape(), (self.n, self.n), "band update of the wrong size");
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = self.n.min(j + self.kl + 1);
            for i in lo..hi {
                let k = self.at(i, j);
                self.data[k] += w * a[(i, j)];
            }
        }
    }
}

/// LU factorization with partial pivoting in band storage. Row interchanges
/// are kept in product form (`L` is not permuted after the fact) so `L` stays
/// within `kl` subdiagonals.
///
/// Pivoting can grow the upper bandwidth to `kl + ku`, so the elimination
/// touches columns `k..k + kl + ku + 1`. For dense inputs the band covers the
/// whole matrix and this is the textbook algorithm.
#[derive(Debug, Clone)]
pub struct Lu {
    // L below the diagonal (unit diagonal implied), U on and above
    f: BandMatrix,
    piv: Vec<usize>,
    cond: f64,
}

/// Lower and upper bandwidth of a square matrix.
pub fn bandwidth(a: &CMat) -> (usize, usize) {
    let n = a.nrows();
    let (mut kl, mut ku) = (0, 0);
    for j in 0..n {
        let col = a.column(j);
        for (i, v) in col.iter().enumerate() {
            if *v != ZERO {
                if i > j {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
    }
    (kl, ku)
}

impl Lu {
    /// Factors `a`, detecting its bandwidth first. Returns `None` if a zero
    /// pivot is met; use [`Lu::condition_estimate`] to judge near-singularity.
    pub fn factor(a: &CMat) -> Option<Self> {
        assert_eq!(a.nrows(), a.ncols(), "LU of a non-square matrix");
        let n = a.nrows();
        let (kl, ku) = if n > 64 { bandwidth(a) } else { (n.saturating_sub(1), n.saturating_sub(1)) };
        Lu::factor_band(BandMatrix::from_dense(a, kl, ku))
    }

    pub fn factor_band(mut f: BandMatrix) -> Option<Self> {
        let (n, kl, ku) = (f.n, f.kl, f.ku);
        let mut piv = vec![0; n];
        let (mut umax, mut umin) = (0.0f64, f64::INFINITY);
        for k in 0..n {
            let row_end = n.min(k + kl + 1);
            let col_end = n.min(k + kl + ku + 1);
            let mut p = k;
            let mut best = f.data[f.at(k, k)].norm();
            for i in k + 1..row_end {
                let v = f.data[f.at(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[k] = p;
            if best == 0.0 || !best.is_finite() {
                return None;
            }
            if p != k {
                for j in k..col_end {
                    let (a, b) = (f.at(k, j), f.at(p, j));
                    f.data.swap(a, b);
                }
            }
            umax = umax.max(best);
            umin = umin.min(best);
            let inv = f.data[f.at(k, k)].inv();
            for i in k + 1..row_end {
                let a = f.at(i, k);
                f.data[a] *= inv;
            }
            for j in k + 1..col_end {
                let akj = f.data[f.at(k, j)];
                if akj == ZERO {
                    continue;
                }
                for i in k + 1..row_end {
                    let lik = f.data[f.at(i, k)];
                    let a = f.at(i, j);
                    f.data[a] -= lik * akj;
                }
            }
        }
        let cond = if n == 0 { 1.0 } else { umax / umin };
        Some(Lu { f, piv, cond })
    }

    /// Pivot-growth ratio `max |u_kk| / min |u_kk|`, a cheap lower bound on
    /// the condition number.
    pub fn condition_estimate(&self) -> f64 {
        self.cond
    }

    pub fn is_numerically_singular(&self) -> bool {
        !(self.cond.is_finite() && self.cond * f64::EPSILON < 1.0)
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> Complex64 {
        self.f.data[self.f.at(i, j)]
    }

    /// Solves `A X = B`.
    pub fn solve(&self, b: &CMat) -> CMat {
        let (n, kl, ku) = (self.f.n, self.f.kl, self.f.ku);
        assert_eq!(b.nrows(), n);
        let mut x = b.clone();
        for c in 0..x.ncols() {
            let mut col = x.column_mut(c);
            for k in 0..n {
                if self.piv[k] != k {
                    col.swap_rows(k, self.piv[k]);
                }
                let xk = col[k];
                if xk == ZERO {
                    continue;
                }
                for i in k + 1..n.min(k + kl + 1) {
                    col[i] -= self.get(i, k) * xk;
                }
            }
            for k in (0..n).rev() {
                let xk = col[k] / self.get(k, k);
                col[k] = xk;
                if xk == ZERO {
                    continue;
                }
                for i in k.saturating_sub(kl + ku)..k {
                    col[i] -= self.get(i, k) * xk;
                }
            }
        }
        x
    }

    /// Solves `A^* X = B` (conjugate transpose) with the same factors.
    pub fn solve_adjoint(&self, b: &CMat) -> CMat {
        let (n, kl, ku) = (self.f.n, self.f.kl, self.f.ku);
        assert_eq!(b.nrows(), n);
        let mut x = b.clone();
        for c in 0..x.ncols() {
            let mut col = x.column_mut(c);
            // U^* z = b, forward
            for k in 0..n {
                let mut s = col[k];
                for i in k.saturating_sub(kl + ku)..k {
                    s -= self.get(i, k).conj() * col[i];
                }
                col[k] = s / self.get(k, k).conj();
            }
            // undo the elimination steps in reverse order
            for k in (0..n).rev() {
                let mut s = col[k];
                for i in k + 1..n.min(k + kl + 1) {
                    s -= self.get(i, k).conj() * col[i];
                }
                col[k] = s;
                if self.piv[k] != k {
                    col.swap_rows(k, self.piv[k]);
                }
            }
        }
        x
    }
}

/// Factors `a`, turning zero pivots and pivot ratios beyond working precision
/// into [`Error::Singular`] tagged with `p`.
pub fn factor_checked(a: &CMat, p: &[Complex64]) -> Result<Lu> {
    checked(Lu::factor(a), p)
}

/// [`factor_checked`] for a matrix already in band storage.
pub fn factor_band_checked(a: BandMatrix, p: &[Complex64]) -> Result<Lu> {
    checked(Lu::factor_band(a), p)
}

fn checked(lu: Option<Lu>, p: &[Complex64]) -> Result<Lu> {
    match lu {
        Some(lu) if !lu.is_numerically_singular() => Ok(lu),
        Some(lu) => Err(Error::Singular {
            p: p.to_vec(),
            cond: lu.condition_estimate(),
        }),
        None => Err(Error::Singular {
            p: p.to_vec(),
            cond: f64::INFINITY,
        }),
    }
}

pub fn is_real(m: &CMat) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

pub fn real_part(m: &CMat) -> RMat {
    m.map(|z| z.re)
}

/// Orthonormalizes `candidate` against the orthonormal columns of `basis`
/// with two passes of modified Gram-Schmidt. Returns `None` if the remainder
/// norm falls below `rel_tol` times the original norm.
pub fn mgs_extend(basis: &[nalgebra::DVector<Complex64>], candidate: &nalgebra::DVector<Complex64>, rel_tol: f64) -> Option<nalgebra::DVector<Complex64>> {
    let norm0 = candidate.norm();
    if norm0 == 0.0 {
        return None;
    }
    let mut v = candidate.clone();
    for _ in 0..2 {
        for q in basis {
            let c = q.dotc(&v);
            v.axpy(-c, q, Complex64::new(1.0, 0.0));
        }
    }
    let norm = v.norm();
    if norm <= rel_tol * norm0 {
        return None;
    }
    Some(v / Complex64::new(norm, 0.0))
}

/// Orthonormal basis of the orthogonal complement of `range(m)` for a real
/// `n x k` matrix of full column rank, via Householder QR.
pub fn complement_basis(m: &RMat) -> RMat {
    let (n, k) = m.shape();
    let mut a = m.clone();
    let mut vs: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(k);
    for j in 0..k.min(n) {
        let x = a.view((j, j), (n - j, 1)).column(0).into_owned();
        let alpha = -x[0].signum() * x.norm();
        let mut v = x;
        v[0] -= alpha;
        let vn = v.norm();
        if vn > 0.0 {
            v /= vn;
        }
        // apply H = I - 2 v v^T to trailing block
        for c in j..k {
            let mut col = a.view_mut((j, c), (n - j, 1));
            let d = 2.0 * v.dot(&col.column(0));
            col.column_mut(0).axpy(-d, &v, 1.0);
        }
        vs.push(v);
    }
    let mut q = RMat::zeros(n, n - k.min(n));
    for (c, mut col) in q.column_iter_mut().enumerate() {
        col[k + c] = 1.0;
        for (j, v) in vs.iter().enumerate().rev() {
            let mut tail = col.rows_mut(j, n - j);
            let d = 2.0 * v.dot(&tail);
            tail.axpy(-d, v, 1.0);
        }
    }
    q
}

/// Numerical rank with threshold `rel * sigma_max`.
pub fn numerical_rank(singular_values: &[f64], rel: f64) -> usize {
    let smax = singular_values.iter().cloned().fold(0.0, f64::max);
    singular_values.iter().filter(|&&s| s > rel * smax).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cmat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
        CMat::from_fn(r, c, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn lu_matches_nalgebra_and_adjoint_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1, 2, 5, 17] {
            let a = random_cmat(&mut rng, n, n) + CMat::identity(n, n) * Complex64::new(2.0, 0.0);
            let b = random_cmat(&mut rng, n, 2);
            let lu = Lu::factor(&a).unwrap();
            let x = lu.solve(&b);
            assert!((&a * &x - &b).norm() <= 1e-12 * b.norm());
            let y = lu.solve_adjoint(&b);
            assert!((a.adjoint() * &y - &b).norm() <= 1e-12 * b.norm());
        }
    }

    #[test]
    fn banded_path_solves_tridiagonal_with_pivoting() {
        // diagonally dominant tridiagonal with adjacent row pairs swapped:
        // well conditioned, but every other pivot has to come from below
        let n = 200;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut t = CMat::zeros(n, n);
        for i in 0..n {
            t[(i, i)] = Complex64::new(4.0 + rng.random_range(0.0..1.0), 0.0);
            if i + 1 < n {
                t[(i + 1, i)] = Complex64::new(rng.random_range(-1.0..1.0), 0.0);
                t[(i, i + 1)] = Complex64::new(rng.random_range(-1.0..1.0), 0.5);
            }
        }
        let mut a = t.clone();
        for k in (0..n - 1).step_by(2) {
            a.swap_rows(k, k + 1);
        }
        assert_eq!(bandwidth(&a), (2, 2));
        let b = random_cmat(&mut rng, n, 2);
        let lu = Lu::factor(&a).unwrap();
        let x = lu.solve(&b);
        assert!((&a * &x - &b).norm() <= 1e-12 * b.norm());
        let y = lu.solve_adjoint(&b);
        assert!((a.adjoint() * &y - &b).norm() <= 1e-12 * b.norm());
    }

    #[test]
    fn band_storage_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 9;
        let mut a = random_cmat(&mut rng, n, n);
        for i in 0..n {
            for j in 0..n {
                if i > j + 2 || j > i + 1 {
                    a[(i, j)] = ZERO;
                }
            }
        }
        let band = BandMatrix::from_dense(&a, 2, 1);
        assert_eq!(band.to_dense(), a);
        let x = random_cmat(&mut rng, n, 3);
        assert!((band.mul(&x) - &a * &x).norm() < 1e-13);
        let lu = Lu::factor_band(band).unwrap();
        assert!((&a * lu.solve(&x) - &x).norm() < 1e-12 * x.norm() * lu.condition_estimate());
    }

    #[test]
    fn singular_detected() {
        let a = CMat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0].map(|x| Complex64::new(x, 0.0)));
        assert!(factor_checked(&a, &[]).is_err());
        assert!(Lu::factor(&CMat::zeros(3, 3)).is_none());
    }

    #[test]
    fn complement_is_orthonormal_and_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = RMat::from_fn(12, 3, |_, _| rng.random_range(-1.0..1.0));
        let q = complement_basis(&m);
        assert_eq!(q.shape(), (12, 9));
        assert!((q.transpose() * &q - RMat::identity(9, 9)).norm() < 1e-13);
        assert!((m.transpose() * &q).norm() < 1e-13);
    }

    #[test]
    fn mgs_drops_dependent_vectors() {
        let e1 = nalgebra::DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let v = nalgebra::DVector::from_vec(vec![Complex64::new(3.0, 0.0), Complex64::new(0.0, 0.0)]);
        assert!(mgs_extend(&[e1.clone()], &v, 1e-10).is_none());
        let w = nalgebra::DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]);
        let q = mgs_extend(&[e1], &w, 1e-10).unwrap();
        assert!((q[1].re - 1.0).abs() < 1e-15 && q[0].norm() < 1e-15);
    }
}
