//! Dense matrix/vector kernel backing the solver stack.
//!
//! Row-major storage, partial-pivot elimination for solves and inverses,
//! cyclic Jacobi iteration for symmetric eigenvalues. Instances in this
//! project never exceed 24x24, so robustness is preferred over speed.

use crate::error::{Error, Result};

/// Relative pivot threshold for declaring singularity.
pub const PIVOT_RTOL: f64 = 1e-12;
/// Symmetry tolerance for the eigenvalue routine.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Dense real matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: entries.len(),
            });
        }
        if entries.iter().any(|e| !e.is_finite()) {
            return Err(Error::NonFiniteEntry);
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut entries = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            entries.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.set(i, j, out.get(i, j) + aik * other.get(k, j));
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "vector length must match columns");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a + b)
            .collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            entries,
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a - b)
            .collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            entries,
        }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e * s).collect(),
        }
    }

    /// Maximum absolute row sum.
    pub fn max_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|e| e.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.abs()))
    }

    fn require_square(&self) -> Result<usize> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                got: self.cols,
            });
        }
        Ok(self.rows)
    }
}

/// Solves `A x = rhs` by Gaussian elimination with partial pivoting.
pub fn solve_linear(a: &Matrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let cols = solve_linear_multi(a, &[rhs])?;
    Ok(cols.into_iter().next().unwrap())
}

/// Solves `A X = RHS` for several right-hand sides over one factorization.
pub fn solve_linear_multi(a: &Matrix, rhs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    let n = a.require_square()?;
    for r in rhs {
        if r.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: r.len(),
            });
        }
    }
    let threshold = PIVOT_RTOL * a.max_abs_entry();
    let mut aug = a.clone();
    let mut xs: Vec<Vec<f64>> = rhs.iter().map(|r| r.to_vec()).collect();

    for k in 0..n {
        // partial pivot
        let mut pivot_row = k;
        let mut pivot_mag = aug.get(k, k).abs();
        for i in (k + 1)..n {
            let mag = aug.get(i, k).abs();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = i;
            }
        }
        if pivot_mag <= threshold {
            return Err(Error::SingularMatrix { step: k, threshold });
        }
        if pivot_row != k {
            for j in 0..n {
                let tmp = aug.get(k, j);
                aug.set(k, j, aug.get(pivot_row, j));
                aug.set(pivot_row, j, tmp);
            }
            for x in xs.iter_mut() {
                x.swap(k, pivot_row);
            }
        }
        let pivot = aug.get(k, k);
        for i in (k + 1)..n {
            let factor = aug.get(i, k) / pivot;
            if factor == 0.0 {
                continue;
            }
            aug.set(i, k, 0.0);
            for j in (k + 1)..n {
                aug.set(i, j, aug.get(i, j) - factor * aug.get(k, j));
            }
            for x in xs.iter_mut() {
                x[i] -= factor * x[k];
            }
        }
    }
    // back substitution
    for x in xs.iter_mut() {
        for k in (0..n).rev() {
            let mut sum = x[k];
            for j in (k + 1)..n {
                sum -= aug.get(k, j) * x[j];
            }
            x[k] = sum / aug.get(k, k);
        }
    }
    Ok(xs)
}

/// Inverse via column-wise solves against the identity.
pub fn invert(a: &Matrix) -> Result<Matrix> {
    let n = a.require_square()?;
    let identity = Matrix::identity(n);
    let unit_rows: Vec<&[f64]> = (0..n).map(|i| identity.row(i)).collect();
    let cols = solve_linear_multi(a, &unit_rows)?;
    let mut inv = Matrix::zeros(n, n);
    for (j, col) in cols.iter().enumerate() {
        for i in 0..n {
            inv.set(i, j, col[i]);
        }
    }
    Ok(inv)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn sym_eigenvalues(a: &Matrix) -> Result<Vec<f64>> {
    let n = a.require_square()?;
    let asymmetry = a.sub(&a.transpose()).max_norm();
    if asymmetry > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { asymmetry });
    }
    let mut m = a.clone();
    // symmetrize to kill roundoff-level asymmetry before rotating
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m.get(i, j) + m.get(j, i));
            m.set(i, j, avg);
            m.set(j, i, avg);
        }
    }
    let tol = 1e-12 * m.frobenius_norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = {
            let mut s = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    s += 2.0 * m.get(i, j) * m.get(i, j);
                }
            }
            s.sqrt()
        };
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m.get(i, i)).collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(eig)
}

/// Spectral norm: square root of the largest eigenvalue of `M^T M`.
pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    m.require_square()?;
    let gram = m.transpose().matmul(m);
    let eig = sym_eigenvalues(&gram)?;
    Ok(eig.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// True iff |A_ii| > sum of |A_ij|, j != i, for every row.
pub fn is_strictly_diag_dominant(a: &Matrix) -> bool {
    if !a.is_square() {
        return false;
    }
    (0..a.rows()).all(|i| {
        let off: f64 = a
            .row(i)
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, e)| e.abs())
            .sum();
        a.get(i, i).abs() > off
    })
}

pub fn vec_sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn vec_max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, e| m.max(e.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn assert_vec_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{x} vs {y}");
        }
    }

    #[test]
    fn solve_identity() {
        let a = Matrix::identity(3);
        let x = solve_linear(&a, &[1.0, 2.0, 3.0]).unwrap();
        assert_vec_close(&x, &[1.0, 2.0, 3.0], 1e-15);
    }

    #[test]
    fn solve_2x2_cramer() {
        let a = Matrix::from_rows(&[&[3.0, -0.5], &[-0.5, 3.0]]);
        let x = solve_linear(&a, &[8.0, 8.0]).unwrap();
        assert_vec_close(&x, &[3.2, 3.2], 1e-12);
    }

    #[test]
    fn solve_rank_deficient() {
        let a = Matrix::from_rows(&[&[1.0, 1.0], &[2.0, 2.0]]);
        assert!(matches!(
            solve_linear(&a, &[1.0, 1.0]),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn solve_residual_bound() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let n = 10;
            let mut a = Matrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    a.set(i, j, if i == j { v + 5.0 } else { v });
                }
            }
            let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let x = solve_linear(&a, &rhs).unwrap();
            let residual = vec_max_norm(&vec_sub(&a.matvec(&x), &rhs));
            assert!(residual <= 1e-9 * (1.0 + vec_max_norm(&rhs)));
        }
    }

    #[test]
    fn invert_identity_and_diag() {
        let inv = invert(&Matrix::identity(4)).unwrap();
        assert_eq!(inv, Matrix::identity(4));
        let inv = invert(&Matrix::from_rows(&[&[2.0, 0.0], &[0.0, 4.0]])).unwrap();
        assert_vec_close(inv.entries(), &[0.5, 0.0, 0.0, 0.25], 1e-15);
    }

    #[test]
    fn invert_2x2_closed_form() {
        let a = Matrix::from_rows(&[&[5.0, -0.5], &[-0.5, 5.0]]);
        let inv = invert(&a).unwrap();
        // adj / det, det = 24.75: diag 5/24.75 = 20/99, off-diag 0.5/24.75 = 2/99
        assert_vec_close(
            inv.entries(),
            &[20.0 / 99.0, 2.0 / 99.0, 2.0 / 99.0, 20.0 / 99.0],
            1e-12,
        );
        let check = a.matmul(&inv).sub(&Matrix::identity(2)).max_norm();
        assert!(check <= 1e-8);
    }

    #[test]
    fn invert_agrees_with_solve() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..20 {
            let n = 10;
            let mut a = Matrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    a.set(i, j, if i == j { v + 4.0 } else { v });
                }
            }
            let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let via_solve = solve_linear(&a, &rhs).unwrap();
            let via_inv = invert(&a).unwrap().matvec(&rhs);
            assert_vec_close(&via_solve, &via_inv, 1e-8);
        }
    }

    #[test]
    fn eigenvalues_diag_and_2x2() {
        let eig = sym_eigenvalues(&Matrix::diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_vec_close(&eig, &[1.0, 2.0, 3.0], 1e-14);
        let eig = sym_eigenvalues(&Matrix::from_rows(&[&[5.0, -0.5], &[-0.5, 5.0]])).unwrap();
        assert_vec_close(&eig, &[4.5, 5.5], 1e-12);
        let eig = sym_eigenvalues(&Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert_vec_close(&eig, &[-1.0, 1.0], 1e-12);
    }

    #[test]
    fn eigenvalues_reject_asymmetric() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert!(matches!(
            sym_eigenvalues(&a),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn eigenvalue_trace_identity() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..20 {
            let n = 8;
            let mut a = Matrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let v: f64 = rng.gen_range(-2.0..2.0);
                    a.set(i, j, v);
                    a.set(j, i, v);
                }
            }
            let eig = sym_eigenvalues(&a).unwrap();
            let trace: f64 = (0..n).map(|i| a.get(i, i)).sum();
            let sum: f64 = eig.iter().sum();
            assert!((trace - sum).abs() <= 1e-8 * n as f64 * a.max_norm().max(1.0));
        }
    }

    #[test]
    fn spectral_norm_cases() {
        assert_eq!(spectral_norm(&Matrix::zeros(3, 3)).unwrap(), 0.0);
        let d = spectral_norm(&Matrix::diag(&[-3.0, 2.0])).unwrap();
        assert!((d - 3.0).abs() <= 1e-10);
    }

    #[test]
    fn diag_dominance() {
        assert!(is_strictly_diag_dominant(&Matrix::identity(5)));
        assert!(!is_strictly_diag_dominant(&Matrix::from_rows(&[
            &[1.0, 1.0],
            &[1.0, 1.0]
        ])));
    }

    #[test]
    fn gershgorin_positive_eigenvalues() {
        let mut rng = StdRng::seed_from_u64(21);
        for _ in 0..20 {
            let n = 6;
            let mut a = Matrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let v: f64 = rng.gen_range(-0.5..0.5);
                    a.set(i, j, v);
                    a.set(j, i, v);
                }
                a.set(i, i, rng.gen_range(3.5..5.0));
            }
            assert!(is_strictly_diag_dominant(&a));
            let eig = sym_eigenvalues(&a).unwrap();
            assert!(eig[0] > 0.0);
        }
    }

    #[test]
    fn spd_spectral_norm_matches_max_eigenvalue() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..20 {
            let n = 7;
            let mut a = Matrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let v: f64 = rng.gen_range(-0.4..0.4);
                    a.set(i, j, v);
                    a.set(j, i, v);
                }
                a.set(i, i, rng.gen_range(3.0..4.0));
            }
            let eig = sym_eigenvalues(&a).unwrap();
            let norm = spectral_norm(&a).unwrap();
            assert!((norm - eig.last().unwrap()).abs() <= 1e-8);
        }
    }
}
