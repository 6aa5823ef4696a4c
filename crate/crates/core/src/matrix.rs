//! Dense linear algebra for small symmetric matrices.
//!
//! Everything in the bound engine lives in dimension d ≤ 10 (information
//! matrices, their square roots, Jacobians), so a cyclic Jacobi eigensolver
//! is used throughout: it is simple, numerically robust for symmetric input,
//! and bit-reproducible because the sweep order is fixed.

use thiserror::Error;

/// Default positive-definiteness tolerance on eigenvalues.
///
/// Information matrices in scope are well conditioned; an eigenvalue at or
/// below this threshold signals an invalid model rather than a case to
/// handle, so it is reported as an error.
pub const DEFAULT_PD_TOL: f64 = 1e-12;

/// Relative tolerance used when checking the symmetry invariant.
pub const SYMMETRY_REL_TOL: f64 = 1e-12;

const MAX_JACOBI_SWEEPS: usize = 100;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("entry ({row},{col}) breaks symmetry: {lhs} vs {rhs}")]
    NotSymmetric {
        row: usize,
        col: usize,
        lhs: f64,
        rhs: f64,
    },
    #[error("non-finite entry at ({row},{col})")]
    NonFinite { row: usize, col: usize },
    #[error("not positive definite: smallest eigenvalue {min_eigenvalue:e} <= tolerance {tol:e}")]
    NotPositiveDefinite { min_eigenvalue: f64, tol: f64 },
    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {off:e})")]
    NoConvergence { sweeps: usize, off: f64 },
    #[error("matrix is singular")]
    Singular,
}

/// Dense square matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self, MatrixError> {
        let dim = rows.len();
        assert!(dim > 0, "dimension must be positive");
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(MatrixError::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self, MatrixError> {
        if data.len() != dim * dim {
            return Err(MatrixError::DimensionMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.dim + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.dim + col] = value;
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// Matrix product with deterministic (ascending-index) summation order.
    pub fn matmul(&self, other: &Self) -> Result<Self, MatrixError> {
        if self.dim != other.dim {
            return Err(MatrixError::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += self.get(i, k) * other.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    /// Matrix-vector product with deterministic summation order.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>, MatrixError> {
        if v.len() != self.dim {
            return Err(MatrixError::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        let n = self.dim;
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += self.get(i, k) * v[k];
            }
            out[i] = acc;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, MatrixError> {
        if self.dim != other.dim {
            return Err(MatrixError::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut out = self.clone();
        for (o, r) in out.data.iter_mut().zip(other.data.iter()) {
            *o -= r;
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Determinant via LU with partial pivoting.
    pub fn det(&self) -> f64 {
        let n = self.dim;
        let mut lu = self.clone();
        let mut sign = 1.0;
        for col in 0..n {
            let mut pivot_row = col;
            let mut pivot_abs = lu.get(col, col).abs();
            for r in (col + 1)..n {
                let a = lu.get(r, col).abs();
                if a > pivot_abs {
                    pivot_abs = a;
                    pivot_row = r;
                }
            }
            if pivot_abs == 0.0 {
                return 0.0;
            }
            if pivot_row != col {
                for j in 0..n {
                    let tmp = lu.get(col, j);
                    lu.set(col, j, lu.get(pivot_row, j));
                    lu.set(pivot_row, j, tmp);
                }
                sign = -sign;
            }
            let pivot = lu.get(col, col);
            for r in (col + 1)..n {
                let factor = lu.get(r, col) / pivot;
                for j in col..n {
                    lu.set(r, j, lu.get(r, j) - factor * lu.get(col, j));
                }
            }
        }
        let mut det = sign;
        for i in 0..n {
            det *= lu.get(i, i);
        }
        det
    }

    /// General inverse via Gauss-Jordan with partial pivoting. Used for the
    /// Jacobian of q, which need not be symmetric.
    pub fn inverse(&self) -> Result<Self, MatrixError> {
        let n = self.dim;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let mut pivot_row = col;
            let mut pivot_abs = a.get(col, col).abs();
            for r in (col + 1)..n {
                let v = a.get(r, col).abs();
                if v > pivot_abs {
                    pivot_abs = v;
                    pivot_row = r;
                }
            }
            if pivot_abs == 0.0 {
                return Err(MatrixError::Singular);
            }
            if pivot_row != col {
                for j in 0..n {
                    let tmp = a.get(col, j);
                    a.set(col, j, a.get(pivot_row, j));
                    a.set(pivot_row, j, tmp);
                    let tmp = inv.get(col, j);
                    inv.set(col, j, inv.get(pivot_row, j));
                    inv.set(pivot_row, j, tmp);
                }
            }
            let pivot = a.get(col, col);
            for j in 0..n {
                a.set(col, j, a.get(col, j) / pivot);
                inv.set(col, j, inv.get(col, j) / pivot);
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a.get(r, col);
                if factor == 0.0 {
                    continue;
                }
                for j in 0..n {
                    a.set(r, j, a.get(r, j) - factor * a.get(col, j));
                    inv.set(r, j, inv.get(r, j) - factor * inv.get(col, j));
                }
            }
        }
        Ok(inv)
    }
}

/// Symmetric matrix. Construction checks the symmetry invariant
/// (|a_ij - a_ji| <= 1e-12 * max(1, |a_ij|)) and finiteness.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    inner: SquareMatrix,
}

impl SymMatrix {
    pub fn new(m: SquareMatrix) -> Result<Self, MatrixError> {
        check_finite(&m)?;
        let n = m.dim();
        for i in 0..n {
            for j in (i + 1)..n {
                let lhs = m.get(i, j);
                let rhs = m.get(j, i);
                if (lhs - rhs).abs() > SYMMETRY_REL_TOL * 1.0_f64.max(lhs.abs()) {
                    return Err(MatrixError::NotSymmetric {
                        row: i,
                        col: j,
                        lhs,
                        rhs,
                    });
                }
            }
        }
        Ok(Self { inner: m })
    }

    /// Averages with the transpose first; kills roundoff asymmetry from
    /// matrix products without masking genuinely asymmetric input.
    pub fn symmetrized(m: SquareMatrix) -> Result<Self, MatrixError> {
        let n = m.dim();
        let mut s = SquareMatrix::zeros(n);
        for i in 0..n {
            s.set(i, i, m.get(i, i));
            for j in (i + 1)..n {
                let v = 0.5 * (m.get(i, j) + m.get(j, i));
                s.set(i, j, v);
                s.set(j, i, v);
            }
        }
        Self::new(s)
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = SquareMatrix::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.set(i, i, v);
        }
        Self { inner: m }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            inner: SquareMatrix::identity(dim),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.inner.get(row, col)
    }

    pub fn as_square(&self) -> &SquareMatrix {
        &self.inner
    }

    pub fn into_square(self) -> SquareMatrix {
        self.inner
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>, MatrixError> {
        self.inner.matvec(v)
    }

    /// Cyclic Jacobi eigendecomposition.
    ///
    /// The sweep order (p ascending, q ascending within p) is fixed, so
    /// identical input bits always yield identical output bits. Eigenvalues
    /// are returned in descending order; each eigenvector column has its
    /// largest-magnitude component made positive.
    pub fn eigendecompose(&self) -> Result<EigenDecomposition, MatrixError> {
        let n = self.dim();
        let mut a = self.inner.clone();
        let mut v = SquareMatrix::identity(n);

        let scale = self.inner.frobenius_norm();
        // Absolute convergence threshold derived from the input scale; a zero
        // matrix converges immediately.
        let threshold = if scale > 0.0 {
            scale * 1e-15
        } else {
            f64::MIN_POSITIVE
        };

        let mut converged = false;
        let mut off = off_diagonal_norm(&a);
        for _sweep in 0..MAX_JACOBI_SWEEPS {
            if off <= threshold {
                converged = true;
                break;
            }
            for p in 0..n.saturating_sub(1) {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    if apq == 0.0 {
                        continue;
                    }
                    let app = a.get(p, p);
                    let aqq = a.get(q, q);
                    let theta = 0.5 * (aqq - app) / apq;
                    // tan of the rotation angle, the root of smaller magnitude
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (1.0 + theta * theta).sqrt())
                    } else {
                        -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;

                    a.set(p, p, app - t * apq);
                    a.set(q, q, aqq + t * apq);
                    a.set(p, q, 0.0);
                    a.set(q, p, 0.0);
                    for i in 0..n {
                        if i == p || i == q {
                            continue;
                        }
                        let aip = a.get(i, p);
                        let aiq = a.get(i, q);
                        let new_ip = c * aip - s * aiq;
                        let new_iq = s * aip + c * aiq;
                        a.set(i, p, new_ip);
                        a.set(p, i, new_ip);
                        a.set(i, q, new_iq);
                        a.set(q, i, new_iq);
                    }
                    for i in 0..n {
                        let vip = v.get(i, p);
                        let viq = v.get(i, q);
                        v.set(i, p, c * vip - s * viq);
                        v.set(i, q, s * vip + c * viq);
                    }
                }
            }
            off = off_diagonal_norm(&a);
        }
        if !converged && off > threshold {
            return Err(MatrixError::NoConvergence {
                sweeps: MAX_JACOBI_SWEEPS,
                off,
            });
        }

        let mut eigenvalues: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
        // Sort descending; stable so equal eigenvalues keep their sweep order.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eigenvalues[j].partial_cmp(&eigenvalues[i]).unwrap());
        eigenvalues = order.iter().map(|&i| a.get(i, i)).collect();
        let mut vectors = SquareMatrix::zeros(n);
        for (new_col, &old_col) in order.iter().enumerate() {
            for row in 0..n {
                vectors.set(row, new_col, v.get(row, old_col));
            }
        }

        // Fix the sign of each column: largest-magnitude component positive.
        for col in 0..n {
            let mut arg = 0;
            let mut best = vectors.get(0, col).abs();
            for row in 1..n {
                let mag = vectors.get(row, col).abs();
                if mag > best {
                    best = mag;
                    arg = row;
                }
            }
            if vectors.get(arg, col) < 0.0 {
                for row in 0..n {
                    vectors.set(row, col, -vectors.get(row, col));
                }
            }
        }

        Ok(EigenDecomposition {
            eigenvalues,
            eigenvectors: vectors,
        })
    }

    fn map_eigenvalues<F>(&self, pd_tol: f64, f: F) -> Result<SymMatrix, MatrixError>
    where
        F: Fn(f64) -> f64,
    {
        let eig = self.eigendecompose()?;
        let min = *eig
            .eigenvalues
            .last()
            .expect("eigendecomposition of a positive-dimension matrix");
        if min <= pd_tol {
            return Err(MatrixError::NotPositiveDefinite {
                min_eigenvalue: min,
                tol: pd_tol,
            });
        }
        let n = self.dim();
        let mapped: Vec<f64> = eig.eigenvalues.iter().map(|&l| f(l)).collect();
        let q = &eig.eigenvectors;
        let mut out = SquareMatrix::zeros(n);
        // Build only i <= j and mirror: the result is symmetric by
        // construction, bit for bit.
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += q.get(i, k) * mapped[k] * q.get(j, k);
                }
                out.set(i, j, acc);
                out.set(j, i, acc);
            }
        }
        Ok(SymMatrix { inner: out })
    }

    /// Principal square root of a positive definite matrix: Q diag(sqrt(l)) Q^T.
    pub fn principal_sqrt(&self, pd_tol: f64) -> Result<SymMatrix, MatrixError> {
        self.map_eigenvalues(pd_tol, |l| l.sqrt())
    }

    /// Inverse of a positive definite matrix via its eigendecomposition.
    pub fn inverse(&self, pd_tol: f64) -> Result<SymMatrix, MatrixError> {
        self.map_eigenvalues(pd_tol, |l| 1.0 / l)
    }

    /// Inverse principal square root: Q diag(sqrt(1/l)) Q^T.
    ///
    /// Mapping l -> sqrt(1/l) (rather than 1/sqrt(l)) makes the result agree
    /// bit for bit with `principal_sqrt` of the elementwise-inverted diagonal
    /// whenever 1/l is exact, which the bound engine relies on for exact
    /// cancellation in diagonal models.
    pub fn inv_sqrt(&self, pd_tol: f64) -> Result<SymMatrix, MatrixError> {
        self.map_eigenvalues(pd_tol, |l| (1.0 / l).sqrt())
    }
}

fn check_finite(m: &SquareMatrix) -> Result<(), MatrixError> {
    let n = m.dim();
    for i in 0..n {
        for j in 0..n {
            if !m.get(i, j).is_finite() {
                return Err(MatrixError::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

fn off_diagonal_norm(a: &SquareMatrix) -> f64 {
    let n = a.dim();
    let mut acc = 0.0;
    for p in 0..n {
        for q in (p + 1)..n {
            let v = a.get(p, q);
            acc += 2.0 * v * v;
        }
    }
    acc.sqrt()
}

/// Eigendecomposition of a symmetric matrix: eigenvalues descending,
/// eigenvector columns orthonormal with a deterministic sign convention.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: SquareMatrix,
}

impl EigenDecomposition {
    /// Relative Frobenius error of Q diag(l) Q^T against `original`.
    pub fn reconstruction_error(&self, original: &SymMatrix) -> f64 {
        let n = self.eigenvectors.dim();
        let mut recon = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += self.eigenvectors.get(i, k)
                        * self.eigenvalues[k]
                        * self.eigenvectors.get(j, k);
                }
                recon.set(i, j, acc);
            }
        }
        let diff = recon.sub(original.as_square()).expect("same dims");
        let scale = original.as_square().frobenius_norm();
        if scale > 0.0 {
            diff.frobenius_norm() / scale
        } else {
            diff.frobenius_norm()
        }
    }

    /// Frobenius norm of Q^T Q - I.
    pub fn orthogonality_error(&self) -> f64 {
        let q = &self.eigenvectors;
        let qtq = q.transpose().matmul(q).expect("same dims");
        let n = q.dim();
        qtq.sub(&SquareMatrix::identity(n))
            .expect("same dims")
            .frobenius_norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rotation2(angle: f64) -> SquareMatrix {
        let (s, c) = angle.sin_cos();
        SquareMatrix::from_rows(&[&[c, -s], &[s, c]]).unwrap()
    }

    #[test]
    fn eigendecompose_identity() {
        let eig = SymMatrix::identity(2).eigendecompose().unwrap();
        assert_eq!(eig.eigenvalues, vec![1.0, 1.0]);
        assert_eq!(eig.eigenvectors, SquareMatrix::identity(2));
    }

    #[test]
    fn eigendecompose_diagonal() {
        let eig = SymMatrix::from_diag(&[1.0, 0.5]).eigendecompose().unwrap();
        assert_eq!(eig.eigenvalues, vec![1.0, 0.5]);
        assert_eq!(eig.eigenvectors, SquareMatrix::identity(2));
    }

    #[test]
    fn eigendecompose_rotated_spectrum() {
        // Construct the input from known factors; the construction is the oracle.
        let q = rotation2(std::f64::consts::FRAC_PI_6);
        let d = SymMatrix::from_diag(&[3.0, 1.0]);
        let a = q
            .matmul(d.as_square())
            .unwrap()
            .matmul(&q.transpose())
            .unwrap();
        let eig = SymMatrix::symmetrized(a.clone())
            .unwrap()
            .eigendecompose()
            .unwrap();
        assert!((eig.eigenvalues[0] - 3.0).abs() < 1e-12);
        assert!((eig.eigenvalues[1] - 1.0).abs() < 1e-12);
        // Columns recover Q up to sign.
        for col in 0..2 {
            let dot: f64 = (0..2)
                .map(|row| eig.eigenvectors.get(row, col) * q.get(row, col))
                .sum();
            assert!(
                (dot.abs() - 1.0).abs() < 1e-12,
                "column {col}: |dot| = {dot}"
            );
        }
        assert!(eig.reconstruction_error(&SymMatrix::symmetrized(a).unwrap()) < 1e-10);
        assert!(eig.orthogonality_error() < 1e-10);
    }

    #[test]
    fn eigendecompose_is_bit_deterministic() {
        let a = SymMatrix::new(
            SquareMatrix::from_rows(&[&[2.0, 0.3, -0.1], &[0.3, 1.5, 0.25], &[-0.1, 0.25, 0.9]])
                .unwrap(),
        )
        .unwrap();
        let e1 = a.eigendecompose().unwrap();
        let e2 = a.eigendecompose().unwrap();
        for (x, y) in e1.eigenvalues.iter().zip(e2.eigenvalues.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(
                    e1.eigenvectors.get(i, j).to_bits(),
                    e2.eigenvectors.get(i, j).to_bits()
                );
            }
        }
    }

    #[test]
    fn principal_sqrt_identity_and_fisher() {
        let s = SymMatrix::identity(2)
            .principal_sqrt(DEFAULT_PD_TOL)
            .unwrap();
        assert_eq!(s, SymMatrix::identity(2));

        // Information matrix of the normal model at sigma2 = 1.
        let fisher = SymMatrix::from_diag(&[1.0, 0.5]);
        let root = fisher.principal_sqrt(DEFAULT_PD_TOL).unwrap();
        assert_eq!(root.get(0, 0), 1.0);
        assert_eq!(root.get(1, 1).to_bits(), 0.5_f64.sqrt().to_bits());
        assert_eq!(root.get(0, 1), 0.0);
    }

    #[test]
    fn sqrt_then_inverse_matches_diagonal() {
        let k = SymMatrix::from_diag(&[1.0, 2.0]);
        let inv_sqrt = k
            .principal_sqrt(DEFAULT_PD_TOL)
            .unwrap()
            .inverse(DEFAULT_PD_TOL)
            .unwrap();
        assert!((inv_sqrt.get(0, 0) - 1.0).abs() < 1e-14);
        assert!((inv_sqrt.get(1, 1) - 1.0 / 2.0_f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn inv_sqrt_matches_sqrt_of_inverted_diagonal_bitwise() {
        let k = SymMatrix::from_diag(&[1.0, 2.0]);
        let a = k.inv_sqrt(DEFAULT_PD_TOL).unwrap();
        let b = SymMatrix::from_diag(&[1.0, 0.5])
            .principal_sqrt(DEFAULT_PD_TOL)
            .unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(a.get(i, j).to_bits(), b.get(i, j).to_bits());
            }
        }
    }

    #[test]
    fn inverse_diagonal_fisher() {
        // diag(1/sigma2, 1/(2 sigma4)) at sigma2 = 1 inverts to diag(1, 2).
        let fisher = SymMatrix::from_diag(&[1.0, 0.5]);
        let inv = fisher.inverse(DEFAULT_PD_TOL).unwrap();
        assert_eq!(inv.get(0, 0), 1.0);
        assert_eq!(inv.get(1, 1), 2.0);
    }

    #[test]
    fn inverse_identity() {
        let inv = SymMatrix::identity(2).inverse(DEFAULT_PD_TOL).unwrap();
        assert_eq!(inv, SymMatrix::identity(2));
    }

    #[test]
    fn not_positive_definite_is_reported() {
        let a = SymMatrix::from_diag(&[1.0, 0.0]);
        match a.principal_sqrt(DEFAULT_PD_TOL) {
            Err(MatrixError::NotPositiveDefinite { .. }) => {}
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
        match a.inverse(DEFAULT_PD_TOL) {
            Err(MatrixError::NotPositiveDefinite { .. }) => {}
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn matmul_and_matvec_basics() {
        let i2 = SquareMatrix::identity(2);
        assert_eq!(i2.matvec(&[3.0, -4.0]).unwrap(), vec![3.0, -4.0]);
        let d = SymMatrix::from_diag(&[2.0, 3.0]);
        assert_eq!(d.matvec(&[1.0, 1.0]).unwrap(), vec![2.0, 3.0]);
        let prod = d.as_square().matmul(&i2).unwrap();
        assert_eq!(prod, *d.as_square());
    }

    #[test]
    fn matvec_dimension_mismatch() {
        let i2 = SquareMatrix::identity(2);
        assert!(matches!(
            i2.matvec(&[1.0]),
            Err(MatrixError::DimensionMismatch { .. })
        ));
        let i3 = SquareMatrix::identity(3);
        assert!(matches!(
            i2.matmul(&i3),
            Err(MatrixError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn symmetry_check_rejects_asymmetric() {
        let m = SquareMatrix::from_rows(&[&[1.0, 0.5], &[0.2, 1.0]]).unwrap();
        assert!(matches!(
            SymMatrix::new(m),
            Err(MatrixError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn general_inverse_and_det() {
        let m = SquareMatrix::from_rows(&[&[2.0, 1.0], &[1.0, 1.0]]).unwrap();
        assert!((m.det() - 1.0).abs() < 1e-14);
        let inv = m.inverse().unwrap();
        let prod = m.matmul(&inv).unwrap();
        let err = prod.sub(&SquareMatrix::identity(2)).unwrap().max_abs();
        assert!(err < 1e-14);

        let singular = SquareMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
        assert_eq!(singular.det(), 0.0);
        assert!(matches!(singular.inverse(), Err(MatrixError::Singular)));
    }

    #[test]
    fn sqrt_roundtrip_on_rotated_matrix() {
        let q = rotation2(0.7);
        let d = SymMatrix::from_diag(&[4.0, 0.25]);
        let a = SymMatrix::symmetrized(
            q.matmul(d.as_square())
                .unwrap()
                .matmul(&q.transpose())
                .unwrap(),
        )
        .unwrap();
        let s = a.principal_sqrt(DEFAULT_PD_TOL).unwrap();
        let ss = s.as_square().matmul(s.as_square()).unwrap();
        let rel = ss.sub(a.as_square()).unwrap().frobenius_norm() / a.as_square().frobenius_norm();
        assert!(rel < 1e-12, "relative roundtrip error {rel}");
    }
}
