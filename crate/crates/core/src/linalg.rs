//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, SymmetricEigen, Vector6};

use crate::error::{Result, VfError};

pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn symmetrize6(m: &Matrix6<f64>) -> Matrix6<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigen-decomposition of the symmetric part with eigenvalues sorted descending.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = DVector::from_iterator(n, idx.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &i) in idx.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(m)).eigenvalues.min()
}

/// Clip negative eigenvalues of the symmetric part to zero.
pub fn psd_clip(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    if eig.eigenvalues.min() >= 0.0 {
        return symmetrize(m);
    }
    let d = eig.eigenvalues.map(|v| v.max(0.0));
    symmetrize(&(&eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()))
}

pub fn psd_clip6(m: &Matrix6<f64>) -> Matrix6<f64> {
    to_m6(&psd_clip(&from_m6(m)))
}

/// Principal square root of a PSD matrix.
pub fn sqrtm_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    symmetrize(&(&eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()))
}

/// Jitter used before inverting a covariance: `1e-10 * trace / d`.
pub fn cov_jitter(m: &DMatrix<f64>) -> f64 {
    let d = m.nrows().max(1) as f64;
    (1e-10 * m.trace() / d).max(f64::MIN_POSITIVE)
}

/// Inverse of a covariance after adding [`cov_jitter`].
pub fn regularized_inverse(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = cov.nrows();
    let eps = cov_jitter(cov);
    let a = symmetrize(cov) + DMatrix::identity(n, n) * eps;
    match a.clone().cholesky() {
        Some(ch) => Ok(symmetrize(&ch.inverse())),
        None => a
            .try_inverse()
            .map(|m| symmetrize(&m))
            .ok_or_else(|| VfError::Singular("covariance".into())),
    }
}

/// Moore-Penrose inverse of a symmetric PSD matrix. Eigenvalues below
/// `rel_tol * max_eigenvalue` are treated as zero; their directions are
/// reported as degenerate.
pub fn pinv_sym(m: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, usize) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(symmetrize(m));
    let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let cut = rel_tol * max;
    let mut degenerate = 0;
    let d = DVector::from_iterator(
        n,
        eig.eigenvalues.iter().map(|&v| {
            if v > cut && v > 0.0 {
                1.0 / v
            } else {
                degenerate += 1;
                0.0
            }
        }),
    );
    let p = &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose();
    (symmetrize(&p), degenerate)
}

pub fn to_m6(m: &DMatrix<f64>) -> Matrix6<f64> {
    assert_eq!((m.nrows(), m.ncols()), (6, 6), "expected a 6x6 matrix");
    Matrix6::from_fn(|i, j| m[(i, j)])
}

pub fn from_m6(m: &Matrix6<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(6, 6, |i, j| m[(i, j)])
}

pub fn to_v6(v: &DVector<f64>) -> Vector6<f64> {
    assert_eq!(v.len(), 6, "expected a 6-vector");
    Vector6::from_fn(|i, _| v[i])
}

pub fn from_v6(v: &Vector6<f64>) -> DVector<f64> {
    DVector::from_fn(6, |i, _| v[i])
}

pub fn blockdiag_rot(r: &Matrix3<f64>) -> Matrix6<f64> {
    let mut t = Matrix6::zeros();
    t.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    t.fixed_view_mut::<3, 3>(3, 3).copy_from(r);
    t
}

/// Row-major array view used by the trace and wire formats.
pub fn rows_flat(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn rows_flat6(m: &Matrix6<f64>) -> Vec<f64> {
    rows_flat(&from_m6(m))
}

/// Parse the plain-text matrix format: one row per line, whitespace-separated,
/// `#` starts a comment.
pub fn parse_matrix_text(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| VfError::Config(format!("line {}: {e}", ln + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err(VfError::Empty("matrix text"));
    }
    let m = rows[0].len();
    if rows.iter().any(|r| r.len() != m) {
        return Err(VfError::Config("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

pub fn format_matrix_text(m: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.17e}", m[(i, j)])).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sqrt_squares_back() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let s = sqrtm_psd(&a);
        assert_relative_eq!(&s * &s, a, epsilon = 1e-12);
    }

    #[test]
    fn pinv_flags_null_directions() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0, 4.0]));
        let (p, deg) = pinv_sym(&a, 1e-12);
        assert_eq!(deg, 1);
        assert_relative_eq!(p[(0, 0)], 0.5, epsilon = 1e-15);
        assert_eq!(p[(1, 1)], 0.0);
    }

    #[test]
    fn clip_removes_negative_part() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let c = psd_clip(&a);
        assert!(min_eigenvalue(&c) >= -1e-14);
        assert_relative_eq!(c[(0, 0)], 1.5, epsilon = 1e-12);
    }

    #[test]
    fn matrix_text_round_trip() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, -2.5, 3e-7, 4.0, 5.0, 6.0]);
        let b = parse_matrix_text(&format_matrix_text(&a)).unwrap();
        assert_eq!(a, b);
        assert!(parse_matrix_text("1 2\n3").is_err());
    }
}
