//! Dense linear-algebra helpers shared by the geometry modules.

use nalgebra::SymmetricEigen;

use crate::{Error, Matrix, Result, Vector};

/// Thin SVD `a = left · diag(values) · rightᵀ` with singular values sorted
/// non-increasing.
#[derive(Debug, Clone)]
pub struct SortedSvd {
    pub left: Matrix,
    pub values: Vector,
    pub right: Matrix,
}

fn to_faer(a: &Matrix) -> faer::Mat<f64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |r, c| a[(r, c)])
}

// faer rather than nalgebra: nalgebra's bidiagonal SVD returns wrong singular
// values for some exactly rank-deficient tall matrices (see the rank-one test).
pub fn sorted_svd(a: &Matrix) -> Result<SortedSvd> {
    let (rows, cols) = a.shape();
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("matrix passed to SVD".into()));
    }
    let svd = to_faer(a).thin_svd().map_err(|e| {
        Error::Numerical(format!(
            "SVD of {rows}x{cols} matrix failed ({e:?}, max |entry| {:e})",
            a.amax()
        ))
    })?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let n = rows.min(cols);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    let left = Matrix::from_fn(rows, n, |r, c| u[(r, order[c])]);
    let right = Matrix::from_fn(cols, n, |r, c| v[(r, order[c])]);
    let values = Vector::from_fn(n, |i, _| s[order[i]].max(0.0));
    Ok(SortedSvd {
        left,
        values,
        right,
    })
}

/// Largest singular value of `a` (operator 2-norm).
pub fn operator_norm(a: &Matrix) -> Result<f64> {
    if a.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("matrix passed to operator norm".into()));
    }
    let values = to_faer(a)
        .singular_values()
        .map_err(|e| Error::Numerical(format!("SVD for operator norm failed ({e:?})")))?;
    Ok(values.into_iter().fold(0.0, f64::max))
}

/// Index of the first entry with the largest magnitude.
pub fn argmax_abs(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    best
}

/// Flips column `c` of `primary` (and of each `paired` matrix) so that the
/// entry of largest magnitude in `primary[:, c]` is positive.
pub fn normalize_column_signs(primary: &mut Matrix, paired: &mut [&mut Matrix]) {
    for c in 0..primary.ncols() {
        let col: Vec<f64> = primary.column(c).iter().copied().collect();
        if col.is_empty() {
            continue;
        }
        if col[argmax_abs(&col)] < 0.0 {
            primary.column_mut(c).neg_mut();
            for m in paired.iter_mut() {
                m.column_mut(c).neg_mut();
            }
        }
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted non-increasing and
/// eigenvectors sign-normalized.
pub fn sorted_symmetric_eigen(a: &Matrix) -> (Vector, Matrix) {
    let eig = SymmetricEigen::new(a.clone());
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = Vector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let mut vectors = Matrix::from_fn(a.nrows(), n, |r, c| eig.eigenvectors[(r, order[c])]);
    normalize_column_signs(&mut vectors, &mut []);
    (values, vectors)
}

/// Principal components of a sample set about its mean.
///
/// Returns `(variances, components)` with variances non-increasing and
/// components as orthonormal columns.
pub fn pca(samples: &[Vector]) -> Result<(Vector, Matrix)> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::UnderSampled { required: 1, got: n });
    }
    let dim = samples[0].len();
    let mut mean = Vector::zeros(dim);
    for s in samples {
        mean += s;
    }
    mean /= n as f64;
    let mut cov = Matrix::zeros(dim, dim);
    for s in samples {
        let c = s - &mean;
        cov.ger(1.0, &c, &c, 1.0);
    }
    cov /= (n - 1) as f64;
    Ok(sorted_symmetric_eigen(&cov))
}

/// Orthonormal columns spanning the columns of `a`, with column order kept.
///
/// This is the `Q` of `a = Q·R` with a positive diagonal in `R`, computed by
/// Gram–Schmidt with one re-orthogonalization pass. Columns of `a` must be
/// linearly independent.
pub fn orthonormalize(a: &Matrix) -> Matrix {
    let mut q = a.clone();
    for c in 0..q.ncols() {
        let mut v = q.column(c).into_owned();
        for _ in 0..2 {
            for p in 0..c {
                let proj = q.column(p).dot(&v);
                if proj != 0.0 {
                    v.axpy(-proj, &q.column(p), 1.0);
                }
            }
        }
        let norm = v.norm();
        q.set_column(c, &(v / norm));
    }
    q
}

/// Largest deviation of `mᵀm` from the identity.
pub fn orthonormality_error(m: &Matrix) -> f64 {
    let gram = m.transpose() * m;
    let eye = Matrix::identity(gram.nrows(), gram.ncols());
    (gram - eye).amax()
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
