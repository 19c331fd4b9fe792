//! Distances on the Grassmannian `Gr(k, d)`.
//!
//! A [`Subspace`] is stored as a `d × k` column-orthonormal frame `M`. Two
//! metrics are provided:
//!
//! - projection metric: `‖M·Mᵀ − M'·M'ᵀ‖₂` (operator norm),
//! - geodesic metric: `(Σ θ_i²)^{1/2}` over the principal angles `θ_i`.
//!
//! Principal angles come from the singular values of `Mᵀ·M'` (cosines). Small
//! angles are recovered from the singular values of `M' − M·Mᵀ·M'` (sines)
//! instead, since `arccos` loses half the working precision near 1.

use rand_distr::{Distribution, StandardNormal};

use crate::linalg;
use crate::{Error, Matrix, Result};

/// Frames are accepted as orthonormal within this tolerance.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Above this ambient dimension the projection metric is computed as the
/// sine of the largest principal angle instead of a `d × d` SVD.
pub const DENSE_PROJECTOR_MAX_DIM: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    frame: Matrix,
}

impl Subspace {
    /// Wraps a frame that is already column-orthonormal.
    pub fn from_orthonormal(frame: Matrix) -> Result<Self> {
        let (d, k) = frame.shape();
        if k == 0 || k > d {
            return Err(Error::InvalidArgument(format!(
                "subspace frame must be d x k with 1 <= k <= d, got {d} x {k}"
            )));
        }
        let err = linalg::orthonormality_error(&frame);
        if !(err <= ORTHONORMAL_TOL) {
            return Err(Error::InvalidArgument(format!(
                "frame is not column-orthonormal (max |MᵀM − I| = {err:e})"
            )));
        }
        Ok(Subspace { frame })
    }

    /// Orthonormal frame for the column space of `columns` (QR-based).
    pub fn from_vectors(columns: &Matrix) -> Result<Self> {
        let (d, k) = columns.shape();
        if k == 0 || k > d {
            return Err(Error::InvalidArgument(format!(
                "spanning set must be d x k with 1 <= k <= d, got {d} x {k}"
            )));
        }
        let sv = linalg::sorted_svd(columns)?.values;
        let (largest, smallest) = (sv[0], sv[k - 1]);
        if !(smallest > 1e-10 * largest) {
            return Err(Error::RankDeficient {
                index: k,
                sigma: smallest,
                threshold: 1e-10 * largest,
            });
        }
        Ok(Subspace {
            frame: linalg::orthonormalize(columns),
        })
    }

    pub fn frame(&self) -> &Matrix {
        &self.frame
    }

    pub fn dim(&self) -> usize {
        self.frame.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.frame.nrows()
    }

    /// Orthogonal projector `M·Mᵀ`.
    pub fn projector(&self) -> Matrix {
        &self.frame * self.frame.transpose()
    }

    /// Same subspace, frame right-multiplied by a `k × k` orthogonal matrix.
    pub fn rotated(&self, rotation: &Matrix) -> Result<Self> {
        Subspace::from_orthonormal(&self.frame * rotation)
    }
}

fn check_compatible(a: &Subspace, b: &Subspace) -> Result<()> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(Error::shape("subspace ambient dimension", a.ambient_dim(), b.ambient_dim()));
    }
    if a.dim() != b.dim() {
        return Err(Error::shape("subspace dimension", a.dim(), b.dim()));
    }
    Ok(())
}

/// Principal angles between two equal-dimension subspaces, ascending, in
/// `[0, π/2]`.
pub fn principal_angles(a: &Subspace, b: &Subspace) -> Result<Vec<f64>> {
    check_compatible(a, b)?;
    let k = a.dim();
    if a.frame == b.frame {
        return Ok(vec![0.0; k]);
    }
    let cross = a.frame.transpose() * &b.frame;
    let cosines = linalg::sorted_svd(&cross)?.values;
    let residual = &b.frame - &a.frame * &cross;
    let mut sines: Vec<f64> = linalg::sorted_svd(&residual)?.values.iter().copied().collect();
    sines.reverse();
    let angles = (0..k)
        .map(|i| {
            let c = cosines[i].clamp(0.0, 1.0);
            if c * c >= 0.5 {
                sines[i].clamp(0.0, 1.0).asin()
            } else {
                c.acos()
            }
        })
        .collect();
    Ok(angles)
}

/// Operator norm of the difference of the orthogonal projectors.
pub fn projection_metric(a: &Subspace, b: &Subspace) -> Result<f64> {
    check_compatible(a, b)?;
    if a.frame == b.frame {
        return Ok(0.0);
    }
    if a.ambient_dim() <= DENSE_PROJECTOR_MAX_DIM {
        linalg::operator_norm(&(a.projector() - b.projector()))
    } else {
        let largest = principal_angles(a, b)?.last().copied().unwrap_or(0.0);
        Ok(largest.sin())
    }
}

/// Euclidean norm of the principal-angle vector.
pub fn geodesic_metric(a: &Subspace, b: &Subspace) -> Result<f64> {
    Ok(principal_angles(a, b)?.iter().map(|t| t * t).sum::<f64>().sqrt())
}

/// Haar-distributed `k`-frame in `R^d`: QR of a Gaussian `d × k` matrix with
/// the signs of `R`'s diagonal absorbed into `Q`.
pub fn random_orthogonal_frame<R: rand::Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> Result<Subspace> {
    if k == 0 || k > d {
        return Err(Error::InvalidArgument(format!("need 1 <= k <= d, got k = {k}, d = {d}")));
    }
    let g = Matrix::from_fn(d, k, |_, _| StandardNormal.sample(rng));
    Subspace::from_orthonormal(linalg::orthonormalize(&g))
}

/// Seeded convenience wrapper around [`random_orthogonal_frame`].
pub fn random_orthogonal_frame_seeded(d: usize, k: usize, seed: u64) -> Result<Subspace> {
    let mut rng = crate::rng::rng_from(seed, &[0x4a4a]);
    random_orthogonal_frame(d, k, &mut rng)
}
