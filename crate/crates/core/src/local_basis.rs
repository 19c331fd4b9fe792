//! Local Basis: the SVD of the network Jacobian at a latent point.
//!
//! For `J = ∇f(z)` with thin SVD `J = V·diag(σ)·Uᵀ`, the left singular vectors
//! `v_i` span the tangent space of the latent manifold at `w = f(z)` and the
//! right singular vectors `u_i` are the latent directions that produce them:
//! `J·u_i = σ_i·v_i`.

use rand_distr::{Distribution, StandardNormal};

use crate::grassmann::Subspace;
use crate::linalg::{self, SortedSvd};
use crate::network::MappingNetwork;
use crate::{Error, Matrix, Result, Vector};

/// Singular values at or below `RANK_TOL_REL·σ_1` count as zero.
pub const RANK_TOL_REL: f64 = 1e-8;

/// Relative gap below which two singular values are treated as tied.
const TIE_TOL_REL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LocalFrame {
    z: Vector,
    w: Vector,
    latent_directions: Matrix,
    singular_values: Vector,
    basis: Matrix,
}

impl LocalFrame {
    /// Builds a frame from a Jacobian evaluated at `(z, w)`.
    pub fn from_jacobian(z: Vector, w: Vector, jacobian: &Matrix) -> Result<Self> {
        let SortedSvd {
            left: mut basis,
            values,
            right: mut latent,
        } = linalg::sorted_svd(jacobian)?;
        linalg::normalize_column_signs(&mut basis, &mut [&mut latent]);
        let (basis, values, latent) = break_ties(basis, values, latent);
        Ok(LocalFrame {
            z,
            w,
            latent_directions: latent,
            singular_values: values,
            basis,
        })
    }

    pub fn z(&self) -> &Vector {
        &self.z
    }

    pub fn w(&self) -> &Vector {
        &self.w
    }

    /// Right singular vectors `u_i` as columns (`d_Z × n`).
    pub fn latent_directions(&self) -> &Matrix {
        &self.latent_directions
    }

    /// Singular values, non-increasing.
    pub fn singular_values(&self) -> &Vector {
        &self.singular_values
    }

    /// Left singular vectors `v_i` as columns (`d_W̃ × n`): the Local Basis.
    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    /// Number of singular triples, `min(d_Z, d_W̃)`.
    pub fn len(&self) -> usize {
        self.singular_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.singular_values.is_empty()
    }

    /// Zero-based accessors.
    pub fn sigma(&self, i: usize) -> f64 {
        self.singular_values[i]
    }

    pub fn basis_vector(&self, i: usize) -> Vector {
        self.basis.column(i).into_owned()
    }

    pub fn latent_direction(&self, i: usize) -> Vector {
        self.latent_directions.column(i).into_owned()
    }

    pub fn rank_threshold(&self) -> f64 {
        RANK_TOL_REL * self.singular_values.get(0).copied().unwrap_or(0.0)
    }

    /// Checks that the one-based direction `k` exists and has a non-zero
    /// singular value.
    pub fn check_direction(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.len() {
            return Err(Error::InvalidArgument(format!(
                "direction index {k} outside 1..={}",
                self.len()
            )));
        }
        let sigma = self.sigma(k - 1);
        let threshold = self.rank_threshold();
        if !(sigma > threshold) {
            return Err(Error::RankDeficient {
                index: k,
                sigma,
                threshold,
            });
        }
        Ok(())
    }

    /// Span of the top-`k` Local Basis vectors.
    pub fn top_subspace(&self, k: usize) -> Result<Subspace> {
        if k == 0 || k > self.len() {
            return Err(Error::InvalidArgument(format!(
                "subspace dimension {k} outside 1..={}",
                self.len()
            )));
        }
        Subspace::from_orthonormal(self.basis.columns(0, k).into_owned())
    }

    /// Largest `‖J·u_i − σ_i·v_i‖∞` over all triples.
    pub fn svd_identity_error(&self, jacobian: &Matrix) -> f64 {
        (0..self.len())
            .map(|i| {
                let lhs = jacobian * self.latent_directions.column(i);
                (lhs - self.basis.column(i) * self.sigma(i)).amax()
            })
            .fold(0.0, f64::max)
    }
}

/// Orders tied singular triples by descending lexicographic order of `v_i`.
fn break_ties(basis: Matrix, values: Vector, latent: Matrix) -> (Matrix, Vector, Matrix) {
    let n = values.len();
    if n < 2 {
        return (basis, values, latent);
    }
    let tol = TIE_TOL_REL * values[0];
    let mut order: Vec<usize> = (0..n).collect();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[end - 1] - values[end] <= tol {
            end += 1;
        }
        if end - start > 1 {
            order[start..end].sort_by(|&a, &b| {
                let ca = basis.column(a);
                let cb = basis.column(b);
                for (x, y) in ca.iter().zip(cb.iter()) {
                    match y.total_cmp(x) {
                        std::cmp::Ordering::Equal => continue,
                        o => return o,
                    }
                }
                std::cmp::Ordering::Equal
            });
        }
        start = end;
    }
    if order.iter().enumerate().all(|(i, &o)| i == o) {
        return (basis, values, latent);
    }
    let b = Matrix::from_fn(basis.nrows(), n, |r, c| basis[(r, order[c])]);
    let v = Vector::from_fn(n, |i, _| values[order[i]]);
    let l = Matrix::from_fn(latent.nrows(), n, |r, c| latent[(r, order[c])]);
    (b, v, l)
}

/// Local Basis of `net` at `z`.
pub fn local_basis(net: &MappingNetwork, z: &Vector) -> Result<LocalFrame> {
    let (w, _, jac) = net.evaluate_with_jacobian(z)?;
    LocalFrame::from_jacobian(z.clone(), w, &jac)
}

/// Point of the `k`-dimensional approximating submanifold:
/// `f(z + Σ_{i≤k} t_i·u_i)`.
pub fn approx_manifold_point(net: &MappingNetwork, frame: &LocalFrame, k: usize, t: &[f64]) -> Result<Vector> {
    if t.len() != k {
        return Err(Error::shape("submanifold coordinates", k, t.len()));
    }
    frame.check_direction(k)?;
    if t.iter().all(|&x| x == 0.0) {
        return Ok(frame.w.clone());
    }
    let mut z = frame.z.clone();
    for (i, &ti) in t.iter().enumerate() {
        z.axpy(ti, &frame.latent_directions.column(i), 1.0);
    }
    net.eval(&z)
}

/// Principal components of a sampled first-order neighbourhood.
#[derive(Debug, Clone)]
pub struct LocalPca {
    /// Sample variances along each component, non-increasing.
    pub variances: Vector,
    /// Components as orthonormal columns (`d_W̃ × d_W̃`), sign-normalized like
    /// the Local Basis.
    pub components: Matrix,
}

/// Local PCA around `z_b`: samples `w' = T₁f(z_b + c·ε)` with `ε ~ N(0, I)`
/// and runs PCA about the sample mean.
///
/// Works from the Jacobian and a covariance eigendecomposition only, so it
/// serves as an independent check on [`local_basis`].
pub fn local_pca_oracle(net: &MappingNetwork, z_b: &Vector, c: f64, n_samples: usize, seed: u64) -> Result<LocalPca> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("sampling scale c must be positive, got {c}")));
    }
    if n_samples < net.in_dim() || n_samples < 2 {
        return Err(Error::UnderSampled {
            required: net.in_dim().max(2) - 1,
            got: n_samples,
        });
    }
    let approx = net.linear_approximation_at(z_b)?;
    let mut rng = crate::rng::rng_from(seed, &[0x10ca1]);
    let samples: Vec<Vector> = (0..n_samples)
        .map(|_| {
            let eps = Vector::from_fn(net.in_dim(), |_, _| StandardNormal.sample(&mut rng));
            approx.apply(&(z_b + eps * c))
        })
        .collect();
    let (variances, components) = linalg::pca(&samples)?;
    Ok(LocalPca {
        variances,
        components,
    })
}

/// Indices (zero-based) whose spectral gap to both neighbours exceeds
/// `rel_gap·σ_1`. Singular values past the thin SVD are zero when
/// `d_W̃ > d_Z`, which counts as a neighbour for the last index.
pub fn gapped_indices(singular_values: &Vector, out_dim: usize, rel_gap: f64) -> Vec<usize> {
    let n = singular_values.len();
    if n == 0 {
        return Vec::new();
    }
    let gap = rel_gap * singular_values[0];
    (0..n)
        .filter(|&i| {
            let before = (i > 0).then(|| singular_values[i - 1] - singular_values[i]);
            let after = if i + 1 < n {
                Some(singular_values[i] - singular_values[i + 1])
            } else if out_dim > n {
                Some(singular_values[i])
            } else {
                None
            };
            before.into_iter().chain(after).all(|g| g > gap)
        })
        .collect()
}
