//! Global comparison bases: one direction set used at every latent point.
//!
//! - [`ganspace_basis`]: PCA of `w = f(z)` over Gaussian samples of `z`.
//! - [`sefa_basis`]: closed-form SVD of the first weight matrix. For a
//!   single-layer network its left singular vectors already live in `W̃`.
//!   For deeper networks the first weight's right singular vectors are latent
//!   directions; they are pushed through the Jacobian at a fixed reference
//!   point and orthonormalized in order to get a `W̃` frame. This is an
//!   analogue of applying the method to the first projection of a synthesis
//!   path, not a reproduction of it.

use serde::Serialize;

use crate::grassmann::Subspace;
use crate::io::VectorSet;
use crate::linalg;
use crate::network::MappingNetwork;
use crate::{Error, Matrix, Result, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GlobalMethod {
    SampledPca,
    FirstWeightSvd,
}

impl GlobalMethod {
    pub fn name(&self) -> &'static str {
        match self {
            GlobalMethod::SampledPca => "sampled_pca",
            GlobalMethod::FirstWeightSvd => "first_weight_svd",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalBasis {
    /// Orthonormal columns in `W̃`, ordered by `magnitudes`.
    pub directions: Matrix,
    /// Explained variance (sampled PCA) or singular value (first-weight SVD)
    /// per direction, non-increasing.
    pub magnitudes: Vector,
    pub method: GlobalMethod,
    pub sample_count: Option<usize>,
}

impl GlobalBasis {
    pub fn len(&self) -> usize {
        self.directions.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.ncols() == 0
    }

    pub fn direction(&self, i: usize) -> Vector {
        self.directions.column(i).into_owned()
    }

    pub fn top_subspace(&self, k: usize) -> Result<Subspace> {
        if k == 0 || k > self.len() {
            return Err(Error::InvalidArgument(format!(
                "subspace dimension {k} outside 1..={}",
                self.len()
            )));
        }
        Subspace::from_orthonormal(self.directions.columns(0, k).into_owned())
    }

    pub fn to_vector_set(&self) -> VectorSet {
        let mut set = VectorSet::from_columns(&self.directions);
        set.method = Some(self.method.name().to_string());
        set.magnitudes = Some(self.magnitudes.iter().copied().collect());
        set
    }
}

/// Sampled-PCA basis from `n_samples` Gaussian latent codes.
pub fn ganspace_basis(net: &MappingNetwork, n_samples: usize, seed: u64) -> Result<GlobalBasis> {
    let d = net.out_dim();
    if n_samples <= d {
        return Err(Error::UnderSampled {
            required: d,
            got: n_samples,
        });
    }
    let mut rng = crate::rng::rng_from(seed, &[0x6a5]);
    let samples = (0..n_samples)
        .map(|_| net.eval(&crate::rng::gaussian_vector(&mut rng, net.in_dim())))
        .collect::<Result<Vec<_>>>()?;
    let (variances, directions) = linalg::pca(&samples)?;
    Ok(GlobalBasis {
        directions,
        magnitudes: variances.map(|v| v.max(0.0)),
        method: GlobalMethod::SampledPca,
        sample_count: Some(n_samples),
    })
}

/// First-weight SVD basis, with the Jacobian at the origin used as the
/// reference for networks deeper than one layer.
pub fn sefa_basis(net: &MappingNetwork) -> Result<GlobalBasis> {
    sefa_basis_at(net, &Vector::zeros(net.in_dim()))
}

/// First-weight SVD basis; `reference` is the latent point whose Jacobian maps
/// first-layer directions into `W̃` for multi-layer networks.
pub fn sefa_basis_at(net: &MappingNetwork, reference: &Vector) -> Result<GlobalBasis> {
    let first = net.layers()[0].weight();
    let svd = linalg::sorted_svd(first)?;
    if net.layers().len() == 1 {
        let mut directions = svd.left;
        linalg::normalize_column_signs(&mut directions, &mut []);
        return Ok(GlobalBasis {
            directions,
            magnitudes: svd.values,
            method: GlobalMethod::FirstWeightSvd,
            sample_count: None,
        });
    }
    let mut rng = crate::rng::rng_from(0x5efa, &[]);
    let reference = net.nudge_off_boundary(reference, &mut rng)?;
    let jac = net.jacobian(&reference)?;
    let rank_tol = 1e-10 * svd.values[0];
    let kept = svd.values.iter().take_while(|&&s| s > rank_tol).count();
    let pushed = &jac * svd.right.columns(0, kept);
    // keep only columns that stay independent after the pushforward
    let mut columns: Vec<Vector> = Vec::new();
    let mut magnitudes = Vec::new();
    for c in 0..kept {
        let mut v = pushed.column(c).into_owned();
        let scale = v.norm();
        for q in &columns {
            let p = q.dot(&v);
            v.axpy(-p, q, 1.0);
        }
        for q in &columns {
            let p = q.dot(&v);
            v.axpy(-p, q, 1.0);
        }
        let n = v.norm();
        if scale > 0.0 && n > 1e-8 * scale {
            columns.push(v / n);
            magnitudes.push(svd.values[c]);
        }
    }
    if columns.is_empty() {
        return Err(Error::Numerical("first-weight directions vanish under the reference Jacobian".into()));
    }
    let mut directions = Matrix::from_columns(&columns);
    linalg::normalize_column_signs(&mut directions, &mut []);
    Ok(GlobalBasis {
        directions,
        magnitudes: Vector::from_vec(magnitudes),
        method: GlobalMethod::FirstWeightSvd,
        sample_count: None,
    })
}
