//! Numerical self-checks: finite-difference Jacobians and the invariant suite
//! run by `latentgeom validate`.

use serde::Serialize;

use crate::local_basis::{gapped_indices, local_basis, local_pca_oracle};
use crate::network::MappingNetwork;
use crate::rng::{gaussian_vector, rng_from};
use crate::{linalg, Matrix, Result, Vector};

pub const FD_STEP: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-4;
pub const SVD_IDENTITY_TOL: f64 = 1e-9;
pub const ORTHONORMAL_TOL: f64 = 1e-10;
pub const PCA_COS_TOL: f64 = 0.99;
pub const PCA_SCALE: f64 = 1e-2;
pub const PCA_REL_GAP: f64 = 0.05;

/// Central-difference Jacobian with step `h`.
pub fn finite_difference_jacobian(net: &MappingNetwork, z: &Vector, h: f64) -> Result<Matrix> {
    let mut jac = Matrix::zeros(net.out_dim(), net.in_dim());
    for j in 0..net.in_dim() {
        let mut plus = z.clone();
        plus[j] += h;
        let mut minus = z.clone();
        minus[j] -= h;
        let col = (net.eval(&plus)? - net.eval(&minus)?) / (2.0 * h);
        jac.set_column(j, &col);
    }
    Ok(jac)
}

/// True when every `z ± h·e_j` shares the activation pattern of `z`, so that
/// central differences of step `h` see a single affine piece.
pub fn stencil_in_cell(net: &MappingNetwork, z: &Vector, h: f64) -> Result<bool> {
    let (_, base) = net.forward(z)?;
    if base.is_on_boundary() {
        return Ok(false);
    }
    for j in 0..net.in_dim() {
        for s in [h, -h] {
            let mut p = z.clone();
            p[j] += s;
            if net.forward(&p)?.1.masks() != base.masks() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Largest entrywise relative error `|a − b| / max(|a|, 1e-6·max|a|)`.
///
/// The floor keeps structurally tiny entries from dominating.
pub fn max_relative_error(exact: &Matrix, approx: &Matrix) -> f64 {
    let floor = 1e-6 * exact.amax();
    exact
        .iter()
        .zip(approx.iter())
        .map(|(a, b)| (a - b).abs() / a.abs().max(floor).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// Draws `count` Gaussian latent points whose finite-difference stencil stays
/// inside one cell. Returns the points and the number of rejected draws.
pub fn sample_interior_points(
    net: &MappingNetwork,
    count: usize,
    h: f64,
    seed: u64,
) -> Result<(Vec<Vector>, usize)> {
    let mut rng = rng_from(seed, &[0xfd]);
    let mut points = Vec::with_capacity(count);
    let mut rejected = 0;
    while points.len() < count {
        let z = gaussian_vector(&mut rng, net.in_dim());
        if stencil_in_cell(net, &z, h)? {
            points.push(z);
        } else {
            rejected += 1;
            if rejected > 100 * count.max(1) {
                return Err(crate::Error::Numerical(format!(
                    "could not find {count} interior points ({rejected} rejected)"
                )));
            }
        }
    }
    Ok((points, rejected))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Copy)]
pub struct ValidateConfig {
    pub n_points: usize,
    pub seed: u64,
    pub pca_samples_per_dim: usize,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig {
            n_points: 10,
            seed: 0,
            pca_samples_per_dim: 50,
        }
    }
}

/// Runs the invariant suite against `net`.
pub fn validate_network(net: &MappingNetwork, cfg: &ValidateConfig) -> Result<Vec<CheckOutcome>> {
    let (points, rejected) = sample_interior_points(net, cfg.n_points, FD_STEP, cfg.seed)?;
    let mut outcomes = Vec::new();

    let mut svd_worst: f64 = 0.0;
    let mut ortho_worst: f64 = 0.0;
    let mut fd_worst: f64 = 0.0;
    let mut pca_worst: f64 = 1.0;
    let mut pca_checked = 0;
    for (i, z) in points.iter().enumerate() {
        let jac = net.jacobian(z)?;
        let frame = local_basis(net, z)?;
        svd_worst = svd_worst.max(frame.svd_identity_error(&jac));
        ortho_worst = ortho_worst
            .max(linalg::orthonormality_error(frame.basis()))
            .max(linalg::orthonormality_error(frame.latent_directions()));
        let fd = finite_difference_jacobian(net, z, FD_STEP)?;
        fd_worst = fd_worst.max(max_relative_error(&jac, &fd));

        let n_samples = cfg.pca_samples_per_dim * net.in_dim();
        let pca = local_pca_oracle(net, z, PCA_SCALE, n_samples, crate::rng::derive_seed(cfg.seed, &[i as u64]))?;
        for idx in gapped_indices(frame.singular_values(), net.out_dim(), PCA_REL_GAP) {
            let cos = pca.components.column(idx).dot(&frame.basis().column(idx)).abs();
            pca_worst = pca_worst.min(cos);
            pca_checked += 1;
        }
    }

    outcomes.push(CheckOutcome {
        name: "svd_identity".into(),
        passed: svd_worst <= SVD_IDENTITY_TOL,
        worst: svd_worst,
        tolerance: SVD_IDENTITY_TOL,
        detail: format!("max_i ||J u_i - s_i v_i||_inf over {} points", points.len()),
    });
    outcomes.push(CheckOutcome {
        name: "frame_orthonormality".into(),
        passed: ortho_worst <= ORTHONORMAL_TOL,
        worst: ortho_worst,
        tolerance: ORTHONORMAL_TOL,
        detail: "max |G - I| over Gram matrices of both singular-vector sets".into(),
    });
    outcomes.push(CheckOutcome {
        name: "jacobian_finite_difference".into(),
        passed: fd_worst <= FD_REL_TOL,
        worst: fd_worst,
        tolerance: FD_REL_TOL,
        detail: format!("central differences, h = {FD_STEP:e}; {rejected} near-boundary draws skipped"),
    });
    outcomes.push(CheckOutcome {
        name: "local_pca_equivalence".into(),
        passed: pca_worst >= PCA_COS_TOL,
        worst: pca_worst,
        tolerance: PCA_COS_TOL,
        detail: format!(
            "min |cos| over {pca_checked} gapped components; c = {PCA_SCALE}, {} samples per dimension",
            cfg.pca_samples_per_dim
        ),
    });

    let z = &points[0];
    let (w1, p1) = net.forward(z)?;
    let (w2, p2) = net.forward(z)?;
    let stable = w1 == w2 && p1 == p2;
    outcomes.push(CheckOutcome {
        name: "forward_determinism".into(),
        passed: stable,
        worst: if stable { 0.0 } else { 1.0 },
        tolerance: 0.0,
        detail: "two forward passes give bitwise-identical outputs and patterns".into(),
    });
    Ok(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Activation, LayerSpec};

    #[test]
    fn finite_differences_of_affine_map() {
        let w = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let net = MappingNetwork::new(vec![LayerSpec::new(w.clone(), Vector::zeros(2), Activation::Identity).unwrap()])
            .unwrap();
        let fd = finite_difference_jacobian(&net, &Vector::from_vec(vec![0.1, 0.2]), 1e-5).unwrap();
        assert!(max_relative_error(&w, &fd) < 1e-9);
    }

    #[test]
    fn stencil_detects_kink() {
        let net = MappingNetwork::new(vec![LayerSpec::new(
            Matrix::identity(1, 1),
            Vector::zeros(1),
            Activation::LeakyRelu { slope: 0.2 },
        )
        .unwrap()])
        .unwrap();
        assert!(stencil_in_cell(&net, &Vector::from_vec(vec![1.0]), 1e-5).unwrap());
        assert!(!stencil_in_cell(&net, &Vector::from_vec(vec![1e-6]), 1e-5).unwrap());
    }
}
