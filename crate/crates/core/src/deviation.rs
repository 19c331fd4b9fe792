//! Distance from points of `W̃` to the latent manifold `f(Z)`.
//!
//! [`project_to_manifold`] minimizes `½‖f(z) − w‖²` with a Levenberg-damped
//! Gauss–Newton iteration using the exact piecewise Jacobian. The returned
//! residual `‖f(z*) − w‖` is attained by an actual latent code, so it is an
//! upper bound on the true distance; a local search cannot certify more.

use rayon::prelude::*;
use serde::Serialize;

use crate::network::MappingNetwork;
use crate::{Error, Matrix, Result, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionOptions {
    pub max_iters: usize,
    /// Convergence threshold on `‖Jᵀr‖`.
    pub tol: f64,
    /// Initial damping; divided by 10 after an accepted step and multiplied by
    /// 10 after a rejected one.
    pub initial_damping: f64,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions {
            max_iters: 200,
            tol: 1e-10,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Projection {
    pub z: Vec<f64>,
    /// `‖f(z) − w_target‖`.
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
}

const MAX_DAMPING: f64 = 1e16;

fn residual_and_jacobian(net: &MappingNetwork, z: &Vector, target: &Vector) -> Result<(Vector, Matrix)> {
    let (w, pattern) = net.forward(z)?;
    // on a kink any one-sided Jacobian is a valid generalized gradient
    let jac = net.jacobian_for_pattern(&pattern);
    Ok((w - target, jac))
}

/// Projects `w_target` onto the manifold starting from `z_init`.
///
/// Never fails for finite inputs of the right shape: when the iteration runs
/// out of budget or stalls, the best point found is returned with
/// `converged = false`.
pub fn project_to_manifold(
    net: &MappingNetwork,
    w_target: &Vector,
    z_init: &Vector,
    opts: &ProjectionOptions,
) -> Result<Projection> {
    if w_target.len() != net.out_dim() {
        return Err(Error::shape("projection target", net.out_dim(), w_target.len()));
    }
    if w_target.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("projection target".into()));
    }
    let mut z = z_init.clone();
    let (mut r, mut jac) = residual_and_jacobian(net, &z, w_target)?;
    let mut cost = r.norm_squared();
    let mut damping = opts.initial_damping;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        if cost == 0.0 {
            converged = true;
            break;
        }
        let grad = jac.transpose() * &r;
        if grad.norm() <= opts.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let mut accepted = false;
        while damping <= MAX_DAMPING {
            let mut system = jtj.clone();
            for i in 0..system.nrows() {
                system[(i, i)] += damping;
            }
            let Some(chol) = system.cholesky() else {
                damping *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&grad));
            let candidate = &z + &step;
            let (cand_r, cand_jac) = residual_and_jacobian(net, &candidate, w_target)?;
            let cand_cost = cand_r.norm_squared();
            if cand_cost < cost {
                z = candidate;
                r = cand_r;
                jac = cand_jac;
                cost = cand_cost;
                damping = (damping / 10.0).max(1e-300);
                accepted = true;
                break;
            }
            damping *= 10.0;
        }
        if !accepted {
            // stalled on a kink or at a local minimum of a non-smooth cell
            break;
        }
    }
    if !converged && cost == 0.0 {
        converged = true;
    }
    Ok(Projection {
        z: z.iter().copied().collect(),
        residual: cost.sqrt(),
        converged,
        iterations,
    })
}

/// A point to test, with the latent code that produced it when known.
#[derive(Debug, Clone)]
pub struct DeviationPoint {
    pub w: Vector,
    pub known_z: Option<Vector>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointDeviation {
    pub index: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Best residual per point over `restarts` Gaussian initializations plus the
/// known latent code, if any. Restart `r` of point `i` always uses the same
/// stream, so more restarts can only lower the result.
pub fn traversal_deviation(
    net: &MappingNetwork,
    points: &[DeviationPoint],
    restarts: usize,
    seed: u64,
    opts: &ProjectionOptions,
) -> Result<Vec<PointDeviation>> {
    points
        .par_iter()
        .enumerate()
        .map(|(index, p)| {
            let mut best: Option<Projection> = None;
            let mut consider = |proj: Projection| {
                if best.as_ref().is_none_or(|b| proj.residual < b.residual) {
                    best = Some(proj);
                }
            };
            if let Some(z) = &p.known_z {
                let proj = project_to_manifold(net, &p.w, z, opts)?;
                let exact = proj.residual == 0.0;
                consider(proj);
                if exact {
                    return Ok(PointDeviation {
                        index,
                        residual: 0.0,
                        converged: true,
                    });
                }
            }
            for r in 0..restarts {
                let mut rng = crate::rng::rng_from(seed, &[index as u64, r as u64]);
                let z0 = crate::rng::gaussian_vector(&mut rng, net.in_dim());
                consider(project_to_manifold(net, &p.w, &z0, opts)?);
            }
            let best = best.ok_or_else(|| {
                Error::InvalidArgument("deviation needs at least one restart or a known latent code".into())
            })?;
            Ok(PointDeviation {
                index,
                residual: best.residual,
                converged: best.converged,
            })
        })
        .collect()
}

/// Points of an iterative path, each with its latent code.
pub fn points_from_path(path: &crate::traversal::TraversalPath) -> Vec<DeviationPoint> {
    path.iterates
        .iter()
        .map(|it| DeviationPoint {
            w: it.w_vector(),
            known_z: Some(it.z_vector()),
        })
        .collect()
}

/// Points without known latent codes.
pub fn points_from_w(ws: &[Vector]) -> Vec<DeviationPoint> {
    ws.iter()
        .map(|w| DeviationPoint {
            w: w.clone(),
            known_z: None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Activation, LayerSpec};

    fn affine() -> MappingNetwork {
        let w = Matrix::from_row_slice(3, 2, &[2.0, 0.5, 0.0, 1.0, 1.0, -1.0]);
        MappingNetwork::new(vec![LayerSpec::new(w, Vector::from_vec(vec![0.1, 0.0, -0.2]), Activation::Identity).unwrap()])
            .unwrap()
    }

    #[test]
    fn exact_start_is_zero() {
        let net = affine();
        let z = Vector::from_vec(vec![0.4, -1.0]);
        let w = net.eval(&z).unwrap();
        let p = project_to_manifold(&net, &w, &z, &ProjectionOptions::default()).unwrap();
        assert_eq!(p.residual, 0.0);
        assert!(p.converged);
        assert_eq!(p.iterations, 0);
    }

    #[test]
    fn affine_column_space_target() {
        let net = affine();
        let target = net.eval(&Vector::from_vec(vec![3.0, -2.0])).unwrap();
        let p = project_to_manifold(&net, &target, &Vector::zeros(2), &ProjectionOptions::default()).unwrap();
        assert!(p.residual < 1e-8, "{}", p.residual);
        assert!(p.iterations <= 5, "{}", p.iterations);
    }

    #[test]
    fn off_range_target_residual_is_normal_component() {
        let net = affine();
        // cross product of the two weight columns
        let normal = Vector::from_vec(vec![-1.0, 2.5, 2.0]).normalize();
        let base = net.eval(&Vector::from_vec(vec![0.2, 0.3])).unwrap();
        let p = project_to_manifold(&net, &(&base + &normal * 0.7), &Vector::zeros(2), &ProjectionOptions::default())
            .unwrap();
        assert!((p.residual - 0.7).abs() < 1e-10);
        assert!(p.converged);
    }

    #[test]
    fn shape_error() {
        let net = affine();
        assert!(project_to_manifold(&net, &Vector::zeros(2), &Vector::zeros(2), &ProjectionOptions::default()).is_err());
    }
}
