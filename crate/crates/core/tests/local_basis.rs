mod common;

use common::{affine_net, diag_net};
use latentgeom::gen::{generate_network, GenConfig, Init};
use latentgeom::linalg::normalize_column_signs;
use latentgeom::local_basis::{approx_manifold_point, local_basis, local_pca_oracle};
use latentgeom::rng::{gaussian_vector, rng_from};
use latentgeom::{Error, Matrix, Vector};

#[test]
fn diagonal_affine_net() {
    let net = diag_net(&[3.0, 1.0]);
    let frame = local_basis(&net, &Vector::from_vec(vec![0.4, -0.2])).unwrap();
    assert_eq!(frame.singular_values().as_slice(), &[3.0, 1.0]);
    assert_eq!(frame.basis_vector(0), Vector::from_vec(vec![1.0, 0.0]));
    assert_eq!(frame.basis_vector(1), Vector::from_vec(vec![0.0, 1.0]));
}

#[test]
fn identity_net_basis_is_identity() {
    let net = affine_net(Matrix::identity(4, 4));
    let frame = local_basis(&net, &Vector::from_vec(vec![1.0, 2.0, 3.0, 4.0])).unwrap();
    assert!(frame.singular_values().iter().all(|&s| s == 1.0));
    assert_eq!(frame.basis(), &Matrix::identity(4, 4));
}

fn random_net() -> latentgeom::MappingNetwork {
    generate_network(&GenConfig::new(vec![5, 9, 7], 0.2, 17, Init::GaussianScaled)).unwrap()
}

#[test]
fn reconstruction_and_invariants() {
    let net = random_net();
    let mut rng = rng_from(0, &[]);
    for _ in 0..20 {
        let z = gaussian_vector(&mut rng, 5);
        let jac = net.jacobian(&z).unwrap();
        let f = local_basis(&net, &z).unwrap();
        let rebuilt = f.basis() * Matrix::from_diagonal(f.singular_values()) * f.latent_directions().transpose();
        assert!((rebuilt - &jac).norm() < 1e-9);
        assert!(f.singular_values().as_slice().windows(2).all(|p| p[0] >= p[1] && p[1] >= 0.0));
        for i in 0..f.len() {
            let v = f.basis_vector(i);
            let big = v.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap();
            assert!(big > 0.0);
            let residual = &jac * f.latent_direction(i) - &v * f.sigma(i);
            assert!(residual.amax() < 1e-9);
        }
        assert_eq!(f.w(), &net.eval(&z).unwrap());
    }
}

#[test]
fn sign_normalization_is_idempotent() {
    let net = random_net();
    let f = local_basis(&net, &Vector::from_vec(vec![0.1, 0.2, -0.3, 0.4, 0.5])).unwrap();
    let mut v = f.basis().clone();
    let mut u = f.latent_directions().clone();
    normalize_column_signs(&mut v, &mut [&mut u]);
    assert_eq!(&v, f.basis());
    assert_eq!(&u, f.latent_directions());
}

#[test]
fn frame_is_constant_within_a_cell() {
    let net = random_net();
    let z = Vector::from_vec(vec![0.3, -0.1, 0.7, 0.2, -0.5]);
    let z2 = &z + Vector::from_element(5, 1e-9);
    assert_eq!(net.forward(&z).unwrap().1.masks(), net.forward(&z2).unwrap().1.masks());
    let (a, b) = (local_basis(&net, &z).unwrap(), local_basis(&net, &z2).unwrap());
    assert_eq!(a.basis(), b.basis());
    assert_eq!(a.singular_values(), b.singular_values());
    assert_eq!(a.latent_directions(), b.latent_directions());
}

#[test]
fn approximating_submanifold() {
    let affine = affine_net(Matrix::from_row_slice(3, 2, &[2.0, 0.5, 0.0, 1.0, 1.0, -1.0]));
    let z = Vector::from_vec(vec![0.2, 0.1]);
    let f = local_basis(&affine, &z).unwrap();
    assert_eq!(approx_manifold_point(&affine, &f, 2, &[0.0, 0.0]).unwrap(), f.w().clone());
    let t = [0.7, -1.3];
    let p = approx_manifold_point(&affine, &f, 2, &t).unwrap();
    let expected = f.w() + f.basis_vector(0) * (t[0] * f.sigma(0)) + f.basis_vector(1) * (t[1] * f.sigma(1));
    assert!((p - expected).amax() < 1e-12);

    let net = random_net();
    let z = Vector::from_vec(vec![0.3, -0.1, 0.7, 0.2, -0.5]);
    let f = local_basis(&net, &z).unwrap();
    let t = [1e-8, -2e-8, 1e-8];
    let moved = &z + f.latent_direction(0) * t[0] + f.latent_direction(1) * t[1] + f.latent_direction(2) * t[2];
    assert_eq!(net.forward(&moved).unwrap().1.masks(), net.forward(&z).unwrap().1.masks());
    let p = approx_manifold_point(&net, &f, 3, &t).unwrap();
    let expected = f.w() + (0..3).map(|i| f.basis_vector(i) * (t[i] * f.sigma(i))).fold(Vector::zeros(7), |a, b| a + b);
    assert!((p - expected).amax() < 1e-14);
}

#[test]
fn rank_deficient_direction_is_rejected() {
    let net = affine_net(Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
    let f = local_basis(&net, &Vector::zeros(2)).unwrap();
    assert!(matches!(f.check_direction(2), Err(Error::RankDeficient { .. })));
    assert!(matches!(approx_manifold_point(&net, &f, 2, &[0.1, 0.1]), Err(Error::RankDeficient { .. })));
    assert!(f.check_direction(0).is_err());
    assert!(f.check_direction(3).is_err());
}

#[test]
fn local_pca_on_diagonal_net() {
    let net = diag_net(&[3.0, 1.0]);
    let pca = local_pca_oracle(&net, &Vector::zeros(2), 0.01, 10_000, 4).unwrap();
    assert!(pca.components[(0, 0)].abs() >= 0.99);
    let ratio = pca.variances[0] / pca.variances[1];
    assert!((ratio - 9.0).abs() / 9.0 < 0.2, "{ratio}");
}

#[test]
fn local_pca_on_isotropic_net() {
    let net = diag_net(&[1.0, 1.0, 1.0]);
    let pca = local_pca_oracle(&net, &Vector::zeros(3), 0.01, 20_000, 5).unwrap();
    for &v in pca.variances.iter() {
        assert!((v / 1e-4 - 1.0).abs() < 0.05, "{v}");
    }
}

#[test]
fn local_pca_undersampled() {
    let net = diag_net(&[3.0, 1.0, 1.0]);
    assert!(matches!(local_pca_oracle(&net, &Vector::zeros(3), 0.01, 2, 0), Err(Error::UnderSampled { .. })));
    assert!(local_pca_oracle(&net, &Vector::zeros(3), 0.0, 100, 0).is_err());
}
