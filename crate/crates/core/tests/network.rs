mod common;

use common::{affine_net, reference_forward};
use latentgeom::checks::{finite_difference_jacobian, max_relative_error, sample_interior_points};
use latentgeom::gen::{generate_network, GenConfig, Init};
use latentgeom::io::network_from_json;
use latentgeom::rng::{gaussian_vector, rng_from, unit_vector};
use latentgeom::{Activation, Error, LayerSpec, Matrix, MappingNetwork, Vector};

fn leaky_identity(dim: usize, slope: f64) -> MappingNetwork {
    MappingNetwork::new(vec![LayerSpec::new(
        Matrix::identity(dim, dim),
        Vector::zeros(dim),
        Activation::LeakyRelu { slope },
    )
    .unwrap()])
    .unwrap()
}

#[test]
fn identity_layer_is_identity() {
    let net = affine_net(Matrix::identity(3, 3));
    let z = Vector::from_vec(vec![0.5, -2.0, 7.25]);
    assert_eq!(net.eval(&z).unwrap(), z);
}

#[test]
fn leaky_relu_definition() {
    let net = leaky_identity(2, 0.2);
    let z = Vector::from_vec(vec![1.0, -1.0]);
    assert_eq!(net.eval(&z).unwrap(), Vector::from_vec(vec![1.0, -0.2]));
    assert_eq!(net.jacobian(&z).unwrap(), Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 0.2])));
}

#[test]
fn forward_matches_reference_evaluator() {
    let net = generate_network(&GenConfig::new(vec![5, 7, 4], 0.2, 11, Init::GaussianScaled)).unwrap();
    let mut rng = rng_from(3, &[]);
    for _ in 0..100 {
        let z = gaussian_vector(&mut rng, 5);
        let w = net.eval(&z).unwrap();
        let reference = reference_forward(&net, z.as_slice());
        for (a, b) in w.iter().zip(&reference) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn affine_jacobian_is_weight_product() {
    let a = Matrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 0.0, 3.0]);
    let b = Matrix::from_row_slice(2, 3, &[0.2, -0.4, 1.0, 2.0, 0.0, 0.1]);
    let net = MappingNetwork::new(vec![
        LayerSpec::new(a.clone(), Vector::from_vec(vec![0.1, 0.2, 0.3]), Activation::Identity).unwrap(),
        LayerSpec::new(b.clone(), Vector::zeros(2), Activation::LeakyRelu { slope: 1.0 }).unwrap(),
    ])
    .unwrap();
    assert!(net.is_globally_affine());
    let expected = &b * &a;
    let mut rng = rng_from(1, &[]);
    for _ in 0..10 {
        let jac = net.jacobian(&gaussian_vector(&mut rng, 2)).unwrap();
        assert!((jac - &expected).amax() < 1e-15);
    }
}

#[test]
fn jacobian_matches_finite_differences() {
    let net = generate_network(&GenConfig::new(vec![6, 10, 10, 8], 0.2, 5, Init::GaussianScaled)).unwrap();
    let (points, _) = sample_interior_points(&net, 50, 1e-5, 9).unwrap();
    for z in &points {
        let exact = net.jacobian(z).unwrap();
        let fd = finite_difference_jacobian(&net, z, 1e-5).unwrap();
        assert!(max_relative_error(&exact, &fd) <= 1e-4);
    }
}

#[test]
fn boundary_point_is_reported_and_nudged() {
    let net = leaky_identity(2, 0.2);
    let z = Vector::from_vec(vec![1.0, 0.0]);
    match net.jacobian(&z) {
        Err(Error::Boundary { layer, unit, .. }) => assert_eq!((layer, unit), (0, 1)),
        other => panic!("expected boundary error, got {other:?}"),
    }
    let moved = net.nudge_off_boundary(&z, &mut rng_from(0, &[])).unwrap();
    assert!((&moved - &z).norm() <= 1e-6 * (1.0 + 1e-8));
    assert!(net.jacobian(&moved).is_ok());
}

#[test]
fn linear_approximation_exact_in_cell_and_not_across() {
    let net = generate_network(&GenConfig::new(vec![4, 8, 6], 0.2, 2, Init::GaussianScaled)).unwrap();
    let z_b = Vector::from_vec(vec![0.3, -0.7, 1.1, 0.2]);
    let (_, pattern) = net.forward(&z_b).unwrap();
    let approx = net.linear_approximation_at(&z_b).unwrap();

    let small = &z_b + Vector::from_vec(vec![1e-7, -2e-7, 1e-7, 3e-7]);
    assert_eq!(net.forward(&small).unwrap().1.masks(), pattern.masks());
    let gap = (approx.apply(&small) - net.eval(&small).unwrap()).amax();
    assert!(gap < 1e-14, "{gap}");

    // move along a direction until the first layer's closest unit flips sign
    let first = &net.layers()[0];
    let pre = first.weight() * &z_b + first.bias();
    let unit = (0..pre.len()).min_by(|&a, &b| pre[a].abs().total_cmp(&pre[b].abs())).unwrap();
    let row = first.weight().row(unit).transpose();
    let crossing = &z_b - &row * (2.0 * pre[unit] / row.norm_squared());
    assert_ne!(net.forward(&crossing).unwrap().1.masks(), pattern.masks());
    assert!((approx.apply(&crossing) - net.eval(&crossing).unwrap()).norm() > 1e-6);
}

#[test]
fn piecewise_affine_along_a_ray() {
    let net = generate_network(&GenConfig::new(vec![4, 8, 8, 5], 0.2, 8, Init::GaussianScaled)).unwrap();
    let mut rng = rng_from(4, &[]);
    let z = gaussian_vector(&mut rng, 4);
    let d = unit_vector(&mut rng, 4);
    let (w0, pattern) = net.forward(&z).unwrap();
    let slope = net.jacobian(&z).unwrap() * &d;
    let mut t = 1e-3;
    while net.forward(&(&z + &d * t)).unwrap().1.masks() != pattern.masks() {
        t /= 2.0;
    }
    for s in [t / 4.0, t / 2.0, t] {
        let w = net.eval(&(&z + &d * s)).unwrap();
        assert!((w - &w0 - &slope * s).amax() < 1e-12);
    }
}

#[test]
fn forward_is_bitwise_stable() {
    let net = generate_network(&GenConfig::new(vec![6, 6, 6], 0.2, 1, Init::Orthogonal)).unwrap();
    let z = gaussian_vector(&mut rng_from(2, &[]), 6);
    let (w1, p1) = net.forward(&z).unwrap();
    let (w2, p2) = net.forward(&z).unwrap();
    assert_eq!(w1, w2);
    assert_eq!(p1, p2);
    for (mask, layer) in p1.masks().iter().zip(net.layers()) {
        assert_eq!(mask.len(), layer.out_dim());
        assert!(mask.iter().all(|&m| m == 1.0 || m == 0.2));
    }
}

#[test]
fn input_validation() {
    let net = leaky_identity(2, 0.2);
    assert!(matches!(net.eval(&Vector::zeros(3)), Err(Error::Shape { .. })));
    assert!(matches!(net.eval(&Vector::from_vec(vec![f64::NAN, 0.0])), Err(Error::NonFinite(_))));
    assert!(LayerSpec::new(Matrix::zeros(2, 2), Vector::zeros(3), Activation::Identity).is_err());
    assert!(LayerSpec::new(Matrix::zeros(2, 2), Vector::zeros(2), Activation::LeakyRelu { slope: 0.0 }).is_err());
    let l1 = LayerSpec::new(Matrix::zeros(3, 2), Vector::zeros(3), Activation::Identity).unwrap();
    let l2 = LayerSpec::new(Matrix::zeros(2, 4), Vector::zeros(2), Activation::Identity).unwrap();
    assert!(matches!(MappingNetwork::new(vec![l1, l2]), Err(Error::InvalidNetwork(_))));
    assert!(MappingNetwork::new(vec![]).is_err());
}

#[test]
fn loader_names_offending_field() {
    let cases = [
        (r#"{"in_dim": 2, "layers": [{"weight": [[1, 2]], "bias": [0, 1], "activation": "identity"}]}"#, "layers[0]"),
        (r#"{"in_dim": 3, "layers": [{"weight": [[1, 2]], "bias": [0], "activation": "identity"}]}"#, "layers[0].weight"),
        (r#"{"in_dim": 2, "layers": [{"weight": [[1, 2]], "bias": [0], "activation": "leaky_relu"}]}"#, "layers[0].slope"),
        (r#"{"in_dim": 2, "layers": [{"weight": [[1, 2]], "bias": [0], "activation": "tanh"}]}"#, "layers[0].activation"),
    ];
    for (text, field) in cases {
        let msg = network_from_json(text).unwrap_err().to_string();
        assert!(msg.contains(field), "{msg:?} should name {field}");
    }
    assert!(network_from_json(r#"{"in_dim": 1, "layers": [{"weight": [[1e999]], "bias": [0], "activation": "identity"}]}"#).is_err());
}
