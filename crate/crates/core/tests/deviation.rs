use latentgeom::deviation::{
    points_from_path, points_from_w, project_to_manifold, traversal_deviation, DeviationPoint, ProjectionOptions,
};
use latentgeom::evaluation::{robustness_suite, RobustnessConfig, RobustnessMethod};
use latentgeom::gen::{affine_network, curved_network};
use latentgeom::rng::{gaussian_vector, rng_from};
use latentgeom::traversal::{iterative_traverse, linear_w_line};
use latentgeom::{local_basis, MappingNetwork, Vector};

fn start_point(net: &MappingNetwork, seed: u64) -> Vector {
    let mut rng = rng_from(seed, &[0xde7]);
    let z = gaussian_vector(&mut rng, net.in_dim());
    net.nudge_off_boundary(&z, &mut rng).unwrap()
}

/// Unit vector orthogonal to every column of `cols`, by explicit
/// Gram–Schmidt on a fixed probe vector.
fn normal_to(cols: &[Vec<f64>], dim: usize, seed: u64) -> Vec<f64> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for c in cols {
        let mut v = c.clone();
        for _ in 0..2 {
            for b in &basis {
                let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    let mut rng = rng_from(seed, &[0x0ff]);
    let mut v: Vec<f64> = gaussian_vector(&mut rng, dim).iter().copied().collect();
    for _ in 0..2 {
        for b in &basis {
            let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
    }
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

#[test]
fn iterates_of_a_path_have_zero_residual() {
    let net = curved_network(0);
    let path = iterative_traverse(&net, &start_point(&net, 1), 1, 5.0, 50, 1).unwrap();
    let devs = traversal_deviation(&net, &points_from_path(&path), 3, 7, &ProjectionOptions::default()).unwrap();
    assert_eq!(devs.len(), 51);
    assert!(devs.iter().all(|d| d.residual == 0.0 && d.converged));
}

#[test]
fn affine_network_w_line_stays_on_the_range() {
    let net = affine_network(0);
    let z0 = start_point(&net, 2);
    let frame = local_basis(&net, &z0).unwrap();
    for k in [0, 5, 15] {
        let ws = linear_w_line(frame.w(), &frame.basis_vector(k), 12.0, 7).unwrap();
        let devs = traversal_deviation(&net, &points_from_w(&ws), 2, 3, &ProjectionOptions::default()).unwrap();
        for d in &devs {
            assert!(d.residual < 1e-8, "direction {k}: {}", d.residual);
        }
    }
}

#[test]
fn off_range_residual_is_the_normal_offset() {
    // the affine control net maps onto a 16-dimensional affine subspace of R^32
    let net = affine_network(1);
    let z0 = start_point(&net, 3);
    let jac = net.jacobian(&z0).unwrap();
    let cols: Vec<Vec<f64>> = (0..jac.ncols()).map(|c| jac.column(c).iter().copied().collect()).collect();
    let normal = Vector::from_vec(normal_to(&cols, net.out_dim(), 4));
    let base = net.eval(&z0).unwrap();
    for offset in [0.3, 2.0] {
        let target = &base + &normal * offset;
        let p = project_to_manifold(&net, &target, &Vector::zeros(net.in_dim()), &ProjectionOptions::default()).unwrap();
        assert!((p.residual - offset).abs() < 1e-8, "{offset}: {}", p.residual);
    }
}

#[test]
fn more_restarts_never_increase_the_residual() {
    let net = curved_network(0);
    let frame = local_basis(&net, &start_point(&net, 5)).unwrap();
    let ws = linear_w_line(frame.w(), &frame.basis_vector(0), 12.0, 5).unwrap();
    let points: Vec<DeviationPoint> = points_from_w(&ws);
    let opts = ProjectionOptions::default();
    let few = traversal_deviation(&net, &points, 2, 11, &opts).unwrap();
    let many = traversal_deviation(&net, &points, 6, 11, &opts).unwrap();
    for (a, b) in few.iter().zip(&many) {
        assert!(b.residual <= a.residual);
    }
}

#[test]
fn residual_grows_with_linear_intensity() {
    let net = curved_network(0);
    let opts = ProjectionOptions::default();
    let (mut near, mut far) = (0.0, 0.0);
    for s in 0..4 {
        let frame = local_basis(&net, &start_point(&net, 10 + s)).unwrap();
        let v = frame.basis_vector(0);
        let points = vec![
            DeviationPoint {
                w: frame.w() + &v * 1.0,
                known_z: Some(frame.z().clone()),
            },
            DeviationPoint {
                w: frame.w() + &v * 12.0,
                known_z: Some(frame.z().clone()),
            },
        ];
        let devs = traversal_deviation(&net, &points, 4, s, &opts).unwrap();
        near += devs[0].residual;
        far += devs[1].residual;
    }
    assert!(far > near, "intensity 12: {far}, intensity 1: {near}");
}

#[test]
fn small_robustness_run_is_reproducible_and_iterative_is_exact() {
    let net = curved_network(0);
    let cfg = RobustnessConfig {
        intensity: 4.0,
        n_points: 3,
        iterative_steps: 20,
        n_traversals: 2,
        restarts: 2,
        ganspace_samples: 500,
        methods: vec![RobustnessMethod::Iterative, RobustnessMethod::LocalLinear, RobustnessMethod::SefaLinear],
        ..RobustnessConfig::default()
    };
    let (report, records) = robustness_suite(&net, &cfg).unwrap();
    assert_eq!(records.len(), 3 * 2 * 3);
    assert!(records.iter().filter(|r| r.method == "iterative").all(|r| r.residual == 0.0));
    assert!(records.iter().filter(|r| r.intensity == 0.0).all(|r| r.residual == 0.0));
    let row = report.row("iterative", 4.0, "residual_upper_bound").unwrap();
    assert_eq!((row.mean, row.n_samples), (0.0, 2));
    let (again, _) = robustness_suite(&net, &cfg).unwrap();
    assert_eq!(report.to_json(), again.to_json());
}
