mod common;

use latentgeom::evaluation::{
    direction_grid, eps_sweep, network_hash, subspace_grid, sv_histogram, warpage_suite, WarpageConfig,
};
use latentgeom::gen::{affine_network, curved_network};
use latentgeom::rng::{gaussian_vector, rng_from};
use latentgeom::{local_basis, Activation, LayerSpec, MappingNetwork, Matrix, Vector};

fn small_warpage(ks: Vec<usize>) -> WarpageConfig {
    WarpageConfig {
        k_values: ks,
        n_pairs: 12,
        n_pairs_random: 6,
        eps: 0.1,
        seed: 3,
        ganspace_samples: 400,
    }
}

#[test]
fn zero_eps_gives_exactly_zero() {
    let net = curved_network(0);
    let report = eps_sweep(&net, 4, &[0.0, 0.1], 8, 1).unwrap();
    for metric in ["projection", "geodesic"] {
        let row = report.row("close_w", 0.0, metric).unwrap();
        assert_eq!((row.mean, row.std), (0.0, 0.0));
        assert!(report.row("close_w", 0.1, metric).unwrap().mean > 0.0);
    }
}

#[test]
fn affine_network_has_no_warpage() {
    let net = affine_network(0);
    let report = warpage_suite(&net, &small_warpage(vec![1, 4, 16])).unwrap();
    for setting in ["random_w", "close_w"] {
        for k in [1.0, 4.0, 16.0] {
            for metric in ["projection", "geodesic"] {
                let row = report.row(setting, k, metric).unwrap();
                assert!(row.mean + row.std <= 1e-9, "{setting} k={k} {metric}: {}", row.mean);
            }
        }
    }
    // random frames in R^32 are far apart
    assert!(report.row("random_od", 4.0, "projection").unwrap().mean > 0.5);
}

#[test]
fn warpage_report_is_reproducible_and_keyed_by_network() {
    let net = curved_network(0);
    let cfg = small_warpage(vec![1, 2]);
    let a = warpage_suite(&net, &cfg).unwrap();
    let b = warpage_suite(&net, &cfg).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    let mut csv_a = Vec::new();
    a.write_csv(&mut csv_a).unwrap();
    let mut csv_b = Vec::new();
    b.write_csv(&mut csv_b).unwrap();
    assert_eq!(csv_a, csv_b);
    assert_eq!(a.config.net_sha256, network_hash(&net));
    assert_ne!(network_hash(&net), network_hash(&curved_network(1)));
    assert_eq!(a.rows.len(), 5 * 2 * 2);
}

#[test]
fn identity_network_histogram_is_one_bin() {
    let net = common::diag_net(&[1.0; 4]);
    let h = sv_histogram(&net, 5, 10, 0).unwrap();
    assert!(h.jacobian_values.iter().all(|&v| (v - 1.0).abs() < 1e-14));
    assert_eq!(h.jacobian_counts.iter().filter(|&&c| c > 0).count(), 1);
    assert_eq!(h.jacobian_counts.iter().sum::<usize>(), 20);
    assert_eq!(h.baseline_counts.iter().sum::<usize>(), 20);
}

#[test]
fn rank_deficient_first_layer_shows_zero_singular_values() {
    let (d, r) = (6, 2);
    let mut rng = rng_from(5, &[]);
    let a = Matrix::from_fn(d, r, |_, _| gaussian_vector(&mut rng, 1)[0]);
    let b = Matrix::from_fn(r, d, |_, _| gaussian_vector(&mut rng, 1)[0]);
    let second = Matrix::from_fn(d, d, |_, _| gaussian_vector(&mut rng, 1)[0]);
    let act = Activation::LeakyRelu { slope: 0.2 };
    let net = MappingNetwork::new(vec![
        LayerSpec::new(a * b, Vector::from_element(d, 0.05), act).unwrap(),
        LayerSpec::new(second, Vector::zeros(d), act).unwrap(),
    ])
    .unwrap();
    let points = 8;
    let h = sv_histogram(&net, points, 20, 2).unwrap();
    let tiny = h.jacobian_values.iter().filter(|&&v| v < 1e-8).count();
    assert_eq!(tiny, points * (d - r));
    assert!(h.baseline_values.iter().filter(|&&v| v < 1e-8).count() < points);
}

#[test]
fn grid_is_an_affine_mesh_around_the_frame_point() {
    let net = curved_network(0);
    let mut rng = rng_from(8, &[]);
    let z = net.nudge_off_boundary(&gaussian_vector(&mut rng, 16), &mut rng).unwrap();
    let frame = local_basis(&net, &z).unwrap();
    let n = 3;
    let grid = subspace_grid(&frame, 1, 3, 6.0, n).unwrap();
    let side = 2 * n + 1;
    assert_eq!(grid.len(), side * side);
    let centre = &grid[side * n + n];
    assert_eq!((centre.x, centre.y), (0, 0));
    assert_eq!(centre.w.as_slice(), frame.w().as_slice());
    let at = |x: usize, y: usize| Vector::from_column_slice(&grid[y * side + x].w);
    for y in 0..side {
        for x in 1..side - 1 {
            let second = at(x + 1, y) + at(x - 1, y) - at(x, y) * 2.0;
            assert!(second.amax() < 1e-12);
        }
    }
    for x in 0..side {
        for y in 1..side - 1 {
            let second = at(x, y + 1) + at(x, y - 1) - at(x, y) * 2.0;
            assert!(second.amax() < 1e-12);
        }
    }
    let corner = &grid[side * side - 1];
    let expected = frame.w() + frame.basis_vector(0) * 6.0 + frame.basis_vector(2) * 6.0;
    assert!((Vector::from_column_slice(&corner.w) - expected).amax() < 1e-12);

    let d1 = Vector::from_vec(vec![1.0, 0.0]);
    assert!(direction_grid(&Vector::zeros(3), &d1, &d1, 1.0, 1).is_err());
    assert!(subspace_grid(&frame, 0, 1, 1.0, 1).is_err());
}
