#![allow(dead_code)]

use latentgeom::{Activation, LayerSpec, Matrix, MappingNetwork, Vector};

pub fn affine_net(weight: Matrix) -> MappingNetwork {
    let b = Vector::zeros(weight.nrows());
    MappingNetwork::new(vec![LayerSpec::new(weight, b, Activation::Identity).unwrap()]).unwrap()
}

pub fn diag_net(entries: &[f64]) -> MappingNetwork {
    affine_net(Matrix::from_diagonal(&Vector::from_column_slice(entries)))
}

/// Straight-line evaluation on plain `Vec`s, written without the library's
/// matrix code.
pub fn reference_forward(net: &MappingNetwork, z: &[f64]) -> Vec<f64> {
    let mut x = z.to_vec();
    for layer in net.layers() {
        let w = layer.weight();
        let slope = match layer.activation() {
            Activation::LeakyRelu { slope } => slope,
            Activation::Identity => 1.0,
        };
        let mut y = vec![0.0; w.nrows()];
        for r in 0..w.nrows() {
            let mut acc = layer.bias()[r];
            for c in 0..w.ncols() {
                acc += w[(r, c)] * x[c];
            }
            y[r] = if acc > 0.0 { acc } else { slope * acc };
        }
        x = y;
    }
    x
}
