//! Synthetic mapping networks.

use rand_distr::{Distribution, Normal, StandardNormal};

use crate::network::{Activation, LayerSpec, MappingNetwork};
use crate::{linalg, Error, Matrix, Result, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// Entries `N(0, 2 / (in_dim·(1 + slope²)))`, which keeps the second
    /// moment of activations roughly constant through leaky-ReLU layers.
    GaussianScaled,
    /// Haar-random (semi-)orthogonal factors scaled by `√(2 / (1 + slope²))`.
    Orthogonal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    /// Layer widths `[d_Z, h_1, …, d_W̃]`; `dims.len() − 1` layers.
    pub dims: Vec<usize>,
    /// Leaky-ReLU negative slope applied after every layer, in `(0, 1]`.
    pub slope: f64,
    pub seed: u64,
    pub init: Init,
    /// Standard deviation of the Gaussian biases.
    pub bias_std: f64,
}

impl GenConfig {
    pub fn new(dims: Vec<usize>, slope: f64, seed: u64, init: Init) -> Self {
        GenConfig {
            dims,
            slope,
            seed,
            init,
            bias_std: DEFAULT_BIAS_STD,
        }
    }
}

pub const DEFAULT_BIAS_STD: f64 = 0.1;

pub fn generate_network(cfg: &GenConfig) -> Result<MappingNetwork> {
    if cfg.dims.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "dims needs at least two entries (input and output width), got {:?}",
            cfg.dims
        )));
    }
    if let Some(i) = cfg.dims.iter().position(|&d| d == 0) {
        return Err(Error::InvalidArgument(format!("dims[{i}] must be positive")));
    }
    if !(cfg.slope > 0.0 && cfg.slope <= 1.0) {
        return Err(Error::InvalidArgument(format!("slope must lie in (0, 1], got {}", cfg.slope)));
    }
    if !(cfg.bias_std >= 0.0 && cfg.bias_std.is_finite()) {
        return Err(Error::InvalidArgument(format!("bias_std must be non-negative, got {}", cfg.bias_std)));
    }
    let mut rng = crate::rng::rng_from(cfg.seed, &[0x9e7]);
    let gain2 = 2.0 / (1.0 + cfg.slope * cfg.slope);
    let bias_dist = Normal::new(0.0, cfg.bias_std).expect("valid bias std");
    let mut layers = Vec::with_capacity(cfg.dims.len() - 1);
    for pair in cfg.dims.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let weight = match cfg.init {
            Init::GaussianScaled => {
                let std = (gain2 / fan_in as f64).sqrt();
                Matrix::from_fn(fan_out, fan_in, |_, _| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    g * std
                })
            }
            Init::Orthogonal => {
                let tall = fan_out.max(fan_in);
                let wide = fan_out.min(fan_in);
                let g = Matrix::from_fn(tall, wide, |_, _| StandardNormal.sample(&mut rng));
                let q = linalg::orthonormalize(&g) * gain2.sqrt();
                if fan_out >= fan_in {
                    q
                } else {
                    q.transpose()
                }
            }
        };
        let bias = Vector::from_fn(fan_out, |_, _| bias_dist.sample(&mut rng));
        layers.push(LayerSpec::new(weight, bias, Activation::LeakyRelu { slope: cfg.slope })?);
    }
    MappingNetwork::new(layers)
}

/// Width profile of the reference curved network: 16-dimensional input,
/// eight leaky-ReLU layers of width 32. The input is narrower than the output
/// so that the image is a proper submanifold of `R^32`; with equal widths and
/// invertible layers the network would be onto.
pub const CURVED_DIMS: [usize; 9] = [16, 32, 32, 32, 32, 32, 32, 32, 32];

pub const CURVED_SLOPE: f64 = 0.2;

/// Reference curved network used by the experiments and tests.
pub fn curved_network(seed: u64) -> MappingNetwork {
    generate_network(&GenConfig::new(CURVED_DIMS.to_vec(), CURVED_SLOPE, seed, Init::GaussianScaled))
        .expect("reference configuration is valid")
}

/// Same widths with slope 1: a globally affine control network.
pub fn affine_network(seed: u64) -> MappingNetwork {
    generate_network(&GenConfig::new(CURVED_DIMS.to_vec(), 1.0, seed, Init::GaussianScaled))
        .expect("reference configuration is valid")
}

/// Eight leaky-ReLU layers of width 32 with a 32-dimensional input. The
/// network is onto, but its Jacobian is a product of eight random factors and
/// has a strongly spread spectrum.
pub const SQUARE_DIMS: [usize; 9] = [32; 9];

pub fn square_network(seed: u64) -> MappingNetwork {
    generate_network(&GenConfig::new(SQUARE_DIMS.to_vec(), CURVED_SLOPE, seed, Init::GaussianScaled))
        .expect("reference configuration is valid")
}
