//! Seeded random streams.
//!
//! Every random quantity is drawn from a `ChaCha8Rng` whose seed is derived
//! from a master seed and a tuple of stream labels, so parallel work items get
//! independent streams and results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::Vector;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mixes a master seed with stream labels into a child seed.
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(master), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

pub fn rng_from(master: u64, labels: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(master, labels))
}

pub fn gaussian_vector<R: rand::Rng + ?Sized>(rng: &mut R, dim: usize) -> Vector {
    Vector::from_fn(dim, |_, _| StandardNormal.sample(rng))
}

/// Uniform direction on the unit sphere.
pub fn unit_vector<R: rand::Rng + ?Sized>(rng: &mut R, dim: usize) -> Vector {
    loop {
        let v = gaussian_vector(rng, dim);
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}
