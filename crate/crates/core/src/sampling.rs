//! Seeded, per-index random streams.
//!
//! Every sample `i` draws from its own ChaCha stream keyed by `(seed, i)`, so
//! results do not depend on evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::norm;
use crate::spec::Region;

pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform point in an axis-aligned box.
pub fn uniform_in(rng: &mut impl Rng, region: &Region) -> Vec<f64> {
    let u: Vec<f64> = (0..region.dim()).map(|_| rng.gen::<f64>()).collect();
    region.lerp(&u)
}

/// Uniform point in the cube `[-1, 1]^n`.
pub fn uniform_cube(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect()
}

/// Uniform point in the closed unit ball (rejection from the cube).
pub fn uniform_ball(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let v = uniform_cube(rng, n);
        if norm(&v) <= 1.0 {
            return v;
        }
    }
}

/// Uniform direction on the unit sphere.
pub fn unit_vector(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let v = uniform_cube(rng, n);
        let l = norm(&v);
        if l > 0.1 && l <= 1.0 {
            return v.iter().map(|c| c / l).collect();
        }
    }
}
