//! Deterministic quasi-random points in a ball.
//!
//! Halton points in the unit cube, shifted by a seeded Cranley-Patterson rotation,
//! mapped to `[-1, 1]^d` and then radially onto the ball. Every interior point is
//! paired with its projection onto the sphere, and the `2d` axis points `±r e_i`
//! are always included, so suprema attained on the boundary or on an axis are hit
//! exactly.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PRIMES: [u64; 40] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173,
];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// About `count` points with `‖z‖ <= radius` in dimension `dim <= 40`.
pub fn ball_samples(dim: usize, radius: f64, count: usize, seed: u64) -> Vec<DVector<f64>> {
    assert!(
        dim <= PRIMES.len(),
        "sampling supports at most {} dimensions",
        PRIMES.len()
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    let mut out = Vec::with_capacity(count + 2 * dim);
    for i in 0..dim {
        for s in [1.0, -1.0] {
            let mut z = DVector::zeros(dim);
            z[i] = s * radius;
            out.push(z);
        }
    }
    let interior = count.saturating_sub(2 * dim) / 2;
    for k in 0..interior as u64 {
        let c = DVector::from_fn(dim, |j, _| {
            let u = (radical_inverse(k + 1, PRIMES[j]) + shift[j]).fract();
            2.0 * u - 1.0
        });
        let n2 = c.norm();
        if n2 == 0.0 {
            continue;
        }
        let ninf = c.amax();
        out.push(&c * (radius * ninf / n2));
        out.push(&c * (radius / n2));
    }
    out
}
