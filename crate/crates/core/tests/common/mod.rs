#![allow(dead_code)]

use eqreg_core::linalg::random_rotation;
use eqreg_core::{Rot, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_tensor(order: usize, rng: &mut impl Rng) -> Tensor {
    let data = (0..3usize.pow(order as u32)).map(|_| rng.sample(StandardNormal)).collect();
    Tensor::new(order, 3, data).unwrap()
}

pub fn symmetric_tensor(order: usize, rng: &mut impl Rng) -> Tensor {
    normal_tensor(order, rng).symmetrize().unwrap()
}

pub fn rotation(rng: &mut impl Rng) -> Rot {
    random_rotation(rng)
}

/// Relative Frobenius distance, guarded against zero norms.
pub fn rel_dist(a: &Tensor, b: &Tensor) -> f64 {
    a.distance(b).unwrap() / b.norm().max(a.norm()).max(f64::MIN_POSITIVE)
}

/// Rotation about a unit axis by `angle`, via Rodrigues' formula.
pub fn axis_rotation(axis: [f64; 3], angle: f64) -> Rot {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let k = [axis[0] / n, axis[1] / n, axis[2] / n];
    let (s, c) = angle.sin_cos();
    let m = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let cross = match (i, j) {
                (0, 1) => -k[2],
                (0, 2) => k[1],
                (1, 0) => k[2],
                (1, 2) => -k[0],
                (2, 0) => -k[1],
                (2, 1) => k[0],
                _ => 0.0,
            };
            let id = if i == j { 1.0 } else { 0.0 };
            c * id + s * cross + (1.0 - c) * k[i] * k[j]
        })
    });
    Rot::new(m).unwrap()
}
