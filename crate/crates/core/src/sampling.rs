//! Seeded random draws shared by entropy estimation and goal sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::geometry::{Pose, PoseDistanceParams};
use crate::scalar::Real;

/// Generator used everywhere a seed is accepted.
pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a stream index into a base seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds an angle magnitude into `[0, pi]`.
pub fn fold_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let a = a.abs() % two_pi;
    if a > std::f64::consts::PI {
        two_pi - a
    } else {
        a
    }
}

/// Random rigid offset drawn from the pose kernel: translation
/// `N(0, sigma_t^2 I)`, rotation about a uniform axis by a folded
/// `N(0, sigma_r^2)` angle.
pub fn kernel_offset<T: Real, R: Rng + ?Sized>(params: &PoseDistanceParams<T>, rng: &mut R) -> Pose<T> {
    let st = params.sigma_t.as_f64();
    let sr = params.sigma_r.as_f64();
    let mut n = || -> f64 { rng.sample(StandardNormal) };
    let t = [n() * st, n() * st, n() * st];
    let axis = loop {
        let a = [n(), n(), n()];
        if a.iter().map(|v| v * v).sum::<f64>() > 1e-12 {
            break a;
        }
    };
    let angle = fold_angle(n() * sr);
    let rot = Pose::from_axis_angle([T::of(axis[0]), T::of(axis[1]), T::of(axis[2])], T::of(angle));
    rot.with_translation([T::of(t[0]), T::of(t[1]), T::of(t[2])])
}

/// Perturbs `mode` so that its translation moves by the offset's
/// translation and its rotation by the offset's angle.
pub fn perturb<T: Real, R: Rng + ?Sized>(mode: &Pose<T>, params: &PoseDistanceParams<T>, rng: &mut R) -> Pose<T> {
    let off = kernel_offset(params, rng);
    let rotated = mode.with_translation([T::zero(); 3]).compose(&off.with_translation([T::zero(); 3]));
    let t = mode.translation();
    let d = off.translation();
    rotated.with_translation([t[0] + d[0], t[1] + d[1], t[2] + d[2]])
}
