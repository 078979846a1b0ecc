#![allow(dead_code)]

use causal_var::linalg::{Mat, Vector};
use causal_var::VarModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_mat(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> Mat {
    Mat::from_fn(r, c, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vector {
    Vector::from_fn(n, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Random stable VAR with `d ≤ max_d`, `p ≤ max_p` and spectral radius in
/// `[0.2, 0.9]`. Lag `k` is rescaled by `c^k`, which rescales every
/// companion eigenvalue by `c`.
pub fn random_stable_model(rng: &mut ChaCha8Rng, max_d: usize, max_p: usize) -> VarModel {
    let d = rng.random_range(1..=max_d);
    let p = rng.random_range(1..=max_p);
    let raw: Vec<Mat> = (0..p).map(|_| normal_mat(rng, d, d, 1.0 / ((d * p) as f64).sqrt())).collect();
    let probe = VarModel::new(Vector::zeros(d), raw.clone(), Mat::identity(d, d)).unwrap();
    let rho = probe.stability(0.0).unwrap().spectral_radius;
    let target: f64 = rng.random_range(0.2..0.9);
    let c = if rho > 0.0 { target / rho } else { 1.0 };
    let coeffs = raw.iter().enumerate().map(|(k, b)| b * c.powi(k as i32 + 1)).collect();
    let l = normal_mat(rng, d, d, 0.5);
    let noise = &l * l.transpose() + Mat::identity(d, d) * 0.05;
    VarModel::new(normal_vec(rng, d, 1.0), coeffs, noise).unwrap()
}
