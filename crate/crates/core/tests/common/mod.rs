//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use divfree::fe_space::{rt_interpolate, CoefVec, RtSpace};
use divfree::mesh::Mesh;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn space(n: usize, perturb: f64, seed: u64, k: usize) -> Arc<RtSpace<f64>> {
    let mesh = Arc::new(Mesh::<f64>::build_structured(n, perturb, seed).unwrap());
    Arc::new(RtSpace::new(mesh, k).unwrap())
}

/// Random stream function `ψ = b g` with the bubble `b = 16 x(1−x) y(1−y)` and a random
/// quadratic `g`, stored as the six coefficients of `g`.
pub fn random_modes(seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..6).map(|_| rng.random_range(-2.0..2.0)).collect()
}

/// `curl ψ = (∂ψ/∂y, −∂ψ/∂x)`: a polynomial field, solenoidal with zero normal trace on the
/// unit square, whose interpolation moments are integrated exactly.
pub fn curl_field(g: &[f64], p: [f64; 2]) -> [f64; 2] {
    let [x, y] = p;
    let b = 16.0 * x * (1.0 - x) * y * (1.0 - y);
    let bx = 16.0 * (1.0 - 2.0 * x) * y * (1.0 - y);
    let by = 16.0 * x * (1.0 - x) * (1.0 - 2.0 * y);
    let gv = g[0] + g[1] * x + g[2] * y + g[3] * x * x + g[4] * x * y + g[5] * y * y;
    let gx = g[1] + 2.0 * g[3] * x + g[4] * y;
    let gy = g[2] + g[4] * x + 2.0 * g[5] * y;
    [by * gv + b * gy, -(bx * gv + b * gx)]
}

/// Exactly divergence-free discrete field with zero boundary dofs.
pub fn divfree_field(space: &RtSpace<f64>, seed: u64) -> CoefVec<f64> {
    let modes = random_modes(seed);
    rt_interpolate(|p| curl_field(&modes, p), space, true)
}

/// Arbitrary coefficients, boundary dofs optionally zeroed.
pub fn random_coefs(space: &RtSpace<f64>, seed: u64, zero_boundary: bool) -> CoefVec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..space.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let c = space.coefs(v).unwrap();
    if zero_boundary {
        space.zero_boundary(&c)
    } else {
        c
    }
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Random discrete divergence-free field: the projection of random coefficients. Its jumps
/// across facets are of the same size as the field itself.
pub fn projected_random(saddle: &divfree::linsolve::SaddleSystem<f64>, seed: u64) -> CoefVec<f64> {
    let u = random_coefs(saddle.space(), seed, false);
    saddle.project_field(&u).unwrap()
}

pub fn saddle(space: &Arc<RtSpace<f64>>) -> (divfree::forms::Assembler<f64>, divfree::linsolve::SaddleSystem<f64>) {
    let dg = divfree::fe_space::DgSpace::new(space.mesh().clone(), space.degree());
    divfree::linsolve::build_saddle(space.clone(), &dg).unwrap()
}
