//! Central-difference gradient comparison in f64.

use advseg::tensor::{ParamStore, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const REL_TOL: f64 = 1e-4;
pub const STEP: f64 = 1e-6;
pub const SAMPLES_PER_TENSOR: usize = 3;

pub fn random(shape: Vec<usize>, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

pub fn binary(shape: Vec<usize>, rng: &mut ChaCha8Rng, p: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| if rng.random_bool(p) { 1.0 } else { 0.0 }).collect()).unwrap()
}

/// Compares `grads` with central differences of `f` at sampled coordinates
/// of every parameter tensor; returns the relative error
/// `|analytic - numeric| / |numeric|` over all samples.
pub fn compare(f: &dyn Fn(&ParamStore<f64>) -> f64, params: &ParamStore<f64>, grads: &ParamStore<f64>, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut diff, mut scale) = (0.0, 0.0);
    for (name, t) in params.iter() {
        let g = grads.get(name).unwrap_or_else(|| panic!("no gradient for {name}"));
        for _ in 0..SAMPLES_PER_TENSOR.min(t.len()) {
            let i = rng.random_range(0..t.len());
            let mut plus = params.clone();
            plus.get_mut(name).unwrap().data_mut()[i] += STEP;
            let mut minus = params.clone();
            minus.get_mut(name).unwrap().data_mut()[i] -= STEP;
            let num = (f(&plus) - f(&minus)) / (2.0 * STEP);
            let a = g.data()[i];
            diff += (a - num).powi(2);
            scale += num * num;
        }
    }
    diff.sqrt() / scale.sqrt().max(1e-12)
}
