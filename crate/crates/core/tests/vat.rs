mod common;

use advseg::losses::{bernoulli_kl, compute_r_adv, vat_loss, VatConfig, VatTarget};
use advseg::rng::{stream, Purpose};
use advseg::segnet::{build_segnet, predict};
use advseg::tensor::Tensor;
use common::tiny_config;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn batch<T: advseg::tensor::Element>(seed: u64, n: usize, s: usize) -> (Tensor<T>, Tensor<T>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Tensor::from_fn(vec![n, 4, s, s, s], |_| T::cast_f64(rng.random_range(0.0..1.0)));
    let y = Tensor::from_fn(vec![n, 3, s, s, s], |_| T::cast_f64(if rng.random_bool(0.2) { 1.0 } else { 0.0 }));
    (x, y)
}

fn item_norms<T: advseg::tensor::Element>(r: &Tensor<T>) -> Vec<f64> {
    let n = r.shape()[0];
    r.data().chunks(r.len() / n).map(|c| c.iter().map(|v| v.as_f64().powi(2)).sum::<f64>().sqrt()).collect()
}

#[test]
fn perturbation_has_the_budget_norm_per_sample() {
    let model = tiny_config().model;
    let params = build_segnet::<f32>(&model, 1).unwrap();
    for (i, eps) in [0.05, 0.5, 2.0].into_iter().enumerate() {
        for target in [VatTarget::Labels, VatTarget::Prediction] {
            let cfg = VatConfig { eps_adv: eps, target, ..Default::default() };
            let (x, y) = batch::<f32>(i as u64, 2, 16);
            let p = compute_r_adv(&model, &params, &x, &y, &cfg, 10 + i as u64).unwrap();
            for norm in item_norms(&p.r) {
                assert!((norm - eps).abs() <= 1e-5, "eps {eps}: norm {norm}");
            }
        }
    }
}

#[test]
fn direction_is_deterministic_in_the_seed() {
    let model = tiny_config().model;
    let params = build_segnet::<f32>(&model, 2).unwrap();
    let (x, y) = batch::<f32>(3, 2, 16);
    let cfg = VatConfig::default();
    let a = compute_r_adv(&model, &params, &x, &y, &cfg, 5).unwrap();
    let b = compute_r_adv(&model, &params, &x, &y, &cfg, 5).unwrap();
    assert_eq!(a, b);
    let loss = vat_loss(&model, &params, &x, &y, &cfg, 5).unwrap();
    assert!(loss.is_finite() && loss >= 0.0);
}

fn cosine(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    let dot: f64 = a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum();
    dot / (a.norm_l2() * b.norm_l2())
}

#[test]
fn prediction_target_needs_a_larger_xi_in_f32() {
    let model = tiny_config().model;
    let (x, y) = batch::<f64>(4, 1, 16);
    let params = build_segnet::<f64>(&model, 3).unwrap();
    let (params32, x32, y32) = (params.cast::<f32>(), x.cast::<f32>(), y.cast::<f32>());
    let mut cos = Vec::new();
    for xi in [1e-6, 1e-2] {
        let cfg = VatConfig { target: VatTarget::Prediction, xi, ..Default::default() };
        let p64 = compute_r_adv(&model, &params, &x, &y, &cfg, 1).unwrap();
        assert!(!p64.any_fallback());
        let p32 = compute_r_adv(&model, &params32, &x32, &y32, &cfg, 1).unwrap();
        cos.push(cosine(&p64.r, &p32.r.cast::<f64>()));
    }
    eprintln!("cosine to the f64 direction at xi 1e-6, 1e-2: {cos:?}");
    assert!(cos[1] > 0.99, "{cos:?}");

    // against labels the gradient at x itself is informative, so the
    // default xi works in f32
    let cfg = VatConfig::default();
    let p64 = compute_r_adv(&model, &params, &x, &y, &cfg, 1).unwrap();
    let p32 = compute_r_adv(&model, &params32, &x32, &y32, &cfg, 1).unwrap();
    let c = cosine(&p64.r, &p32.r.cast::<f64>());
    assert!(c > 0.99, "labels target: cosine {c}");
}

#[test]
fn adversarial_direction_beats_random_directions_on_an_untrained_net() {
    let model = tiny_config().model;
    let cfg = VatConfig { eps_adv: 1.0, ..Default::default() };
    let mut wins = 0;
    let trials = 20;
    for t in 0..trials {
        let params = build_segnet::<f64>(&model, 100 + t).unwrap();
        let (x, y) = batch::<f64>(200 + t, 1, 16);
        let adv = vat_loss(&model, &params, &x, &y, &cfg, t).unwrap();
        let mut rng = stream(t, Purpose::Probe, 0);
        let raw: Vec<f64> = (0..x.len()).map(|_| rng.sample(StandardNormal)).collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut xr = x.clone();
        xr.add_assign(&Tensor::new(x.shape().to_vec(), raw.iter().map(|v| cfg.eps_adv * v / norm).collect()).unwrap());
        let rand = bernoulli_kl(&y, &predict(&model, &params, xr).unwrap(), cfg.prob_clip).unwrap();
        wins += (adv > rand) as u64;
    }
    assert!(wins >= 18, "adversarial won {wins}/{trials}");
}
