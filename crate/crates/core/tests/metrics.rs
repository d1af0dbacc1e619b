//! Metrics against straightforward counting and all-pairs oracles.

use advseg::metrics::{dice_score, hd95, sensitivity_specificity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::oracle::{oracle_hd95, random_mask};

#[test]
fn hd95_matches_all_pairs_oracle_on_100_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..100 {
        let d = [rng.random_range(1..=16), rng.random_range(1..=16), rng.random_range(1..=16)];
        let a = random_mask(&mut rng, d);
        let b = random_mask(&mut rng, d);
        let got = hd95(&a, &b, d, [1.0; 3]).unwrap();
        let want = oracle_hd95(&a, &b, d, [1.0; 3]);
        assert_eq!(got, want, "trial {trial} dims {d:?}");
    }
}

#[test]
fn hd95_with_anisotropic_spacing() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..30 {
        let d = [rng.random_range(2..=12), rng.random_range(2..=12), rng.random_range(2..=12)];
        let s = [rng.random_range(0.5..3.0), rng.random_range(0.5..3.0), rng.random_range(0.5..3.0)];
        let a = random_mask(&mut rng, d);
        let b = random_mask(&mut rng, d);
        let got = hd95(&a, &b, d, s).unwrap();
        let want = oracle_hd95(&a, &b, d, s);
        // the two sum squared components in different orders
        assert!((got - want).abs() <= 1e-12 * want.max(1.0), "trial {trial}: {got} vs {want}");
    }
}

#[test]
fn overlap_metrics_match_counting_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let n = rng.random_range(1..4096);
        let pa = rng.random_range(0.0..1.0);
        let pb = rng.random_range(0.0..1.0);
        let a: Vec<bool> = (0..n).map(|_| rng.random_bool(pa)).collect();
        let b: Vec<bool> = (0..n).map(|_| rng.random_bool(pb)).collect();
        let count = |f: &dyn Fn(bool, bool) -> bool| a.iter().zip(&b).filter(|(&x, &y)| f(x, y)).count() as f64;
        let tp = count(&|x, y| x && y);
        let fp = count(&|x, y| x && !y);
        let fn_ = count(&|x, y| !x && y);
        let tn = count(&|x, y| !x && !y);
        let dice = if tp + fp + fn_ == 0.0 { 1.0 } else { 2.0 * tp / (2.0 * tp + fp + fn_) };
        assert_eq!(dice_score(&a, &b).unwrap(), dice);
        let (sens, spec) = sensitivity_specificity(&a, &b).unwrap();
        assert_eq!(sens, (tp + fn_ > 0.0).then(|| tp / (tp + fn_)));
        assert_eq!(spec, (tn + fp > 0.0).then(|| tn / (tn + fp)));
    }
}
