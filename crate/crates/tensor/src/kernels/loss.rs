//! Scalar reductions used as training objectives.
//!
//! Every forward returns an `f64` value; every backward returns the gradient
//! with respect to the prediction scaled by the upstream gradient `up`.

use crate::element::Element;
use crate::tensor::{Result, Tensor, TensorError};

fn same_shape<T: Element>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(TensorError::Mismatch { op, lhs: a.shape().to_vec(), rhs: b.shape().to_vec() });
    }
    Ok(())
}

fn blocks<T: Element>(p: &Tensor<T>) -> Result<(usize, usize)> {
    let s = p.shape();
    if s.len() < 2 {
        return Err(TensorError::Rank { expected: 2, shape: s.to_vec() });
    }
    Ok((s[0] * s[1], s[2..].iter().product()))
}

/// Soft Dice loss averaged over every `(batch, channel)` pair:
/// `1 - (factor * <y, p> + eps) / (|y|_1 + |p|_1 + eps)`.
pub fn soft_dice<T: Element>(y: &Tensor<T>, p: &Tensor<T>, eps: f64, factor: f64) -> Result<f64> {
    same_shape("soft_dice", y, p)?;
    let (nb, s) = blocks(p)?;
    let mut total = 0.0;
    for (yb, pb) in y.data().chunks(s).zip(p.data().chunks(s)) {
        let (num, den) = dice_terms(yb, pb, eps, factor);
        total += 1.0 - num / den;
    }
    Ok(total / nb as f64)
}

fn dice_terms<T: Element>(y: &[T], p: &[T], eps: f64, factor: f64) -> (f64, f64) {
    let mut inter = 0.0;
    let mut l1 = 0.0;
    for (&yv, &pv) in y.iter().zip(p) {
        let (yv, pv) = (yv.as_f64(), pv.as_f64());
        inter += yv * pv;
        l1 += yv.abs() + pv.abs();
    }
    (factor * inter + eps, l1 + eps)
}

pub fn soft_dice_backward<T: Element>(y: &Tensor<T>, p: &Tensor<T>, eps: f64, factor: f64, up: f64) -> Tensor<T> {
    let (nb, s) = blocks(p).expect("validated in forward");
    let mut g = Vec::with_capacity(p.len());
    for (yb, pb) in y.data().chunks(s).zip(p.data().chunks(s)) {
        let (num, den) = dice_terms(yb, pb, eps, factor);
        let scale = -up / nb as f64;
        for (&yv, &pv) in yb.iter().zip(pb) {
            let sign = pv.as_f64().signum();
            let dr = (factor * yv.as_f64() * den - num * sign) / (den * den);
            g.push(T::cast_f64(scale * dr));
        }
    }
    Tensor::new(p.shape().to_vec(), g).expect("same shape")
}

#[inline]
fn xlogy_ratio(a: f64, b: f64) -> f64 {
    if a <= 0.0 {
        0.0
    } else {
        a * (a / b).ln()
    }
}

#[inline]
fn clip(p: f64, delta: f64) -> (f64, bool) {
    if p < delta {
        (delta, false)
    } else if p > 1.0 - delta {
        (1.0 - delta, false)
    } else {
        (p, true)
    }
}

/// Mean Bernoulli KL divergence `KL(y || p)` with `p` clipped to `[delta, 1 - delta]`.
pub fn bernoulli_kl<T: Element>(y: &Tensor<T>, p: &Tensor<T>, delta: f64) -> Result<f64> {
    same_shape("bernoulli_kl", y, p)?;
    let mut total = 0.0;
    for (&yv, &pv) in y.data().iter().zip(p.data()) {
        let (yv, (pc, _)) = (yv.as_f64(), clip(pv.as_f64(), delta));
        total += xlogy_ratio(yv, pc) + xlogy_ratio(1.0 - yv, 1.0 - pc);
    }
    Ok(total / p.len() as f64)
}

pub fn bernoulli_kl_backward<T: Element>(y: &Tensor<T>, p: &Tensor<T>, delta: f64, up: f64) -> Tensor<T> {
    let scale = up / p.len() as f64;
    let data = y
        .data()
        .iter()
        .zip(p.data())
        .map(|(&yv, &pv)| {
            let (pc, inside) = clip(pv.as_f64(), delta);
            if !inside {
                return T::zero();
            }
            let yv = yv.as_f64();
            T::cast_f64(scale * (-yv / pc + (1.0 - yv) / (1.0 - pc)))
        })
        .collect();
    Tensor::new(p.shape().to_vec(), data).expect("same shape")
}

/// `-mean(log(clip(p)))`.
pub fn mean_neg_log<T: Element>(p: &Tensor<T>, delta: f64) -> f64 {
    -p.data().iter().map(|&v| clip(v.as_f64(), delta).0.ln()).sum::<f64>() / p.len() as f64
}

pub fn mean_neg_log_backward<T: Element>(p: &Tensor<T>, delta: f64, up: f64) -> Tensor<T> {
    let scale = up / p.len() as f64;
    p.map(|v| {
        let (pc, inside) = clip(v.as_f64(), delta);
        if inside {
            T::cast_f64(-scale / pc)
        } else {
            T::zero()
        }
    })
}

/// `-mean(log(1 - clip(p)))`.
pub fn mean_neg_log1m<T: Element>(p: &Tensor<T>, delta: f64) -> f64 {
    -p.data().iter().map(|&v| (1.0 - clip(v.as_f64(), delta).0).ln()).sum::<f64>() / p.len() as f64
}

pub fn mean_neg_log1m_backward<T: Element>(p: &Tensor<T>, delta: f64, up: f64) -> Tensor<T> {
    let scale = up / p.len() as f64;
    p.map(|v| {
        let (pc, inside) = clip(v.as_f64(), delta);
        if inside {
            T::cast_f64(scale / (1.0 - pc))
        } else {
            T::zero()
        }
    })
}

/// `sum(x * c)` for a constant tensor `c`.
pub fn dot<T: Element>(x: &Tensor<T>, c: &Tensor<T>) -> Result<f64> {
    same_shape("dot", x, c)?;
    Ok(x.data().iter().zip(c.data()).map(|(&a, &b)| a.as_f64() * b.as_f64()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: Vec<usize>, v: Vec<f64>) -> Tensor<f64> {
        Tensor::new(shape, v).unwrap()
    }

    #[test]
    fn dice_closed_forms() {
        let z = t(vec![1, 1, 4], vec![0.0; 4]);
        assert_eq!(soft_dice(&z, &z, 1.0, 2.0).unwrap(), 0.0);
        let y = t(vec![1, 1, 4], vec![1.0, 0.0, 0.0, 0.0]);
        let p = t(vec![1, 1, 4], vec![0.5, 0.0, 0.0, 0.0]);
        // 1 - (2 * 0.5 + 1) / (1 + 0.5 + 1)
        assert!((soft_dice(&y, &p, 1.0, 2.0).unwrap() - 0.2).abs() < 1e-15);
        let ones = t(vec![1, 1, 4], vec![1.0, 1.0, 0.0, 1.0]);
        assert!(soft_dice(&ones, &ones, 1.0, 2.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn kl_closed_forms() {
        let one = t(vec![1], vec![1.0]);
        let half = t(vec![1], vec![0.5]);
        assert!((bernoulli_kl(&one, &half, 1e-7).unwrap() - 2f64.ln()).abs() < 1e-15);
        let zero = t(vec![1], vec![0.0]);
        let p9 = t(vec![1], vec![0.9]);
        assert!((bernoulli_kl(&zero, &p9, 1e-7).unwrap() + 0.1f64.ln()).abs() < 1e-12);
        let near = t(vec![1], vec![1.0 - 1e-7]);
        assert!(bernoulli_kl(&one, &near, 1e-7).unwrap() <= 1e-6);
        // fully saturated prediction is clipped, finite
        assert!(bernoulli_kl(&zero, &one, 1e-7).unwrap().is_finite());
    }

    #[test]
    fn log_terms_closed_forms() {
        let half = t(vec![3], vec![0.5; 3]);
        assert!((mean_neg_log(&half, 1e-7) - 2f64.ln()).abs() < 1e-15);
        assert!((mean_neg_log1m(&half, 1e-7) - 2f64.ln()).abs() < 1e-15);
        let worst = mean_neg_log(&t(vec![1], vec![0.0]), 1e-7);
        assert!((worst + 1e-7f64.ln()).abs() < 1e-9);
    }
}
