//! Group normalization and batch normalization over `(N, C, spatial...)`.
//!
//! Reductions accumulate in `f64` regardless of the element type.

use crate::element::Element;
use crate::tensor::{Result, Tensor, TensorError};

/// Per-group statistics kept for the backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub rstd: Vec<f64>,
}

fn nc_s<T: Element>(x: &Tensor<T>) -> Result<(usize, usize, usize)> {
    let s = x.shape();
    if s.len() < 2 {
        return Err(TensorError::Rank { expected: 2, shape: s.to_vec() });
    }
    Ok((s[0], s[1], s[2..].iter().product()))
}

fn check_affine<T: Element>(op: &'static str, c: usize, gamma: &Tensor<T>, beta: &Tensor<T>) -> Result<()> {
    if gamma.len() != c || beta.len() != c {
        return Err(TensorError::Mismatch { op, lhs: gamma.shape().to_vec(), rhs: beta.shape().to_vec() });
    }
    Ok(())
}

fn moments<T: Element>(vals: impl Iterator<Item = T> + Clone) -> (f64, f64) {
    let mut n = 0usize;
    let mut sum = 0.0;
    for v in vals.clone() {
        sum += v.as_f64();
        n += 1;
    }
    let mean = sum / n as f64;
    let var = vals.map(|v| (v.as_f64() - mean).powi(2)).sum::<f64>() / n as f64;
    (mean, var)
}

pub fn group_norm_forward<T: Element>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    groups: usize,
    eps: f64,
) -> Result<(Tensor<T>, NormStats)> {
    let (n, c, s) = nc_s(x)?;
    check_affine("group_norm", c, gamma, beta)?;
    if groups == 0 || c % groups != 0 {
        return Err(TensorError::Invalid { op: "group_norm", msg: format!("{c} channels not divisible into {groups} groups") });
    }
    let cpg = c / groups;
    let block = cpg * s;
    let mut out = Tensor::zeros(x.shape().to_vec());
    let mut stats = NormStats { mean: Vec::with_capacity(n * groups), rstd: Vec::with_capacity(n * groups) };
    for (gi, (xb, ob)) in x.data().chunks(block).zip(out.data_mut().chunks_mut(block)).enumerate() {
        let (mean, var) = moments(xb.iter().copied());
        let rstd = 1.0 / (var + eps).sqrt();
        let g0 = (gi % groups) * cpg;
        for (ci, (xc, oc)) in xb.chunks(s).zip(ob.chunks_mut(s)).enumerate() {
            let ga = gamma.data()[g0 + ci].as_f64();
            let be = beta.data()[g0 + ci].as_f64();
            for (o, &v) in oc.iter_mut().zip(xc) {
                *o = T::cast_f64((v.as_f64() - mean) * rstd * ga + be);
            }
        }
        stats.mean.push(mean);
        stats.rstd.push(rstd);
    }
    Ok((out, stats))
}

pub struct AffineNormGrads<T> {
    pub input: Tensor<T>,
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
}

pub fn group_norm_backward<T: Element>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    gout: &Tensor<T>,
    groups: usize,
    stats: &NormStats,
) -> Result<AffineNormGrads<T>> {
    let (_, c, s) = nc_s(x)?;
    let cpg = c / groups;
    let block = cpg * s;
    let mut gx = Tensor::zeros(x.shape().to_vec());
    let mut dgamma = vec![0.0f64; c];
    let mut dbeta = vec![0.0f64; c];
    let blocks = x.data().chunks(block).zip(gout.data().chunks(block)).zip(gx.data_mut().chunks_mut(block));
    for (gi, ((xb, gb), dxb)) in blocks.enumerate() {
        let (mean, rstd) = (stats.mean[gi], stats.rstd[gi]);
        let g0 = (gi % groups) * cpg;
        let mut sum_dxhat = 0.0;
        let mut sum_dxhat_xhat = 0.0;
        for ci in 0..cpg {
            let ga = gamma.data()[g0 + ci].as_f64();
            for (&xv, &gv) in xb[ci * s..(ci + 1) * s].iter().zip(&gb[ci * s..(ci + 1) * s]) {
                let xhat = (xv.as_f64() - mean) * rstd;
                let g = gv.as_f64();
                dgamma[g0 + ci] += g * xhat;
                dbeta[g0 + ci] += g;
                sum_dxhat += g * ga;
                sum_dxhat_xhat += g * ga * xhat;
            }
        }
        let m = block as f64;
        let (mdx, mdxx) = (sum_dxhat / m, sum_dxhat_xhat / m);
        for ci in 0..cpg {
            let ga = gamma.data()[g0 + ci].as_f64();
            let range = ci * s..(ci + 1) * s;
            for ((d, &xv), &gv) in dxb[range.clone()].iter_mut().zip(&xb[range.clone()]).zip(&gb[range]) {
                let xhat = (xv.as_f64() - mean) * rstd;
                *d = T::cast_f64(rstd * (gv.as_f64() * ga - mdx - xhat * mdxx));
            }
        }
    }
    Ok(AffineNormGrads {
        input: gx,
        gamma: Tensor::from_fn(vec![c], |i| T::cast_f64(dgamma[i])),
        beta: Tensor::from_fn(vec![c], |i| T::cast_f64(dbeta[i])),
    })
}

/// Batch statistics produced in training mode, for running-average updates.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchMoments {
    pub mean: Vec<f64>,
    /// Unbiased variance.
    pub var: Vec<f64>,
}

/// How batch normalization obtains its statistics.
#[derive(Clone, Debug)]
pub enum BatchNormMode<'a> {
    /// Use statistics of the current batch.
    Train,
    /// Use fixed running statistics.
    Eval { mean: &'a [f64], var: &'a [f64] },
}

pub fn batch_norm_forward<T: Element>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    mode: &BatchNormMode<'_>,
    eps: f64,
) -> Result<(Tensor<T>, NormStats, Option<BatchMoments>)> {
    let (n, c, s) = nc_s(x)?;
    check_affine("batch_norm", c, gamma, beta)?;
    let xs = x.data();
    let mut stats = NormStats { mean: vec![0.0; c], rstd: vec![0.0; c] };
    let mut moments_out = None;
    match mode {
        BatchNormMode::Train => {
            let mut bm = BatchMoments { mean: vec![0.0; c], var: vec![0.0; c] };
            for ci in 0..c {
                let vals = (0..n).flat_map(|ni| xs[(ni * c + ci) * s..(ni * c + ci + 1) * s].iter().copied());
                let (mean, var) = moments(vals);
                let m = (n * s) as f64;
                stats.mean[ci] = mean;
                stats.rstd[ci] = 1.0 / (var + eps).sqrt();
                bm.mean[ci] = mean;
                bm.var[ci] = if m > 1.0 { var * m / (m - 1.0) } else { var };
            }
            moments_out = Some(bm);
        }
        BatchNormMode::Eval { mean, var } => {
            if mean.len() != c || var.len() != c {
                return Err(TensorError::Invalid { op: "batch_norm", msg: "running statistics length".into() });
            }
            for ci in 0..c {
                stats.mean[ci] = mean[ci];
                stats.rstd[ci] = 1.0 / (var[ci] + eps).sqrt();
            }
        }
    }
    let mut out = Tensor::zeros(x.shape().to_vec());
    for ni in 0..n {
        for ci in 0..c {
            let (mean, rstd) = (stats.mean[ci], stats.rstd[ci]);
            let (ga, be) = (gamma.data()[ci].as_f64(), beta.data()[ci].as_f64());
            let r = (ni * c + ci) * s..(ni * c + ci + 1) * s;
            for (o, &v) in out.data_mut()[r.clone()].iter_mut().zip(&xs[r]) {
                *o = T::cast_f64((v.as_f64() - mean) * rstd * ga + be);
            }
        }
    }
    Ok((out, stats, moments_out))
}

/// Backward pass; `batch_stats` selects whether the statistics depended on `x`.
pub fn batch_norm_backward<T: Element>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    gout: &Tensor<T>,
    stats: &NormStats,
    batch_stats: bool,
) -> Result<AffineNormGrads<T>> {
    let (n, c, s) = nc_s(x)?;
    let xs = x.data();
    let gs = gout.data();
    let mut gx = Tensor::zeros(x.shape().to_vec());
    let mut dgamma = vec![0.0f64; c];
    let mut dbeta = vec![0.0f64; c];
    for ci in 0..c {
        let (mean, rstd) = (stats.mean[ci], stats.rstd[ci]);
        let ga = gamma.data()[ci].as_f64();
        for ni in 0..n {
            let r = (ni * c + ci) * s..(ni * c + ci + 1) * s;
            for (&xv, &gv) in xs[r.clone()].iter().zip(&gs[r]) {
                let g = gv.as_f64();
                dgamma[ci] += g * (xv.as_f64() - mean) * rstd;
                dbeta[ci] += g;
            }
        }
        let m = (n * s) as f64;
        let (mdx, mdxx) = (dbeta[ci] * ga / m, dgamma[ci] * ga / m);
        for ni in 0..n {
            let r = (ni * c + ci) * s..(ni * c + ci + 1) * s;
            let dst = &mut gx.data_mut()[r.clone()];
            for ((d, &xv), &gv) in dst.iter_mut().zip(&xs[r.clone()]).zip(&gs[r]) {
                let dxhat = gv.as_f64() * ga;
                *d = if batch_stats {
                    let xhat = (xv.as_f64() - mean) * rstd;
                    T::cast_f64(rstd * (dxhat - mdx - xhat * mdxx))
                } else {
                    T::cast_f64(rstd * dxhat)
                };
            }
        }
    }
    Ok(AffineNormGrads {
        input: gx,
        gamma: Tensor::from_fn(vec![c], |i| T::cast_f64(dgamma[i])),
        beta: Tensor::from_fn(vec![c], |i| T::cast_f64(dbeta[i])),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_norm_output_is_standardized_per_group() {
        let x = Tensor::<f64>::from_fn(vec![2, 4, 3, 2, 2], |i| (i as f64 * 0.37).sin() * 5.0 + 2.0);
        let gamma = Tensor::full(vec![4], 1.0);
        let beta = Tensor::zeros(vec![4]);
        let (y, _) = group_norm_forward(&x, &gamma, &beta, 2, 1e-5).unwrap();
        for block in y.data().chunks(2 * 12) {
            let m: f64 = block.iter().sum::<f64>() / block.len() as f64;
            let v: f64 = block.iter().map(|b| (b - m).powi(2)).sum::<f64>() / block.len() as f64;
            assert!(m.abs() < 1e-12);
            assert!((v - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn eval_batch_norm_applies_running_statistics() {
        let x = Tensor::<f64>::from_fn(vec![1, 2, 1, 1, 2], |i| i as f64);
        let gamma = Tensor::new(vec![2], vec![2.0, 1.0]).unwrap();
        let beta = Tensor::new(vec![2], vec![0.5, 0.0]).unwrap();
        let mode = BatchNormMode::Eval { mean: &[1.0, 0.0], var: &[4.0 - 1e-5, 1.0 - 1e-5] };
        let (y, _, m) = batch_norm_forward(&x, &gamma, &beta, &mode, 1e-5).unwrap();
        assert!(m.is_none());
        let want = [-0.5, 0.5, 2.0, 3.0];
        for (a, b) in y.data().iter().zip(want) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
