//! Pooling, trilinear resampling and channel concatenation.

use crate::element::Element;
use crate::tensor::{Result, Tensor, TensorError};

/// 2x2x2 max pooling with stride 2. Returns the output and, for every
/// output element, the flat index of the winning input element.
pub fn max_pool2_forward<T: Element>(x: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
    let [n, c, d, h, w] = x.dims5()?;
    if d % 2 != 0 || h % 2 != 0 || w % 2 != 0 {
        return Err(TensorError::Invalid { op: "max_pool2", msg: format!("odd spatial dims {:?}", x.shape()) });
    }
    let (od, oh, ow) = (d / 2, h / 2, w / 2);
    let mut out = Tensor::zeros(vec![n, c, od, oh, ow]);
    let mut arg = vec![0usize; out.len()];
    let xs = x.data();
    let mut o = 0;
    for nc in 0..n * c {
        let base = nc * d * h * w;
        for z in 0..od {
            for y in 0..oh {
                for xx in 0..ow {
                    let mut best = base + ((2 * z) * h + 2 * y) * w + 2 * xx;
                    for dz in 0..2 {
                        for dy in 0..2 {
                            for dx in 0..2 {
                                let i = base + ((2 * z + dz) * h + 2 * y + dy) * w + 2 * xx + dx;
                                if xs[i] > xs[best] {
                                    best = i;
                                }
                            }
                        }
                    }
                    out.data_mut()[o] = xs[best];
                    arg[o] = best;
                    o += 1;
                }
            }
        }
    }
    Ok((out, arg))
}

pub fn max_pool2_backward<T: Element>(input_shape: &[usize], gout: &Tensor<T>, argmax: &[usize]) -> Tensor<T> {
    let mut gx = Tensor::zeros(input_shape.to_vec());
    for (&i, &g) in argmax.iter().zip(gout.data()) {
        gx.data_mut()[i] += g;
    }
    gx
}

/// Interpolation taps for doubling an axis of length `len`, using
/// half-pixel sample centres with the source coordinate clamped at 0.
fn double_taps(len: usize) -> Vec<(usize, usize, f64)> {
    (0..2 * len)
        .map(|o| {
            let src = ((o as f64 + 0.5) / 2.0 - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(len - 1);
            let i1 = (i0 + 1).min(len - 1);
            (i0, i1, src - i0 as f64)
        })
        .collect()
}

/// Resamples axis `axis` of a row-major array viewed as `[outer, len, inner]`.
fn resample_axis<T: Element>(data: &[T], outer: usize, len: usize, inner: usize, taps: &[(usize, usize, f64)]) -> Vec<T> {
    let olen = taps.len();
    let mut out = vec![T::zero(); outer * olen * inner];
    for o in 0..outer {
        let src = &data[o * len * inner..(o + 1) * len * inner];
        let dst = &mut out[o * olen * inner..(o + 1) * olen * inner];
        for (j, &(i0, i1, lam)) in taps.iter().enumerate() {
            let (a, b) = (T::cast_f64(1.0 - lam), T::cast_f64(lam));
            let d = &mut dst[j * inner..(j + 1) * inner];
            let s0 = &src[i0 * inner..(i0 + 1) * inner];
            let s1 = &src[i1 * inner..(i1 + 1) * inner];
            for ((dv, &v0), &v1) in d.iter_mut().zip(s0).zip(s1) {
                *dv = a * v0 + b * v1;
            }
        }
    }
    out
}

fn resample_axis_adjoint<T: Element>(
    gout: &[T],
    outer: usize,
    len: usize,
    inner: usize,
    taps: &[(usize, usize, f64)],
) -> Vec<T> {
    let olen = taps.len();
    let mut gx = vec![T::zero(); outer * len * inner];
    for o in 0..outer {
        let g = &gout[o * olen * inner..(o + 1) * olen * inner];
        let dst = &mut gx[o * len * inner..(o + 1) * len * inner];
        for (j, &(i0, i1, lam)) in taps.iter().enumerate() {
            let (a, b) = (T::cast_f64(1.0 - lam), T::cast_f64(lam));
            for t in 0..inner {
                let gv = g[j * inner + t];
                dst[i0 * inner + t] += a * gv;
                dst[i1 * inner + t] += b * gv;
            }
        }
    }
    gx
}

/// Trilinear upsampling by a factor of two on every spatial axis.
pub fn upsample2_forward<T: Element>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, c, d, h, w] = x.dims5()?;
    let nc = n * c;
    let a = resample_axis(x.data(), nc * d * h, w, 1, &double_taps(w));
    let b = resample_axis(&a, nc * d, h, 2 * w, &double_taps(h));
    let out = resample_axis(&b, nc, d, 4 * h * w, &double_taps(d));
    Tensor::new(vec![n, c, 2 * d, 2 * h, 2 * w], out)
}

pub fn upsample2_backward<T: Element>(input_shape: &[usize], gout: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, c, d, h, w) = (input_shape[0], input_shape[1], input_shape[2], input_shape[3], input_shape[4]);
    let nc = n * c;
    let gb = resample_axis_adjoint(gout.data(), nc, d, 4 * h * w, &double_taps(d));
    let ga = resample_axis_adjoint(&gb, nc * d, h, 2 * w, &double_taps(h));
    let gx = resample_axis_adjoint(&ga, nc * d * h, w, 1, &double_taps(w));
    Tensor::new(input_shape.to_vec(), gx)
}

/// Concatenates two `(N, C, ...)` tensors along the channel axis.
pub fn concat_channels<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa.len() < 2 || sa.len() != sb.len() || sa[0] != sb[0] || sa[2..] != sb[2..] {
        return Err(TensorError::Mismatch { op: "concat_channels", lhs: sa.to_vec(), rhs: sb.to_vec() });
    }
    let n = sa[0];
    let (la, lb) = (a.len() / n, b.len() / n);
    let mut data = Vec::with_capacity(a.len() + b.len());
    for ni in 0..n {
        data.extend_from_slice(&a.data()[ni * la..(ni + 1) * la]);
        data.extend_from_slice(&b.data()[ni * lb..(ni + 1) * lb]);
    }
    let mut shape = sa.to_vec();
    shape[1] += sb[1];
    Tensor::new(shape, data)
}

/// Splits a channel-concatenated gradient back into its two parts.
pub fn split_channels<T: Element>(g: &Tensor<T>, a_shape: &[usize], b_shape: &[usize]) -> (Tensor<T>, Tensor<T>) {
    let n = a_shape[0];
    let la: usize = a_shape[1..].iter().product();
    let lb: usize = b_shape[1..].iter().product();
    let mut ga = Vec::with_capacity(n * la);
    let mut gb = Vec::with_capacity(n * lb);
    for ni in 0..n {
        let row = &g.data()[ni * (la + lb)..(ni + 1) * (la + lb)];
        ga.extend_from_slice(&row[..la]);
        gb.extend_from_slice(&row[la..]);
    }
    (
        Tensor::new(a_shape.to_vec(), ga).expect("split shape"),
        Tensor::new(b_shape.to_vec(), gb).expect("split shape"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_taps_follow_half_pixel_rule() {
        let t = double_taps(3);
        assert_eq!(t[0], (0, 1, 0.0));
        assert_eq!(t[1], (0, 1, 0.25));
        assert_eq!(t[2], (0, 1, 0.75));
        assert_eq!(t[3], (1, 2, 0.25));
        assert_eq!(t[5], (2, 2, 0.25));
    }

    #[test]
    fn upsample_of_constant_is_constant_and_adjoint_holds() {
        let x = Tensor::<f64>::full(vec![1, 2, 2, 3, 2], 1.5);
        let y = upsample2_forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 2, 4, 6, 4]);
        assert!(y.data().iter().all(|&v| (v - 1.5).abs() < 1e-15));

        let x = Tensor::<f64>::from_fn(vec![1, 1, 2, 3, 2], |i| (i as f64 * 1.3).cos());
        let y = upsample2_forward(&x).unwrap();
        let g = Tensor::from_fn(y.shape().to_vec(), |i| (i as f64 * 0.7).sin());
        let gx = upsample2_backward(x.shape(), &g).unwrap();
        let lhs: f64 = y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(gx.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn max_pool_picks_block_maximum() {
        let x = Tensor::<f64>::from_fn(vec![1, 1, 2, 2, 4], |i| ((i * 5) % 16) as f64);
        let (y, arg) = max_pool2_forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1, 2]);
        for (o, &i) in arg.iter().enumerate() {
            assert_eq!(y.data()[o], x.data()[i]);
        }
        assert!(max_pool2_forward(&Tensor::<f64>::zeros(vec![1, 1, 3, 2, 2])).is_err());
    }

    #[test]
    fn concat_then_split_round_trips() {
        let a = Tensor::<f64>::from_fn(vec![2, 1, 2, 1, 1], |i| i as f64);
        let b = Tensor::<f64>::from_fn(vec![2, 3, 2, 1, 1], |i| 100.0 + i as f64);
        let c = concat_channels(&a, &b).unwrap();
        assert_eq!(c.shape(), &[2, 4, 2, 1, 1]);
        let (ga, gb) = split_channels(&c, a.shape(), b.shape());
        assert_eq!(ga, a);
        assert_eq!(gb, b);
    }
}
