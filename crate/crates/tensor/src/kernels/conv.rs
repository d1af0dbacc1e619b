//! 3-D convolution, stride 1, cubic kernels, symmetric zero padding.
//!
//! Implemented as im2col + gemm over chunks of output rows so the column
//! buffer stays cache resident for large volumes.

use crate::element::{gemm, Element, MatRef};
use crate::tensor::{Result, Tensor, TensorError};

/// Upper bound on column-buffer elements per chunk, sized to stay in L2.
const COL_LIMIT: usize = 1 << 17;

#[derive(Clone, Copy, Debug)]
struct Geometry {
    cin: usize,
    cout: usize,
    k: usize,
    pad: usize,
    d: usize,
    h: usize,
    w: usize,
    od: usize,
    oh: usize,
    ow: usize,
}

impl Geometry {
    fn rows(&self) -> usize {
        self.cin * self.k * self.k * self.k
    }
    fn out_plane(&self) -> usize {
        self.oh * self.ow
    }
    fn out_len(&self) -> usize {
        self.od * self.out_plane()
    }
    fn in_len(&self) -> usize {
        self.d * self.h * self.w
    }
    /// Number of output rows `(od, oh)` per chunk.
    fn chunk_rows(&self) -> usize {
        (COL_LIMIT / (self.rows() * self.ow).max(1)).clamp(1, self.od * self.oh)
    }
    fn is_pointwise(&self) -> bool {
        self.k == 1 && self.pad == 0
    }
}

fn geometry<T: Element>(x: &Tensor<T>, w: &Tensor<T>, pad: usize) -> Result<Geometry> {
    let [_, cin, d, h, wd] = x.dims5()?;
    let [cout, wcin, k, k2, k3] = w.dims5()?;
    if wcin != cin || k != k2 || k != k3 {
        return Err(TensorError::Mismatch { op: "conv3d", lhs: x.shape().to_vec(), rhs: w.shape().to_vec() });
    }
    if d + 2 * pad < k || h + 2 * pad < k || wd + 2 * pad < k {
        return Err(TensorError::Invalid { op: "conv3d", msg: format!("input {:?} smaller than kernel {k}", x.shape()) });
    }
    Ok(Geometry {
        cin,
        cout,
        k,
        pad,
        d,
        h,
        w: wd,
        od: d + 2 * pad - k + 1,
        oh: h + 2 * pad - k + 1,
        ow: wd + 2 * pad - k + 1,
    })
}

/// Valid output-w range `[lo, hi)` for kernel offset `kw` (input index `ow + kw - pad`).
#[inline]
fn w_range(g: &Geometry, kw: usize) -> (usize, usize) {
    let lo = g.pad.saturating_sub(kw);
    let hi = (g.w + g.pad).saturating_sub(kw).min(g.ow);
    (lo, hi.max(lo))
}

fn im2col<T: Element>(g: &Geometry, x: &[T], q0: usize, q1: usize, col: &mut [T]) {
    let pc = (q1 - q0) * g.ow;
    let k = g.k;
    for ci in 0..g.cin {
        let xc = &x[ci * g.in_len()..(ci + 1) * g.in_len()];
        for kd in 0..k {
            for kh in 0..k {
                for kw in 0..k {
                    let r = ((ci * k + kd) * k + kh) * k + kw;
                    let row = &mut col[r * pc..(r + 1) * pc];
                    let (wlo, whi) = w_range(g, kw);
                    for q in q0..q1 {
                        let (od, oh) = (q / g.oh, q % g.oh);
                        let id = (od + kd) as isize - g.pad as isize;
                        let ih = (oh + kh) as isize - g.pad as isize;
                        let dst = &mut row[(q - q0) * g.ow..][..g.ow];
                        if id < 0 || id >= g.d as isize || ih < 0 || ih >= g.h as isize {
                            dst.fill(T::zero());
                            continue;
                        }
                        let base = (id as usize * g.h + ih as usize) * g.w;
                        dst[..wlo].fill(T::zero());
                        dst[whi..].fill(T::zero());
                        if whi > wlo {
                            let src0 = base + wlo + kw - g.pad;
                            dst[wlo..whi].copy_from_slice(&xc[src0..src0 + (whi - wlo)]);
                        }
                    }
                }
            }
        }
    }
}

fn col2im<T: Element>(g: &Geometry, col: &[T], q0: usize, q1: usize, gx: &mut [T]) {
    let pc = (q1 - q0) * g.ow;
    let k = g.k;
    for ci in 0..g.cin {
        let gxc = &mut gx[ci * g.in_len()..(ci + 1) * g.in_len()];
        for kd in 0..k {
            for kh in 0..k {
                for kw in 0..k {
                    let r = ((ci * k + kd) * k + kh) * k + kw;
                    let row = &col[r * pc..(r + 1) * pc];
                    let (wlo, whi) = w_range(g, kw);
                    if whi <= wlo {
                        continue;
                    }
                    for q in q0..q1 {
                        let (od, oh) = (q / g.oh, q % g.oh);
                        let id = (od + kd) as isize - g.pad as isize;
                        let ih = (oh + kh) as isize - g.pad as isize;
                        if id < 0 || id >= g.d as isize || ih < 0 || ih >= g.h as isize {
                            continue;
                        }
                        let src = &row[(q - q0) * g.ow..][wlo..whi];
                        let dst0 = (id as usize * g.h + ih as usize) * g.w + wlo + kw - g.pad;
                        for (d, &s) in gxc[dst0..dst0 + (whi - wlo)].iter_mut().zip(src) {
                            *d += s;
                        }
                    }
                }
            }
        }
    }
}

/// Forward convolution. `w` is `(Cout, Cin, k, k, k)`, `b` is `(Cout)`.
pub fn conv3d_forward<T: Element>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: Option<&Tensor<T>>,
    pad: usize,
) -> Result<Tensor<T>> {
    let g = geometry(x, w, pad)?;
    if let Some(b) = b {
        if b.len() != g.cout {
            return Err(TensorError::Mismatch { op: "conv3d bias", lhs: w.shape().to_vec(), rhs: b.shape().to_vec() });
        }
    }
    let n = x.shape()[0];
    let mut out = Tensor::zeros(vec![n, g.cout, g.od, g.oh, g.ow]);
    let rows = g.rows();
    let chunk = g.chunk_rows();
    let nrows = g.od * g.oh;
    let mut col = if g.is_pointwise() { Vec::new() } else { vec![T::zero(); rows * chunk * g.ow] };
    let xin = x.data();
    let wmat = MatRef::row_major(w.data(), g.cout, rows);
    for ni in 0..n {
        let xn = &xin[ni * g.cin * g.in_len()..(ni + 1) * g.cin * g.in_len()];
        let on = &mut out.data_mut()[ni * g.cout * g.out_len()..(ni + 1) * g.cout * g.out_len()];
        if g.is_pointwise() {
            gemm(T::one(), wmat, MatRef::row_major(xn, g.cin, g.in_len()), T::zero(), on, g.out_len());
        } else {
            let mut q0 = 0;
            while q0 < nrows {
                let q1 = (q0 + chunk).min(nrows);
                let pc = (q1 - q0) * g.ow;
                im2col(&g, xn, q0, q1, &mut col[..rows * pc]);
                let colm = MatRef::row_major(&col[..rows * pc], rows, pc);
                gemm(T::one(), wmat, colm, T::zero(), &mut on[q0 * g.ow..], g.out_len());
                q0 = q1;
            }
        }
        if let Some(b) = b {
            for (co, plane) in on.chunks_mut(g.out_len()).enumerate() {
                let bv = b.data()[co];
                plane.iter_mut().for_each(|v| *v += bv);
            }
        }
    }
    Ok(out)
}

pub struct ConvGrads<T> {
    pub input: Option<Tensor<T>>,
    pub weight: Option<Tensor<T>>,
    pub bias: Option<Tensor<T>>,
}

/// Gradients of a convolution with respect to the requested operands.
pub fn conv3d_backward<T: Element>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    gout: &Tensor<T>,
    pad: usize,
    want_input: bool,
    want_weight: bool,
    want_bias: bool,
) -> Result<ConvGrads<T>> {
    let g = geometry(x, w, pad)?;
    let n = x.shape()[0];
    let rows = g.rows();
    let chunk = g.chunk_rows();
    let nrows = g.od * g.oh;
    let mut gx = want_input.then(|| Tensor::zeros(x.shape().to_vec()));
    let mut gw = want_weight.then(|| Tensor::zeros(w.shape().to_vec()));
    let mut gb = want_bias.then(|| Tensor::<T>::zeros(vec![g.cout]));
    let buf_len = if g.is_pointwise() { 0 } else { rows * chunk * g.ow };
    let mut col = vec![T::zero(); if want_weight { buf_len } else { 0 }];
    let mut gcol = vec![T::zero(); if want_input { buf_len } else { 0 }];
    let go = gout.data();
    for ni in 0..n {
        let xn = &x.data()[ni * g.cin * g.in_len()..(ni + 1) * g.cin * g.in_len()];
        let gon = &go[ni * g.cout * g.out_len()..(ni + 1) * g.cout * g.out_len()];
        if let Some(gb) = gb.as_mut() {
            for (co, plane) in gon.chunks(g.out_len()).enumerate() {
                gb.data_mut()[co] += T::cast_f64(plane.iter().map(|v| v.as_f64()).sum::<f64>());
            }
        }
        if g.is_pointwise() {
            if let Some(gw) = gw.as_mut() {
                gemm(
                    T::one(),
                    MatRef::row_major(gon, g.cout, g.out_len()),
                    MatRef::transposed(xn, g.cin, g.in_len()),
                    T::one(),
                    gw.data_mut(),
                    rows,
                );
            }
            if let Some(gx) = gx.as_mut() {
                let gxn = &mut gx.data_mut()[ni * g.cin * g.in_len()..(ni + 1) * g.cin * g.in_len()];
                gemm(
                    T::one(),
                    MatRef::transposed(w.data(), g.cout, rows),
                    MatRef::row_major(gon, g.cout, g.out_len()),
                    T::zero(),
                    gxn,
                    g.in_len(),
                );
            }
            continue;
        }
        let mut q0 = 0;
        while q0 < nrows {
            let q1 = (q0 + chunk).min(nrows);
            let pc = (q1 - q0) * g.ow;
            let go_chunk = MatRef {
                data: &gon[q0 * g.ow..],
                rows: g.cout,
                cols: pc,
                row_stride: g.out_len(),
                col_stride: 1,
            };
            if let Some(gw) = gw.as_mut() {
                im2col(&g, xn, q0, q1, &mut col[..rows * pc]);
                gemm(T::one(), go_chunk, MatRef::transposed(&col[..rows * pc], rows, pc), T::one(), gw.data_mut(), rows);
            }
            if let Some(gx) = gx.as_mut() {
                gemm(
                    T::one(),
                    MatRef::transposed(w.data(), g.cout, rows),
                    go_chunk,
                    T::zero(),
                    &mut gcol[..rows * pc],
                    pc,
                );
                let gxn = &mut gx.data_mut()[ni * g.cin * g.in_len()..(ni + 1) * g.cin * g.in_len()];
                col2im(&g, &gcol[..rows * pc], q0, q1, gxn);
            }
            q0 = q1;
        }
    }
    Ok(ConvGrads { input: gx, weight: gw, bias: gb })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct six-loop convolution used as the reference.
    fn naive(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>, pad: usize) -> Tensor<f64> {
        let [n, cin, d, h, wd] = x.dims5().unwrap();
        let [cout, _, k, _, _] = w.dims5().unwrap();
        let (od, oh, ow) = (d + 2 * pad - k + 1, h + 2 * pad - k + 1, wd + 2 * pad - k + 1);
        let mut out = Tensor::zeros(vec![n, cout, od, oh, ow]);
        let xs = x.data();
        let ws = w.data();
        for ni in 0..n {
            for co in 0..cout {
                for z in 0..od {
                    for y in 0..oh {
                        for xx in 0..ow {
                            let mut acc = b.data()[co];
                            for ci in 0..cin {
                                for kd in 0..k {
                                    for kh in 0..k {
                                        for kw in 0..k {
                                            let iz = (z + kd) as isize - pad as isize;
                                            let iy = (y + kh) as isize - pad as isize;
                                            let ix = (xx + kw) as isize - pad as isize;
                                            if iz < 0 || iy < 0 || ix < 0 || iz >= d as isize || iy >= h as isize || ix >= wd as isize {
                                                continue;
                                            }
                                            let xi = (((ni * cin + ci) * d + iz as usize) * h + iy as usize) * wd + ix as usize;
                                            let wi = (((co * cin + ci) * k + kd) * k + kh) * k + kw;
                                            acc += xs[xi] * ws[wi];
                                        }
                                    }
                                }
                            }
                            out.data_mut()[(((ni * cout + co) * od + z) * oh + y) * ow + xx] = acc;
                        }
                    }
                }
            }
        }
        out
    }

    fn seq(shape: Vec<usize>, scale: f64) -> Tensor<f64> {
        Tensor::from_fn(shape, |i| ((i * 7919 % 97) as f64 / 97.0 - 0.5) * scale)
    }

    #[test]
    fn forward_matches_direct_loops() {
        let x = seq(vec![2, 3, 5, 4, 6], 1.0);
        for &(k, pad) in &[(3usize, 1usize), (3, 0), (1, 0)] {
            let w = seq(vec![4, 3, k, k, k], 0.3);
            let b = seq(vec![4], 1.0);
            let got = conv3d_forward(&x, &w, Some(&b), pad).unwrap();
            let want = naive(&x, &w, &b, pad);
            assert_eq!(got.shape(), want.shape());
            for (a, b) in got.data().iter().zip(want.data()) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn backward_is_adjoint_of_forward() {
        // <conv(x), g> = <x, conv^T(g)> and the weight gradient equals
        // the derivative of that bilinear form.
        let x = seq(vec![1, 2, 4, 5, 3], 1.0);
        let w = seq(vec![3, 2, 3, 3, 3], 0.5);
        let y = conv3d_forward(&x, &w, None, 1).unwrap();
        let gy = seq(y.shape().to_vec(), 2.0);
        let grads = conv3d_backward(&x, &w, &gy, 1, true, true, true).unwrap();
        let lhs: f64 = y.data().iter().zip(gy.data()).map(|(a, b)| a * b).sum();
        let gx = grads.input.unwrap();
        let rhs: f64 = x.data().iter().zip(gx.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
        let gw = grads.weight.unwrap();
        let rhs_w: f64 = w.data().iter().zip(gw.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs_w).abs() < 1e-10);
        let gb = grads.bias.unwrap();
        let total: f64 = gy.data().iter().sum();
        assert!((gb.data().iter().sum::<f64>() - total).abs() < 1e-10);
    }
}
