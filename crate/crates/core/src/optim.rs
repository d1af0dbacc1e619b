//! Adam for the segmentation network, RMSprop for the critic.
//!
//! Update rules match the usual framework definitions (bias-corrected Adam;
//! RMSprop without momentum or centering). Arithmetic is done in `f64` per
//! element and rounded once.

use advseg_tensor::{Element, ParamStore, Tensor};

use crate::error::{Error, Result};

pub const ADAM_EPS: f64 = 1e-8;
pub const RMSPROP_EPS: f64 = 1e-8;

fn zeros_like<T: Element>(p: &ParamStore<T>) -> ParamStore<T> {
    let mut z = ParamStore::new();
    for (name, t) in p.iter() {
        z.insert(name.clone(), Tensor::zeros(t.shape().to_vec()));
    }
    z
}

fn check_grads<T: Element>(params: &ParamStore<T>, grads: &ParamStore<T>) -> Result<()> {
    for (name, p) in params.iter() {
        match grads.get(name) {
            Some(g) if g.shape() == p.shape() => {}
            Some(g) => return Err(Error::Shape(format!("gradient for {name} has shape {:?}, expected {:?}", g.shape(), p.shape()))),
            None => return Err(Error::Shape(format!("missing gradient for {name}"))),
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: ParamStore<T>,
    pub v: ParamStore<T>,
}

impl<T: Element> Adam<T> {
    pub fn new(params: &ParamStore<T>, lr: f64, beta1: f64, beta2: f64) -> Self {
        Adam { lr, beta1, beta2, eps: ADAM_EPS, t: 0, m: zeros_like(params), v: zeros_like(params) }
    }

    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &ParamStore<T>) -> Result<()> {
        check_grads(params, grads)?;
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (name, p) in params.iter_mut() {
            let g = grads.get(name).expect("checked");
            let m = self.m.get_mut(name).expect("state per parameter");
            let v = self.v.get_mut(name).expect("state per parameter");
            for (((pv, &gv), mv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
                let gv = gv.as_f64();
                let mn = self.beta1 * mv.as_f64() + (1.0 - self.beta1) * gv;
                let vn = self.beta2 * vv.as_f64() + (1.0 - self.beta2) * gv * gv;
                *mv = T::cast_f64(mn);
                *vv = T::cast_f64(vn);
                let update = self.lr * (mn / bc1) / ((vn / bc2).sqrt() + self.eps);
                *pv = T::cast_f64(pv.as_f64() - update);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RmsProp<T> {
    pub lr: f64,
    pub alpha: f64,
    pub eps: f64,
    pub v: ParamStore<T>,
}

impl<T: Element> RmsProp<T> {
    pub fn new(params: &ParamStore<T>, lr: f64, alpha: f64) -> Self {
        RmsProp { lr, alpha, eps: RMSPROP_EPS, v: zeros_like(params) }
    }

    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &ParamStore<T>) -> Result<()> {
        check_grads(params, grads)?;
        for (name, p) in params.iter_mut() {
            let g = grads.get(name).expect("checked");
            let v = self.v.get_mut(name).expect("state per parameter");
            for ((pv, &gv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
                let gv = gv.as_f64();
                let vn = self.alpha * vv.as_f64() + (1.0 - self.alpha) * gv * gv;
                *vv = T::cast_f64(vn);
                *pv = T::cast_f64(pv.as_f64() - self.lr * gv / (vn.sqrt() + self.eps));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(v: f64) -> ParamStore<f64> {
        let mut p = ParamStore::new();
        p.insert("w", Tensor::full(vec![2], v));
        p
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = store(1.0);
        let mut opt = Adam::new(&p, 0.1, 0.9, 0.999);
        opt.step(&mut p, &store(4.0)).unwrap();
        // bias-corrected m / sqrt(v) is sign(g) on the first step
        assert!((p.get("w").unwrap().data()[0] - 0.9).abs() < 1e-7);
    }

    #[test]
    fn rmsprop_first_step() {
        let mut p = store(1.0);
        let mut opt = RmsProp::new(&p, 0.01, 0.99);
        opt.step(&mut p, &store(2.0)).unwrap();
        let expected = 1.0 - 0.01 * 2.0 / ((0.01f64 * 4.0).sqrt() + 1e-8);
        assert!((p.get("w").unwrap().data()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut p = store(0.3);
        let before = p.clone();
        Adam::new(&p, 0.0, 0.9, 0.999).step(&mut p, &store(5.0)).unwrap();
        RmsProp::new(&p, 0.0, 0.99).step(&mut p, &store(5.0)).unwrap();
        assert_eq!(p, before);
    }
}
