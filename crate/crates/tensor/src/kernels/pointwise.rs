//! Element-wise activations.

use crate::element::Element;
use crate::tensor::Tensor;

pub fn relu<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

pub fn relu_backward<T: Element>(x: &Tensor<T>, g: &Tensor<T>) -> Tensor<T> {
    zip_map(x, g, |xv, gv| if xv > T::zero() { gv } else { T::zero() })
}

pub fn leaky_relu<T: Element>(x: &Tensor<T>, slope: f64) -> Tensor<T> {
    let s = T::cast_f64(slope);
    x.map(|v| if v > T::zero() { v } else { v * s })
}

pub fn leaky_relu_backward<T: Element>(x: &Tensor<T>, g: &Tensor<T>, slope: f64) -> Tensor<T> {
    let s = T::cast_f64(slope);
    zip_map(x, g, |xv, gv| if xv > T::zero() { gv } else { gv * s })
}

pub fn sigmoid<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| T::one() / (T::one() + (-v).exp()))
}

/// Takes the forward *output* `y`.
pub fn sigmoid_backward<T: Element>(y: &Tensor<T>, g: &Tensor<T>) -> Tensor<T> {
    zip_map(y, g, |yv, gv| gv * yv * (T::one() - yv))
}

pub(crate) fn zip_map<T: Element>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    assert_eq!(a.shape(), b.shape(), "zip_map shape");
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}
