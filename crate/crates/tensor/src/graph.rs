//! Execution backends for network code.
//!
//! Networks are written once against [`Graph`]. [`Eager`] evaluates
//! immediately and frees intermediates as soon as they go out of scope;
//! [`Tape`] records every value and supports reverse-mode differentiation.

use std::collections::BTreeMap;
use std::rc::Rc;

use crate::element::Element;
use crate::kernels::{conv, loss, norm, pointwise, spatial};
use crate::params::ParamStore;
use crate::tensor::{Result, Tensor, TensorError};

pub use crate::kernels::norm::{BatchMoments, BatchNormMode};

pub trait Graph<T: Element> {
    type Value: Clone;

    fn value<'a>(&'a self, v: &'a Self::Value) -> &'a Tensor<T>;
    /// Introduces a tensor. `requires_grad` is ignored by backends without gradients.
    fn input(&mut self, t: Tensor<T>, requires_grad: bool) -> Self::Value;
    fn add(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn conv3d(&mut self, x: &Self::Value, w: &Self::Value, b: Option<&Self::Value>, pad: usize) -> Result<Self::Value>;
    fn group_norm(
        &mut self,
        x: &Self::Value,
        gamma: &Self::Value,
        beta: &Self::Value,
        groups: usize,
        eps: f64,
    ) -> Result<Self::Value>;
    fn batch_norm(
        &mut self,
        x: &Self::Value,
        gamma: &Self::Value,
        beta: &Self::Value,
        mode: &BatchNormMode<'_>,
        eps: f64,
    ) -> Result<(Self::Value, Option<BatchMoments>)>;
    fn relu(&mut self, x: &Self::Value) -> Self::Value;
    fn leaky_relu(&mut self, x: &Self::Value, slope: f64) -> Self::Value;
    fn sigmoid(&mut self, x: &Self::Value) -> Self::Value;
    fn max_pool2(&mut self, x: &Self::Value) -> Result<Self::Value>;
    fn upsample2(&mut self, x: &Self::Value) -> Result<Self::Value>;
    fn concat_channels(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;

    /// Binds every tensor of a parameter store into this graph.
    fn bind(&mut self, params: &ParamStore<T>, requires_grad: bool) -> Bound<Self::Value> {
        Bound {
            values: params
                .iter()
                .map(|(name, t)| (name.clone(), self.input(t.clone(), requires_grad)))
                .collect(),
        }
    }
}

/// Graph handles for a bound parameter store, keyed by parameter path.
#[derive(Clone, Debug)]
pub struct Bound<V> {
    values: BTreeMap<String, V>,
}

impl<V> Bound<V> {
    pub fn get(&self, name: &str) -> Result<&V> {
        self.values
            .get(name)
            .ok_or_else(|| TensorError::Invalid { op: "bind", msg: format!("missing parameter `{name}`") })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &V)> {
        self.values.iter()
    }
}

/// Immediate evaluation without gradient bookkeeping.
#[derive(Default, Debug, Clone, Copy)]
pub struct Eager;

impl<T: Element> Graph<T> for Eager {
    type Value = Rc<Tensor<T>>;

    fn value<'a>(&'a self, v: &'a Self::Value) -> &'a Tensor<T> {
        v
    }
    fn input(&mut self, t: Tensor<T>, _requires_grad: bool) -> Self::Value {
        Rc::new(t)
    }
    fn add(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value> {
        add_values(a, b).map(Rc::new)
    }
    fn conv3d(&mut self, x: &Self::Value, w: &Self::Value, b: Option<&Self::Value>, pad: usize) -> Result<Self::Value> {
        conv::conv3d_forward(x, w, b.map(|b| &**b), pad).map(Rc::new)
    }
    fn group_norm(&mut self, x: &Self::Value, gamma: &Self::Value, beta: &Self::Value, groups: usize, eps: f64) -> Result<Self::Value> {
        norm::group_norm_forward(x, gamma, beta, groups, eps).map(|(y, _)| Rc::new(y))
    }
    fn batch_norm(
        &mut self,
        x: &Self::Value,
        gamma: &Self::Value,
        beta: &Self::Value,
        mode: &BatchNormMode<'_>,
        eps: f64,
    ) -> Result<(Self::Value, Option<BatchMoments>)> {
        norm::batch_norm_forward(x, gamma, beta, mode, eps).map(|(y, _, m)| (Rc::new(y), m))
    }
    fn relu(&mut self, x: &Self::Value) -> Self::Value {
        Rc::new(pointwise::relu(x))
    }
    fn leaky_relu(&mut self, x: &Self::Value, slope: f64) -> Self::Value {
        Rc::new(pointwise::leaky_relu(x, slope))
    }
    fn sigmoid(&mut self, x: &Self::Value) -> Self::Value {
        Rc::new(pointwise::sigmoid(x))
    }
    fn max_pool2(&mut self, x: &Self::Value) -> Result<Self::Value> {
        spatial::max_pool2_forward(x).map(|(y, _)| Rc::new(y))
    }
    fn upsample2(&mut self, x: &Self::Value) -> Result<Self::Value> {
        spatial::upsample2_forward(x).map(Rc::new)
    }
    fn concat_channels(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value> {
        spatial::concat_channels(a, b).map(Rc::new)
    }
}

fn add_values<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.shape() != b.shape() {
        return Err(TensorError::Mismatch { op: "add", lhs: a.shape().to_vec(), rhs: b.shape().to_vec() });
    }
    let mut out = a.clone();
    out.add_assign(b);
    Ok(out)
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<T> {
    Leaf,
    Add(Var, Var),
    Conv { x: Var, w: Var, b: Option<Var>, pad: usize },
    GroupNorm { x: Var, gamma: Var, beta: Var, groups: usize, stats: norm::NormStats },
    BatchNorm { x: Var, gamma: Var, beta: Var, stats: norm::NormStats, batch_stats: bool },
    Relu(Var),
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    MaxPool { x: Var, argmax: Vec<usize> },
    Upsample(Var),
    Concat(Var, Var),
    SoftDice { p: Var, y: Tensor<T>, eps: f64, factor: f64 },
    Kl { p: Var, y: Tensor<T>, delta: f64 },
    NegLog { p: Var, delta: f64 },
    NegLog1m { p: Var, delta: f64 },
    Dot { x: Var, c: Tensor<T> },
    WeightedSum(Vec<(Var, f64)>),
}

struct Node<T> {
    value: Tensor<T>,
    needs_grad: bool,
    op: Op<T>,
}

/// Recording graph with reverse-mode differentiation.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Element> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Element> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, parents: &[Var]) -> Var {
        let needs_grad = parents.iter().any(|p| self.nodes[p.0].needs_grad);
        self.nodes.push(Node { value, needs_grad, op });
        Var(self.nodes.len() - 1)
    }

    fn val(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn soft_dice(&mut self, y: Tensor<T>, p: Var, eps: f64, factor: f64) -> Result<Var> {
        let v = loss::soft_dice(&y, self.val(p), eps, factor)?;
        Ok(self.push(Tensor::scalar(T::cast_f64(v)), Op::SoftDice { p, y, eps, factor }, &[p]))
    }

    pub fn bernoulli_kl(&mut self, y: Tensor<T>, p: Var, delta: f64) -> Result<Var> {
        let v = loss::bernoulli_kl(&y, self.val(p), delta)?;
        Ok(self.push(Tensor::scalar(T::cast_f64(v)), Op::Kl { p, y, delta }, &[p]))
    }

    pub fn mean_neg_log(&mut self, p: Var, delta: f64) -> Var {
        let v = loss::mean_neg_log(self.val(p), delta);
        self.push(Tensor::scalar(T::cast_f64(v)), Op::NegLog { p, delta }, &[p])
    }

    pub fn mean_neg_log1m(&mut self, p: Var, delta: f64) -> Var {
        let v = loss::mean_neg_log1m(self.val(p), delta);
        self.push(Tensor::scalar(T::cast_f64(v)), Op::NegLog1m { p, delta }, &[p])
    }

    pub fn dot(&mut self, x: Var, c: Tensor<T>) -> Result<Var> {
        let v = loss::dot(self.val(x), &c)?;
        Ok(self.push(Tensor::scalar(T::cast_f64(v)), Op::Dot { x, c }, &[x]))
    }

    /// `sum_i w_i * s_i` over scalar nodes.
    pub fn weighted_sum(&mut self, terms: &[(Var, f64)]) -> Result<Var> {
        let mut total = 0.0;
        for &(v, w) in terms {
            let t = self.val(v);
            if t.len() != 1 {
                return Err(TensorError::Invalid { op: "weighted_sum", msg: format!("non-scalar term {:?}", t.shape()) });
            }
            total += w * t.item().as_f64();
        }
        let parents: Vec<Var> = terms.iter().map(|t| t.0).collect();
        Ok(self.push(Tensor::scalar(T::cast_f64(total)), Op::WeightedSum(terms.to_vec()), &parents))
    }

    /// Reverse pass from a scalar root. Returns gradients of every leaf
    /// created with `requires_grad = true` that the root depends on.
    pub fn backward(&self, root: Var) -> Result<Gradients<T>> {
        let rv = self.val(root);
        if rv.len() != 1 {
            return Err(TensorError::Invalid { op: "backward", msg: format!("root must be scalar, got {:?}", rv.shape()) });
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::full(rv.shape().to_vec(), T::one()));
        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let g = match &node.op {
                Op::Leaf => continue,
                _ => match grads[i].take() {
                    Some(g) => g,
                    None => continue,
                },
            };
            self.propagate(node, &g, &mut grads)?;
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) {
        if !self.nodes[v.0].needs_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn propagate(&self, node: &Node<T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) -> Result<()> {
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Conv { x, w, b, pad } => {
                let cg = conv::conv3d_backward(
                    self.val(*x),
                    self.val(*w),
                    g,
                    *pad,
                    self.wants(*x),
                    self.wants(*w),
                    b.is_some_and(|b| self.wants(b)),
                )?;
                if let Some(gx) = cg.input {
                    self.accumulate(grads, *x, gx);
                }
                if let Some(gw) = cg.weight {
                    self.accumulate(grads, *w, gw);
                }
                if let (Some(b), Some(gb)) = (b, cg.bias) {
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::GroupNorm { x, gamma, beta, groups, stats } => {
                let ng = norm::group_norm_backward(self.val(*x), self.val(*gamma), g, *groups, stats)?;
                self.accumulate(grads, *x, ng.input);
                self.accumulate(grads, *gamma, ng.gamma);
                self.accumulate(grads, *beta, ng.beta);
            }
            Op::BatchNorm { x, gamma, beta, stats, batch_stats } => {
                let ng = norm::batch_norm_backward(self.val(*x), self.val(*gamma), g, stats, *batch_stats)?;
                self.accumulate(grads, *x, ng.input);
                self.accumulate(grads, *gamma, ng.gamma);
                self.accumulate(grads, *beta, ng.beta);
            }
            Op::Relu(x) => self.accumulate(grads, *x, pointwise::relu_backward(self.val(*x), g)),
            Op::LeakyRelu(x, s) => self.accumulate(grads, *x, pointwise::leaky_relu_backward(self.val(*x), g, *s)),
            Op::Sigmoid(x) => self.accumulate(grads, *x, pointwise::sigmoid_backward(&node.value, g)),
            Op::MaxPool { x, argmax } => {
                let gx = spatial::max_pool2_backward(self.val(*x).shape(), g, argmax);
                self.accumulate(grads, *x, gx);
            }
            Op::Upsample(x) => {
                let gx = spatial::upsample2_backward(self.val(*x).shape(), g)?;
                self.accumulate(grads, *x, gx);
            }
            Op::Concat(a, b) => {
                let (ga, gb) = spatial::split_channels(g, self.val(*a).shape(), self.val(*b).shape());
                self.accumulate(grads, *a, ga);
                self.accumulate(grads, *b, gb);
            }
            Op::SoftDice { p, y, eps, factor } => {
                let gp = loss::soft_dice_backward(y, self.val(*p), *eps, *factor, g.item().as_f64());
                self.accumulate(grads, *p, gp);
            }
            Op::Kl { p, y, delta } => {
                let gp = loss::bernoulli_kl_backward(y, self.val(*p), *delta, g.item().as_f64());
                self.accumulate(grads, *p, gp);
            }
            Op::NegLog { p, delta } => {
                let gp = loss::mean_neg_log_backward(self.val(*p), *delta, g.item().as_f64());
                self.accumulate(grads, *p, gp);
            }
            Op::NegLog1m { p, delta } => {
                let gp = loss::mean_neg_log1m_backward(self.val(*p), *delta, g.item().as_f64());
                self.accumulate(grads, *p, gp);
            }
            Op::Dot { x, c } => {
                let up = g.item();
                self.accumulate(grads, *x, c.map(|v| v * up));
            }
            Op::WeightedSum(terms) => {
                for &(v, w) in terms {
                    self.accumulate(grads, v, Tensor::scalar(g.item() * T::cast_f64(w)));
                }
            }
        }
        Ok(())
    }
}

impl<T: Element> Graph<T> for Tape<T> {
    type Value = Var;

    fn value<'a>(&'a self, v: &'a Var) -> &'a Tensor<T> {
        self.val(*v)
    }

    fn input(&mut self, t: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node { value: t, needs_grad: requires_grad, op: Op::Leaf });
        Var(self.nodes.len() - 1)
    }

    fn add(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let y = add_values(self.val(*a), self.val(*b))?;
        Ok(self.push(y, Op::Add(*a, *b), &[*a, *b]))
    }

    fn conv3d(&mut self, x: &Var, w: &Var, b: Option<&Var>, pad: usize) -> Result<Var> {
        let y = conv::conv3d_forward(self.val(*x), self.val(*w), b.map(|b| self.val(*b)), pad)?;
        let mut parents = vec![*x, *w];
        parents.extend(b.copied());
        Ok(self.push(y, Op::Conv { x: *x, w: *w, b: b.copied(), pad }, &parents))
    }

    fn group_norm(&mut self, x: &Var, gamma: &Var, beta: &Var, groups: usize, eps: f64) -> Result<Var> {
        let (y, stats) = norm::group_norm_forward(self.val(*x), self.val(*gamma), self.val(*beta), groups, eps)?;
        Ok(self.push(y, Op::GroupNorm { x: *x, gamma: *gamma, beta: *beta, groups, stats }, &[*x, *gamma, *beta]))
    }

    fn batch_norm(
        &mut self,
        x: &Var,
        gamma: &Var,
        beta: &Var,
        mode: &BatchNormMode<'_>,
        eps: f64,
    ) -> Result<(Var, Option<BatchMoments>)> {
        let (y, stats, moments) = norm::batch_norm_forward(self.val(*x), self.val(*gamma), self.val(*beta), mode, eps)?;
        let batch_stats = matches!(mode, BatchNormMode::Train);
        let v = self.push(y, Op::BatchNorm { x: *x, gamma: *gamma, beta: *beta, stats, batch_stats }, &[*x, *gamma, *beta]);
        Ok((v, moments))
    }

    fn relu(&mut self, x: &Var) -> Var {
        let y = pointwise::relu(self.val(*x));
        self.push(y, Op::Relu(*x), &[*x])
    }

    fn leaky_relu(&mut self, x: &Var, slope: f64) -> Var {
        let y = pointwise::leaky_relu(self.val(*x), slope);
        self.push(y, Op::LeakyRelu(*x, slope), &[*x])
    }

    fn sigmoid(&mut self, x: &Var) -> Var {
        let y = pointwise::sigmoid(self.val(*x));
        self.push(y, Op::Sigmoid(*x), &[*x])
    }

    fn max_pool2(&mut self, x: &Var) -> Result<Var> {
        let (y, argmax) = spatial::max_pool2_forward(self.val(*x))?;
        Ok(self.push(y, Op::MaxPool { x: *x, argmax }, &[*x]))
    }

    fn upsample2(&mut self, x: &Var) -> Result<Var> {
        let y = spatial::upsample2_forward(self.val(*x))?;
        Ok(self.push(y, Op::Upsample(*x), &[*x]))
    }

    fn concat_channels(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let y = spatial::concat_channels(self.val(*a), self.val(*b))?;
        Ok(self.push(y, Op::Concat(*a, *b), &[*a, *b]))
    }
}

/// Leaf gradients produced by [`Tape::backward`].
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Element> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }

    /// Gradients for a bound parameter store; parameters the root did not
    /// depend on get zeros of the right shape.
    pub fn for_params(&mut self, bound: &Bound<Var>, params: &ParamStore<T>) -> ParamStore<T> {
        let mut out = ParamStore::new();
        for (name, v) in bound.iter() {
            let g = self.take(*v).unwrap_or_else(|| {
                Tensor::zeros(params.get(name).map(|t| t.shape().to_vec()).unwrap_or_default())
            });
            out.insert(name.clone(), g);
        }
        out
    }
}
