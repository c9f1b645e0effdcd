use std::rc::Rc;

use super::{activation, conv, linear, pool, shuffle};
use super::{ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// The op vocabulary a network is written against.
///
/// [`Tape`] records every call for a later backward pass, [`Eager`] only
/// computes values so intermediates can be dropped as soon as they go out
/// of scope.
pub trait Graph<T: Element> {
    type Value: Clone;

    fn input(&mut self, value: Tensor<T>) -> Self::Value;
    fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Self::Value;
    fn value<'a>(&'a self, v: &'a Self::Value) -> &'a Tensor<T>;

    fn conv2d(&mut self, x: &Self::Value, weight: &Self::Value, bias: &Self::Value) -> Result<Self::Value>;
    fn relu(&mut self, x: &Self::Value) -> Result<Self::Value>;
    fn sigmoid(&mut self, x: &Self::Value) -> Result<Self::Value>;
    fn fully_connected(&mut self, x: &Self::Value, weight: &Self::Value, bias: &Self::Value) -> Result<Self::Value>;
    fn global_avg_pool(&mut self, x: &Self::Value) -> Result<Self::Value>;
    fn channel_scale(&mut self, x: &Self::Value, alpha: &Self::Value) -> Result<Self::Value>;
    fn add(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn concat_channels(&mut self, parts: &[Self::Value]) -> Result<Self::Value>;
    fn pixel_shuffle(&mut self, x: &Self::Value, scale: usize) -> Result<Self::Value>;
}

/// Forward-only evaluation.
#[derive(Default)]
pub struct Eager;

impl<T: Element> Graph<T> for Eager {
    type Value = Rc<Tensor<T>>;

    fn input(&mut self, value: Tensor<T>) -> Self::Value {
        Rc::new(value)
    }

    fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Self::Value {
        Rc::new(store.get(id).value.clone())
    }

    fn value<'a>(&'a self, v: &'a Self::Value) -> &'a Tensor<T> {
        v
    }

    fn conv2d(&mut self, x: &Self::Value, w: &Self::Value, b: &Self::Value) -> Result<Self::Value> {
        conv::conv2d(x, w, b).map(Rc::new)
    }

    fn relu(&mut self, x: &Self::Value) -> Result<Self::Value> {
        Ok(Rc::new(activation::relu(x)))
    }

    fn sigmoid(&mut self, x: &Self::Value) -> Result<Self::Value> {
        Ok(Rc::new(activation::sigmoid(x)))
    }

    fn fully_connected(&mut self, x: &Self::Value, w: &Self::Value, b: &Self::Value) -> Result<Self::Value> {
        linear::fully_connected(x, w, b).map(Rc::new)
    }

    fn global_avg_pool(&mut self, x: &Self::Value) -> Result<Self::Value> {
        pool::global_avg_pool(x).map(Rc::new)
    }

    fn channel_scale(&mut self, x: &Self::Value, alpha: &Self::Value) -> Result<Self::Value> {
        pool::channel_scale(x, alpha).map(Rc::new)
    }

    fn add(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value> {
        a.add(b).map(Rc::new)
    }

    fn concat_channels(&mut self, parts: &[Self::Value]) -> Result<Self::Value> {
        let refs: Vec<&Tensor<T>> = parts.iter().map(|p| p.as_ref()).collect();
        Tensor::concat_channels(&refs).map(Rc::new)
    }

    fn pixel_shuffle(&mut self, x: &Self::Value, scale: usize) -> Result<Self::Value> {
        shuffle::pixel_shuffle(x, scale).map(Rc::new)
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Input,
    Param(ParamId),
    Conv { x: Var, w: Var, b: Var },
    Relu(Var),
    Sigmoid(Var),
    Linear { x: Var, w: Var, b: Var },
    AvgPool(Var),
    Scale { x: Var, alpha: Var },
    Add(Var, Var),
    Concat(Vec<Var>),
    Shuffle { x: Var, scale: usize },
}

#[derive(Debug)]
struct Node<T: Element> {
    value: Tensor<T>,
    op: Op,
}

/// Ordered record of executed ops with the values their backward rules need.
#[derive(Debug, Default)]
pub struct Tape<T: Element> {
    nodes: Vec<Node<T>>,
}

/// Gradients of every recorded value reached by a backward pass.
pub struct Gradients<T: Element> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Element> Gradients<T> {
    /// Gradient with respect to an input (or any retained) value.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }
}

fn accumulate<T: Element>(grads: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) -> Result<()> {
    match &mut grads[v.0] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
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

    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    fn push(&mut self, value: Tensor<T>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn val(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// Recorded value of `v`.
    pub fn get(&self, v: Var) -> &Tensor<T> {
        self.val(v)
    }

    /// Outputs of every recorded sigmoid, i.e. all attention vectors.
    pub fn sigmoid_outputs(&self) -> impl Iterator<Item = &Tensor<T>> {
        self.nodes
            .iter()
            .filter(|n| matches!(n.op, Op::Sigmoid(_)))
            .map(|n| &n.value)
    }

    /// Reverse-mode sweep from `output` seeded with `seed` (same shape).
    ///
    /// Parameter gradients are accumulated (`+=`) into `store`; the tape is
    /// left intact so the sweep may be repeated.
    pub fn backward(&self, output: Var, seed: Tensor<T>, store: &mut ParamStore<T>) -> Result<Gradients<T>> {
        self.val(output).ensure_same_shape(&seed, "backward seed")?;
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(seed);
        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            let g = match &node.op {
                Op::Input => continue,
                _ => match grads[idx].take() {
                    Some(g) => g,
                    None => continue,
                },
            };
            match &node.op {
                Op::Input => unreachable!(),
                Op::Param(id) => {
                    let p = store.get_mut(*id);
                    p.grad.add_assign(&g)?;
                }
                Op::Conv { x, w, b } => {
                    let cg = conv::conv2d_backward(self.val(*x), self.val(*w), &g)?;
                    accumulate(&mut grads, *x, cg.input)?;
                    accumulate(&mut grads, *w, cg.weight)?;
                    accumulate(&mut grads, *b, cg.bias)?;
                }
                Op::Relu(x) => {
                    let dx = activation::relu_backward(self.val(*x), &g)?;
                    accumulate(&mut grads, *x, dx)?;
                }
                Op::Sigmoid(x) => {
                    let dx = activation::sigmoid_backward(&node.value, &g)?;
                    accumulate(&mut grads, *x, dx)?;
                }
                Op::Linear { x, w, b } => {
                    let lg = linear::fully_connected_backward(self.val(*x), self.val(*w), &g)?;
                    accumulate(&mut grads, *x, lg.input)?;
                    accumulate(&mut grads, *w, lg.weight)?;
                    accumulate(&mut grads, *b, lg.bias)?;
                }
                Op::AvgPool(x) => {
                    let (_, _, h, w) = self.val(*x).dims4("avg_pool backward")?;
                    accumulate(&mut grads, *x, pool::global_avg_pool_backward(&g, h, w)?)?;
                }
                Op::Scale { x, alpha } => {
                    let (dx, da) = pool::channel_scale_backward(self.val(*x), self.val(*alpha), &g)?;
                    accumulate(&mut grads, *x, dx)?;
                    accumulate(&mut grads, *alpha, da)?;
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone())?;
                    accumulate(&mut grads, *b, g)?;
                }
                Op::Concat(parts) => {
                    let mut lo = 0;
                    for p in parts {
                        let hi = lo + self.val(*p).dims()[1];
                        accumulate(&mut grads, *p, g.channel_slice(lo, hi)?)?;
                        lo = hi;
                    }
                }
                Op::Shuffle { x, scale } => {
                    accumulate(&mut grads, *x, shuffle::pixel_unshuffle(&g, *scale)?)?;
                }
            }
        }
        Ok(Gradients { grads })
    }
}

impl<T: Element> Graph<T> for Tape<T> {
    type Value = Var;

    fn input(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Input)
    }

    fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        self.push(store.get(id).value.clone(), Op::Param(id))
    }

    fn value<'a>(&'a self, v: &'a Var) -> &'a Tensor<T> {
        self.val(*v)
    }

    fn conv2d(&mut self, x: &Var, w: &Var, b: &Var) -> Result<Var> {
        let out = conv::conv2d(self.val(*x), self.val(*w), self.val(*b))?;
        Ok(self.push(out, Op::Conv { x: *x, w: *w, b: *b }))
    }

    fn relu(&mut self, x: &Var) -> Result<Var> {
        let out = activation::relu(self.val(*x));
        Ok(self.push(out, Op::Relu(*x)))
    }

    fn sigmoid(&mut self, x: &Var) -> Result<Var> {
        let out = activation::sigmoid(self.val(*x));
        Ok(self.push(out, Op::Sigmoid(*x)))
    }

    fn fully_connected(&mut self, x: &Var, w: &Var, b: &Var) -> Result<Var> {
        let out = linear::fully_connected(self.val(*x), self.val(*w), self.val(*b))?;
        Ok(self.push(out, Op::Linear { x: *x, w: *w, b: *b }))
    }

    fn global_avg_pool(&mut self, x: &Var) -> Result<Var> {
        let out = pool::global_avg_pool(self.val(*x))?;
        Ok(self.push(out, Op::AvgPool(*x)))
    }

    fn channel_scale(&mut self, x: &Var, alpha: &Var) -> Result<Var> {
        let out = pool::channel_scale(self.val(*x), self.val(*alpha))?;
        Ok(self.push(out, Op::Scale { x: *x, alpha: *alpha }))
    }

    fn add(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let out = self.val(*a).add(self.val(*b))?;
        Ok(self.push(out, Op::Add(*a, *b)))
    }

    fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Config("concat of zero tensors".into()));
        }
        let refs: Vec<&Tensor<T>> = parts.iter().map(|p| self.val(*p)).collect();
        let out = Tensor::concat_channels(&refs)?;
        Ok(self.push(out, Op::Concat(parts.to_vec())))
    }

    fn pixel_shuffle(&mut self, x: &Var, scale: usize) -> Result<Var> {
        let out = shuffle::pixel_shuffle(self.val(*x), scale)?;
        Ok(self.push(out, Op::Shuffle { x: *x, scale }))
    }
}
