use super::conv::{self, ConvGeometry};
use super::{Shape, Tensor};
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Conv2d { input: Var, weight: Var, bias: Option<Var>, geom: ConvGeometry },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Relu(Var),
    Clamp01(Var),
    Scale(Var, f32),
    Offset(Var),
    Concat(Vec<Var>),
    Reshape(Var),
    Sum(Var),
    Mean(Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    /// True when some requires-grad leaf is reachable through the inputs.
    tracks_grad: bool,
}

/// A linear record of tensor operations, replayed in reverse by
/// [`Tape::backward`].
///
/// Nodes are appended in evaluation order, so every node's inputs precede
/// it. Operations on inputs that carry no gradient are still recorded but
/// skipped during the backward sweep.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar loss with respect to each requires-grad leaf.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Move the gradient for `var` out of the set.
    pub fn take(&mut self, var: Var) -> Option<Tensor> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Record a constant input.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, false)
    }

    /// Record a leaf whose gradient will be reported by `backward`.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push_leaf(value, true)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> Shape {
        self.nodes[var.0].value.shape()
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn push_leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad, tracks_grad: requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let tracks_grad = inputs.iter().any(|v| self.nodes[v.0].tracks_grad);
        self.nodes.push(Node { value, op, requires_grad: false, tracks_grad });
        Var(self.nodes.len() - 1)
    }

    fn same_shape(&self, a: Var, b: Var, op: &str) -> Result<()> {
        self.value(a).expect_same_shape(self.value(b), op)
    }

    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Option<Var>, stride: usize, padding: usize) -> Result<Var> {
        let geom = ConvGeometry::new(
            self.shape(input),
            self.shape(weight),
            bias.map(|b| self.shape(b)),
            stride,
            padding,
        )?;
        let out = conv::forward(
            &geom,
            self.value(input).data(),
            self.value(weight).data(),
            bias.map(|b| self.value(b).data()),
        );
        let value = Tensor::new(geom.output, out)?;
        let mut inputs = vec![input, weight];
        inputs.extend(bias);
        Ok(self.push(value, Op::Conv2d { input, weight, bias, geom }, &inputs))
    }

    fn binary(&mut self, a: Var, b: Var, name: &str, f: impl Fn(f32, f32) -> f32, op: Op) -> Result<Var> {
        self.same_shape(a, b, name)?;
        let value = self.value(a).zip_map(self.value(b), f)?;
        Ok(self.push(value, op, &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    /// Pixel-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "div", |x, y| x / y, Op::Div(a, b))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(0.0));
        self.push(value, Op::Relu(a), &[a])
    }

    pub fn clamp01(&mut self, a: Var) -> Var {
        let value = self.value(a).clamp01();
        self.push(value, Op::Clamp01(a), &[a])
    }

    pub fn scale(&mut self, a: Var, factor: f32) -> Var {
        let value = self.value(a).map(|x| x * factor);
        self.push(value, Op::Scale(a, factor), &[a])
    }

    /// Add a constant to every element.
    pub fn offset(&mut self, a: Var, shift: f32) -> Var {
        let value = self.value(a).map(|x| x + shift);
        self.push(value, Op::Offset(a), &[a])
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.mul(a, a).expect("a var always matches its own shape")
    }

    /// Concatenate along the channel axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| Error::shape("concat: no operands"))?;
        let base = self.shape(first);
        let mut channels = 0;
        for &p in parts {
            let s = self.shape(p);
            if (s.n, s.h, s.w) != (base.n, base.h, base.w) {
                return Err(Error::shape(format!("concat: operand {s} does not match {base} in N, H, W")));
            }
            channels += s.c;
        }
        let out_shape = Shape::new(base.n, channels, base.h, base.w);
        let mut data = Vec::with_capacity(out_shape.numel());
        for n in 0..base.n {
            for &p in parts {
                let v = self.value(p);
                let per = v.shape().c * base.plane();
                data.extend_from_slice(&v.data()[n * per..(n + 1) * per]);
            }
        }
        let value = Tensor::new(out_shape, data)?;
        Ok(self.push(value, Op::Concat(parts.to_vec()), parts))
    }

    pub fn reshape(&mut self, a: Var, shape: Shape) -> Result<Var> {
        let value = self.value(a).clone().reshape(shape)?;
        Ok(self.push(value, Op::Reshape(a), &[a]))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum() as f32);
        self.push(value, Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).mean() as f32);
        self.push(value, Op::Mean(a), &[a])
    }

    /// Mean squared error between two equally shaped tensors.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        let d = self.sub(a, b)?;
        let sq = self.square(d);
        Ok(self.mean(sq))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.nodes.is_empty() {
            return Err(Error::Contract("backward on an empty tape".into()));
        }
        let loss_shape = self.shape(loss);
        if !loss_shape.is_scalar() {
            return Err(Error::Contract(format!("backward requires a scalar loss, got shape {loss_shape}")));
        }
        let mut grads: Vec<Option<Vec<f32>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            if !node.tracks_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[id] = Some(g);
        }

        let grads = grads
            .into_iter()
            .enumerate()
            .map(|(id, g)| {
                let node = &self.nodes[id];
                match (node.requires_grad, g) {
                    (true, Some(g)) => Some(Tensor::new(node.value.shape(), g).expect("gradient matches value shape")),
                    (true, None) => Some(Tensor::zeros(node.value.shape())),
                    _ => None,
                }
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &[f32], grads: &mut [Option<Vec<f32>>]) {
        let tracks = |v: Var| self.nodes[v.0].tracks_grad;
        let val = |v: Var| self.nodes[v.0].value.data();
        let mut accumulate = |v: Var, contribution: Vec<f32>| {
            if !self.nodes[v.0].tracks_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => {
                    for (e, c) in existing.iter_mut().zip(contribution) {
                        *e += c;
                    }
                }
                slot @ None => *slot = Some(contribution),
            }
        };

        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { input, weight, bias, geom } => {
                if tracks(*input) {
                    accumulate(*input, conv::backward_input(geom, g, val(*weight)));
                }
                if tracks(*weight) {
                    accumulate(*weight, conv::backward_weight(geom, g, val(*input)));
                }
                if let Some(b) = bias {
                    if tracks(*b) {
                        accumulate(*b, conv::backward_bias(geom, g));
                    }
                }
            }
            Op::Add(a, b) => {
                accumulate(*a, g.to_vec());
                accumulate(*b, g.to_vec());
            }
            Op::Sub(a, b) => {
                accumulate(*a, g.to_vec());
                if tracks(*b) {
                    accumulate(*b, g.iter().map(|&x| -x).collect());
                }
            }
            Op::Mul(a, b) => {
                if tracks(*a) {
                    accumulate(*a, g.iter().zip(val(*b)).map(|(&g, &y)| g * y).collect());
                }
                if tracks(*b) {
                    accumulate(*b, g.iter().zip(val(*a)).map(|(&g, &x)| g * x).collect());
                }
            }
            Op::Div(a, b) => {
                if tracks(*a) {
                    accumulate(*a, g.iter().zip(val(*b)).map(|(&g, &y)| g / y).collect());
                }
                if tracks(*b) {
                    let contribution = g
                        .iter()
                        .zip(val(*a))
                        .zip(val(*b))
                        .map(|((&g, &x), &y)| -g * x / (y * y))
                        .collect();
                    accumulate(*b, contribution);
                }
            }
            Op::Relu(a) => {
                accumulate(*a, g.iter().zip(val(*a)).map(|(&g, &x)| if x > 0.0 { g } else { 0.0 }).collect());
            }
            Op::Clamp01(a) => {
                let contribution =
                    g.iter().zip(val(*a)).map(|(&g, &x)| if x > 0.0 && x < 1.0 { g } else { 0.0 }).collect();
                accumulate(*a, contribution);
            }
            Op::Scale(a, factor) => accumulate(*a, g.iter().map(|&x| x * factor).collect()),
            Op::Offset(a) | Op::Reshape(a) => accumulate(*a, g.to_vec()),
            Op::Concat(parts) => {
                let out = node.value.shape();
                let mut channel = 0;
                for &p in parts {
                    let s = self.nodes[p.0].value.shape();
                    if tracks(p) {
                        let per = s.c * out.plane();
                        let mut contribution = Vec::with_capacity(s.numel());
                        for n in 0..out.n {
                            let start = out.index(n, channel, 0, 0);
                            contribution.extend_from_slice(&g[start..start + per]);
                        }
                        accumulate(p, contribution);
                    }
                    channel += s.c;
                }
            }
            Op::Sum(a) => accumulate(*a, vec![g[0]; self.nodes[a.0].value.len()]),
            Op::Mean(a) => {
                let n = self.nodes[a.0].value.len();
                accumulate(*a, vec![(g[0] as f64 / n as f64) as f32; n]);
            }
        }
    }
}
