use indexmap::IndexMap;

use super::Graph;
use crate::error::{Error, Result};
use crate::nn::loss;
use crate::tensor::{
    self, conv3d_backward_input, conv3d_backward_kernel, ConvGeometry, Padding, ParamSet, Scalar,
    Tensor,
};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    Conv {
        x: Var,
        kernel: Var,
        bias: Var,
        geom: ConvGeometry,
    },
    MatMul(Var, Var),
    Transpose(Var),
    Scale(Var, f64),
    Softmax(Var, usize),
    Relu(Var),
    Roll(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    BiasAdd(Var, Var),
    Reshape(Var),
    Concat(Vec<Var>),
    Sum(Var),
    CrossEntropy { pred: Var, target: Tensor<T> },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Records operations in execution order, which is a topological order by
/// construction: a node can only reference vars that already exist.
pub struct Tape<T = f32> {
    nodes: Vec<Node<T>>,
    params: IndexMap<String, Var>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: IndexMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Registered parameters, in registration order.
    pub fn params(&self) -> impl Iterator<Item = (&str, Var)> {
        self.params.iter().map(|(k, &v)| (k.as_str(), v))
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Backpropagates from a one-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let value = &self.nodes[loss.0].value;
        if value.len() != 1 {
            return Err(Error::shape(
                "backward",
                format!("loss must be scalar, shape is {:?}", value.shape()),
            ));
        }
        self.backward_from(loss, Tensor::scalar(T::one()))
    }

    /// Vector-Jacobian product seeded with `upstream` at `root`.
    pub fn backward_from(&self, root: Var, upstream: Tensor<T>) -> Result<Gradients<T>> {
        let root_shape = self.nodes[root.0].value.shape();
        if upstream.shape() != root_shape {
            return Err(Error::shape(
                "backward",
                format!("upstream {:?} vs root {:?}", upstream.shape(), root_shape),
            ));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; root.0 + 1];
        grads[root.0] = Some(upstream);

        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads)?;
            grads[i] = Some(g);
        }

        Ok(Gradients {
            grads,
            params: self
                .params
                .iter()
                .map(|(k, &v)| (k.clone(), v, self.nodes[v.0].value.shape().to_vec()))
                .collect(),
        })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn val(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn propagate(&self, node: &Node<T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) -> Result<()> {
        let mut acc = |v: Var, d: Tensor<T>| -> Result<()> {
            match &mut grads[v.0] {
                Some(existing) => {
                    for (a, &b) in existing.data_mut().iter_mut().zip(d.data()) {
                        *a += b;
                    }
                }
                slot @ None => *slot = Some(d),
            }
            Ok(())
        };

        match &node.op {
            Op::Leaf => {}
            Op::Conv {
                x,
                kernel,
                bias,
                geom,
            } => {
                if self.wants(*x) {
                    acc(*x, conv3d_backward_input(g, self.val(*kernel), geom))?;
                }
                if self.wants(*kernel) || self.wants(*bias) {
                    let (gk, gb) = conv3d_backward_kernel(self.val(*x), g, geom);
                    if self.wants(*kernel) {
                        acc(*kernel, Tensor::from_parts(self.val(*kernel).shape().to_vec(), gk))?;
                    }
                    if self.wants(*bias) {
                        acc(*bias, Tensor::from_parts(vec![gb.len()], gb))?;
                    }
                }
            }
            Op::MatMul(a, b) => {
                if self.wants(*a) {
                    let bt = tensor::transpose_last2(self.val(*b))?;
                    acc(*a, tensor::matmul(g, &bt)?)?;
                }
                if self.wants(*b) {
                    let at = tensor::transpose_last2(self.val(*a))?;
                    acc(*b, tensor::matmul(&at, g)?)?;
                }
            }
            Op::Transpose(a) => acc(*a, tensor::transpose_last2(g)?)?,
            Op::Scale(a, f) => acc(*a, tensor::scale(g, T::of(*f)))?,
            Op::Softmax(a, axis) => {
                let y = &node.value;
                let (outer, n, inner) = tensor::axis_split("softmax", y.shape(), *axis)?;
                let mut dx = vec![T::zero(); y.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let idx = |k: usize| (o * n + k) * inner + i;
                        let mut dot = T::zero();
                        for k in 0..n {
                            dot += g.data()[idx(k)] * y.data()[idx(k)];
                        }
                        for k in 0..n {
                            dx[idx(k)] = y.data()[idx(k)] * (g.data()[idx(k)] - dot);
                        }
                    }
                }
                acc(*a, Tensor::from_parts(y.shape().to_vec(), dx))?;
            }
            Op::Relu(a) => {
                let x = self.val(*a);
                let dx = x
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&xv, &gv)| if xv > T::zero() { gv } else { T::zero() })
                    .collect();
                acc(*a, Tensor::from_parts(x.shape().to_vec(), dx))?;
            }
            Op::Roll(a) => acc(*a, tensor::roll_backward(g))?,
            Op::Add(a, b) => {
                if self.wants(*a) {
                    acc(*a, g.clone())?;
                }
                if self.wants(*b) {
                    acc(*b, g.clone())?;
                }
            }
            Op::Sub(a, b) => {
                if self.wants(*a) {
                    acc(*a, g.clone())?;
                }
                if self.wants(*b) {
                    acc(*b, g.map(|x| -x))?;
                }
            }
            Op::Mul(a, b) => {
                if self.wants(*a) {
                    acc(*a, tensor::mul(g, self.val(*b))?)?;
                }
                if self.wants(*b) {
                    acc(*b, tensor::mul(g, self.val(*a))?)?;
                }
            }
            Op::BiasAdd(a, b) => {
                if self.wants(*a) {
                    acc(*a, g.clone())?;
                }
                if self.wants(*b) {
                    let c = self.val(*b).len();
                    let mut db = vec![T::zero(); c];
                    for row in g.data().chunks_exact(c) {
                        for (d, &x) in db.iter_mut().zip(row) {
                            *d += x;
                        }
                    }
                    acc(*b, Tensor::from_parts(vec![c], db))?;
                }
            }
            Op::Reshape(a) => acc(*a, tensor::reshape(g, self.val(*a).shape())?)?,
            Op::Concat(parts) => {
                let mut offset = 0;
                for p in parts {
                    let shape = self.val(*p).shape().to_vec();
                    let n = tensor::numel(&shape);
                    if self.wants(*p) {
                        acc(
                            *p,
                            Tensor::from_parts(shape, g.data()[offset..offset + n].to_vec()),
                        )?;
                    }
                    offset += n;
                }
            }
            Op::Sum(a) => {
                let shape = self.val(*a).shape();
                acc(*a, Tensor::full(shape, g.data()[0])?)?;
            }
            Op::CrossEntropy { pred, target } => {
                let d = loss::cross_entropy_grad(self.val(*pred), target)?;
                acc(*pred, tensor::scale(&d, g.data()[0]))?;
            }
        }
        Ok(())
    }
}

/// Result of a backward pass.
pub struct Gradients<T = f32> {
    grads: Vec<Option<Tensor<T>>>,
    params: Vec<(String, Var, Vec<usize>)>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient for `v`, or `None` if no path connects it to the root.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient for every registered parameter, in registration order.
    /// Parameters the root does not depend on get zeros.
    pub fn param_grads(&self) -> ParamSet<T> {
        self.params
            .iter()
            .map(|(name, v, shape)| {
                let g = match self.get(*v) {
                    Some(g) => g.clone(),
                    None => Tensor::from_parts(shape.clone(), vec![T::zero(); tensor::numel(shape)]),
                };
                (name.clone(), g)
            })
            .collect()
    }
}

impl<T: Scalar> Graph<T> for Tape<T> {
    type Value = Var;

    fn param(&mut self, name: &str, value: &Tensor<T>) -> Var {
        if let Some(&v) = self.params.get(name) {
            return v;
        }
        let v = self.leaf(value.clone(), true);
        self.params.insert(name.to_string(), v);
        v
    }

    fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    fn value<'a>(&'a self, v: &'a Var) -> &'a Tensor<T> {
        &self.nodes[v.0].value
    }

    fn conv2d(
        &mut self,
        x: &Var,
        kernel: &Var,
        bias: &Var,
        stride: (usize, usize),
        padding: Padding,
    ) -> Result<Var> {
        let y = tensor::conv2d(self.val(*x), self.val(*kernel), self.val(*bias), stride, padding)?;
        let geom = tensor::conv::conv2d_geometry(self.val(*x).shape(), self.val(*kernel).shape(), stride, padding)?;
        Ok(self.push(
            y,
            Op::Conv {
                x: *x,
                kernel: *kernel,
                bias: *bias,
                geom,
            },
            &[*x, *kernel, *bias],
        ))
    }

    fn conv3d(
        &mut self,
        x: &Var,
        kernel: &Var,
        bias: &Var,
        stride: (usize, usize, usize),
        padding: Padding,
    ) -> Result<Var> {
        let y = tensor::conv3d(self.val(*x), self.val(*kernel), self.val(*bias), stride, padding)?;
        let geom = tensor::conv::conv3d_geometry(self.val(*x).shape(), self.val(*kernel).shape(), stride, padding)?;
        Ok(self.push(
            y,
            Op::Conv {
                x: *x,
                kernel: *kernel,
                bias: *bias,
                geom,
            },
            &[*x, *kernel, *bias],
        ))
    }

    fn matmul(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let y = tensor::matmul(self.val(*a), self.val(*b))?;
        Ok(self.push(y, Op::MatMul(*a, *b), &[*a, *b]))
    }

    fn transpose_last2(&mut self, a: &Var) -> Result<Var> {
        let y = tensor::transpose_last2(self.val(*a))?;
        Ok(self.push(y, Op::Transpose(*a), &[*a]))
    }

    fn scale(&mut self, a: &Var, factor: f64) -> Var {
        let y = tensor::scale(self.val(*a), T::of(factor));
        self.push(y, Op::Scale(*a, factor), &[*a])
    }

    fn softmax(&mut self, a: &Var, axis: usize) -> Result<Var> {
        let y = tensor::softmax(self.val(*a), axis)?;
        Ok(self.push(y, Op::Softmax(*a, axis), &[*a]))
    }

    fn relu(&mut self, a: &Var) -> Var {
        let y = tensor::relu(self.val(*a));
        self.push(y, Op::Relu(*a), &[*a])
    }

    fn roll_forward(&mut self, a: &Var) -> Var {
        let y = tensor::roll_forward(self.val(*a));
        self.push(y, Op::Roll(*a), &[*a])
    }

    fn add(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let y = tensor::add(self.val(*a), self.val(*b))?;
        Ok(self.push(y, Op::Add(*a, *b), &[*a, *b]))
    }

    fn sub(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let y = tensor::sub(self.val(*a), self.val(*b))?;
        Ok(self.push(y, Op::Sub(*a, *b), &[*a, *b]))
    }

    fn mul(&mut self, a: &Var, b: &Var) -> Result<Var> {
        let y = tensor::mul(self.val(*a), self.val(*b))?;
        Ok(self.push(y, Op::Mul(*a, *b), &[*a, *b]))
    }

    fn bias_add(&mut self, a: &Var, bias: &Var) -> Result<Var> {
        let y = tensor::bias_add(self.val(*a), self.val(*bias))?;
        Ok(self.push(y, Op::BiasAdd(*a, *bias), &[*a, *bias]))
    }

    fn reshape(&mut self, a: &Var, shape: &[usize]) -> Result<Var> {
        let y = tensor::reshape(self.val(*a), shape)?;
        Ok(self.push(y, Op::Reshape(*a), &[*a]))
    }

    fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let refs: Vec<&Tensor<T>> = parts.iter().map(|v| self.val(*v)).collect();
        let y = tensor::concat_rows(&refs)?;
        Ok(self.push(y, Op::Concat(parts.to_vec()), parts))
    }

    fn sum(&mut self, a: &Var) -> Var {
        let y = tensor::sum(self.val(*a));
        self.push(y, Op::Sum(*a), &[*a])
    }

    fn cross_entropy(&mut self, pred: &Var, target: &Tensor<T>) -> Result<Var> {
        let y = Tensor::scalar(loss::cross_entropy(self.val(*pred), target)?);
        Ok(self.push(
            y,
            Op::CrossEntropy {
                pred: *pred,
                target: target.clone(),
            },
            &[*pred],
        ))
    }
}
