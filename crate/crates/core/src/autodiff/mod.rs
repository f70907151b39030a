//! Reverse-mode automatic differentiation.
//!
//! Model code is written once against the [`Graph`] trait. [`Eager`] runs it
//! directly on tensors (inference, and the 64-bit side of gradient checks);
//! [`Tape`] records every operation so [`Tape::backward`] can replay the
//! chain rule in reverse.

mod gradcheck;
mod suites;
mod tape;

pub use gradcheck::{gradcheck, CoordCheck, GradcheckConfig, GradcheckReport, SkippedCoord};
pub use suites::{run_gradcheck, GradcheckScope, SuiteOptions};
pub use tape::{Gradients, Tape, Var};

use std::marker::PhantomData;

use crate::error::Result;
use crate::nn::loss;
use crate::tensor::{self, Padding, Scalar, Tensor};

/// The operation set models are written against.
pub trait Graph<T: Scalar> {
    type Value: Clone;

    /// A trainable tensor, identified by name.
    fn param(&mut self, name: &str, value: &Tensor<T>) -> Self::Value;
    /// A non-trainable input.
    fn constant(&mut self, value: Tensor<T>) -> Self::Value;
    fn value<'a>(&'a self, v: &'a Self::Value) -> &'a Tensor<T>;

    fn shape<'a>(&'a self, v: &'a Self::Value) -> &'a [usize] {
        self.value(v).shape()
    }

    fn conv2d(
        &mut self,
        x: &Self::Value,
        kernel: &Self::Value,
        bias: &Self::Value,
        stride: (usize, usize),
        padding: Padding,
    ) -> Result<Self::Value>;
    fn conv3d(
        &mut self,
        x: &Self::Value,
        kernel: &Self::Value,
        bias: &Self::Value,
        stride: (usize, usize, usize),
        padding: Padding,
    ) -> Result<Self::Value>;
    fn matmul(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn transpose_last2(&mut self, a: &Self::Value) -> Result<Self::Value>;
    fn scale(&mut self, a: &Self::Value, factor: f64) -> Self::Value;
    fn softmax(&mut self, a: &Self::Value, axis: usize) -> Result<Self::Value>;
    fn relu(&mut self, a: &Self::Value) -> Self::Value;
    fn roll_forward(&mut self, a: &Self::Value) -> Self::Value;
    fn add(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn sub(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn mul(&mut self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value>;
    fn bias_add(&mut self, a: &Self::Value, bias: &Self::Value) -> Result<Self::Value>;
    fn reshape(&mut self, a: &Self::Value, shape: &[usize]) -> Result<Self::Value>;
    fn concat_rows(&mut self, parts: &[Self::Value]) -> Result<Self::Value>;
    fn sum(&mut self, a: &Self::Value) -> Self::Value;
    /// Mean categorical cross-entropy of probabilities `pred [B,C]` against
    /// one-hot `target [B,C]`.
    fn cross_entropy(&mut self, pred: &Self::Value, target: &Tensor<T>) -> Result<Self::Value>;
}

/// Direct evaluation with no recording. Intermediates are freed as soon as
/// the caller drops them.
pub struct Eager<T = f32>(PhantomData<T>);

impl<T> Eager<T> {
    pub fn new() -> Self {
        Eager(PhantomData)
    }
}

impl<T> Default for Eager<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> for Eager<T> {
    type Value = Tensor<T>;

    fn param(&mut self, _name: &str, value: &Tensor<T>) -> Tensor<T> {
        value.clone()
    }
    fn constant(&mut self, value: Tensor<T>) -> Tensor<T> {
        value
    }
    fn value<'a>(&'a self, v: &'a Tensor<T>) -> &'a Tensor<T> {
        v
    }
    fn conv2d(
        &mut self,
        x: &Tensor<T>,
        kernel: &Tensor<T>,
        bias: &Tensor<T>,
        stride: (usize, usize),
        padding: Padding,
    ) -> Result<Tensor<T>> {
        tensor::conv2d(x, kernel, bias, stride, padding)
    }
    fn conv3d(
        &mut self,
        x: &Tensor<T>,
        kernel: &Tensor<T>,
        bias: &Tensor<T>,
        stride: (usize, usize, usize),
        padding: Padding,
    ) -> Result<Tensor<T>> {
        tensor::conv3d(x, kernel, bias, stride, padding)
    }
    fn matmul(&mut self, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        tensor::matmul(a, b)
    }
    fn transpose_last2(&mut self, a: &Tensor<T>) -> Result<Tensor<T>> {
        tensor::transpose_last2(a)
    }
    fn scale(&mut self, a: &Tensor<T>, factor: f64) -> Tensor<T> {
        tensor::scale(a, T::of(factor))
    }
    fn softmax(&mut self, a: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
        tensor::softmax(a, axis)
    }
    fn relu(&mut self, a: &Tensor<T>) -> Tensor<T> {
        tensor::relu(a)
    }
    fn roll_forward(&mut self, a: &Tensor<T>) -> Tensor<T> {
        tensor::roll_forward(a)
    }
    fn add(&mut self, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        tensor::add(a, b)
    }
    fn sub(&mut self, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        tensor::sub(a, b)
    }
    fn mul(&mut self, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        tensor::mul(a, b)
    }
    fn bias_add(&mut self, a: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
        tensor::bias_add(a, bias)
    }
    fn reshape(&mut self, a: &Tensor<T>, shape: &[usize]) -> Result<Tensor<T>> {
        tensor::reshape(a, shape)
    }
    fn concat_rows(&mut self, parts: &[Tensor<T>]) -> Result<Tensor<T>> {
        let refs: Vec<&Tensor<T>> = parts.iter().collect();
        tensor::concat_rows(&refs)
    }
    fn sum(&mut self, a: &Tensor<T>) -> Tensor<T> {
        tensor::sum(a)
    }
    fn cross_entropy(&mut self, pred: &Tensor<T>, target: &Tensor<T>) -> Result<Tensor<T>> {
        loss::cross_entropy(pred, target).map(Tensor::scalar)
    }
}
