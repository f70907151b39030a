//! Categorical cross-entropy on probabilities.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Added inside the logarithm.
pub const LOG_EPS: f64 = 1e-7;

fn check<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(usize, usize)> {
    if pred.rank() != 2 || pred.shape() != target.shape() {
        return Err(Error::shape(
            "cross_entropy",
            format!("pred {:?} and target {:?} must both be [B, C]", pred.shape(), target.shape()),
        ));
    }
    let (b, c) = (pred.shape()[0], pred.shape()[1]);
    for row in target.data().chunks_exact(c) {
        let ones = row.iter().filter(|&&x| x == T::one()).count();
        let zeros = row.iter().filter(|&&x| x == T::zero()).count();
        if ones != 1 || zeros != c - 1 {
            return Err(Error::Data(format!("target row {row:?} is not one-hot")));
        }
    }
    Ok((b, c))
}

/// Mean over the batch of `-sum(target * ln(pred + LOG_EPS))`.
pub fn cross_entropy<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<T> {
    let (b, _) = check(pred, target)?;
    let eps = T::of(LOG_EPS);
    let total: T = pred
        .data()
        .iter()
        .zip(target.data())
        .filter(|(_, &t)| t != T::zero())
        .map(|(&p, &t)| -t * (p + eps).ln())
        .sum();
    Ok(total / T::of(b as f64))
}

/// Derivative of [`cross_entropy`] with respect to `pred`.
pub fn cross_entropy_grad<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<Tensor<T>> {
    let (b, _) = check(pred, target)?;
    let eps = T::of(LOG_EPS);
    let inv_b = T::of(1.0 / b as f64);
    let data = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| -t / (p + eps) * inv_b)
        .collect();
    Tensor::new(pred.shape().to_vec(), data)
}

/// One-hot rows for class indices.
pub fn one_hot<T: Scalar>(labels: &[usize], classes: usize) -> Result<Tensor<T>> {
    let mut data = vec![T::zero(); labels.len() * classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::Data(format!("label {l} out of range for {classes} classes")));
        }
        data[i * classes + l] = T::one();
    }
    Tensor::new(vec![labels.len(), classes], data)
}
