use rayon::prelude::*;

use super::{numel, same_shape, Scalar, Tensor};
use crate::error::{Error, Result};

fn zip_with<T: Scalar>(
    op: &'static str,
    a: &Tensor<T>,
    b: &Tensor<T>,
    f: impl Fn(T, T) -> T,
) -> Result<Tensor<T>> {
    same_shape(op, a, b)?;
    let data = a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect();
    Ok(Tensor::from_parts(a.shape.clone(), data))
}

pub fn add<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    zip_with("add", a, b, |x, y| x + y)
}

pub fn sub<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    zip_with("sub", a, b, |x, y| x - y)
}

pub fn mul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    zip_with("mul", a, b, |x, y| x * y)
}

pub fn scale<T: Scalar>(a: &Tensor<T>, factor: T) -> Tensor<T> {
    a.map(|x| x * factor)
}

pub fn relu<T: Scalar>(a: &Tensor<T>) -> Tensor<T> {
    // NaN passes through so corrupted inputs surface as a non-finite loss.
    a.map(|x| if x <= T::zero() { T::zero() } else { x })
}

/// Sum of all elements as a one-element tensor.
pub fn sum<T: Scalar>(a: &Tensor<T>) -> Tensor<T> {
    Tensor::scalar(a.data.iter().copied().sum())
}

/// Adds `bias` (length = last extent) to every row.
pub fn bias_add<T: Scalar>(a: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let c = *a.shape.last().unwrap();
    if bias.len() != c {
        return Err(Error::shape(
            "bias_add",
            format!("bias length {} vs last extent {c}", bias.len()),
        ));
    }
    let mut out = a.clone();
    for row in out.data.chunks_exact_mut(c) {
        for (x, &b) in row.iter_mut().zip(&bias.data) {
            *x += b;
        }
    }
    Ok(out)
}

/// Splits `shape` around `axis` into (outer, extent, inner) element counts.
pub(crate) fn axis_split(op: &'static str, shape: &[usize], axis: usize) -> Result<(usize, usize, usize)> {
    if axis >= shape.len() {
        return Err(Error::shape(
            op,
            format!("axis {axis} out of range for rank {}", shape.len()),
        ));
    }
    Ok((
        numel(&shape[..axis]),
        shape[axis],
        numel(&shape[axis + 1..]),
    ))
}

/// Softmax along `axis`, with max subtraction.
pub fn softmax<T: Scalar>(a: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    let (outer, n, inner) = axis_split("softmax", &a.shape, axis)?;
    let mut out = a.clone();
    for o in 0..outer {
        let base = o * n * inner;
        for i in 0..inner {
            let idx = |k: usize| base + k * inner + i;
            let mut max = T::neg_infinity();
            for k in 0..n {
                max = max.max(a.data[idx(k)]);
            }
            let mut total = T::zero();
            for k in 0..n {
                let e = (a.data[idx(k)] - max).exp();
                out.data[idx(k)] = e;
                total += e;
            }
            for k in 0..n {
                out.data[idx(k)] = out.data[idx(k)] / total;
            }
        }
    }
    Ok(out)
}

/// Shifts frames one step towards the front: `out[i] = in[i + 1]`, and the
/// first frame wraps around to the last position.
pub fn roll_forward<T: Scalar>(a: &Tensor<T>) -> Tensor<T> {
    let frames = a.shape[0];
    let step = a.len() / frames;
    let mut data = Vec::with_capacity(a.len());
    data.extend_from_slice(&a.data[step..]);
    data.extend_from_slice(&a.data[..step]);
    Tensor::from_parts(a.shape.clone(), data)
}

/// Inverse of [`roll_forward`].
pub fn roll_backward<T: Scalar>(a: &Tensor<T>) -> Tensor<T> {
    let frames = a.shape[0];
    let step = a.len() / frames;
    let split = a.len() - step;
    let mut data = Vec::with_capacity(a.len());
    data.extend_from_slice(&a.data[split..]);
    data.extend_from_slice(&a.data[..split]);
    Tensor::from_parts(a.shape.clone(), data)
}

pub fn reshape<T: Scalar>(a: &Tensor<T>, shape: &[usize]) -> Result<Tensor<T>> {
    if shape.is_empty() || shape.contains(&0) || numel(shape) != a.len() {
        return Err(Error::shape(
            "reshape",
            format!("cannot view {:?} as {shape:?}", a.shape),
        ));
    }
    Ok(Tensor::from_parts(shape.to_vec(), a.data.clone()))
}

pub fn flatten<T: Scalar>(a: &Tensor<T>) -> Tensor<T> {
    Tensor::from_parts(vec![a.len()], a.data.clone())
}

/// Concatenates along axis 0; trailing extents must agree.
pub fn concat_rows<T: Scalar>(parts: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let first = parts
        .first()
        .ok_or_else(|| Error::shape("concat_rows", "nothing to concatenate"))?;
    let tail = &first.shape[1..];
    let mut rows = 0;
    let mut data = Vec::new();
    for p in parts {
        if &p.shape[1..] != tail {
            return Err(Error::shape(
                "concat_rows",
                format!("trailing shapes differ: {:?} vs {:?}", first.shape, p.shape),
            ));
        }
        rows += p.shape[0];
        data.extend_from_slice(&p.data);
    }
    let mut shape = vec![rows];
    shape.extend_from_slice(tail);
    Ok(Tensor::from_parts(shape, data))
}

fn matmul_dims(a: &[usize], b: &[usize]) -> Result<(usize, usize, usize, usize)> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::shape(
            "matmul",
            format!("operands must be at least rank 2: {a:?} x {b:?}"),
        ));
    }
    let (ab, am) = a.split_at(a.len() - 2);
    let (bb, bm) = b.split_at(b.len() - 2);
    if ab != bb {
        return Err(Error::shape(
            "matmul",
            format!("batch dims differ: {a:?} x {b:?}"),
        ));
    }
    if am[1] != bm[0] {
        return Err(Error::shape(
            "matmul",
            format!("inner dims differ: {a:?} x {b:?}"),
        ));
    }
    Ok((numel(ab), am[0], am[1], bm[1]))
}

/// Batched matrix product over matching leading dimensions.
pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (batch, m, k, n) = matmul_dims(&a.shape, &b.shape)?;
    let mut out = vec![T::zero(); batch * m * n];
    out.par_chunks_mut(m * n)
        .enumerate()
        .for_each(|(bi, o)| {
            let a = &a.data[bi * m * k..(bi + 1) * m * k];
            let b = &b.data[bi * k * n..(bi + 1) * k * n];
            for i in 0..m {
                let orow = &mut o[i * n..(i + 1) * n];
                for p in 0..k {
                    let av = a[i * k + p];
                    for (x, &bv) in orow.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                        *x += av * bv;
                    }
                }
            }
        });
    let mut shape = a.shape[..a.shape.len() - 1].to_vec();
    shape.push(n);
    Ok(Tensor::from_parts(shape, out))
}

/// Swaps the last two axes.
pub fn transpose_last2<T: Scalar>(a: &Tensor<T>) -> Result<Tensor<T>> {
    let r = a.rank();
    if r < 2 {
        return Err(Error::shape("transpose", "rank must be at least 2"));
    }
    let (m, n) = (a.shape[r - 2], a.shape[r - 1]);
    let batch = a.len() / (m * n);
    let mut out = vec![T::zero(); a.len()];
    for bi in 0..batch {
        let src = &a.data[bi * m * n..(bi + 1) * m * n];
        let dst = &mut out[bi * m * n..(bi + 1) * m * n];
        for i in 0..m {
            for j in 0..n {
                dst[j * m + i] = src[i * n + j];
            }
        }
    }
    let mut shape = a.shape.clone();
    shape.swap(r - 2, r - 1);
    Ok(Tensor::from_parts(shape, out))
}
