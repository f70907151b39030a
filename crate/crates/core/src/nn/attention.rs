//! Parameter-free scaled dot-product self-attention.

use crate::autodiff::Graph;
use crate::error::{Error, Result};
use crate::tensor::Scalar;

/// `softmax(x xᵀ / sqrt(d)) x` with queries, keys, and values all equal to
/// `x`. The last axis is the feature dimension `d`. A rank-2 input
/// `[tokens, d]` is one token set; for higher ranks the leading axis is a
/// batch and the middle axes are flattened into tokens, so a feature map
/// `[N, h, w, d]` attends over the `h·w` positions of each frame.
pub fn attention<T: Scalar, G: Graph<T>>(g: &mut G, x: &G::Value) -> Result<G::Value> {
    let shape = g.shape(x).to_vec();
    let r = shape.len();
    if r < 2 {
        return Err(Error::shape("attention", format!("need rank >= 2, got {shape:?}")));
    }
    let d = shape[r - 1];
    let (batch, tokens) = if r == 2 {
        (1, shape[0])
    } else {
        (shape[0], shape[1..r - 1].iter().product())
    };
    let x3 = g.reshape(x, &[batch, tokens, d])?;
    let xt = g.transpose_last2(&x3)?;
    let scores = g.matmul(&x3, &xt)?;
    let scaled = g.scale(&scores, 1.0 / (d as f64).sqrt());
    let weights = g.softmax(&scaled, 2)?;
    let out = g.matmul(&weights, &x3)?;
    g.reshape(&out, &shape)
}

/// Independent attention on each branch, fused by summation.
pub fn multi_attention_fusion<T: Scalar, G: Graph<T>>(
    g: &mut G,
    branches: &[G::Value],
) -> Result<G::Value> {
    let first = branches
        .first()
        .ok_or_else(|| Error::shape("fusion", "no branches"))?;
    let shape = g.shape(first).to_vec();
    for (i, b) in branches.iter().enumerate() {
        if g.shape(b) != shape.as_slice() {
            return Err(Error::shape(
                "fusion",
                format!("branch {i} has shape {:?}, branch 0 has {shape:?}", g.shape(b)),
            ));
        }
    }
    let mut fused = attention(g, first)?;
    for b in &branches[1..] {
        let a = attention(g, b)?;
        fused = g.add(&fused, &a)?;
    }
    Ok(fused)
}
