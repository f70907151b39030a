use crate::autodiff::Graph;
use crate::error::{Error, Result};
use crate::nn::{self, Bound};
use crate::tensor::{ParamSet, Scalar, Tensor};

use super::{branch_prefix, ModelConfig};

pub const NUM_VIEWS: usize = 4;
pub const NUM_CLASSES: usize = 2;

/// Intermediate shapes observed during one forward pass.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ForwardTrace {
    pub branch: Vec<Vec<usize>>,
    pub fused: Vec<usize>,
    pub psi: Vec<usize>,
    pub flat: usize,
    pub output: Vec<usize>,
}

/// Registers every parameter with the graph.
pub fn bind<T: Scalar, G: Graph<T>>(g: &mut G, params: &ParamSet<T>) -> Bound<G::Value> {
    params
        .iter()
        .map(|(name, t)| (name.clone(), g.param(name, t)))
        .collect()
}

fn check_views<T: Scalar, G: Graph<T>>(g: &G, config: &ModelConfig, views: &[G::Value]) -> Result<()> {
    if views.len() != NUM_VIEWS {
        return Err(Error::shape(
            "forward",
            format!("expected {NUM_VIEWS} views, got {}", views.len()),
        ));
    }
    let want = [config.seq_len, config.input_hw, config.input_hw, config.channels];
    for (i, v) in views.iter().enumerate() {
        if g.shape(v) != want {
            return Err(Error::shape(
                "forward",
                format!("view {i} has shape {:?}, expected {want:?}", g.shape(v)),
            ));
        }
    }
    Ok(())
}

/// One subject: four `[N,H,W,C]` views to `[1, 2]` class probabilities.
pub fn forward<T: Scalar, G: Graph<T>>(
    g: &mut G,
    config: &ModelConfig,
    p: &Bound<G::Value>,
    views: &[G::Value],
) -> Result<(G::Value, ForwardTrace)> {
    config.validate()?;
    check_views(g, config, views)?;
    let mut trace = ForwardTrace::default();

    let mut branches = Vec::with_capacity(NUM_VIEWS);
    for (i, x) in views.iter().enumerate() {
        let b = branch_prefix(i);
        let f = nn::conv2d_block(g, p, &format!("{b}.conv2d"), x)?;
        let f = nn::motion_aware(g, p, &format!("{b}.motion"), &f, config.motion_gating)?;
        trace.branch.push(g.shape(&f).to_vec());
        branches.push(f);
    }
    let fused = nn::multi_attention_fusion(g, &branches)?;
    drop(branches);
    trace.fused = g.shape(&fused).to_vec();

    let psi = nn::conv3d_block(g, p, "conv3d", &fused)?;
    trace.psi = g.shape(&psi).to_vec();
    let width = config.head_width();
    let flat = g.reshape(&psi, &[1, width])?;
    trace.flat = width;
    let out = nn::dense_head(g, p, "head", &flat)?;
    trace.output = g.shape(&out).to_vec();
    Ok((out, trace))
}

/// Stacks per-subject outputs into `[B, 2]`.
pub fn forward_batch<T: Scalar, G: Graph<T>>(
    g: &mut G,
    config: &ModelConfig,
    p: &Bound<G::Value>,
    subjects: &[Vec<Tensor<T>>],
) -> Result<G::Value> {
    let mut rows = Vec::with_capacity(subjects.len());
    for views in subjects {
        let views: Vec<G::Value> = views.iter().map(|v| g.constant(v.clone())).collect();
        rows.push(forward(g, config, p, &views)?.0);
    }
    g.concat_rows(&rows)
}
