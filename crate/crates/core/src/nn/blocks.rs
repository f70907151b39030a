//! The network's building blocks, written against [`Graph`].
//!
//! Blocks look their parameters up by name in a [`Bound`] map. Names are
//! `"{prefix}.{layer}.weight"` / `"{prefix}.{layer}.bias"`.

use indexmap::IndexMap;
use rand::Rng;

use super::attention::attention;
use crate::autodiff::Graph;
use crate::error::{Error, Result};
use crate::tensor::{Padding, ParamSet, Scalar, Tensor};

/// Filters of the four stride-2 convolutions in a 2D block.
pub const CONV2D_FILTERS: [usize; 4] = [64, 32, 16, 8];
/// Channel count of branch features (last 2D block filter count).
pub const FEATURE_CHANNELS: usize = 8;
/// Filters of both 3D convolutions.
pub const CONV3D_FILTERS: usize = 3;
/// Temporal down-sampling of the 3D block (stride 5, twice).
pub const TEMPORAL_REDUCTION: usize = 25;

/// Initial bias of the motion gate, so a fresh module passes roughly its
/// input through instead of squaring small activations.
pub const GATE_BIAS_INIT: f64 = 1.0;

/// Initial bias of the 3D convolutions. Their inputs are non-negative with
/// mean near 0.5 and each layer has only three units; with a small bias the
/// first few optimizer steps can push all three below zero for every sample.
pub const CONV3D_BIAS_INIT: f64 = 0.5;

const CONV2D_STRIDE: (usize, usize) = (2, 2);
const CONV3D_STRIDES: [(usize, usize, usize); 2] = [(5, 2, 2), (5, 1, 1)];

/// Parameters bound into a graph, keyed by full name.
pub type Bound<V> = IndexMap<String, V>;

/// One layer's trainable tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T = f32> {
    pub name: String,
    pub weight: Tensor<T>,
    pub bias: Option<Tensor<T>>,
}

impl<T: Scalar> LayerParams<T> {
    /// He-uniform weight, zero bias.
    pub fn init(name: impl Into<String>, weight_shape: &[usize], fan_in: usize, rng: &mut impl Rng) -> Result<Self> {
        let cout = *weight_shape.last().unwrap();
        Ok(Self {
            name: name.into(),
            weight: he_uniform(weight_shape, fan_in, rng)?,
            bias: Some(Tensor::zeros(&[cout])?),
        })
    }

    pub fn insert_into(self, params: &mut ParamSet<T>) {
        params.insert(format!("{}.weight", self.name), self.weight);
        if let Some(b) = self.bias {
            params.insert(format!("{}.bias", self.name), b);
        }
    }
}

/// Uniform in `±sqrt(6 / fan_in)`.
pub fn he_uniform<T: Scalar>(shape: &[usize], fan_in: usize, rng: &mut impl Rng) -> Result<Tensor<T>> {
    let limit = (6.0 / fan_in as f64).sqrt();
    Tensor::uniform(shape, -limit, limit, rng)
}

fn lookup<'a, V>(p: &'a Bound<V>, name: &str) -> Result<&'a V> {
    p.get(name)
        .ok_or_else(|| Error::Config(format!("missing parameter {name}")))
}

fn layer<'a, V>(p: &'a Bound<V>, name: &str) -> Result<(&'a V, &'a V)> {
    Ok((
        lookup(p, &format!("{name}.weight"))?,
        lookup(p, &format!("{name}.bias"))?,
    ))
}

/// Four stride-2 3×3 convolutions, each followed by ReLU:
/// `[N,H,W,C] -> [N,H/16,W/16,8]`.
pub fn conv2d_block<T: Scalar, G: Graph<T>>(
    g: &mut G,
    p: &Bound<G::Value>,
    prefix: &str,
    x: &G::Value,
) -> Result<G::Value> {
    let shape = g.shape(x);
    if shape.len() != 4 || shape[1] % 16 != 0 || shape[2] % 16 != 0 {
        return Err(Error::Config(format!(
            "2D block input must be [N,H,W,C] with H and W divisible by 16, got {shape:?}"
        )));
    }
    let mut h = x.clone();
    for l in 0..CONV2D_FILTERS.len() {
        let (w, b) = layer(p, &format!("{prefix}.{l}"))?;
        let c = g.conv2d(&h, w, b, CONV2D_STRIDE, Padding::Same)?;
        h = g.relu(&c);
    }
    Ok(h)
}

pub(crate) fn conv2d_block_layers<T: Scalar>(
    prefix: &str,
    channels: usize,
    rng: &mut impl Rng,
) -> Result<Vec<LayerParams<T>>> {
    let mut cin = channels;
    let mut layers = Vec::new();
    for (l, &f) in CONV2D_FILTERS.iter().enumerate() {
        layers.push(LayerParams::init(format!("{prefix}.{l}"), &[3, 3, cin, f], 9 * cin, rng)?);
        cin = f;
    }
    Ok(layers)
}

/// Temporal-difference attention gate.
///
/// `Φ = conv(x)`, `Δ = Φ - roll(Φ)`, `E = Φ + attention(Δ)`,
/// `out = x ⊙ relu(conv(E))`. With `gating` off the module is the
/// identity (ablation control).
pub fn motion_aware<T: Scalar, G: Graph<T>>(
    g: &mut G,
    p: &Bound<G::Value>,
    prefix: &str,
    x: &G::Value,
    gating: bool,
) -> Result<G::Value> {
    let (w, b) = layer(p, &format!("{prefix}.phi"))?;
    let channels = g.shape(w)[2];
    let shape = g.shape(x);
    if shape.len() != 4 || shape[3] != channels {
        return Err(Error::Config(format!(
            "motion-aware input must be [N,h,w,{channels}], got {shape:?}"
        )));
    }
    if !gating {
        return Ok(x.clone());
    }
    let phi = g.conv2d(x, w, b, (1, 1), Padding::Same)?;
    let next = g.roll_forward(&phi);
    let delta = g.sub(&phi, &next)?;
    let attended = attention(g, &delta)?;
    let enhanced = g.add(&phi, &attended)?;
    let (w, b) = layer(p, &format!("{prefix}.gate"))?;
    let gate = g.conv2d(&enhanced, w, b, (1, 1), Padding::Same)?;
    let gate = g.relu(&gate);
    g.mul(x, &gate)
}

pub fn motion_aware_layers<T: Scalar>(prefix: &str, c: usize, rng: &mut impl Rng) -> Result<Vec<LayerParams<T>>> {
    let phi = LayerParams::init(format!("{prefix}.phi"), &[3, 3, c, c], 9 * c, rng)?;
    let mut gate = LayerParams::init(format!("{prefix}.gate"), &[3, 3, c, c], 9 * c, rng)?;
    gate.bias = Some(Tensor::full(&[c], T::of(GATE_BIAS_INIT))?);
    Ok(vec![phi, gate])
}

/// Two 3×3×3 convolutions with strides (5,2,2) and (5,1,1), each followed
/// by ReLU: `[N,h,w,8] -> [N/25, ceil(h/2), ceil(w/2), 3]`.
pub fn conv3d_block<T: Scalar, G: Graph<T>>(
    g: &mut G,
    p: &Bound<G::Value>,
    prefix: &str,
    x: &G::Value,
) -> Result<G::Value> {
    let shape = g.shape(x);
    if shape.len() != 4 || shape[0] % TEMPORAL_REDUCTION != 0 {
        return Err(Error::Config(format!(
            "3D block needs a frame count divisible by {TEMPORAL_REDUCTION}, got {shape:?}"
        )));
    }
    let mut h = x.clone();
    for (l, &stride) in CONV3D_STRIDES.iter().enumerate() {
        let (w, b) = layer(p, &format!("{prefix}.{l}"))?;
        let c = g.conv3d(&h, w, b, stride, Padding::Same)?;
        h = g.relu(&c);
    }
    Ok(h)
}

pub(crate) fn conv3d_block_layers<T: Scalar>(prefix: &str, rng: &mut impl Rng) -> Result<Vec<LayerParams<T>>> {
    let mut cin = FEATURE_CHANNELS;
    let mut layers = Vec::new();
    for l in 0..CONV3D_STRIDES.len() {
        let f = CONV3D_FILTERS;
        let mut layer = LayerParams::init(format!("{prefix}.{l}"), &[3, 3, 3, cin, f], 27 * cin, rng)?;
        layer.bias = Some(Tensor::full(&[f], T::of(CONV3D_BIAS_INIT))?);
        layers.push(layer);
        cin = f;
    }
    Ok(layers)
}

/// `[B, F] -> [B, 2]` class probabilities through one ReLU hidden layer.
pub fn dense_head<T: Scalar, G: Graph<T>>(
    g: &mut G,
    p: &Bound<G::Value>,
    prefix: &str,
    flat: &G::Value,
) -> Result<G::Value> {
    let (w1, b1) = layer(p, &format!("{prefix}.hidden"))?;
    let (w2, b2) = layer(p, &format!("{prefix}.out"))?;
    let width = g.shape(w1)[0];
    let shape = g.shape(flat);
    if shape.len() != 2 || shape[1] != width {
        return Err(Error::shape(
            "dense_head",
            format!("input {shape:?}, head expects [B, {width}]"),
        ));
    }
    let h = g.matmul(flat, w1)?;
    let h = g.bias_add(&h, b1)?;
    let h = g.relu(&h);
    let logits = g.matmul(&h, w2)?;
    let logits = g.bias_add(&logits, b2)?;
    g.softmax(&logits, 1)
}

pub(crate) fn dense_head_layers<T: Scalar>(
    prefix: &str,
    width: usize,
    hidden: usize,
    classes: usize,
    rng: &mut impl Rng,
) -> Result<Vec<LayerParams<T>>> {
    Ok(vec![
        LayerParams::init(format!("{prefix}.hidden"), &[width, hidden], width, rng)?,
        LayerParams::init(format!("{prefix}.out"), &[hidden, classes], hidden, rng)?,
    ])
}
