//! Ready-made gradient checks: a bare attention layer, one motion-aware
//! module, and the full reduced model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};
use crate::model::{bind, forward, ModelConfig, ModelWeights, NUM_CLASSES, NUM_VIEWS};
use crate::nn::{attention, motion_aware, motion_aware_layers, one_hot};
use crate::tensor::{ParamSet, Scalar, Tensor};

use super::{gradcheck, Eager, GradcheckConfig, GradcheckReport, Graph, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradcheckScope {
    /// Attention on a `[2,3,3,4]` input.
    Attention,
    /// Motion-aware module on a `[5,6,6,2]` input.
    Motion,
    /// Full model at 25 frames of 32×32.
    Model,
}

impl GradcheckScope {
    pub fn tolerance(self) -> f64 {
        match self {
            GradcheckScope::Attention => 1e-3,
            GradcheckScope::Motion | GradcheckScope::Model => 1e-2,
        }
    }
}

/// Options for [`run_gradcheck`].
#[derive(Debug, Clone, Default)]
pub struct SuiteOptions {
    pub seed: u64,
    pub samples: Option<usize>,
    /// Test hook: negate the analytic gradient of this parameter, which the
    /// check must then report.
    pub wrong_sign: Option<String>,
}

const SAMPLES: usize = 12;

/// `sum(out ⊙ r)`: a scalar whose gradient is `r` pulled back through the
/// layer.
fn weighted_sum<T: Scalar, G: Graph<T>>(g: &mut G, out: &G::Value, r: &Tensor) -> Result<G::Value> {
    let r = g.constant(r.cast());
    let prod = g.mul(out, &r)?;
    Ok(g.sum(&prod))
}

type LossFn<'a> = Box<dyn FnMut(&ParamSet<f64>) -> Result<f64> + 'a>;

struct Problem<'a> {
    params: ParamSet,
    analytic: ParamSet,
    loss64: LossFn<'a>,
}

fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Result<Tensor> {
    Tensor::uniform(shape, lo, hi, rng)
}

fn attention_problem(rng: &mut ChaCha8Rng) -> Result<Problem<'static>> {
    let x = uniform(&[2, 3, 3, 4], -1.0, 1.0, rng)?;
    let r = uniform(&[2, 3, 3, 4], -1.0, 1.0, rng)?;
    let params: ParamSet = [("x".to_string(), x)].into_iter().collect();

    let mut tape = Tape::new();
    let xv = tape.param("x", &params["x"]);
    let out = attention(&mut tape, &xv)?;
    let loss = weighted_sum(&mut tape, &out, &r)?;
    let analytic = tape.backward(loss)?.param_grads();

    let loss64 = Box::new(move |p: &ParamSet<f64>| {
        let mut g = Eager::<f64>::new();
        let xv = g.param("x", &p["x"]);
        let out = attention(&mut g, &xv)?;
        let loss = weighted_sum(&mut g, &out, &r)?;
        loss.item()
    });
    Ok(Problem { params, analytic, loss64 })
}

fn motion_problem(rng: &mut ChaCha8Rng) -> Result<Problem<'static>> {
    let mut params = ParamSet::new();
    params.insert("x".into(), uniform(&[5, 6, 6, 2], 0.0, 1.0, rng)?);
    for layer in motion_aware_layers("motion", 2, rng)? {
        layer.insert_into(&mut params);
    }
    let r = uniform(&[5, 6, 6, 2], -1.0, 1.0, rng)?;

    let mut tape = Tape::new();
    let bound = bind(&mut tape, &params);
    let out = motion_aware(&mut tape, &bound, "motion", &bound["x"], true)?;
    let loss = weighted_sum(&mut tape, &out, &r)?;
    let analytic = tape.backward(loss)?.param_grads();

    let loss64 = Box::new(move |p: &ParamSet<f64>| {
        let mut g = Eager::<f64>::new();
        let bound = bind(&mut g, p);
        let out = motion_aware(&mut g, &bound, "motion", &bound["x"], true)?;
        let loss = weighted_sum(&mut g, &out, &r)?;
        loss.item()
    });
    Ok(Problem { params, analytic, loss64 })
}

fn model_problem(rng: &mut ChaCha8Rng, seed: u64) -> Result<Problem<'static>> {
    let config = ModelConfig {
        init_seed: seed,
        ..ModelConfig::default()
    };
    let weights = ModelWeights::init(&config)?;
    let shape = [config.seq_len, config.input_hw, config.input_hw, config.channels];
    let views = (0..NUM_VIEWS)
        .map(|_| uniform(&shape, 0.0, 1.0, rng))
        .collect::<Result<Vec<_>>>()?;
    let target: Tensor = one_hot(&[Label::Positive.index()], NUM_CLASSES)?;

    let mut tape = Tape::new();
    let bound = bind(&mut tape, &weights.params);
    let inputs: Vec<_> = views.iter().map(|v| tape.constant(v.clone())).collect();
    let (pred, _) = forward(&mut tape, &config, &bound, &inputs)?;
    let loss = tape.cross_entropy(&pred, &target)?;
    let analytic = tape.backward(loss)?.param_grads();

    let views64: Vec<Tensor<f64>> = views.iter().map(Tensor::cast).collect();
    let target64: Tensor<f64> = target.cast();
    let loss64 = Box::new(move |p: &ParamSet<f64>| {
        let mut g = Eager::<f64>::new();
        let bound = bind(&mut g, p);
        let inputs: Vec<_> = views64.iter().map(|v| g.constant(v.clone())).collect();
        let (pred, _) = forward(&mut g, &config, &bound, &inputs)?;
        g.cross_entropy(&pred, &target64)?.item()
    });
    Ok(Problem {
        params: weights.params,
        analytic,
        loss64,
    })
}

/// Builds the scope's problem from `opts.seed` and compares analytic and
/// central-difference gradients at the scope's tolerance.
pub fn run_gradcheck(scope: GradcheckScope, opts: &SuiteOptions) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut problem = match scope {
        GradcheckScope::Attention => attention_problem(&mut rng)?,
        GradcheckScope::Motion => motion_problem(&mut rng)?,
        GradcheckScope::Model => model_problem(&mut rng, opts.seed)?,
    };
    if let Some(name) = &opts.wrong_sign {
        let g = problem
            .analytic
            .get_mut(name)
            .ok_or_else(|| Error::Config(format!("no parameter named {name:?} in the {scope:?} check")))?;
        *g = g.map(|v| -v);
    }
    let cfg = GradcheckConfig {
        tolerance: scope.tolerance(),
        samples: opts.samples.unwrap_or(SAMPLES),
        seed: opts.seed,
        include: opts.wrong_sign.clone(),
        ..GradcheckConfig::default()
    };
    gradcheck(&problem.params, &problem.analytic, &mut problem.loss64, &cfg)
}
