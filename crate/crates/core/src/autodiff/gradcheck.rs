//! Central-difference verification of analytic gradients.
//!
//! The analytic side runs at working precision (`f32`) on the tape; the
//! numeric side re-evaluates the loss in `f64` at `θ ± ε` for a sample of
//! coordinates.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::{ParamSet, Tensor};

#[derive(Debug, Clone)]
pub struct GradcheckConfig {
    pub eps: f64,
    pub tolerance: f64,
    /// Number of coordinates to sample.
    pub samples: usize,
    pub seed: u64,
    /// Lower bound on the relative-error denominator, so coordinates with
    /// a vanishing gradient are compared in absolute terms.
    pub abs_floor: f64,
    /// Draw the first coordinate from this parameter.
    pub include: Option<String>,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            eps: 1e-3,
            tolerance: 1e-2,
            samples: 10,
            seed: 0,
            abs_floor: 1e-5,
            include: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoordCheck {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckReport {
    pub checks: Vec<CoordCheck>,
    pub max_rel_err: f64,
    /// Parameter holding the worst coordinate.
    pub worst: Option<String>,
    pub tolerance: f64,
    /// Coordinates with a kink within `±eps`.
    pub skipped: Vec<SkippedCoord>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SkippedCoord {
    pub param: String,
    pub index: usize,
}

impl GradcheckReport {
    pub fn failing(&self) -> impl Iterator<Item = &CoordCheck> {
        self.checks.iter().filter(move |c| c.rel_err > self.tolerance)
    }
}

/// Give up after this many draws per requested coordinate.
const MAX_DRAWS_PER_SAMPLE: usize = 10;

/// Smallest one-sided slope disagreement treated as a kink. Curvature alone
/// separates the slopes by `f''·eps`, which must not count.
const KINK_FLOOR: f64 = 1e-2;

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(floor);
    (analytic - numeric).abs() / denom
}

/// Draws distinct coordinates, the first from `cfg.include` when set.
struct Sampler {
    rng: ChaCha8Rng,
    include: Option<usize>,
    seen: HashSet<(usize, usize)>,
    total: usize,
}

impl Sampler {
    fn new(params: &ParamSet, cfg: &GradcheckConfig) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            include: cfg.include.as_deref().and_then(|name| params.get_index_of(name)),
            seen: HashSet::new(),
            total: params.values().map(Tensor::len).sum(),
        }
    }

    /// While `want_included`, coordinates come from the included parameter
    /// until it runs out.
    fn next(&mut self, params: &ParamSet, want_included: bool) -> Option<(usize, usize)> {
        if self.seen.len() >= self.total {
            return None;
        }
        let forced = self.include.filter(|&p| {
            want_included && self.seen.iter().filter(|c| c.0 == p).count() < params[p].len()
        });
        loop {
            let p = forced.unwrap_or_else(|| self.rng.gen_range(0..params.len()));
            let i = self.rng.gen_range(0..params[p].len());
            if self.seen.insert((p, i)) {
                return Some((p, i));
            }
        }
    }
}

/// Compares `analytic` (the gradient of the loss at `params`) against
/// central differences of `loss64` on sampled coordinates.
///
/// A coordinate whose one-sided differences disagree by more than the
/// tolerance (at least `KINK_FLOOR`) has a kink within `±eps`, where the central difference is not
/// a derivative; it is recorded as skipped and another is drawn. The
/// report passes only if `cfg.samples` coordinates were checked.
pub fn gradcheck(
    params: &ParamSet,
    analytic: &ParamSet,
    mut loss64: impl FnMut(&ParamSet<f64>) -> Result<f64>,
    cfg: &GradcheckConfig,
) -> Result<GradcheckReport> {
    for (name, t) in params {
        let g = analytic
            .get(name)
            .ok_or_else(|| Error::Config(format!("no analytic gradient for parameter {name}")))?;
        if g.shape() != t.shape() {
            return Err(Error::shape(
                "gradcheck",
                format!("gradient of {name} has shape {:?}, parameter {:?}", g.shape(), t.shape()),
            ));
        }
        if !g.all_finite() {
            return Err(Error::NonFinite(format!("analytic gradient of {name}")));
        }
        if !t.all_finite() {
            return Err(Error::NonFinite(format!("parameter {name}")));
        }
    }

    let mut wide: ParamSet<f64> = params.iter().map(|(k, v)| (k.clone(), v.cast())).collect();
    let center = loss64(&wide)?;
    if !center.is_finite() {
        return Err(Error::NonFinite("loss at the unperturbed parameters".into()));
    }
    let mut sampler = Sampler::new(params, cfg);
    let max_draws = cfg.samples.saturating_mul(MAX_DRAWS_PER_SAMPLE);
    let mut checks = Vec::new();
    let mut skipped = Vec::new();
    let mut draws = 0;
    while checks.len() < cfg.samples && draws < max_draws {
        let Some((p, i)) = sampler.next(params, checks.is_empty()) else {
            break;
        };
        draws += 1;
        let name = params.get_index(p).unwrap().0.clone();
        let orig = wide[p].data()[i];
        wide[p].data_mut()[i] = orig + cfg.eps;
        let plus = loss64(&wide)?;
        wide[p].data_mut()[i] = orig - cfg.eps;
        let minus = loss64(&wide)?;
        wide[p].data_mut()[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!("loss while perturbing {name}[{i}]")));
        }
        let right = (plus - center) / cfg.eps;
        let left = (center - minus) / cfg.eps;
        if relative_error(right, left, cfg.abs_floor) > cfg.tolerance.max(KINK_FLOOR) {
            skipped.push(SkippedCoord { param: name, index: i });
            continue;
        }
        let numeric = (plus - minus) / (2.0 * cfg.eps);
        let a = analytic[&name].data()[i] as f64;
        checks.push(CoordCheck {
            rel_err: relative_error(a, numeric, cfg.abs_floor),
            param: name,
            index: i,
            analytic: a,
            numeric,
        });
    }

    let worst = checks
        .iter()
        .max_by(|a, b| a.rel_err.total_cmp(&b.rel_err));
    let max_rel_err = worst.map_or(0.0, |c| c.rel_err);
    let wanted = cfg.samples.min(sampler.total);
    Ok(GradcheckReport {
        worst: worst.map(|c| c.param.clone()),
        pass: max_rel_err <= cfg.tolerance && checks.len() >= wanted,
        max_rel_err,
        tolerance: cfg.tolerance,
        checks,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(name: &str, v: f32) -> ParamSet {
        [(name.to_string(), Tensor::scalar(v))].into_iter().collect()
    }

    #[test]
    fn quadratic() {
        let params = single("x", 3.0);
        let grads = single("x", 6.0);
        let cfg = GradcheckConfig {
            samples: 1,
            tolerance: 1e-4,
            ..Default::default()
        };
        let report = gradcheck(&params, &grads, |p| Ok(p["x"].data()[0].powi(2)), &cfg).unwrap();
        assert!(report.pass);
        assert!((report.checks[0].numeric - 6.0).abs() < 1e-4);
    }

    #[test]
    fn wrong_sign_names_parameter() {
        let params = single("weight", 3.0);
        let grads = single("weight", -6.0);
        let cfg = GradcheckConfig {
            samples: 1,
            ..Default::default()
        };
        let report = gradcheck(&params, &grads, |p| Ok(p["weight"].data()[0].powi(2)), &cfg).unwrap();
        assert!(!report.pass);
        assert_eq!(report.worst.as_deref(), Some("weight"));
    }

    #[test]
    fn non_finite_is_an_error() {
        let params = single("w", 0.0);
        let grads = single("w", f32::NAN);
        let err = gradcheck(&params, &grads, |_| Ok(0.0), &GradcheckConfig::default()).unwrap_err();
        assert!(err.to_string().contains('w'));

        let grads = single("w", 1.0);
        let err = gradcheck(&params, &grads, |_| Ok(f64::INFINITY), &GradcheckConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn kinks_are_skipped_not_checked() {
        // |x| at 1e-4 has slope 1, but a central difference at eps 1e-3
        // sees 0.1.
        let params: ParamSet = [
            ("kink".to_string(), Tensor::scalar(1e-4)),
            ("smooth".to_string(), Tensor::scalar(2.0)),
        ]
        .into_iter()
        .collect();
        let grads: ParamSet = [
            ("kink".to_string(), Tensor::scalar(1.0)),
            ("smooth".to_string(), Tensor::scalar(4.0)),
        ]
        .into_iter()
        .collect();
        let f = |p: &ParamSet<f64>| Ok(p["kink"].data()[0].abs() + p["smooth"].data()[0].powi(2));
        let cfg = GradcheckConfig {
            samples: 1,
            include: Some("kink".into()),
            ..Default::default()
        };
        let report = gradcheck(&params, &grads, f, &cfg).unwrap();
        assert_eq!(report.skipped.len(), 1);
        assert_eq!(report.skipped[0].param, "kink");
        assert_eq!(report.checks.len(), 1);
        assert_eq!(report.checks[0].param, "smooth");
        assert!(report.pass);

        // Nothing smooth left to check: not a pass.
        let only: ParamSet = [("kink".to_string(), Tensor::scalar(1e-4))].into_iter().collect();
        let g: ParamSet = [("kink".to_string(), Tensor::scalar(1.0))].into_iter().collect();
        let report = gradcheck(&only, &g, |p| Ok(p["kink"].data()[0].abs()), &cfg).unwrap();
        assert!(report.checks.is_empty());
        assert!(!report.pass);
    }
}
