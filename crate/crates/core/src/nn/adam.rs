use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{ParamSet, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam with per-parameter first and second moments.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub m: ParamSet,
    pub v: ParamSet,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &ParamSet) -> Self {
        let zeros: ParamSet = params
            .iter()
            .map(|(k, t)| (k.clone(), t.map(|_| 0.0)))
            .collect();
        Self {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &ParamSet) -> Result<()> {
        for (name, p) in params.iter() {
            let g = grads
                .get(name)
                .ok_or_else(|| Error::Config(format!("no gradient for parameter {name}")))?;
            let m = self
                .m
                .get(name)
                .ok_or_else(|| Error::Config(format!("no optimizer state for {name}")))?;
            if g.shape() != p.shape() || m.shape() != p.shape() {
                return Err(Error::shape(
                    "adam_step",
                    format!("{name}: parameter {:?}, gradient {:?}", p.shape(), g.shape()),
                ));
            }
        }

        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let (b1, b2) = (beta1 as f32, beta2 as f32);

        for (name, p) in params.iter_mut() {
            let g: &Tensor = &grads[name];
            let m = self.m.get_mut(name).unwrap().data_mut();
            let v = self.v.get_mut(name).unwrap().data_mut();
            for (((w, &gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
                *mi = b1 * *mi + (1.0 - b1) * gi;
                *vi = b2 * *vi + (1.0 - b2) * gi * gi;
                let m_hat = *mi as f64 / c1;
                let v_hat = *vi as f64 / c2;
                *w = (*w as f64 - lr * m_hat / (v_hat.sqrt() + eps)) as f32;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(v: f32) -> ParamSet {
        [("w".to_string(), Tensor::scalar(v))].into_iter().collect()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = single(1.5);
        let mut adam = AdamState::new(AdamConfig { lr: 0.1, ..Default::default() }, &p);
        for _ in 0..5 {
            adam.step(&mut p, &single(0.0)).unwrap();
        }
        assert_eq!(p["w"].data()[0], 1.5);
        assert_eq!(adam.step, 5);
    }

    #[test]
    fn first_step_by_hand() {
        // m = 0.1, v = 0.001; m_hat = 1, v_hat = 1; w = 1 - 0.1 / (1 + 1e-8)
        let expected = 1.0 - 0.1 / (1.0 + 1e-8);
        let mut p = single(1.0);
        let mut adam = AdamState::new(AdamConfig { lr: 0.1, ..Default::default() }, &p);
        adam.step(&mut p, &single(1.0)).unwrap();
        assert!((p["w"].data()[0] as f64 - expected).abs() < 1e-6);
    }

    #[test]
    fn descends_quadratic() {
        let mut p = single(1.0);
        let mut adam = AdamState::new(AdamConfig { lr: 0.1, ..Default::default() }, &p);
        for _ in 0..100 {
            let w = p["w"].data()[0];
            adam.step(&mut p, &single(2.0 * w)).unwrap();
        }
        assert!(p["w"].data()[0].abs() < 0.5);
        assert!(adam.v["w"].data()[0] >= 0.0);
    }

    #[test]
    fn shape_mismatch_is_error() {
        let mut p = single(1.0);
        let mut adam = AdamState::new(AdamConfig::default(), &p);
        let bad: ParamSet = [("w".to_string(), Tensor::zeros(&[2]).unwrap())].into_iter().collect();
        assert!(adam.step(&mut p, &bad).is_err());
        assert_eq!(adam.step, 0);
    }
}
