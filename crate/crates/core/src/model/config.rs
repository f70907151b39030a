use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{CONV3D_FILTERS, TEMPORAL_REDUCTION};

use super::NUM_VIEWS;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Frames per view; a multiple of 25.
    pub seq_len: usize,
    /// Square frame side; a multiple of 16.
    pub input_hw: usize,
    pub channels: usize,
    pub branches: usize,
    pub head_hidden: usize,
    pub init_seed: u64,
    /// When false the motion-aware modules pass their input through.
    pub motion_gating: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            seq_len: 25,
            input_hw: 32,
            channels: 3,
            branches: NUM_VIEWS,
            head_hidden: 64,
            init_seed: 7,
            motion_gating: true,
        }
    }
}

impl ModelConfig {
    /// The full-resolution profile: 75 frames of 224×224.
    pub fn full_resolution() -> Self {
        Self {
            seq_len: 75,
            input_hw: 224,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seq_len == 0 || self.seq_len % TEMPORAL_REDUCTION != 0 {
            return Err(Error::Config(format!(
                "seq_len must be a positive multiple of {TEMPORAL_REDUCTION}, got {}",
                self.seq_len
            )));
        }
        if self.input_hw == 0 || self.input_hw % 16 != 0 {
            return Err(Error::Config(format!(
                "input_hw must be a positive multiple of 16, got {}",
                self.input_hw
            )));
        }
        if self.channels == 0 || self.head_hidden == 0 {
            return Err(Error::Config("channels and head_hidden must be positive".into()));
        }
        if self.branches != NUM_VIEWS {
            return Err(Error::Config(format!(
                "the network has exactly {NUM_VIEWS} branches, got {}",
                self.branches
            )));
        }
        Ok(())
    }

    /// Spatial side of the branch features.
    pub fn feature_hw(&self) -> usize {
        self.input_hw / 16
    }

    /// Shape after the 3D block.
    pub fn psi_shape(&self) -> [usize; 4] {
        let s = self.feature_hw().div_ceil(2);
        [self.seq_len / TEMPORAL_REDUCTION, s, s, CONV3D_FILTERS]
    }

    /// Length of the flattened 3D-block output.
    pub fn head_width(&self) -> usize {
        self.psi_shape().iter().product()
    }

    /// Canonical single-line JSON.
    pub fn to_canonical(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Same architecture, ignoring the initialization seed.
    pub fn same_architecture(&self, other: &Self) -> bool {
        Self {
            init_seed: 0,
            ..self.clone()
        } == Self {
            init_seed: 0,
            ..other.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(ModelConfig::default().validate().is_ok());
        for n in [25, 50, 75] {
            let c = ModelConfig { seq_len: n, ..Default::default() };
            assert!(c.validate().is_ok());
        }
        assert!(ModelConfig { seq_len: 30, ..Default::default() }.validate().is_err());
        assert!(ModelConfig { input_hw: 40, ..Default::default() }.validate().is_err());
        assert!(ModelConfig { branches: 3, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn head_width_matches_flattened_psi() {
        assert_eq!(ModelConfig::full_resolution().psi_shape(), [3, 7, 7, 3]);
        assert_eq!(ModelConfig::full_resolution().head_width(), 441);
        assert_eq!(ModelConfig::default().psi_shape(), [1, 1, 1, 3]);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = serde_json::from_str::<ModelConfig>(r#"{"seq_len": 25, "bogus": 1}"#);
        assert!(err.is_err());
        let ok: ModelConfig = serde_json::from_str(r#"{"seq_len": 50}"#).unwrap();
        assert_eq!(ok.seq_len, 50);
        assert_eq!(ok.input_hw, 32);
    }
}
