//! Seeded synthetic cohort with a unilateral motion deficit.
//!
//! Every view shows two bright blobs, one per half of the frame, bobbing
//! vertically. Negative subjects move both blobs as mirror images. Positive
//! subjects have one side (the same in all four views) attenuated to between
//! static and 15% of the healthy amplitude. Views differ in blob size,
//! tint, frequency, and height; subjects differ in amplitude, phase,
//! brightness, and noise.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NUM_VIEWS;

use super::manifest::{DatasetInfo, Label, Manifest, Side, VideoSample};
use super::video::{write_video, Video};

pub const VIEWS_DIR: &str = "views";
const CHANNELS: usize = 3;
const VIEW_TINTS: [[f64; CHANNELS]; 4] = [[1.0, 0.85, 0.7], [0.7, 1.0, 0.85], [0.85, 0.7, 1.0], [1.0, 1.0, 0.8]];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_pos: usize,
    pub n_neg: usize,
    /// Stored frames per view.
    pub frames: usize,
    /// Square frame side.
    pub hw: usize,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_pos == 0 || self.n_neg == 0 {
            return Err(Error::Config(format!(
                "need at least one subject per class, got {} positive and {} negative",
                self.n_pos, self.n_neg
            )));
        }
        if self.frames < 2 {
            return Err(Error::Config(format!("need at least 2 frames per view, got {}", self.frames)));
        }
        if self.hw < 8 {
            return Err(Error::Config(format!("frame side must be at least 8, got {}", self.hw)));
        }
        Ok(())
    }
}

struct Blob {
    x: f64,
    y: f64,
    amplitude: f64,
}

/// Renders one view of one subject.
fn render_view(cfg: &SynthConfig, rng: &mut ChaCha8Rng, view: usize, gains: [f64; 2], subject: &SubjectTraits) -> Video {
    let hw = cfg.hw as f64;
    let radius = hw * (0.12 + 0.01 * view as f64) * rng.gen_range(0.95..1.05);
    let tint = VIEW_TINTS[view % VIEW_TINTS.len()].map(|c| c * rng.gen_range(0.95..1.05));
    let cycles = rng.gen_range(2.0..3.0) + 0.25 * view as f64;
    let cy = hw * rng.gen_range(0.45..0.55);
    let phase = subject.phase + rng.gen_range(-0.3..0.3);
    let amplitude = hw * 0.25 * subject.amplitude;

    let mut data = Vec::with_capacity(cfg.frames * cfg.hw * cfg.hw * CHANNELS);
    for t in 0..cfg.frames {
        let s = (TAU * cycles * t as f64 / cfg.frames as f64 + phase).sin();
        let blobs = [0.25, 0.75].map(|fx| Blob {
            x: hw * fx,
            y: cy,
            amplitude,
        });
        let centers: Vec<(f64, f64)> = blobs
            .iter()
            .zip(gains)
            .map(|(b, g)| (b.x, b.y + b.amplitude * g * s))
            .collect();
        for y in 0..cfg.hw {
            for x in 0..cfg.hw {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let glow: f64 = centers
                    .iter()
                    .map(|&(bx, by)| (-((px - bx).powi(2) + (py - by).powi(2)) / (2.0 * radius * radius)).exp())
                    .sum();
                for &tc in &tint {
                    let noise = rng.gen_range(-1.0..1.0) * subject.noise;
                    let v = subject.background + 0.8 * tc * glow + noise;
                    data.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
                }
            }
        }
    }
    Video::new(cfg.frames, cfg.hw, cfg.hw, CHANNELS, data).expect("rendered dimensions are consistent")
}

struct SubjectTraits {
    amplitude: f64,
    phase: f64,
    background: f64,
    noise: f64,
}

/// Writes `manifest.jsonl`, `dataset.json`, and one view file per subject
/// and view under `dir`. Identical configs produce identical bytes.
pub fn generate_synthetic_cohort(dir: impl AsRef<Path>, cfg: &SynthConfig) -> Result<Manifest> {
    cfg.validate()?;
    let dir = dir.as_ref();
    let views_dir = dir.join(VIEWS_DIR);
    fs::create_dir_all(&views_dir).map_err(|e| Error::io(&views_dir, e))?;

    let total = cfg.n_pos + cfg.n_neg;
    let mut samples = Vec::with_capacity(total);
    for i in 0..total {
        let label = if i < cfg.n_pos { Label::Positive } else { Label::Negative };
        let subject_id = format!("subject-{i:03}");
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64 + 1);

        let traits = SubjectTraits {
            amplitude: rng.gen_range(0.85..1.15),
            phase: rng.gen_range(0.0..TAU),
            background: 0.15 + rng.gen_range(-0.05..0.05),
            noise: rng.gen_range(0.01..0.04),
        };
        let (gains, deficit_side) = match label {
            Label::Negative => ([1.0, 1.0], None),
            Label::Positive => {
                let weak = rng.gen_range(0.0..0.15);
                if rng.gen_bool(0.5) {
                    ([weak, 1.0], Some(Side::Left))
                } else {
                    ([1.0, weak], Some(Side::Right))
                }
            }
        };

        let mut views = Vec::with_capacity(NUM_VIEWS);
        for v in 0..NUM_VIEWS {
            let video = render_view(cfg, &mut rng, v, gains, &traits);
            let rel = PathBuf::from(VIEWS_DIR).join(format!("{subject_id}_v{v}.mvid"));
            write_video(&video, dir.join(&rel))?;
            views.push(rel);
        }
        samples.push(VideoSample {
            subject_id,
            label,
            views,
            frame_counts: vec![cfg.frames; NUM_VIEWS],
            subtype: None,
            deficit_side,
        });
    }

    let manifest = Manifest::new(
        DatasetInfo {
            name: "synthetic-unilateral-motion".into(),
            resolution: [cfg.hw, cfg.hw],
            seed: cfg.seed,
        },
        samples,
    )?;
    manifest.save(dir)?;
    Ok(manifest)
}

/// Mean absolute frame-to-frame change in the left and right halves of a
/// video.
pub fn side_motion_energy(video: &Video) -> (f64, f64) {
    let (h, w, c) = (video.height, video.width, video.channels);
    let frame_len = h * w * c;
    let mut sums = [0.0f64; 2];
    let mut counts = [0usize; 2];
    for t in 1..video.frames {
        let prev = &video.data[(t - 1) * frame_len..][..frame_len];
        let cur = &video.data[t * frame_len..][..frame_len];
        for y in 0..h {
            for x in 0..w {
                if 2 * x + 1 == w {
                    continue;
                }
                let side = usize::from(2 * x >= w);
                for ch in 0..c {
                    let i = (y * w + x) * c + ch;
                    sums[side] += (f64::from(cur[i]) - f64::from(prev[i])).abs();
                    counts[side] += 1;
                }
            }
        }
    }
    (sums[0] / counts[0].max(1) as f64, sums[1] / counts[1].max(1) as f64)
}
