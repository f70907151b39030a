//! Frame selection, resizing, and loading a subject's views as tensors.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::manifest::VideoSample;
use super::video::read_video;

/// Source indices `floor(i·T/N)` for `i` in `0..N`. Short videos repeat
/// frames.
pub fn sample_indices(t: usize, n: usize) -> Result<Vec<usize>> {
    if t == 0 {
        return Err(Error::Data("cannot sample frames from an empty video".into()));
    }
    if n == 0 {
        return Err(Error::Config("target frame count must be positive".into()));
    }
    Ok((0..n).map(|i| i * t / n).collect())
}

/// `N` equally spaced frames of a `[T,H,W,C]` sequence.
pub fn sample_frames(video: &Tensor, n: usize) -> Result<Tensor> {
    if video.rank() != 4 {
        return Err(Error::shape("sample_frames", format!("expected [T,H,W,C], got {:?}", video.shape())));
    }
    let idx = sample_indices(video.shape()[0], n)?;
    let frames = idx.iter().map(|&i| video.frame(i)).collect::<Result<Vec<_>>>()?;
    Tensor::stack(&frames)
}

/// One source axis of a bilinear resize: lower index, upper index, upper
/// weight, for each output position (half-pixel centres).
fn axis_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let x = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
            let lo = (x.floor() as usize).min(src - 1);
            let hi = (lo + 1).min(src - 1);
            (lo, hi, x - lo as f64)
        })
        .collect()
}

/// Bilinear resize of an `[H,W,C]` frame with half-pixel sampling
/// (align-corners off).
pub fn resize_bilinear(frame: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let &[h, w, c] = frame.shape() else {
        return Err(Error::shape("resize_bilinear", format!("expected [H,W,C], got {:?}", frame.shape())));
    };
    if out_h == 0 || out_w == 0 {
        return Err(Error::shape("resize_bilinear", "output size must be positive"));
    }
    if (h, w) == (out_h, out_w) {
        return Ok(frame.clone());
    }
    let ys = axis_taps(h, out_h);
    let xs = axis_taps(w, out_w);
    let src = frame.data();
    let at = |y: usize, x: usize, ch: usize| f64::from(src[(y * w + x) * c + ch]);
    let mut out = Vec::with_capacity(out_h * out_w * c);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for ch in 0..c {
                let top = at(y0, x0, ch) * (1.0 - fx) + at(y0, x1, ch) * fx;
                let bottom = at(y1, x0, ch) * (1.0 - fx) + at(y1, x1, ch) * fx;
                out.push((top * (1.0 - fy) + bottom * fy) as f32);
            }
        }
    }
    Tensor::new(vec![out_h, out_w, c], out)
}

/// Resizes every frame of a `[N,H,W,C]` sequence.
pub fn resize_video(video: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    if video.rank() != 4 {
        return Err(Error::shape("resize_video", format!("expected [N,H,W,C], got {:?}", video.shape())));
    }
    if video.shape()[1..3] == [out_h, out_w] {
        return Ok(video.clone());
    }
    let frames = (0..video.shape()[0])
        .map(|i| resize_bilinear(&video.frame(i)?, out_h, out_w))
        .collect::<Result<Vec<_>>>()?;
    Tensor::stack(&frames)
}

/// Reads a subject's four views as `[seq_len, hw, hw, C]` tensors scaled to
/// `[0, 1]`.
pub fn load_views(dataset_dir: &Path, sample: &VideoSample, seq_len: usize, hw: usize) -> Result<Vec<Tensor>> {
    sample
        .views
        .iter()
        .map(|rel| {
            let video = read_video(dataset_dir.join(rel))?;
            let frames = sample_frames(&video.to_tensor(), seq_len)?;
            resize_video(&frames, hw, hw)
        })
        .collect()
}
