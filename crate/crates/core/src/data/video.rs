//! `MVID` view files: one 8-bit frame sequence per file.
//!
//! ```text
//! "MVID" | version: u32 | N: u32 | H: u32 | W: u32 | C: u32 | N·H·W·C bytes
//! ```
//! Integers are little-endian; pixels are row-major, channel-last.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const VIDEO_MAGIC: &[u8; 4] = b"MVID";
pub const VIDEO_VERSION: u32 = 1;
const HEADER_LEN: usize = 24;

/// A decoded view: `frames × height × width × channels` bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Video {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl Video {
    pub fn new(frames: usize, height: usize, width: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if frames == 0 || height == 0 || width == 0 || channels == 0 {
            return Err(Error::Data(format!(
                "video dimensions must be positive, got {frames}×{height}×{width}×{channels}"
            )));
        }
        let want = frames * height * width * channels;
        if data.len() != want {
            return Err(Error::Data(format!("video has {} bytes, dimensions need {want}", data.len())));
        }
        Ok(Self {
            frames,
            height,
            width,
            channels,
            data,
        })
    }

    /// Pixels scaled to `[0, 1]`, shape `[N,H,W,C]`.
    pub fn to_tensor(&self) -> Tensor {
        let data = self.data.iter().map(|&b| f32::from(b) / 255.0).collect();
        Tensor::from_parts(vec![self.frames, self.height, self.width, self.channels], data)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(HEADER_LEN + self.data.len());
        buf.extend_from_slice(VIDEO_MAGIC);
        for v in [VIDEO_VERSION, self.frames as u32, self.height as u32, self.width as u32, self.channels as u32] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&self.data);
        buf
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let corrupt = |detail: String| Error::Corrupt {
            path: path.to_path_buf(),
            detail,
        };
        if bytes.len() < HEADER_LEN {
            return Err(corrupt(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if &bytes[..4] != VIDEO_MAGIC {
            return Err(corrupt("bad magic bytes".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
        if word(0) != VIDEO_VERSION {
            return Err(Error::Version {
                path: path.to_path_buf(),
                found: word(0),
                expected: VIDEO_VERSION,
            });
        }
        let dims = [word(1), word(2), word(3), word(4)].map(|d| d as usize);
        let want = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| corrupt("dimensions overflow".into()))?;
        let body = &bytes[HEADER_LEN..];
        if body.len() != want {
            return Err(corrupt(format!("header declares {want} pixel bytes, file has {}", body.len())));
        }
        Self::new(dims[0], dims[1], dims[2], dims[3], body.to_vec()).map_err(|e| corrupt(e.to_string()))
    }
}

pub fn write_video(video: &Video, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, video.encode()).map_err(|e| Error::io(path, e))
}

pub fn read_video(path: impl AsRef<Path>) -> Result<Video> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Video::decode(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let v = Video::new(2, 3, 4, 3, (0..72).collect()).unwrap();
        assert_eq!(Video::decode(&v.encode(), Path::new("v")).unwrap(), v);
        let t = v.to_tensor();
        assert_eq!(t.shape(), &[2, 3, 4, 3]);
        assert_eq!(t.data()[71], 71.0 / 255.0);
    }

    #[test]
    fn rejects_damage() {
        let bytes = Video::new(1, 2, 2, 3, vec![9; 12]).unwrap().encode();
        for cut in [0, 10, bytes.len() - 1] {
            assert!(matches!(Video::decode(&bytes[..cut], Path::new("v")), Err(Error::Corrupt { .. })));
        }
        let mut bad = bytes.clone();
        bad[4] = 7;
        assert!(matches!(Video::decode(&bad, Path::new("v")), Err(Error::Version { found: 7, .. })));
        assert!(Video::new(0, 2, 2, 3, vec![]).is_err());
    }
}
