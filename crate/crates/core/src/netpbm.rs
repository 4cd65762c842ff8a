//! Binary netpbm images: P6 (RGB) and P5 (gray), 8-bit only.
//!
//! Writers always emit the canonical header `P6\n<w> <h>\n255\n`, so any file
//! produced here reloads and re-encodes to identical bytes.

use std::path::Path;

use crate::error::{Error, Result};
use crate::format::{read_file, write_file};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image8 {
    pub width: usize,
    pub height: usize,
    /// 1 for PGM, 3 for PPM.
    pub channels: usize,
    pub data: Vec<u8>,
}

impl Image8 {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Parameter(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::Dimension(format!(
                "{width}x{height}x{channels} image needs {} bytes, got {}",
                width * height * channels,
                data.len()
            )));
        }
        Ok(Image8 {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let magic = if self.channels == 3 { "P6" } else { "P5" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let kind = "netpbm";
        if bytes.len() < 2 {
            return Err(Error::format(kind, "truncated header"));
        }
        let channels = match &bytes[..2] {
            b"P6" => 3,
            b"P5" => 1,
            other => {
                return Err(Error::format(
                    kind,
                    format!("bad magic {:?}", String::from_utf8_lossy(other)),
                ))
            }
        };
        let mut pos = 2;
        let mut fields = [0usize; 3];
        for field in fields.iter_mut() {
            // whitespace and comment lines between header tokens
            loop {
                match bytes.get(pos) {
                    Some(b) if b.is_ascii_whitespace() => pos += 1,
                    Some(b'#') => {
                        while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                            pos += 1;
                        }
                    }
                    Some(_) => break,
                    None => return Err(Error::format(kind, "truncated header")),
                }
            }
            let start = pos;
            while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
                pos += 1;
            }
            if start == pos {
                return Err(Error::format(kind, "expected a decimal header field"));
            }
            *field = std::str::from_utf8(&bytes[start..pos])
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::format(kind, "header field out of range"))?;
        }
        let [width, height, maxval] = fields;
        if maxval != 255 {
            return Err(Error::format(kind, format!("only maxval 255 is supported, got {maxval}")));
        }
        if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
            return Err(Error::format(kind, "missing whitespace after maxval"));
        }
        pos += 1;
        let need = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Error::format(kind, "image too large"))?;
        let raster = &bytes[pos..];
        if raster.len() != need {
            return Err(Error::format(
                kind,
                format!("raster has {} bytes, expected {need}", raster.len()),
            ));
        }
        Image8::new(width, height, channels, raster.to_vec())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path, &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }
}

/// Quantizes a value in [0, 1] to a byte.
pub fn quantize_unit(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
