//! Saliency maps and the `SALM` tensor file.
//!
//! Layout (all integers little-endian):
//!
//! | bytes  | content                         |
//! |--------|---------------------------------|
//! | 0..4   | ASCII `SALM`                    |
//! | 4..8   | `u32` height                    |
//! | 8..12  | `u32` width                     |
//! | 12..16 | `u32` dtype code (1 = `f32` LE) |
//! | 16..   | `height * width` row-major `f32`|

use std::path::Path;

use super::ModelError;

pub const SALM_MAGIC: &[u8; 4] = b"SALM";
pub const SALM_DTYPE_F32: u32 = 1;
pub const SALM_HEADER_LEN: usize = 16;

/// A real-valued heatmap, row-major.
///
/// `degenerate` is set by [`normalize_saliency`] when the input was constant
/// and carries through upsampling.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    width: u32,
    height: u32,
    values: Vec<f32>,
    degenerate: bool,
}

impl SaliencyMap {
    pub fn new(width: u32, height: u32, values: Vec<f32>) -> Result<Self, ModelError> {
        if width == 0 || height == 0 {
            return Err(ModelError::EmptyMap);
        }
        if (width as u64) * (height as u64) != values.len() as u64 {
            return Err(ModelError::InvalidDimensions {
                width: width as u64,
                height: height as u64,
                reason: "value count is not width*height",
            });
        }
        Ok(Self {
            width,
            height,
            values,
            degenerate: false,
        })
    }

    pub fn from_fn(
        width: u32,
        height: u32,
        mut f: impl FnMut(u32, u32) -> f32,
    ) -> Result<Self, ModelError> {
        let mut values = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    /// True when normalization found a constant map.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    fn check_finite(&self) -> Result<(), ModelError> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(ModelError::NonFiniteValue(i)),
            None => Ok(()),
        }
    }

    fn range(&self) -> (f32, f32) {
        self.values
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

pub fn encode_salm(map: &SaliencyMap) -> Result<Vec<u8>, ModelError> {
    map.check_finite()?;
    let mut out = Vec::with_capacity(SALM_HEADER_LEN + map.values.len() * 4);
    out.extend_from_slice(SALM_MAGIC);
    out.extend_from_slice(&map.height.to_le_bytes());
    out.extend_from_slice(&map.width.to_le_bytes());
    out.extend_from_slice(&SALM_DTYPE_F32.to_le_bytes());
    for v in &map.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Parses a `SALM` buffer. Never allocates more than the input length implies.
pub fn decode_salm(bytes: &[u8]) -> Result<SaliencyMap, ModelError> {
    if bytes.len() < 4 || &bytes[..4] != SALM_MAGIC {
        return Err(if bytes.len() < 4 && SALM_MAGIC.starts_with(bytes) {
            ModelError::TruncatedFile {
                expected: SALM_HEADER_LEN,
                found: bytes.len(),
            }
        } else {
            ModelError::BadMagic
        });
    }
    if bytes.len() < SALM_HEADER_LEN {
        return Err(ModelError::TruncatedFile {
            expected: SALM_HEADER_LEN,
            found: bytes.len(),
        });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let (height, width, dtype) = (word(4), word(8), word(12));
    if dtype != SALM_DTYPE_F32 {
        return Err(ModelError::UnsupportedDtype(dtype));
    }
    if width == 0 || height == 0 {
        return Err(ModelError::EmptyMap);
    }
    let count = width as u64 * height as u64;
    let expected = (count as u128) * 4 + SALM_HEADER_LEN as u128;
    let found = bytes.len() as u128;
    if found < expected {
        return Err(ModelError::TruncatedFile {
            expected: usize::try_from(expected).unwrap_or(usize::MAX),
            found: bytes.len(),
        });
    }
    if found > expected {
        return Err(ModelError::TrailingBytes((found - expected) as usize));
    }
    let values: Vec<f32> = bytes[SALM_HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let map = SaliencyMap::new(width, height, values)?;
    map.check_finite()?;
    Ok(map)
}

pub fn read_saliency(path: impl AsRef<Path>) -> Result<SaliencyMap, ModelError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => ModelError::MissingFile(path.to_path_buf()),
        _ => ModelError::Io(e),
    })?;
    decode_salm(&bytes)
}

pub fn write_saliency(map: &SaliencyMap, path: impl AsRef<Path>) -> Result<(), ModelError> {
    std::fs::write(path, encode_salm(map)?)?;
    Ok(())
}

/// Min-max normalization into `[0, 1]`. A constant map becomes all zeros
/// with the degenerate flag set.
pub fn normalize_saliency(map: &SaliencyMap) -> Result<SaliencyMap, ModelError> {
    map.check_finite()?;
    let (lo, hi) = map.range();
    if lo == hi {
        return Ok(SaliencyMap {
            values: vec![0.0; map.values.len()],
            degenerate: true,
            ..*map
        });
    }
    let (lo, span) = (lo as f64, hi as f64 - lo as f64);
    let values = map
        .values
        .iter()
        .map(|&v| ((v as f64 - lo) / span) as f32)
        .collect();
    Ok(SaliencyMap {
        values,
        degenerate: false,
        ..*map
    })
}

/// Bilinear resampling with the align-corners convention: the corner samples
/// of source and target coincide.
pub fn upsample_bilinear(
    map: &SaliencyMap,
    target_w: u32,
    target_h: u32,
) -> Result<SaliencyMap, ModelError> {
    if map.values.is_empty() || target_w == 0 || target_h == 0 {
        return Err(ModelError::EmptyMap);
    }
    if target_w == map.width && target_h == map.height {
        return Ok(map.clone());
    }
    let (lo, hi) = map.range();
    let scale = |src: u32, dst: u32| {
        if dst > 1 {
            (src - 1) as f64 / (dst - 1) as f64
        } else {
            0.0
        }
    };
    let (sx, sy) = (scale(map.width, target_w), scale(map.height, target_h));
    let sw = map.width as usize;
    let mut values = Vec::with_capacity(target_w as usize * target_h as usize);
    for ty in 0..target_h {
        let fy = ty as f64 * sy;
        let y0 = (fy.floor() as usize).min(map.height as usize - 1);
        let y1 = (y0 + 1).min(map.height as usize - 1);
        let wy = fy - y0 as f64;
        for tx in 0..target_w {
            let fx = tx as f64 * sx;
            let x0 = (fx.floor() as usize).min(sw - 1);
            let x1 = (x0 + 1).min(sw - 1);
            let wx = fx - x0 as f64;
            let at = |x: usize, y: usize| map.values[y * sw + x] as f64;
            let top = at(x0, y0) * (1.0 - wx) + at(x1, y0) * wx;
            let bottom = at(x0, y1) * (1.0 - wx) + at(x1, y1) * wx;
            let v = (top * (1.0 - wy) + bottom * wy) as f32;
            values.push(v.clamp(lo, hi));
        }
    }
    Ok(SaliencyMap {
        width: target_w,
        height: target_h,
        values,
        degenerate: map.degenerate,
    })
}
