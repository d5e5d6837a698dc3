//! Superpixel segmentation of the clean image.
//!
//! All three methods return a contiguous-label [`SegmentationMap`] and are
//! deterministic: fixed iteration counts and fixed tie-breaking rules.

mod felzenszwalb;
mod quickshift;
mod slic;

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use image::{ImageBuffer, Luma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Image, SegmentationMap};
use crate::perturb::{convolve_planes, gaussian_kernel};

pub use felzenszwalb::felzenszwalb;
pub use quickshift::quickshift;
pub use slic::slic;

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("invalid segmentation parameter: {0}")]
    InvalidParams(String),
    #[error("unknown segmenter `{0}` (expected quickshift, slic or felzenszwalb)")]
    UnknownMethod(String),
    #[error("{0} segments do not fit a 16-bit label image")]
    TooManySegments(usize),
    #[error("label image write failed: {0}")]
    Write(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmenterKind {
    #[default]
    QuickShift,
    Slic,
    Felzenszwalb,
}

impl fmt::Display for SegmenterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SegmenterKind::QuickShift => "quickshift",
            SegmenterKind::Slic => "slic",
            SegmenterKind::Felzenszwalb => "felzenszwalb",
        })
    }
}

impl FromStr for SegmenterKind {
    type Err = SegmentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "quickshift" => Ok(SegmenterKind::QuickShift),
            "slic" => Ok(SegmenterKind::Slic),
            "felzenszwalb" => Ok(SegmenterKind::Felzenszwalb),
            _ => Err(SegmentError::UnknownMethod(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuickShiftParams {
    /// Parzen bandwidth, in pixels.
    pub kernel_size: f64,
    /// Links longer than this (in joint feature space) are cut.
    pub max_dist: f64,
    /// Weight of colour against space.
    pub ratio: f64,
}

impl Default for QuickShiftParams {
    fn default() -> Self {
        Self {
            kernel_size: 10.0,
            max_dist: 200.0,
            ratio: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlicParams {
    pub n_segments: usize,
    pub compactness: f64,
    pub sigma: f64,
    pub start_label: u32,
}

impl Default for SlicParams {
    fn default() -> Self {
        Self {
            n_segments: 120,
            compactness: 10.0,
            sigma: 1.0,
            start_label: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FelzenszwalbParams {
    pub scale: f64,
    pub sigma: f64,
    pub min_size: usize,
}

impl Default for FelzenszwalbParams {
    fn default() -> Self {
        Self {
            scale: 100.0,
            sigma: 0.5,
            min_size: 50,
        }
    }
}

/// Method choice plus the parameters of every method (only the chosen one is
/// used; all are kept so reports record a complete configuration).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SegmentationParams {
    pub method: SegmenterKind,
    pub quickshift: QuickShiftParams,
    pub slic: SlicParams,
    pub felzenszwalb: FelzenszwalbParams,
}

pub fn segment(image: &Image, params: &SegmentationParams) -> Result<SegmentationMap, SegmentError> {
    match params.method {
        SegmenterKind::QuickShift => quickshift(image, &params.quickshift),
        SegmenterKind::Slic => slic(image, &params.slic),
        SegmenterKind::Felzenszwalb => felzenszwalb(image, &params.felzenszwalb),
    }
}

/// Maps arbitrary labels onto `0..m` in order of first appearance (row-major).
pub fn relabel_contiguous(width: u32, height: u32, labels: &[u32]) -> SegmentationMap {
    let mut mapping: HashMap<u32, u32> = HashMap::new();
    let relabeled: Vec<u32> = labels
        .iter()
        .map(|&l| {
            let next = mapping.len() as u32;
            *mapping.entry(l).or_insert(next)
        })
        .collect();
    SegmentationMap::from_contiguous(width, height, relabeled, mapping.len())
}

/// Writes labels as a 16-bit grayscale PNG.
pub fn save_label_png(map: &SegmentationMap, path: impl AsRef<Path>) -> Result<(), SegmentError> {
    if map.segment_count() > u16::MAX as usize + 1 {
        return Err(SegmentError::TooManySegments(map.segment_count()));
    }
    let pixels: Vec<u16> = map.labels().iter().map(|&l| l as u16).collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(map.width(), map.height(), pixels).expect("sizes match");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| SegmentError::Write(e.to_string()))
}

/// Channel planes in byte scale, optionally Gaussian-smoothed (radius `ceil(4 sigma)`).
pub(crate) fn smoothed_planes(image: &Image, sigma: f64) -> [Vec<f64>; 3] {
    let mut planes: [Vec<f64>; 3] = Default::default();
    for (c, plane) in planes.iter_mut().enumerate() {
        *plane = image.data().iter().skip(c).step_by(3).map(|&b| b as f64).collect();
    }
    if sigma > 0.0 {
        let kernel = gaussian_kernel(sigma, (4.0 * sigma).ceil() as usize);
        convolve_planes(
            &mut planes,
            image.width() as usize,
            image.height() as usize,
            &kernel,
            &kernel,
        );
    }
    planes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relabel_examples() {
        assert_eq!(relabel_contiguous(4, 1, &[5, 5, 9, 5]).labels(), &[0, 0, 1, 0]);
        assert_eq!(relabel_contiguous(3, 1, &[0, 1, 1]).labels(), &[0, 1, 1]);
        let m = relabel_contiguous(3, 1, &[2, 1, 0]);
        assert_eq!(m.labels(), &[0, 1, 2]);
        assert_eq!(m.segment_count(), 3);
    }

    #[test]
    fn defaults_match_reference_configuration() {
        let p = SegmentationParams::default();
        assert_eq!(p.method, SegmenterKind::QuickShift);
        assert_eq!((p.quickshift.kernel_size, p.quickshift.max_dist, p.quickshift.ratio), (10.0, 200.0, 0.5));
        assert_eq!(
            (p.slic.n_segments, p.slic.compactness, p.slic.sigma, p.slic.start_label),
            (120, 10.0, 1.0, 0)
        );
        assert_eq!(
            (p.felzenszwalb.scale, p.felzenszwalb.sigma, p.felzenszwalb.min_size),
            (100.0, 0.5, 50)
        );
    }

    #[test]
    fn label_png_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.png");
        let map = relabel_contiguous(3, 2, &[0, 300, 300, 7, 7, 0]);
        save_label_png(&map, &path).unwrap();
        let back = image::open(&path).unwrap().to_luma16();
        assert_eq!(back.into_raw(), vec![0, 1, 1, 2, 2, 0]);
    }

    #[test]
    fn method_names_parse() {
        for s in ["quickshift", "slic", "felzenszwalb"] {
            assert_eq!(s.parse::<SegmenterKind>().unwrap().to_string(), s);
        }
        assert!("watershed".parse::<SegmenterKind>().is_err());
    }
}
