//! Core data types and the portable file formats shared by the rest of the
//! crate: RGB rasters, saliency maps (and their `SALM` tensor files), label
//! fields, ranked segment lists and the dataset manifest.

mod image;
mod manifest;
mod saliency;
mod segmentation;

use std::path::PathBuf;

use thiserror::Error;

pub use self::image::Image;
pub use manifest::{load_manifest, parse_manifest, Manifest, ManifestEntry};
pub use saliency::{
    decode_salm, encode_salm, normalize_saliency, read_saliency, upsample_bilinear,
    write_saliency, SaliencyMap, SALM_DTYPE_F32, SALM_HEADER_LEN, SALM_MAGIC,
};
pub use segmentation::{PredictionRecord, RankedSegments, SegmentationMap};

/// Errors raised while constructing or (de)serializing model types.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("manifest schema violation at `{field}`: {detail}")]
    SchemaViolation { field: String, detail: String },
    #[error("duplicate manifest id `{0}`")]
    DuplicateId(String),
    #[error("bad magic: expected \"SALM\"")]
    BadMagic,
    #[error("truncated file: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: usize, found: usize },
    #[error("{0} unexpected trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("unsupported dtype code {0}")]
    UnsupportedDtype(u32),
    #[error("non-finite value at index {0}")]
    NonFiniteValue(usize),
    #[error("saliency map is empty")]
    EmptyMap,
    #[error("invalid dimensions {width}x{height}: {reason}")]
    InvalidDimensions {
        width: u64,
        height: u64,
        reason: &'static str,
    },
    #[error("image {width}x{height} is smaller than the {min}x{min} minimum")]
    ImageTooSmall { width: u32, height: u32, min: u32 },
    #[error("label field is not a contiguous partition: {0}")]
    InvalidLabels(String),
    #[error("image decode failed: {0}")]
    Decode(String),
    #[error("image encode failed: {0}")]
    Encode(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ModelError {
    pub(crate) fn schema(field: impl Into<String>, detail: impl Into<String>) -> Self {
        ModelError::SchemaViolation {
            field: field.into(),
            detail: detail.into(),
        }
    }
}
