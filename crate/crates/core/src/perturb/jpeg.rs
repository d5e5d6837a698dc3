use image::codecs::jpeg::JpegEncoder;
use image::{ExtendedColorType, ImageFormat};

use super::PerturbError;
use crate::model::Image;

/// Baseline JPEG encode at `quality`, then decode.
pub(super) fn round_trip(image: &Image, quality: u8) -> Result<Image, PerturbError> {
    let mut buf = Vec::new();
    JpegEncoder::new_with_quality(&mut buf, quality)
        .encode(image.data(), image.width(), image.height(), ExtendedColorType::Rgb8)
        .map_err(|e| PerturbError::Codec(e.to_string()))?;
    let decoded = image::load_from_memory_with_format(&buf, ImageFormat::Jpeg)
        .map_err(|e| PerturbError::Codec(e.to_string()))?
        .to_rgb8();
    debug_assert_eq!(decoded.dimensions(), (image.width(), image.height()));
    Ok(image.with_data(decoded.into_raw()))
}
