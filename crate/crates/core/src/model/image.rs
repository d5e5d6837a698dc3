use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, RgbImage};

use super::ModelError;

/// An 8-bit RGB raster stored row-major, three bytes per pixel.
#[derive(Clone, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for Image {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Image")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl Image {
    /// Smallest side length accepted; anything smaller is useless for superpixels.
    pub const MIN_SIDE: u32 = 8;

    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, ModelError> {
        if width < Self::MIN_SIDE || height < Self::MIN_SIDE {
            return Err(ModelError::ImageTooSmall {
                width,
                height,
                min: Self::MIN_SIDE,
            });
        }
        let expected = (width as usize)
            .checked_mul(height as usize)
            .and_then(|n| n.checked_mul(3))
            .ok_or(ModelError::InvalidDimensions {
                width: width as u64,
                height: height as u64,
                reason: "pixel count overflows",
            })?;
        if data.len() != expected {
            return Err(ModelError::InvalidDimensions {
                width: width as u64,
                height: height as u64,
                reason: "data length is not width*height*3",
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(
        width: u32,
        height: u32,
        mut f: impl FnMut(u32, u32) -> [u8; 3],
    ) -> Result<Self, ModelError> {
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self, ModelError> {
        Self::from_fn(width, height, |_, _| rgb)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Same dimensions, new payload.
    pub(crate) fn with_data(&self, data: Vec<u8>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// Mean over every channel sample, in `[0, 1]`.
    pub fn mean_intensity(&self) -> f64 {
        let sum: u64 = self.data.iter().map(|&v| v as u64).sum();
        sum as f64 / (self.data.len() as f64 * 255.0)
    }

    /// Decodes PNG or JPEG bytes. Grayscale is replicated across channels and
    /// alpha is dropped.
    pub fn decode(bytes: &[u8]) -> Result<Self, ModelError> {
        let decoded =
            image::load_from_memory(bytes).map_err(|e| ModelError::Decode(e.to_string()))?;
        let rgb = decoded.to_rgb8();
        let (w, h) = rgb.dimensions();
        Self::new(w, h, rgb.into_raw())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => ModelError::MissingFile(path.to_path_buf()),
            _ => ModelError::Io(e),
        })?;
        Self::decode(&bytes)
    }

    pub fn to_png_bytes(&self) -> Result<Vec<u8>, ModelError> {
        let mut out = Cursor::new(Vec::new());
        self.to_rgb_image()
            .write_to(&mut out, ImageFormat::Png)
            .map_err(|e| ModelError::Encode(e.to_string()))?;
        Ok(out.into_inner())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        std::fs::write(path, self.to_png_bytes()?)?;
        Ok(())
    }

    pub(crate) fn to_rgb_image(&self) -> RgbImage {
        RgbImage::from_raw(self.width, self.height, self.data.clone())
            .expect("dimensions validated at construction")
    }
}
