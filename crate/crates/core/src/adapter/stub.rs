//! Deterministic backend used by the test suite and `camrobust stub-adapter`.
//!
//! Rules:
//! - predict: mean intensity below 0.5 gives label 0, otherwise 1;
//! - `stubcam`: a fixed 7x7 ramp, independent of the image;
//! - `intensitycam` (opt-in): 7x7 block means of the image intensity;
//! - `fgsm`: adds `+eps` / `-eps` in a pixel checkerboard (float scale).

use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use super::protocol::{decode_request, Op, Request, Response};
use crate::model::{write_saliency, Image, SaliencyMap};
use crate::perturb::quantize;

pub const STUB_ADAPTER_ID: &str = "stub-v1";
pub const STUB_CAM: &str = "stubcam";
pub const INTENSITY_CAM: &str = "intensitycam";
const GRID: u32 = 7;

/// A backend answering decoded requests. Implementations must not panic on
/// bad input; failures become error responses.
pub trait RequestHandler {
    fn handle(&mut self, request: &Request) -> Response;
}

/// Runs the request loop until `shutdown` or end of input.
pub fn serve<H: RequestHandler + ?Sized>(
    handler: &mut H,
    input: impl BufRead,
    mut output: impl Write,
) -> io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (response, stop) = match decode_request(&line) {
            Ok(req) => (handler.handle(&req), req.op == Op::Shutdown),
            Err(e) => (Response::error(request_id_of(&line), e.to_string()), false),
        };
        output.write_all(response.to_line().as_bytes())?;
        output.flush()?;
        if stop {
            break;
        }
    }
    Ok(())
}

fn request_id_of(line: &str) -> String {
    serde_json::from_str::<serde_json::Value>(line)
        .ok()
        .and_then(|v| v.get("id").and_then(|id| id.as_str().map(str::to_owned)))
        .unwrap_or_default()
}

#[derive(Debug, Clone)]
pub struct StubBackend {
    scratch: PathBuf,
    intensity_cam: bool,
}

impl StubBackend {
    /// Output files are written under `scratch`.
    pub fn new(scratch: impl Into<PathBuf>) -> Self {
        Self {
            scratch: scratch.into(),
            intensity_cam: false,
        }
    }

    pub fn with_intensity_cam(mut self) -> Self {
        self.intensity_cam = true;
        self
    }

    pub fn cams(&self) -> Vec<String> {
        let mut cams = vec![STUB_CAM.to_owned()];
        if self.intensity_cam {
            cams.push(INTENSITY_CAM.to_owned());
        }
        cams
    }

    fn output_path(&self, id: &str, ext: &str) -> PathBuf {
        let safe: String = id
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
            .collect();
        self.scratch.join(format!("stub-{safe}.{ext}"))
    }

    fn try_handle(&self, req: &Request) -> Result<Response, String> {
        let mut resp = Response::ok(req.id.clone());
        match req.op {
            Op::Handshake => {
                resp.adapter_id = Some(STUB_ADAPTER_ID.to_owned());
                resp.cams = Some(self.cams());
                resp.attacks = Some(vec!["fgsm".to_owned()]);
            }
            Op::Shutdown => {}
            Op::Predict => {
                resp.label = Some(stub_label(&load(req)?));
            }
            Op::Cam => {
                let method = req.cam_method.as_deref().unwrap_or_default();
                let map = match method {
                    STUB_CAM => ramp_cam(),
                    INTENSITY_CAM if self.intensity_cam => intensity_cam(&load(req)?),
                    other => return Err(format!("unsupported cam method `{other}`")),
                };
                let path = self.output_path(&req.id, "salm");
                write_saliency(&map, &path).map_err(|e| e.to_string())?;
                resp.saliency_path = Some(path.display().to_string());
            }
            Op::Adversarial => {
                let attack = req.attack.as_ref().expect("validated");
                if attack.name != "fgsm" {
                    return Err(format!("unsupported attack `{}`", attack.name));
                }
                let eps = attack.eps.ok_or("fgsm requires eps")?;
                let out = checkerboard(&load(req)?, eps);
                let path = self.output_path(&req.id, "png");
                out.save_png(&path).map_err(|e| e.to_string())?;
                resp.image_path = Some(path.display().to_string());
            }
        }
        Ok(resp)
    }
}

impl RequestHandler for StubBackend {
    fn handle(&mut self, request: &Request) -> Response {
        self.try_handle(request)
            .unwrap_or_else(|detail| Response::error(request.id.clone(), detail))
    }
}

fn load(req: &Request) -> Result<Image, String> {
    let path = req.image_path.as_deref().expect("validated");
    Image::load(Path::new(path)).map_err(|e| e.to_string())
}

pub fn stub_label(image: &Image) -> u32 {
    u32::from(image.mean_intensity() >= 0.5)
}

pub fn ramp_cam() -> SaliencyMap {
    SaliencyMap::from_fn(GRID, GRID, |x, y| (y * GRID + x) as f32 / (GRID * GRID - 1) as f32)
        .expect("valid grid")
}

pub fn intensity_cam(image: &Image) -> SaliencyMap {
    let (w, h) = (image.width(), image.height());
    let mut sums = vec![0.0f64; (GRID * GRID) as usize];
    let mut counts = vec![0u32; sums.len()];
    for y in 0..h {
        for x in 0..w {
            let cell = ((y * GRID / h) * GRID + x * GRID / w) as usize;
            let [r, g, b] = image.pixel(x, y);
            sums[cell] += (r as f64 + g as f64 + b as f64) / (3.0 * 255.0);
            counts[cell] += 1;
        }
    }
    SaliencyMap::from_fn(GRID, GRID, |x, y| {
        let cell = (y * GRID + x) as usize;
        (sums[cell] / counts[cell].max(1) as f64) as f32
    })
    .expect("valid grid")
}

pub fn checkerboard(image: &Image, eps: f64) -> Image {
    let w = image.width() as usize;
    let data = image
        .data()
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let p = i / 3;
            let sign = if (p % w + p / w).is_multiple_of(2) { 1.0 } else { -1.0 };
            quantize(b as f64 / 255.0 + sign * eps)
        })
        .collect();
    image.with_data(data)
}
