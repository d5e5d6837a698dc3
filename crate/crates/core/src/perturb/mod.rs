//! Seeded natural-image perturbations.
//!
//! Every kind works in float scale `[0, 1]`, clips, and re-quantizes to bytes.
//! Adversarial kinds are described here (so specs parse and resolve
//! uniformly) but generated by the model adapter.

mod blur;
mod jpeg;
mod noise;
mod rng;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Image;

pub(crate) use blur::{convolve_planes, gaussian_kernel, reflect_index};
pub use rng::{derive_seed, rng_from_seed};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerturbError {
    #[error("{0} is generated by the model adapter, not locally")]
    AdversarialNotLocal(Attack),
    #[error("unsupported perturbation kind `{0}`")]
    UnsupportedKind(String),
    #[error("unknown level `{0}` (expected low, medium or high)")]
    UnknownLevel(String),
    #[error("{0} takes no level parameter; use \"{0}\"")]
    NoParameterForKind(NoiseKind),
    #[error("{0} requires a level, e.g. \"{0}:medium\"")]
    MissingLevel(NoiseKind),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("jpeg codec failure: {0}")]
    Codec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attack {
    Fgsm,
    Pgd,
    Cw,
}

impl Attack {
    pub fn name(self) -> &'static str {
        match self {
            Attack::Fgsm => "fgsm",
            Attack::Pgd => "pgd",
            Attack::Cw => "cw",
        }
    }
}

impl fmt::Display for Attack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Gaussian,
    SaltPepper,
    Poisson,
    Speckle,
    GaussianBlur,
    MotionBlur,
    Jpeg,
    Adversarial(Attack),
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 10] = [
        NoiseKind::Gaussian,
        NoiseKind::SaltPepper,
        NoiseKind::Poisson,
        NoiseKind::Speckle,
        NoiseKind::GaussianBlur,
        NoiseKind::MotionBlur,
        NoiseKind::Jpeg,
        NoiseKind::Adversarial(Attack::Fgsm),
        NoiseKind::Adversarial(Attack::Pgd),
        NoiseKind::Adversarial(Attack::Cw),
    ];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::SaltPepper => "saltpepper",
            NoiseKind::Poisson => "poisson",
            NoiseKind::Speckle => "speckle",
            NoiseKind::GaussianBlur => "gaussianblur",
            NoiseKind::MotionBlur => "motionblur",
            NoiseKind::Jpeg => "jpeg",
            NoiseKind::Adversarial(a) => a.name(),
        }
    }

    /// Kinds applied without a severity level.
    pub fn is_levelless(self) -> bool {
        matches!(
            self,
            NoiseKind::Poisson | NoiseKind::Adversarial(Attack::Cw)
        )
    }

    pub fn is_adversarial(self) -> bool {
        matches!(self, NoiseKind::Adversarial(_))
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseKind {
    type Err = PerturbError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let kind = match s.to_ascii_lowercase().as_str() {
            "gaussian" | "gauss" => NoiseKind::Gaussian,
            "saltpepper" | "salt_pepper" | "salt-pepper" | "s&p" => NoiseKind::SaltPepper,
            "poisson" => NoiseKind::Poisson,
            "speckle" => NoiseKind::Speckle,
            "gaussianblur" | "gaussian_blur" | "blur" => NoiseKind::GaussianBlur,
            "motionblur" | "motion_blur" | "motion" => NoiseKind::MotionBlur,
            "jpeg" | "jpg" => NoiseKind::Jpeg,
            "fgsm" => NoiseKind::Adversarial(Attack::Fgsm),
            "pgd" => NoiseKind::Adversarial(Attack::Pgd),
            "cw" => NoiseKind::Adversarial(Attack::Cw),
            _ => return Err(PerturbError::UnsupportedKind(s.to_owned())),
        };
        Ok(kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Low,
    Medium,
    High,
}

impl Level {
    pub fn name(self) -> &'static str {
        match self {
            Level::Low => "low",
            Level::Medium => "medium",
            Level::High => "high",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Level {
    type Err = PerturbError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(Level::Low),
            "medium" | "med" => Ok(Level::Medium),
            "high" => Ok(Level::High),
            _ => Err(PerturbError::UnknownLevel(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionDirection {
    #[default]
    Horizontal,
    Vertical,
}

/// Numeric parameters after level resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "param", rename_all = "snake_case")]
pub enum Params {
    None,
    Variance { var: f64 },
    Amount { amount: f64 },
    Sigma { sigma: f64 },
    MotionBlur { ksize: usize, direction: MotionDirection },
    Quality { quality: u8 },
    Epsilon { eps: f64 },
}

/// Level → parameter table for every perturbation kind.
pub fn resolve_level(kind: NoiseKind, level: Level) -> Result<Params, PerturbError> {
    let pick = |low, medium, high| match level {
        Level::Low => low,
        Level::Medium => medium,
        Level::High => high,
    };
    let params = match kind {
        NoiseKind::Gaussian | NoiseKind::Speckle => Params::Variance {
            var: pick(0.0005, 0.006, 0.01),
        },
        NoiseKind::SaltPepper => Params::Amount {
            amount: pick(0.0005, 0.006, 0.01),
        },
        NoiseKind::GaussianBlur => Params::Sigma {
            sigma: pick(0.1, 0.3, 0.5),
        },
        NoiseKind::MotionBlur => Params::MotionBlur {
            ksize: pick(1.0, 5.0, 15.0) as usize,
            direction: MotionDirection::Horizontal,
        },
        NoiseKind::Jpeg => Params::Quality {
            quality: pick(80.0, 50.0, 10.0) as u8,
        },
        NoiseKind::Adversarial(Attack::Fgsm) => Params::Epsilon {
            eps: pick(0.01, 0.02, 0.1),
        },
        NoiseKind::Adversarial(Attack::Pgd) => Params::Epsilon {
            eps: pick(0.01, 0.03, 0.1),
        },
        NoiseKind::Poisson | NoiseKind::Adversarial(Attack::Cw) => {
            return Err(PerturbError::NoParameterForKind(kind))
        }
    };
    Ok(params)
}

/// A fully resolved perturbation: kind, optional level, parameters and seed.
///
/// The string form is `<kind>:<level>` (`gaussian:medium`, `jpeg:high`), or
/// the bare kind for `poisson` and `cw`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub kind: NoiseKind,
    pub level: Option<Level>,
    pub params: Params,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn new(kind: NoiseKind, level: Option<Level>) -> Result<Self, PerturbError> {
        let params = match (kind.is_levelless(), level) {
            (true, None) => Params::None,
            (true, Some(_)) => return Err(PerturbError::NoParameterForKind(kind)),
            (false, None) => return Err(PerturbError::MissingLevel(kind)),
            (false, Some(level)) => resolve_level(kind, level)?,
        };
        Ok(Self {
            kind,
            level,
            params,
            seed: 0,
        })
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    /// Canonical `<kind>[:<level>]` label.
    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for PerturbationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.level {
            Some(level) => write!(f, "{}:{}", self.kind, level),
            None => write!(f, "{}", self.kind),
        }
    }
}

impl FromStr for PerturbationSpec {
    type Err = PerturbError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (kind, level) = match s.split_once(':') {
            Some((k, l)) => (k.parse::<NoiseKind>()?, Some(l.parse::<Level>()?)),
            None => (s.parse::<NoiseKind>()?, None),
        };
        PerturbationSpec::new(kind, level)
    }
}

/// Applies a local (non-adversarial) perturbation. Output dimensions always
/// equal the input's, and identical `(image, spec)` pairs give identical bytes.
pub fn apply_perturbation(image: &Image, spec: &PerturbationSpec) -> Result<Image, PerturbError> {
    match (spec.kind, spec.params) {
        (NoiseKind::Adversarial(attack), _) => Err(PerturbError::AdversarialNotLocal(attack)),
        (NoiseKind::Gaussian, Params::Variance { var }) => {
            noise::gaussian(image, positive(var, "var")?, spec.seed)
        }
        (NoiseKind::Speckle, Params::Variance { var }) => {
            noise::speckle(image, positive(var, "var")?, spec.seed)
        }
        (NoiseKind::SaltPepper, Params::Amount { amount }) => {
            if !(0.0..=1.0).contains(&amount) {
                return Err(PerturbError::InvalidParameter(format!(
                    "amount {amount} outside [0, 1]"
                )));
            }
            Ok(noise::salt_pepper(image, amount, spec.seed))
        }
        (NoiseKind::Poisson, Params::None) => Ok(noise::poisson(image, spec.seed)),
        (NoiseKind::GaussianBlur, Params::Sigma { sigma }) => {
            Ok(blur::gaussian_blur(image, positive(sigma, "sigma")?))
        }
        (NoiseKind::MotionBlur, Params::MotionBlur { ksize, direction }) => {
            if ksize == 0 {
                return Err(PerturbError::InvalidParameter("ksize must be >= 1".into()));
            }
            Ok(blur::motion_blur(image, ksize, direction))
        }
        (NoiseKind::Jpeg, Params::Quality { quality }) => {
            if !(1..=100).contains(&quality) {
                return Err(PerturbError::InvalidParameter(format!(
                    "quality {quality} outside 1..=100"
                )));
            }
            jpeg::round_trip(image, quality)
        }
        (kind, params) => Err(PerturbError::InvalidParameter(format!(
            "{params:?} does not apply to {kind}"
        ))),
    }
}

fn positive(v: f64, name: &str) -> Result<f64, PerturbError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(PerturbError::InvalidParameter(format!("{name} must be > 0, got {v}")))
    }
}

#[inline]
pub(crate) fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Peak signal-to-noise ratio in dB over all channel samples; infinite for
/// identical images.
pub fn psnr(a: &Image, b: &Image) -> f64 {
    assert_eq!(a.data().len(), b.data().len(), "psnr needs equal sizes");
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        / a.data().len() as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0f64 * 255.0 / mse).log10()
    }
}
