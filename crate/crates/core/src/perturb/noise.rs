use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

use super::{quantize, rng_from_seed, PerturbError};
use crate::model::Image;

fn normal(var: f64) -> Result<Normal<f64>, PerturbError> {
    Normal::new(0.0, var.sqrt()).map_err(|e| PerturbError::InvalidParameter(e.to_string()))
}

/// `x + n`, `n ~ N(0, var)` per sample.
pub(super) fn gaussian(image: &Image, var: f64, seed: u64) -> Result<Image, PerturbError> {
    let dist = normal(var)?;
    let mut rng = rng_from_seed(seed);
    let data = image
        .data()
        .iter()
        .map(|&b| quantize(b as f64 / 255.0 + dist.sample(&mut rng)))
        .collect();
    Ok(image.with_data(data))
}

/// Multiplicative noise `x + x * n`, `n ~ N(0, var)`.
pub(super) fn speckle(image: &Image, var: f64, seed: u64) -> Result<Image, PerturbError> {
    let dist = normal(var)?;
    let mut rng = rng_from_seed(seed);
    let data = image
        .data()
        .iter()
        .map(|&b| {
            let x = b as f64 / 255.0;
            quantize(x + x * dist.sample(&mut rng))
        })
        .collect();
    Ok(image.with_data(data))
}

/// Sets exactly `round(amount * H * W)` distinct pixels to black or white
/// (all channels together, each colour with probability 1/2).
pub(super) fn salt_pepper(image: &Image, amount: f64, seed: u64) -> Image {
    let n = image.pixel_count();
    let count = ((amount * n as f64).round() as usize).min(n);
    let mut rng = rng_from_seed(seed);
    let mut data = image.data().to_vec();
    for p in index::sample(&mut rng, n, count) {
        let v = if rng.random_bool(0.5) { 255 } else { 0 };
        data[p * 3..p * 3 + 3].fill(v);
    }
    image.with_data(data)
}

/// Intensity-level Poisson noise: the distinct sample values are rounded up
/// to a power of two `vals`, and each sample becomes `Poisson(x * vals) / vals`.
pub(super) fn poisson(image: &Image, seed: u64) -> Image {
    let mut present = [false; 256];
    for &b in image.data() {
        present[b as usize] = true;
    }
    let levels = present.iter().filter(|&&p| p).count().max(1);
    let vals = levels.next_power_of_two() as f64;

    // one distribution per byte value; lambda 0 is a point mass at 0
    let dists: Vec<Option<Poisson<f64>>> = (0..256)
        .map(|b| {
            let lambda = b as f64 / 255.0 * vals;
            (lambda > 0.0).then(|| Poisson::new(lambda).expect("finite positive lambda"))
        })
        .collect();
    let mut rng = rng_from_seed(seed);
    let data = image
        .data()
        .iter()
        .map(|&b| match &dists[b as usize] {
            Some(d) => quantize(d.sample(&mut rng) / vals),
            None => 0,
        })
        .collect();
    image.with_data(data)
}
