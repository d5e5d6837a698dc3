use super::MotionDirection;
use crate::model::Image;

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`), folded
/// repeatedly so any offset lands inside `0..n`.
#[inline]
pub(crate) fn reflect_index(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

/// Normalized 1-D Gaussian taps over `-radius..=radius`.
pub(crate) fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let mut taps: Vec<f64> = (-r..=r)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

#[derive(Clone, Copy)]
enum Axis {
    X,
    Y,
}

/// `out[i] = sum_k kernel[k] * src[reflect(i + k - anchor)]` along one axis.
fn convolve_axis(src: &[f64], w: usize, h: usize, kernel: &[f64], anchor: usize, axis: Axis) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &t) in kernel.iter().enumerate() {
                let off = k as isize - anchor as isize;
                let (sx, sy) = match axis {
                    Axis::X => (reflect_index(x as isize + off, w), y),
                    Axis::Y => (x, reflect_index(y as isize + off, h)),
                };
                acc += t * src[sy * w + sx];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Separable convolution of each plane with `kx` then `ky` (both centered).
pub(crate) fn convolve_planes(planes: &mut [Vec<f64>], w: usize, h: usize, kx: &[f64], ky: &[f64]) {
    for plane in planes.iter_mut() {
        let tmp = convolve_axis(plane, w, h, kx, kx.len() / 2, Axis::X);
        *plane = convolve_axis(&tmp, w, h, ky, ky.len() / 2, Axis::Y);
    }
}

fn split_planes(image: &Image) -> [Vec<f64>; 3] {
    let mut planes: [Vec<f64>; 3] = Default::default();
    for (c, plane) in planes.iter_mut().enumerate() {
        *plane = image.data().iter().skip(c).step_by(3).map(|&b| b as f64).collect();
    }
    planes
}

fn merge_planes(image: &Image, planes: &[Vec<f64>; 3]) -> Image {
    let mut data = Vec::with_capacity(image.data().len());
    for i in 0..planes[0].len() {
        for plane in planes {
            data.push(plane[i].round().clamp(0.0, 255.0) as u8);
        }
    }
    image.with_data(data)
}

/// Per-channel 2-D Gaussian blur, kernel radius `ceil(3 * sigma)`.
pub(super) fn gaussian_blur(image: &Image, sigma: f64) -> Image {
    let kernel = gaussian_kernel(sigma, (3.0 * sigma).ceil() as usize);
    let mut planes = split_planes(image);
    let (w, h) = (image.width() as usize, image.height() as usize);
    convolve_planes(&mut planes, w, h, &kernel, &kernel);
    merge_planes(image, &planes)
}

/// Uniform `1 x ksize` (or `ksize x 1`) box kernel.
pub(super) fn motion_blur(image: &Image, ksize: usize, direction: MotionDirection) -> Image {
    let kernel = vec![1.0 / ksize as f64; ksize];
    let anchor = (ksize - 1) / 2;
    let axis = match direction {
        MotionDirection::Horizontal => Axis::X,
        MotionDirection::Vertical => Axis::Y,
    };
    let (w, h) = (image.width() as usize, image.height() as usize);
    let planes = split_planes(image).map(|p| convolve_axis(&p, w, h, &kernel, anchor, axis));
    merge_planes(image, &planes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured() -> Image {
        Image::from_fn(40, 30, |x, y| [(x * 6) as u8, (y * 8) as u8, ((x * y) % 251) as u8]).unwrap()
    }

    #[test]
    fn reflect_folds() {
        let got: Vec<usize> = (-5..9).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(got, vec![3, 3, 2, 1, 0, 0, 1, 2, 3, 3, 2, 1, 0, 0]);
        assert_eq!(reflect_index(-7, 1), 0);
    }

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k = gaussian_kernel(0.5, 2);
        assert_eq!(k.len(), 5);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(k[0], k[4]);
        assert!(k[2] > k[1]);
    }

    #[test]
    fn motion_blur_ksize_one_is_identity() {
        let img = textured();
        assert_eq!(motion_blur(&img, 1, MotionDirection::Horizontal), img);
        assert_eq!(motion_blur(&img, 1, MotionDirection::Vertical), img);
    }

    #[test]
    fn blur_preserves_constants() {
        let img = Image::filled(20, 20, [77, 140, 3]).unwrap();
        assert_eq!(gaussian_blur(&img, 0.5), img);
        assert_eq!(motion_blur(&img, 15, MotionDirection::Horizontal), img);
    }

    #[test]
    fn horizontal_motion_blur_averages_rows() {
        // a single bright column spreads over ksize columns, rows independent
        let img = Image::from_fn(16, 8, |x, _| if x == 8 { [255; 3] } else { [0; 3] }).unwrap();
        let out = motion_blur(&img, 5, MotionDirection::Horizontal);
        for x in 0..16 {
            let want = if (6..=10).contains(&x) { 51 } else { 0 };
            assert_eq!(out.pixel(x, 3)[0], want, "x={x}");
        }
    }

    #[test]
    fn blur_mean_is_nearly_preserved() {
        let img = textured();
        for out in [
            gaussian_blur(&img, 0.5),
            motion_blur(&img, 5, MotionDirection::Horizontal),
        ] {
            assert!((out.mean_intensity() - img.mean_intensity()).abs() < 2e-3);
        }
    }
}
