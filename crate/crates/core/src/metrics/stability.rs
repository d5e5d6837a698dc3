use super::MetricsError;
use crate::model::{Image, SaliencyMap};

/// Explanation change over input change, `‖e - e'‖₁ / ‖x - x'‖₁`, with images
/// compared in `[0, 1]` float scale. The caller takes the maximum over a
/// neighbourhood of perturbations if it wants the worst case.
pub fn stability_ratio(
    e: &SaliencyMap,
    e_perturbed: &SaliencyMap,
    x: &Image,
    x_perturbed: &Image,
) -> Result<f64, MetricsError> {
    let dims = |w: u32, h: u32| format!("{w}x{h}");
    let expected = (x.width(), x.height());
    for (what, got) in [
        ("perturbed image", (x_perturbed.width(), x_perturbed.height())),
        ("explanation", (e.width(), e.height())),
        ("perturbed explanation", (e_perturbed.width(), e_perturbed.height())),
    ] {
        if got != expected {
            return Err(MetricsError::DimensionMismatch(format!(
                "{what} is {} but image is {}",
                dims(got.0, got.1),
                dims(expected.0, expected.1)
            )));
        }
    }
    let input_l1: u64 = x
        .data()
        .iter()
        .zip(x_perturbed.data())
        .map(|(&a, &b)| a.abs_diff(b) as u64)
        .sum();
    if input_l1 == 0 {
        return Err(MetricsError::ZeroDenominator);
    }
    let explanation_l1: f64 = e
        .values()
        .iter()
        .zip(e_perturbed.values())
        .map(|(&a, &b)| (a as f64 - b as f64).abs())
        .sum();
    Ok(explanation_l1 / (input_l1 as f64 / 255.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(v: u8) -> Image {
        Image::filled(8, 8, [v; 3]).unwrap()
    }

    #[test]
    fn identical_explanations_give_zero() {
        let e = SaliencyMap::new(8, 8, vec![0.3; 64]).unwrap();
        assert_eq!(stability_ratio(&e, &e, &img(0), &img(1)).unwrap(), 0.0);
    }

    #[test]
    fn ratio_arithmetic() {
        let e = SaliencyMap::new(8, 8, vec![0.0; 64]).unwrap();
        let mut v = vec![0.0f32; 64];
        v[0] = 1.0;
        v[1] = 1.0;
        let e2 = SaliencyMap::new(8, 8, v).unwrap();
        // image L1 = 4.0 in float scale: four samples moved by 255
        let x = img(0);
        let mut data = x.data().to_vec();
        data[..4].fill(255);
        let x2 = Image::new(8, 8, data).unwrap();
        assert_eq!(stability_ratio(&e, &e2, &x, &x2).unwrap(), 0.5);
    }

    #[test]
    fn equal_inputs_are_rejected() {
        let e = SaliencyMap::new(8, 8, vec![0.0; 64]).unwrap();
        assert_eq!(
            stability_ratio(&e, &e, &img(4), &img(4)),
            Err(MetricsError::ZeroDenominator)
        );
    }

    #[test]
    fn dimension_mismatch() {
        let e = SaliencyMap::new(4, 4, vec![0.0; 16]).unwrap();
        assert!(matches!(
            stability_ratio(&e, &e, &img(0), &img(1)),
            Err(MetricsError::DimensionMismatch(_))
        ));
    }
}
