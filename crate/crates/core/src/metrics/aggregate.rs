use super::MetricsError;
use crate::model::{RankedSegments, SaliencyMap, SegmentationMap};

/// Mean saliency over each segment's pixels, indexed by segment id.
pub fn segment_mean_saliency(
    map: &SaliencyMap,
    seg: &SegmentationMap,
) -> Result<Vec<f64>, MetricsError> {
    if (map.width(), map.height()) != (seg.width(), seg.height()) {
        return Err(MetricsError::DimensionMismatch(format!(
            "saliency {}x{} vs segmentation {}x{}",
            map.width(),
            map.height(),
            seg.width(),
            seg.height()
        )));
    }
    let m = seg.segment_count();
    let mut sums = vec![0.0f64; m];
    let mut counts = vec![0usize; m];
    for (&v, &l) in map.values().iter().zip(seg.labels()) {
        sums[l as usize] += v as f64;
        counts[l as usize] += 1;
    }
    Ok(sums
        .into_iter()
        .zip(counts)
        .map(|(s, c)| s / c as f64)
        .collect())
}

/// Orders segment ids by descending mean; equal means fall back to ascending
/// id, so the result is always a strict permutation.
pub fn rank_segments(means: &[f64]) -> Result<RankedSegments, MetricsError> {
    if means.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if let Some(i) = means.iter().position(|m| !m.is_finite()) {
        return Err(MetricsError::NonFiniteValue(i));
    }
    let mut order: Vec<u32> = (0..means.len() as u32).collect();
    order.sort_by(|&a, &b| {
        means[b as usize]
            .partial_cmp(&means[a as usize])
            .expect("finite")
            .then(a.cmp(&b))
    });
    let sorted: Vec<f64> = order.iter().map(|&i| means[i as usize]).collect();
    let has_ties = sorted.windows(2).any(|w| w[0] == w[1]);
    Ok(RankedSegments {
        order,
        means: sorted,
        has_ties,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn means_over_two_rows() {
        let map = SaliencyMap::new(2, 2, vec![0.2, 0.4, 0.6, 0.8]).unwrap();
        let seg = SegmentationMap::new(2, 2, vec![0, 0, 1, 1]).unwrap();
        let means = segment_mean_saliency(&map, &seg).unwrap();
        assert!((means[0] - 0.3).abs() < 1e-7 && (means[1] - 0.7).abs() < 1e-7);
    }

    #[test]
    fn constant_map_gives_constant_means() {
        let map = SaliencyMap::new(3, 2, vec![0.5; 6]).unwrap();
        let seg = SegmentationMap::new(3, 2, vec![0, 1, 1, 2, 2, 0]).unwrap();
        assert_eq!(segment_mean_saliency(&map, &seg).unwrap(), vec![0.5; 3]);
    }

    #[test]
    fn single_pixel_segments_are_exact() {
        let vals = vec![0.1f32, 0.9, 0.3, 0.7];
        let map = SaliencyMap::new(2, 2, vals.clone()).unwrap();
        let seg = SegmentationMap::new(2, 2, vec![0, 1, 2, 3]).unwrap();
        let means = segment_mean_saliency(&map, &seg).unwrap();
        assert_eq!(means, vals.iter().map(|&v| v as f64).collect::<Vec<_>>());
    }

    #[test]
    fn dimension_mismatch() {
        let map = SaliencyMap::new(2, 1, vec![0.0; 2]).unwrap();
        let seg = SegmentationMap::new(1, 2, vec![0, 0]).unwrap();
        assert!(matches!(
            segment_mean_saliency(&map, &seg),
            Err(MetricsError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn ranking_examples() {
        assert_eq!(rank_segments(&[0.3, 0.7]).unwrap().order, vec![1, 0]);
        let tied = rank_segments(&[0.5, 0.5, 0.1]).unwrap();
        assert_eq!(tied.order, vec![0, 1, 2]);
        assert!(tied.has_ties);
        let single = rank_segments(&[0.9]).unwrap();
        assert_eq!(single.order, vec![0]);
        assert!(!single.has_ties);
        assert_eq!(
            rank_segments(&[0.1, f64::NAN]),
            Err(MetricsError::NonFiniteValue(1))
        );
    }

    proptest! {
        #[test]
        fn ranking_is_invariant_under_monotone_maps(
            means in proptest::collection::vec(0.0f64..1.0, 1..40),
            scale in 0.1f64..10.0,
            shift in -5.0f64..5.0,
        ) {
            let base = rank_segments(&means).unwrap();
            let affine: Vec<f64> = means.iter().map(|m| m * scale + shift).collect();
            let cubed: Vec<f64> = means.iter().map(|m| m.powi(3)).collect();
            let exp: Vec<f64> = means.iter().map(|m| m.exp()).collect();
            for other in [affine, cubed, exp] {
                prop_assert_eq!(&rank_segments(&other).unwrap().order, &base.order);
            }
            prop_assert!(base.means.windows(2).all(|w| w[0] >= w[1]));
        }
    }
}
