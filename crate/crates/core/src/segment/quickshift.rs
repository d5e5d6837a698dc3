//! Quick shift: mode seeking on a Parzen density in joint (colour, position)
//! space.
//!
//! Colour is RGB mapped to `[0, 100]` per channel and scaled by `ratio`, so
//! the colour axis has the same magnitude as a Lab lightness axis. Densities
//! use a square window of half-width `ceil(3 * kernel_size)` with borders
//! reflected, which keeps densities translation invariant: a constant image
//! has one density value everywhere and every pixel is its own root.

use rayon::prelude::*;

use super::{relabel_contiguous, QuickShiftParams, SegmentError};
use crate::model::{Image, SegmentationMap};
use crate::perturb::reflect_index;

const MAX_SUM_SQ: usize = 3 * 255 * 255;

pub fn quickshift(image: &Image, params: &QuickShiftParams) -> Result<SegmentationMap, SegmentError> {
    let QuickShiftParams {
        kernel_size,
        max_dist,
        ratio,
    } = *params;
    if kernel_size < 1.0 || !kernel_size.is_finite() {
        return Err(SegmentError::InvalidParams(format!("kernel_size {kernel_size} < 1")));
    }
    if max_dist.is_nan() || max_dist <= 0.0 {
        return Err(SegmentError::InvalidParams(format!("max_dist {max_dist} <= 0")));
    }
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(SegmentError::InvalidParams(format!("ratio {ratio} outside (0, 1]")));
    }

    let (w, h) = (image.width() as usize, image.height() as usize);
    let rgb = image.data();
    let half = (3.0 * kernel_size).ceil() as isize;
    let inv = -0.5 / (kernel_size * kernel_size);

    // squared colour distance in feature units = colour_scale2 * (byte sum of squares)
    let colour_scale = ratio * 100.0 / 255.0;
    let colour_scale2 = colour_scale * colour_scale;
    let colour_weight: Vec<f64> = (0..=MAX_SUM_SQ)
        .map(|s| (colour_scale2 * s as f64 * inv).exp())
        .collect();
    let side = (2 * half + 1) as usize;
    let spatial_weight: Vec<f64> = (0..side * side)
        .map(|i| {
            let (dy, dx) = ((i / side) as isize - half, (i % side) as isize - half);
            ((dy * dy + dx * dx) as f64 * inv).exp()
        })
        .collect();

    let sum_sq = |a: usize, b: usize| -> usize {
        (0..3)
            .map(|c| {
                let d = rgb[a * 3 + c] as isize - rgb[b * 3 + c] as isize;
                (d * d) as usize
            })
            .sum()
    };

    let density: Vec<f64> = (0..h)
        .into_par_iter()
        .flat_map_iter(|y| {
            let (colour_weight, spatial_weight) = (&colour_weight, &spatial_weight);
            (0..w).map(move |x| {
                let p = y * w + x;
                let mut acc = 0.0;
                for dy in -half..=half {
                    let qy = reflect_index(y as isize + dy, h);
                    let row = ((dy + half) as usize) * side;
                    for dx in -half..=half {
                        let qx = reflect_index(x as isize + dx, w);
                        acc += spatial_weight[row + (dx + half) as usize]
                            * colour_weight[sum_sq(p, qy * w + qx)];
                    }
                }
                acc
            })
        })
        .collect();

    // link each pixel to the closest in-window pixel of strictly higher
    // density; equal distances keep the first candidate in row-major order
    let max_dist2 = max_dist * max_dist;
    let parent: Vec<usize> = (0..h)
        .into_par_iter()
        .flat_map_iter(|y| {
            let density = &density;
            (0..w).map(move |x| {
                let p = y * w + x;
                let mut best = f64::INFINITY;
                let mut link = p;
                let (y0, y1) = (y.saturating_sub(half as usize), (y + half as usize).min(h - 1));
                let (x0, x1) = (x.saturating_sub(half as usize), (x + half as usize).min(w - 1));
                for qy in y0..=y1 {
                    for qx in x0..=x1 {
                        let q = qy * w + qx;
                        if density[q] <= density[p] {
                            continue;
                        }
                        let (dy, dx) = (qy as f64 - y as f64, qx as f64 - x as f64);
                        let d2 = colour_scale2 * sum_sq(p, q) as f64 + dy * dy + dx * dx;
                        if d2 < best {
                            best = d2;
                            link = q;
                        }
                    }
                }
                if best <= max_dist2 {
                    link
                } else {
                    p
                }
            })
        })
        .collect();

    // density strictly increases along links, so chains terminate at roots
    let mut root = vec![usize::MAX; parent.len()];
    let mut chain = Vec::new();
    for p in 0..parent.len() {
        let mut cur = p;
        while root[cur] == usize::MAX && parent[cur] != cur {
            chain.push(cur);
            cur = parent[cur];
        }
        let r = if root[cur] == usize::MAX { cur } else { root[cur] };
        root[cur] = r;
        for c in chain.drain(..) {
            root[c] = r;
        }
    }
    let labels: Vec<u32> = root.into_iter().map(|r| r as u32).collect();
    Ok(relabel_contiguous(image.width(), image.height(), &labels))
}
