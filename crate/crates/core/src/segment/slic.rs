//! SLIC: k-means in (colour, position) space restricted to a `2S` window
//! around each centre, followed by a connectivity pass.
//!
//! Colour is RGB scaled to `[0, 100]`. Centres start on a regular grid of
//! `round(H/S) x round(W/S)` cells with `S = sqrt(HW / n_segments)`.

use std::collections::VecDeque;

use super::{relabel_contiguous, smoothed_planes, SegmentError, SlicParams};
use crate::model::{Image, SegmentationMap};

const ITERATIONS: usize = 10;

#[derive(Debug, Clone, Copy)]
struct Centre {
    y: f64,
    x: f64,
    colour: [f64; 3],
}

pub fn slic(image: &Image, params: &SlicParams) -> Result<SegmentationMap, SegmentError> {
    if params.n_segments < 1 {
        return Err(SegmentError::InvalidParams("n_segments must be >= 1".into()));
    }
    if !(params.compactness > 0.0 && params.compactness.is_finite()) {
        return Err(SegmentError::InvalidParams(format!(
            "compactness {} must be positive",
            params.compactness
        )));
    }
    if !(params.sigma >= 0.0 && params.sigma.is_finite()) {
        return Err(SegmentError::InvalidParams(format!("sigma {} < 0", params.sigma)));
    }
    if params.start_label != 0 {
        return Err(SegmentError::InvalidParams(
            "start_label must be 0 (labels are always 0-based)".into(),
        ));
    }

    let (w, h) = (image.width() as usize, image.height() as usize);
    let mut planes = smoothed_planes(image, params.sigma);
    for plane in &mut planes {
        for v in plane.iter_mut() {
            *v *= 100.0 / 255.0;
        }
    }
    let colour_at = |p: usize| [planes[0][p], planes[1][p], planes[2][p]];

    let step = ((w * h) as f64 / params.n_segments as f64).sqrt();
    let rows = ((h as f64 / step).round() as usize).max(1);
    let cols = ((w as f64 / step).round() as usize).max(1);
    let mut centres = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let y = (i as f64 + 0.5) * h as f64 / rows as f64;
            let x = (j as f64 + 0.5) * w as f64 / cols as f64;
            let p = (y.floor() as usize).min(h - 1) * w + (x.floor() as usize).min(w - 1);
            centres.push(Centre { y, x, colour: colour_at(p) });
        }
    }

    let spatial_weight = (params.compactness / step).powi(2);
    let reach = (2.0 * step).ceil();
    let mut assignment = vec![0usize; w * h];
    let mut distance = vec![f64::INFINITY; w * h];
    for _ in 0..ITERATIONS {
        distance.fill(f64::INFINITY);
        for (k, c) in centres.iter().enumerate() {
            let y0 = (c.y - reach).max(0.0) as usize;
            let y1 = ((c.y + reach).ceil() as usize).min(h);
            let x0 = (c.x - reach).max(0.0) as usize;
            let x1 = ((c.x + reach).ceil() as usize).min(w);
            for y in y0..y1 {
                for x in x0..x1 {
                    let p = y * w + x;
                    let dc: f64 = (0..3).map(|ch| (planes[ch][p] - c.colour[ch]).powi(2)).sum();
                    let ds = (y as f64 - c.y).powi(2) + (x as f64 - c.x).powi(2);
                    let d = dc + ds * spatial_weight;
                    if d < distance[p] {
                        distance[p] = d;
                        assignment[p] = k;
                    }
                }
            }
        }

        let mut sums = vec![[0.0f64; 6]; centres.len()];
        for (p, &k) in assignment.iter().enumerate() {
            if distance[p].is_infinite() {
                continue;
            }
            let s = &mut sums[k];
            s[0] += 1.0;
            s[1] += (p / w) as f64;
            s[2] += (p % w) as f64;
            for ch in 0..3 {
                s[3 + ch] += planes[ch][p];
            }
        }
        for (c, s) in centres.iter_mut().zip(&sums) {
            if s[0] > 0.0 {
                c.y = s[1] / s[0];
                c.x = s[2] / s[0];
                c.colour = [s[3] / s[0], s[4] / s[0], s[5] / s[0]];
            }
        }
    }

    let min_size = (0.5 * (w * h) as f64 / centres.len() as f64) as usize;
    let labels = enforce_connectivity(&assignment, w, h, min_size);
    Ok(relabel_contiguous(image.width(), image.height(), &labels))
}

/// Splits clusters into 4-connected components (raster order). A component
/// smaller than `min_size` takes the label of an already-labeled component
/// touching its first pixel.
fn enforce_connectivity(assignment: &[usize], w: usize, h: usize, min_size: usize) -> Vec<u32> {
    const UNSET: u32 = u32::MAX;
    let mut labels = vec![UNSET; w * h];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    let mut component = Vec::new();
    for start in 0..w * h {
        if labels[start] != UNSET {
            continue;
        }
        let (sy, sx) = (start / w, start % w);
        let adjacent = [
            (sx > 0).then(|| start - 1),
            (sy > 0).then(|| start - w),
            (sx + 1 < w).then(|| start + 1),
            (sy + 1 < h).then(|| start + w),
        ]
        .into_iter()
        .flatten()
        .map(|q| labels[q])
        .find(|&l| l != UNSET);

        let cluster = assignment[start];
        labels[start] = next;
        queue.push_back(start);
        component.clear();
        while let Some(p) = queue.pop_front() {
            component.push(p);
            let (y, x) = (p / w, p % w);
            let neighbours = [
                (x > 0).then(|| p - 1),
                (x + 1 < w).then(|| p + 1),
                (y > 0).then(|| p - w),
                (y + 1 < h).then(|| p + w),
            ];
            for q in neighbours.into_iter().flatten() {
                if labels[q] == UNSET && assignment[q] == cluster {
                    labels[q] = next;
                    queue.push_back(q);
                }
            }
        }
        match adjacent {
            Some(l) if component.len() < min_size => {
                for &p in &component {
                    labels[p] = l;
                }
            }
            _ => next += 1,
        }
    }
    labels
}
