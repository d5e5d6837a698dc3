//! Felzenszwalb-Huttenlocher graph segmentation on the 8-connected grid.
//!
//! Edge weights are Euclidean RGB distances (byte scale) after Gaussian
//! smoothing with radius `ceil(4 sigma)`.

use super::{relabel_contiguous, smoothed_planes, FelzenszwalbParams, SegmentError};
use crate::model::{Image, SegmentationMap};

struct Forest {
    parent: Vec<usize>,
    size: Vec<usize>,
    internal: Vec<f64>,
}

impl Forest {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
            internal: vec![0.0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Joins two roots; the larger one stays root (lower index on equal size).
    fn join(&mut self, a: usize, b: usize, weight: f64) {
        let (big, small) = match self.size[a].cmp(&self.size[b]) {
            std::cmp::Ordering::Less => (b, a),
            std::cmp::Ordering::Greater => (a, b),
            std::cmp::Ordering::Equal => (a.min(b), a.max(b)),
        };
        self.parent[small] = big;
        self.size[big] += self.size[small];
        self.internal[big] = weight;
    }
}

pub fn felzenszwalb(
    image: &Image,
    params: &FelzenszwalbParams,
) -> Result<SegmentationMap, SegmentError> {
    if !(params.scale > 0.0 && params.scale.is_finite()) {
        return Err(SegmentError::InvalidParams(format!("scale {} must be positive", params.scale)));
    }
    if !(params.sigma >= 0.0 && params.sigma.is_finite()) {
        return Err(SegmentError::InvalidParams(format!("sigma {} < 0", params.sigma)));
    }

    let (w, h) = (image.width() as usize, image.height() as usize);
    let planes = smoothed_planes(image, params.sigma);
    let diff = |a: usize, b: usize| -> f64 {
        (0..3).map(|c| (planes[c][a] - planes[c][b]).powi(2)).sum::<f64>().sqrt()
    };

    let mut edges: Vec<(f64, usize, usize)> = Vec::with_capacity(4 * w * h);
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            if x + 1 < w {
                edges.push((diff(p, p + 1), p, p + 1));
            }
            if y + 1 < h {
                edges.push((diff(p, p + w), p, p + w));
                if x + 1 < w {
                    edges.push((diff(p, p + w + 1), p, p + w + 1));
                }
                if x > 0 {
                    edges.push((diff(p, p + w - 1), p, p + w - 1));
                }
            }
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut forest = Forest::new(w * h);
    for &(weight, a, b) in &edges {
        let (ra, rb) = (forest.find(a), forest.find(b));
        if ra == rb {
            continue;
        }
        let ta = forest.internal[ra] + params.scale / forest.size[ra] as f64;
        let tb = forest.internal[rb] + params.scale / forest.size[rb] as f64;
        if weight <= ta.min(tb) {
            forest.join(ra, rb, weight);
        }
    }

    // small components go to the neighbour across their cheapest edge
    for &(weight, a, b) in &edges {
        let (ra, rb) = (forest.find(a), forest.find(b));
        if ra != rb && (forest.size[ra] < params.min_size || forest.size[rb] < params.min_size) {
            forest.join(ra, rb, weight);
        }
    }

    let labels: Vec<u32> = (0..w * h).map(|p| forest.find(p) as u32).collect();
    Ok(relabel_contiguous(image.width(), image.height(), &labels))
}
