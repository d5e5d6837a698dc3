use serde::{Deserialize, Serialize};

use super::ModelError;

/// A partition of an image into `segment_count` superpixels with labels
/// `0..segment_count`, each used at least once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationMap {
    width: u32,
    height: u32,
    labels: Vec<u32>,
    segment_count: usize,
}

impl SegmentationMap {
    /// Validates that `labels` is a contiguous partition.
    pub fn new(width: u32, height: u32, labels: Vec<u32>) -> Result<Self, ModelError> {
        if width == 0 || height == 0 {
            return Err(ModelError::InvalidDimensions {
                width: width as u64,
                height: height as u64,
                reason: "empty label field",
            });
        }
        if (width as u64) * (height as u64) != labels.len() as u64 {
            return Err(ModelError::InvalidDimensions {
                width: width as u64,
                height: height as u64,
                reason: "label count is not width*height",
            });
        }
        let max = *labels.iter().max().expect("non-empty") as usize;
        if max >= labels.len() {
            return Err(ModelError::InvalidLabels(format!(
                "label {max} exceeds pixel count"
            )));
        }
        let mut seen = vec![false; max + 1];
        for &l in &labels {
            seen[l as usize] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(ModelError::InvalidLabels(format!(
                "label {missing} unused"
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
            segment_count: max + 1,
        })
    }

    /// Caller guarantees contiguity (used by the segmenters after relabeling).
    pub(crate) fn from_contiguous(
        width: u32,
        height: u32,
        labels: Vec<u32>,
        segment_count: usize,
    ) -> Self {
        debug_assert_eq!(labels.len(), width as usize * height as usize);
        Self {
            width,
            height,
            labels,
            segment_count,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn segment_count(&self) -> usize {
        self.segment_count
    }

    pub fn label(&self, x: u32, y: u32) -> u32 {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    /// Pixel count per segment.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.segment_count];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }
}

/// Segment ids ordered by descending mean saliency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSegments {
    pub order: Vec<u32>,
    /// Mean saliency of `order[i]`, non-increasing.
    pub means: Vec<f64>,
    /// Some pair of segments had exactly equal means.
    pub has_ties: bool,
}

impl RankedSegments {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub label: u32,
    pub adapter_id: String,
}
