//! Value types passed between the propagation and association stages.

use crate::error::{Error, Result};
use crate::geom::{BBox, Mask, Pose};

/// Dense `height x width x channels` grid of point vectors sampled every
/// `stride` image pixels. Storage is row-major with channels fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    channels: usize,
    stride: u32,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        stride: u32,
        data: Vec<f32>,
    ) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::dim(format!(
                "feature map dims must be positive, got {height}x{width}x{channels}"
            )));
        }
        if stride == 0 {
            return Err(Error::dim("feature map stride must be positive"));
        }
        if data.len() != height * width * channels {
            return Err(Error::dim(format!(
                "feature map {height}x{width}x{channels} needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("feature map contains non-finite values".into()));
        }
        Ok(FeatureMap {
            height,
            width,
            channels,
            stride,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize, stride: u32) -> Result<Self> {
        Self::new(
            height,
            width,
            channels,
            stride,
            vec![0.0; height * width * channels],
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn stride(&self) -> u32 {
        self.stride
    }

    /// Number of grid cells (`height * width`).
    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Point vector at `(row, col)`.
    pub fn point(&self, row: usize, col: usize) -> &[f32] {
        let start = (row * self.width + col) * self.channels;
        &self.data[start..start + self.channels]
    }

    pub fn point_mut(&mut self, row: usize, col: usize) -> &mut [f32] {
        let start = (row * self.width + col) * self.channels;
        &mut self.data[start..start + self.channels]
    }

    /// Point vector by flat cell index.
    pub fn cell(&self, index: usize) -> &[f32] {
        &self.data[index * self.channels..(index + 1) * self.channels]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.channels)
    }

    pub fn same_grid(&self, other: &FeatureMap) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }
}

/// Per-object soft labels on a feature grid plus a background channel.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    objects: Vec<Vec<f32>>,
    background: Vec<f32>,
}

impl LabelMap {
    pub fn new(
        height: usize,
        width: usize,
        objects: Vec<Vec<f32>>,
        background: Vec<f32>,
    ) -> Result<Self> {
        let cells = height * width;
        if cells == 0 {
            return Err(Error::dim("label map must have at least one cell"));
        }
        if background.len() != cells || objects.iter().any(|o| o.len() != cells) {
            return Err(Error::dim(format!(
                "label channels must hold {cells} cells for a {height}x{width} grid"
            )));
        }
        let in_range = |v: &f32| (0.0..=1.0).contains(v);
        if !background.iter().all(in_range) || !objects.iter().flatten().all(in_range) {
            return Err(Error::Format("label values must lie in [0, 1]".into()));
        }
        Ok(LabelMap {
            height,
            width,
            objects,
            background,
        })
    }

    /// Builds a label map whose background is `1 - max` over the object
    /// channels at each cell.
    pub fn from_objects(height: usize, width: usize, objects: Vec<Vec<f32>>) -> Result<Self> {
        let cells = height * width;
        let background = (0..cells)
            .map(|i| {
                let peak = objects
                    .iter()
                    .map(|o| o.get(i).copied().unwrap_or(0.0))
                    .fold(0.0f32, f32::max);
                (1.0 - peak).clamp(0.0, 1.0)
            })
            .collect();
        Self::new(height, width, objects, background)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_objects(&self) -> usize {
        self.objects.len()
    }

    pub fn objects(&self) -> &[Vec<f32>] {
        &self.objects
    }

    pub fn object(&self, k: usize) -> &[f32] {
        &self.objects[k]
    }

    pub fn background(&self) -> &[f32] {
        &self.background
    }

    /// Channel `0` is background, `1..=K` are the objects.
    pub fn channel(&self, index: usize) -> &[f32] {
        if index == 0 {
            &self.background
        } else {
            &self.objects[index - 1]
        }
    }

    pub fn num_channels(&self) -> usize {
        self.objects.len() + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Box(BBox),
    Mask(Mask),
    Pose(Pose),
}

/// One externally supplied detection.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub frame: usize,
    pub shape: Shape,
    pub class_id: i32,
    pub confidence: f32,
}

impl Observation {
    pub fn new(frame: usize, shape: Shape) -> Self {
        Observation {
            frame,
            shape,
            class_id: 0,
            confidence: 1.0,
        }
    }

    pub fn with_class(mut self, class_id: i32) -> Self {
        self.class_id = class_id;
        self
    }

    pub fn with_confidence(mut self, confidence: f32) -> Self {
        self.confidence = confidence.clamp(0.0, 1.0);
        self
    }
}
