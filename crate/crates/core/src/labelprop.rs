//! Soft label propagation by local, top-K truncated feature attention.
//!
//! Masks and pose belief maps are both carried as [`LabelMap`]s on the
//! feature grid. Each target cell pulls labels from the memory bank cells
//! within a local window, weighted by a softmax over feature inner products.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::prepare_features;
use crate::geom::{body_size, LabelImage, Mask, Pose};
use crate::types::{FeatureMap, LabelMap};

#[derive(Debug, Clone, PartialEq)]
pub struct PropConfig {
    pub temperature: f64,
    pub memory_size: usize,
    /// Window radius in grid cells.
    pub radius: usize,
    /// Use a Euclidean disc instead of the square (Chebyshev) window.
    pub circular: bool,
    pub topk: usize,
    /// Belief-map spread relative to body size.
    pub gaussian_coeff: f64,
    /// Channel peak below which a propagated keypoint is reported hidden.
    pub visibility_threshold: f64,
    /// Standardize each frame's channels before normalizing points.
    pub standardize_features: bool,
    /// Working resolution `(height, width)` for mask propagation.
    pub mask_size: (usize, usize),
    /// Working resolution `(height, width)` for pose propagation.
    pub pose_size: (usize, usize),
}

impl Default for PropConfig {
    fn default() -> Self {
        PropConfig {
            temperature: 0.05,
            memory_size: 6,
            radius: 12,
            circular: false,
            topk: 10,
            gaussian_coeff: 0.01,
            visibility_threshold: 0.1,
            standardize_features: true,
            mask_size: (480, 640),
            pose_size: (320, 320),
        }
    }
}

impl PropConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config("temperature must be positive".into()));
        }
        if self.memory_size == 0 {
            return Err(Error::Config("memory size must be at least 1".into()));
        }
        if self.radius == 0 {
            return Err(Error::Config("radius must be at least 1".into()));
        }
        if self.topk == 0 {
            return Err(Error::Config("topk must be at least 1".into()));
        }
        if !(self.gaussian_coeff >= 0.0 && self.gaussian_coeff.is_finite()) {
            return Err(Error::Config("gaussian coefficient must be non-negative".into()));
        }
        Ok(())
    }
}

/// Pinned first frame plus the most recent `capacity - 1` entries.
#[derive(Debug, Clone)]
pub struct MemoryBank {
    capacity: usize,
    entries: Vec<(FeatureMap, LabelMap)>,
}

impl MemoryBank {
    pub fn new(capacity: usize) -> Self {
        MemoryBank {
            capacity: capacity.max(1),
            entries: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(FeatureMap, LabelMap)] {
        &self.entries
    }

    /// Appends an entry, evicting the oldest entry after the first once
    /// the bank is over capacity.
    pub fn push(&mut self, features: FeatureMap, labels: LabelMap) -> Result<()> {
        if labels.height() != features.height() || labels.width() != features.width() {
            return Err(Error::dim(format!(
                "labels {}x{} do not cover features {}x{}",
                labels.height(),
                labels.width(),
                features.height(),
                features.width()
            )));
        }
        if let Some((f0, l0)) = self.entries.first() {
            if !f0.same_grid(&features) {
                return Err(Error::dim("memory entries must share grid and channels"));
            }
            if l0.num_objects() != labels.num_objects() {
                return Err(Error::dim(format!(
                    "memory holds {} label channels, got {}",
                    l0.num_objects(),
                    labels.num_objects()
                )));
            }
        }
        self.entries.push((features, labels));
        while self.entries.len() > self.capacity {
            self.entries.remove(1);
        }
        Ok(())
    }
}

/// One non-zero transition weight: memory entry, source cell, weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weight {
    pub entry: usize,
    pub cell: usize,
    pub weight: f64,
}

fn in_window(cfg: &PropConfig, dr: usize, dc: usize) -> bool {
    if cfg.circular {
        dr * dr + dc * dc <= cfg.radius * cfg.radius
    } else {
        dr <= cfg.radius && dc <= cfg.radius
    }
}

/// Attention weights for the target cell at `(row, col)`.
///
/// Scores every in-window source of every memory entry, keeps the `topk`
/// largest and softmaxes over them (the same as a full softmax truncated
/// and renormalized). Exact score ties keep the earlier entry and cell.
pub fn transition_row(
    memory: &[&FeatureMap],
    target: &FeatureMap,
    row: usize,
    col: usize,
    cfg: &PropConfig,
) -> Result<Vec<Weight>> {
    let (h, w) = (target.height(), target.width());
    let query = target.point(row, col);
    let r0 = row.saturating_sub(cfg.radius);
    let r1 = (row + cfg.radius).min(h - 1);
    let c0 = col.saturating_sub(cfg.radius);
    let c1 = (col + cfg.radius).min(w - 1);
    let mut scored: Vec<(f64, usize, usize)> = Vec::new();
    for (e, fm) in memory.iter().enumerate() {
        for r in r0..=r1 {
            for c in c0..=c1 {
                if !in_window(cfg, r.abs_diff(row), c.abs_diff(col)) {
                    continue;
                }
                let dot: f64 = fm
                    .point(r, c)
                    .iter()
                    .zip(query)
                    .map(|(a, b)| f64::from(*a) * f64::from(*b))
                    .sum();
                scored.push((dot / cfg.temperature, e, r * w + c));
            }
        }
    }
    if scored.is_empty() {
        return Err(Error::EmptyNeighborhood { row, col });
    }
    let order = |a: &(f64, usize, usize), b: &(f64, usize, usize)| {
        b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2)))
    };
    if scored.len() > cfg.topk {
        scored.select_nth_unstable_by(cfg.topk - 1, order);
        scored.truncate(cfg.topk);
    }
    scored.sort_unstable_by(order);
    let top = scored[0].0;
    let mut total = 0.0;
    let mut out: Vec<Weight> = scored
        .iter()
        .map(|&(s, entry, cell)| {
            let weight = (s - top).exp();
            total += weight;
            Weight {
                entry,
                cell,
                weight,
            }
        })
        .collect();
    out.iter_mut().for_each(|w| w.weight /= total);
    Ok(out)
}

/// Propagates the memory's label maps onto the target feature grid.
///
/// Features in `memory` and `target` are expected to be prepared with
/// [`prepare_features`].
pub fn propagate(memory: &MemoryBank, target: &FeatureMap, cfg: &PropConfig) -> Result<LabelMap> {
    cfg.validate()?;
    let (first, _) = memory.entries.first().ok_or(Error::NotInitialized)?;
    if !first.same_grid(target) {
        return Err(Error::dim(format!(
            "target grid {}x{}x{} differs from memory {}x{}x{}",
            target.height(),
            target.width(),
            target.channels(),
            first.height(),
            first.width(),
            first.channels()
        )));
    }
    let feats: Vec<&FeatureMap> = memory.entries.iter().map(|(f, _)| f).collect();
    let labels: Vec<&LabelMap> = memory.entries.iter().map(|(_, l)| l).collect();
    let (h, w) = (target.height(), target.width());
    let channels = labels[0].num_channels();
    let cells: Vec<Vec<f32>> = (0..h * w)
        .into_par_iter()
        .map(|i| {
            let row = transition_row(&feats, target, i / w, i % w, cfg)?;
            let mut acc = vec![0.0f64; channels];
            for wt in &row {
                let z = labels[wt.entry];
                for (ch, a) in acc.iter_mut().enumerate() {
                    *a += wt.weight * f64::from(z.channel(ch)[wt.cell]);
                }
            }
            Ok(acc.iter().map(|v| v.clamp(0.0, 1.0) as f32).collect())
        })
        .collect::<Result<_>>()?;
    let mut planes = vec![Vec::with_capacity(h * w); channels];
    for cell in &cells {
        for (plane, v) in planes.iter_mut().zip(cell) {
            plane.push(*v);
        }
    }
    let background = planes.remove(0);
    LabelMap::new(h, w, planes, background)
}

/// Soft label map from binary object masks: each cell holds the fraction of
/// its `stride x stride` pixels inside the mask.
pub fn masks_to_labels(masks: &[Mask], grid_h: usize, grid_w: usize, stride: u32) -> Result<LabelMap> {
    let s = stride.max(1) as usize;
    let objects = masks
        .iter()
        .map(|m| {
            let mut plane = vec![0.0f32; grid_h * grid_w];
            for (x, y) in m.pixels() {
                let (r, c) = (y / s, x / s);
                if r < grid_h && c < grid_w {
                    plane[r * grid_w + c] += 1.0;
                }
            }
            let area = (s * s) as f32;
            plane.iter_mut().for_each(|v| *v = (*v / area).min(1.0));
            plane
        })
        .collect();
    LabelMap::from_objects(grid_h, grid_w, objects)
}

/// Per-pixel object ids from a label map. Each cell takes its arg-max
/// channel (background wins ties) and is upsampled by nearest neighbour.
pub fn finalize_mask(z: &LabelMap, stride: u32, width: usize, height: usize) -> LabelImage {
    let (gh, gw) = (z.height(), z.width());
    let winners: Vec<u16> = (0..gh * gw)
        .map(|i| {
            let mut best = (0u16, z.background()[i]);
            for (k, obj) in z.objects().iter().enumerate() {
                if obj[i] > best.1 {
                    best = (k as u16 + 1, obj[i]);
                }
            }
            best.0
        })
        .collect();
    let s = stride.max(1) as usize;
    let mut out = LabelImage::background(width, height);
    for y in 0..height {
        let r = (y / s).min(gh - 1);
        for x in 0..width {
            let c = (x / s).min(gw - 1);
            out.set(x, y, winners[r * gw + c]);
        }
    }
    out
}

/// Pixel coordinate to continuous grid coordinate (cell centers at integers).
pub fn pixel_to_grid(p: f64, stride: u32) -> f64 {
    let s = f64::from(stride);
    (p + 0.5) / s - 0.5
}

pub fn grid_to_pixel(g: f64, stride: u32) -> f64 {
    let s = f64::from(stride);
    (g + 0.5) * s - 0.5
}

/// Belief maps for a pose: one unit-peak Gaussian channel per keypoint,
/// hidden keypoints give all-zero channels. The spread is
/// `max(coeff * body_size, 0.5)` grid cells, with the body size measured in
/// grid units.
pub fn pose_to_beliefs(
    pose: &Pose,
    grid_h: usize,
    grid_w: usize,
    stride: u32,
    coeff: f64,
) -> Result<LabelMap> {
    let grid_pose = Pose::new(
        pose.keypoints
            .iter()
            .map(|k| crate::geom::Keypoint {
                x: pixel_to_grid(k.x, stride),
                y: pixel_to_grid(k.y, stride),
                visible: k.visible,
            })
            .collect(),
    );
    let sigma = belief_sigma(body_size(&grid_pose)?, coeff);
    let denom = 2.0 * sigma * sigma;
    let objects = grid_pose
        .keypoints
        .iter()
        .map(|k| {
            let mut plane = vec![0.0f32; grid_h * grid_w];
            if k.visible {
                for r in 0..grid_h {
                    for c in 0..grid_w {
                        let d2 = (c as f64 - k.x).powi(2) + (r as f64 - k.y).powi(2);
                        plane[r * grid_w + c] = (-d2 / denom).exp() as f32;
                    }
                }
            }
            plane
        })
        .collect();
    LabelMap::from_objects(grid_h, grid_w, objects)
}

pub fn belief_sigma(body_size: f64, coeff: f64) -> f64 {
    (coeff * body_size).max(0.5)
}

/// Reads keypoints back from belief maps: the arg-max cell of each channel,
/// mapped to pixels. Channels peaking below `threshold` are hidden.
pub fn beliefs_to_pose(z: &LabelMap, stride: u32, threshold: f64) -> Pose {
    let w = z.width();
    Pose::new(
        z.objects()
            .iter()
            .map(|plane| {
                let (mut best, mut at) = (f32::NEG_INFINITY, 0usize);
                for (i, &v) in plane.iter().enumerate() {
                    if v > best {
                        best = v;
                        at = i;
                    }
                }
                if f64::from(best) < threshold {
                    return crate::geom::Keypoint::hidden();
                }
                crate::geom::Keypoint::new(
                    grid_to_pixel((at % w) as f64, stride),
                    grid_to_pixel((at / w) as f64, stride),
                )
            })
            .collect(),
    )
}

/// Stateful propagator for one video.
#[derive(Debug, Clone)]
pub struct LabelPropagator {
    cfg: PropConfig,
    memory: MemoryBank,
}

impl LabelPropagator {
    pub fn new(cfg: PropConfig) -> Result<Self> {
        cfg.validate()?;
        let memory = MemoryBank::new(cfg.memory_size);
        Ok(LabelPropagator { cfg, memory })
    }

    pub fn config(&self) -> &PropConfig {
        &self.cfg
    }

    pub fn memory(&self) -> &MemoryBank {
        &self.memory
    }

    /// Seeds the memory with the first frame's raw features and labels.
    pub fn init(&mut self, features: &FeatureMap, labels: LabelMap) -> Result<()> {
        self.memory = MemoryBank::new(self.cfg.memory_size);
        let f = prepare_features(features, self.cfg.standardize_features);
        self.memory.push(f, labels)
    }

    /// Propagates onto the next frame's raw features and remembers the result.
    pub fn step(&mut self, features: &FeatureMap) -> Result<LabelMap> {
        let f = prepare_features(features, self.cfg.standardize_features);
        let z = propagate(&self.memory, &f, &self.cfg)?;
        self.memory.push(f, z.clone())?;
        Ok(z)
    }
}
