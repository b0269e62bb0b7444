//! Detection-to-tracklet association with motion gating, appearance
//! similarity and a two-stage assignment, plus the tracklet lifecycle.

mod kalman;
mod similarity;

use std::collections::VecDeque;

pub use kalman::{measure, KalmanFilter, KalmanNoise, KalmanState, Measurement};
pub use similarity::{cosine, rsm, similarity, ObjectFeatures, SimilarityMode};

use crate::assign::{solve, CostMatrix};
use crate::error::{Error, Result};
use crate::features::prepare_features;
use crate::geom::{mask_to_box, pose_to_mask, BBox, Mask, Skeleton, SKELETON_WIDTH_COEFF};
use crate::labelprop::{grid_to_pixel, pixel_to_grid};
use crate::types::{FeatureMap, Observation, Shape};

/// 95% quantile of the chi-square distribution with four degrees of freedom.
pub const CHI2_4_95: f64 = 9.4877;

#[derive(Debug, Clone, PartialEq)]
pub struct AssocConfig {
    /// Weight of the appearance cost against the motion cost in stage one.
    pub cost_weight: f64,
    /// Squared Mahalanobis distance above which a pair is forbidden.
    pub gate: f64,
    /// Minimum IoU for a stage-two match.
    pub iou_threshold: f64,
    /// Seconds a tracklet may go unmatched before removal.
    pub inactive_patience: f64,
    pub fps: f64,
    pub similarity: SimilarityMode,
    /// Without motion cues stage one uses appearance alone and no gate.
    pub use_motion: bool,
    /// Number of past observations kept per tracklet.
    pub history: usize,
    /// `(rows, cols)` resampling grid for flattened features.
    pub gf_grid: (usize, usize),
    pub standardize_features: bool,
    pub skeleton: Skeleton,
    pub skeleton_width: f64,
    pub noise: KalmanNoise,
}

impl Default for AssocConfig {
    fn default() -> Self {
        AssocConfig {
            cost_weight: 0.99,
            gate: CHI2_4_95,
            iou_threshold: 0.5,
            inactive_patience: 1.0,
            fps: 30.0,
            similarity: SimilarityMode::Rsm,
            use_motion: true,
            history: 1,
            gf_grid: (8, 4),
            standardize_features: true,
            skeleton: Skeleton::default(),
            skeleton_width: SKELETON_WIDTH_COEFF,
            noise: KalmanNoise::default(),
        }
    }
}

impl AssocConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.cost_weight) {
            return Err(Error::Config("cost weight must lie in [0, 1]".into()));
        }
        if !(self.gate > 0.0) {
            return Err(Error::Config("gate threshold must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.iou_threshold) {
            return Err(Error::Config("iou threshold must lie in [0, 1]".into()));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::Config("fps must be positive".into()));
        }
        if !(self.inactive_patience >= 0.0) {
            return Err(Error::Config("inactive patience must be non-negative".into()));
        }
        if self.history == 0 {
            return Err(Error::Config("history must hold at least one entry".into()));
        }
        if self.gf_grid.0 == 0 || self.gf_grid.1 == 0 {
            return Err(Error::Config("flattened-feature grid must be non-empty".into()));
        }
        Ok(())
    }

    /// Frames a tracklet may stay unmatched before it is dropped.
    pub fn patience_frames(&self) -> f64 {
        self.fps * self.inactive_patience
    }
}

/// Bilinear sample of a prepared feature map at a continuous grid position.
fn sample(fm: &FeatureMap, gy: f64, gx: f64) -> Vec<f32> {
    let (h, w) = (fm.height(), fm.width());
    let y = gy.clamp(0.0, (h - 1) as f64);
    let x = gx.clamp(0.0, (w - 1) as f64);
    let (y0, x0) = (y.floor() as usize, x.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
    let (fy, fx) = ((y - y0 as f64) as f32, (x - x0 as f64) as f32);
    let mut out = vec![0.0f32; fm.channels()];
    for (r, c, wgt) in [
        (y0, x0, (1.0 - fy) * (1.0 - fx)),
        (y0, x1, (1.0 - fy) * fx),
        (y1, x0, fy * (1.0 - fx)),
        (y1, x1, fy * fx),
    ] {
        for (o, v) in out.iter_mut().zip(fm.point(r, c)) {
            *o += wgt * v;
        }
    }
    let n = out.iter().map(|v| v * v).sum::<f32>().sqrt();
    if n > 0.0 {
        out.iter_mut().for_each(|v| *v /= n);
    }
    out
}

fn nearest_cell(fm: &FeatureMap, u: f64, v: f64) -> (usize, usize) {
    let s = fm.stride();
    let r = pixel_to_grid(v, s).round().clamp(0.0, (fm.height() - 1) as f64) as usize;
    let c = pixel_to_grid(u, s).round().clamp(0.0, (fm.width() - 1) as f64) as usize;
    (r, c)
}

/// Gathers the listed cells, with the cell nearest the box center as the
/// object's center point.
fn gather(fm: &FeatureMap, cells: &[(usize, usize)], b: &BBox) -> Result<ObjectFeatures> {
    let (cr, cc) = nearest_cell(fm, b.u, b.v);
    let center = cells
        .iter()
        .enumerate()
        .min_by_key(|(_, &(r, c))| r.abs_diff(cr).pow(2) + c.abs_diff(cc).pow(2))
        .map_or(0, |(i, _)| i);
    let points = cells
        .iter()
        .flat_map(|&(r, c)| fm.point(r, c).iter().copied())
        .collect();
    ObjectFeatures::new(fm.channels(), points, center)
}

fn box_cells(fm: &FeatureMap, b: &BBox) -> Vec<(usize, usize)> {
    let s = fm.stride();
    let mut cells = Vec::new();
    for r in 0..fm.height() {
        let y = grid_to_pixel(r as f64, s);
        if y < b.top() || y > b.bottom() {
            continue;
        }
        for c in 0..fm.width() {
            let x = grid_to_pixel(c as f64, s);
            if x >= b.left() && x <= b.right() {
                cells.push((r, c));
            }
        }
    }
    if cells.is_empty() {
        cells.push(nearest_cell(fm, b.u, b.v));
    }
    cells
}

fn mask_cells(fm: &FeatureMap, mask: &Mask, b: &BBox) -> Vec<(usize, usize)> {
    let s = fm.stride() as usize;
    let mut cells = Vec::new();
    for r in 0..fm.height() {
        for c in 0..fm.width() {
            let (x, y) = (c * s + s / 2, r * s + s / 2);
            if x < mask.width() && y < mask.height() && mask.get(x, y) {
                cells.push((r, c));
            }
        }
    }
    if cells.is_empty() {
        let mut touched: Vec<(usize, usize)> = mask
            .pixels()
            .map(|(x, y)| (y / s, x / s))
            .filter(|&(r, c)| r < fm.height() && c < fm.width())
            .collect();
        touched.sort_unstable();
        touched.dedup();
        cells = touched;
    }
    if cells.is_empty() {
        cells.push(nearest_cell(fm, b.u, b.v));
    }
    cells
}

/// Box and object-level features of an observation on a prepared map.
///
/// Boxes take the cells whose centers fall inside them, masks the cells
/// whose center pixel is set, and poses are rasterized to a skeleton mask
/// first. In [`SimilarityMode::Gf`] every object is instead resampled on the
/// fixed `gf_grid` spanning its box.
pub fn object_features(
    fm: &FeatureMap,
    shape: &Shape,
    cfg: &AssocConfig,
) -> Result<(BBox, ObjectFeatures)> {
    let s = fm.stride() as usize;
    let pose_mask;
    let (bbox, mask) = match shape {
        Shape::Box(b) => (*b, None),
        Shape::Mask(m) => (mask_to_box(m)?, Some(m)),
        Shape::Pose(p) => {
            pose_mask = pose_to_mask(
                p,
                &cfg.skeleton,
                fm.width() * s,
                fm.height() * s,
                cfg.skeleton_width,
            )?;
            (mask_to_box(&pose_mask)?, Some(&pose_mask))
        }
    };
    if cfg.similarity == SimilarityMode::Gf {
        let (gr, gc) = cfg.gf_grid;
        let mut points = Vec::with_capacity(gr * gc * fm.channels());
        for i in 0..gr {
            let y = bbox.top() + (i as f64 + 0.5) * bbox.h / gr as f64;
            for j in 0..gc {
                let x = bbox.left() + (j as f64 + 0.5) * bbox.w / gc as f64;
                points.extend(sample(fm, pixel_to_grid(y, fm.stride()), pixel_to_grid(x, fm.stride())));
            }
        }
        let center = (gr / 2) * gc + gc / 2;
        return Ok((bbox, ObjectFeatures::new(fm.channels(), points, center)?));
    }
    let cells = match mask {
        Some(m) => mask_cells(fm, m, &bbox),
        None => box_cells(fm, &bbox),
    };
    Ok((bbox, gather(fm, &cells, &bbox)?))
}

/// A detection ready for association.
#[derive(Debug, Clone)]
pub struct Detection {
    pub observation: Observation,
    pub bbox: BBox,
    pub features: ObjectFeatures,
}

impl Detection {
    pub fn new(observation: Observation, fm: &FeatureMap, cfg: &AssocConfig) -> Result<Self> {
        let (bbox, features) = object_features(fm, &observation.shape, cfg)?;
        Ok(Detection {
            observation,
            bbox,
            features,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Tentative,
    Active,
    Inactive,
}

#[derive(Debug, Clone)]
pub struct Tracklet {
    /// Assigned on promotion out of the tentative state.
    pub id: Option<u64>,
    pub state: KalmanState,
    pub status: TrackStatus,
    pub inactive_since: Option<usize>,
    /// Consecutive frames without a match.
    pub missed: usize,
    pub history: VecDeque<ObjectFeatures>,
    pub class_id: i32,
    pub last_observation: Observation,
}

impl Tracklet {
    /// Appearance used for matching: the concatenated history, or only the
    /// latest entry for flattened features.
    pub fn appearance(&self, mode: SimilarityMode) -> Result<ObjectFeatures> {
        if mode == SimilarityMode::Gf {
            return self.history.back().cloned().ok_or(Error::EmptyFeature(0));
        }
        let parts: Vec<&ObjectFeatures> = self.history.iter().collect();
        ObjectFeatures::concat(&parts)
    }
}

/// Outcome of one association round, as indices into the inputs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Association {
    pub first_stage: Vec<(usize, usize)>,
    pub second_stage: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

impl Association {
    /// All matches of both stages, sorted by tracklet.
    pub fn matches(&self) -> Vec<(usize, usize)> {
        let mut all: Vec<_> = self.first_stage.iter().chain(&self.second_stage).copied().collect();
        all.sort_unstable();
        all
    }
}

/// Two-stage matching of predicted tracklets to detections.
///
/// Stage one combines appearance cost `1 - similarity` with the squared
/// Mahalanobis distance, forbidding out-of-gate pairs; without motion cues
/// it is appearance only. Stage two matches the leftovers on `1 - IoU`
/// between predicted and detected boxes. Pairs of different classes never
/// match.
pub fn associate_frame(
    tracks: &[Tracklet],
    dets: &[Detection],
    cfg: &AssocConfig,
    kf: &KalmanFilter,
) -> Result<Association> {
    let (n, m) = (tracks.len(), dets.len());
    let mut out = Association::default();
    if n == 0 || m == 0 {
        out.unmatched_tracks = (0..n).collect();
        out.unmatched_detections = (0..m).collect();
        return Ok(out);
    }
    let track_feats = tracks
        .iter()
        .map(|t| t.appearance(cfg.similarity))
        .collect::<Result<Vec<_>>>()?;
    let det_feats: Vec<ObjectFeatures> = dets.iter().map(|d| d.features.clone()).collect();
    let sim = similarity(cfg.similarity, &track_feats, &det_feats)?;

    let mut stage1 = CostMatrix::from_fn(n, m, |_, _| 0.0);
    for (i, t) in tracks.iter().enumerate() {
        for (j, d) in dets.iter().enumerate() {
            if t.class_id != d.observation.class_id {
                stage1.forbid(i, j);
                continue;
            }
            let appearance = 1.0 - sim[i][j];
            if cfg.use_motion {
                let motion = kf.mahalanobis(&t.state, &measure(&d.bbox))?;
                if motion > cfg.gate {
                    stage1.forbid(i, j);
                    continue;
                }
                stage1.set(i, j, cfg.cost_weight * appearance + (1.0 - cfg.cost_weight) * motion);
            } else {
                stage1.set(i, j, appearance);
            }
        }
    }
    let first = solve(&stage1);
    let mut track_used = vec![false; n];
    let mut det_used = vec![false; m];
    for &(i, j) in &first {
        track_used[i] = true;
        det_used[j] = true;
    }
    out.first_stage = first;

    let rest_t: Vec<usize> = (0..n).filter(|&i| !track_used[i]).collect();
    let rest_d: Vec<usize> = (0..m).filter(|&j| !det_used[j]).collect();
    if !rest_t.is_empty() && !rest_d.is_empty() {
        let mut stage2 = CostMatrix::from_fn(rest_t.len(), rest_d.len(), |_, _| 0.0);
        for (a, &i) in rest_t.iter().enumerate() {
            let predicted = tracks[i].state.to_box();
            for (b, &j) in rest_d.iter().enumerate() {
                let iou = predicted.iou(&dets[j].bbox);
                if tracks[i].class_id != dets[j].observation.class_id || iou < cfg.iou_threshold {
                    stage2.forbid(a, b);
                } else {
                    stage2.set(a, b, 1.0 - iou);
                }
            }
        }
        for (a, b) in solve(&stage2) {
            let (i, j) = (rest_t[a], rest_d[b]);
            track_used[i] = true;
            det_used[j] = true;
            out.second_stage.push((i, j));
        }
    }
    out.unmatched_tracks = (0..n).filter(|&i| !track_used[i]).collect();
    out.unmatched_detections = (0..m).filter(|&j| !det_used[j]).collect();
    Ok(out)
}

/// One confirmed output: the observation assigned to an id in a frame.
#[derive(Debug, Clone)]
pub struct TrackOutput {
    pub frame: usize,
    pub id: u64,
    pub observation: Observation,
}

/// Online multi-object tracker for one video.
#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: AssocConfig,
    kf: KalmanFilter,
    tracks: Vec<Tracklet>,
    next_id: u64,
}

impl Tracker {
    pub fn new(cfg: AssocConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Tracker {
            kf: KalmanFilter::new(cfg.noise.clone()),
            cfg,
            tracks: Vec::new(),
            next_id: 1,
        })
    }

    pub fn config(&self) -> &AssocConfig {
        &self.cfg
    }

    pub fn tracklets(&self) -> &[Tracklet] {
        &self.tracks
    }

    /// Processes one frame. `features` is the raw feature map of the frame.
    ///
    /// Observations whose shape cannot be turned into a box (empty mask,
    /// pose with too few visible keypoints) are ignored.
    pub fn step(
        &mut self,
        frame: usize,
        observations: &[Observation],
        features: &FeatureMap,
    ) -> Result<Vec<TrackOutput>> {
        let fm = prepare_features(features, self.cfg.standardize_features);
        let mut dets = Vec::with_capacity(observations.len());
        for obs in observations {
            match Detection::new(obs.clone(), &fm, &self.cfg) {
                Ok(d) => dets.push(d),
                Err(Error::EmptyMask | Error::DegeneratePose(_)) => {}
                Err(e) => return Err(e),
            }
        }
        for t in &mut self.tracks {
            t.state = self.kf.predict(&t.state);
        }
        let assoc = associate_frame(&self.tracks, &dets, &self.cfg, &self.kf)?;
        self.apply(frame, assoc, dets)
    }

    fn apply(&mut self, frame: usize, assoc: Association, dets: Vec<Detection>) -> Result<Vec<TrackOutput>> {
        let mut outputs = Vec::new();
        let mut keep = vec![true; self.tracks.len()];
        let mut dets: Vec<Option<Detection>> = dets.into_iter().map(Some).collect();
        for (i, j) in assoc.matches() {
            let det = dets[j].take().expect("each detection matches once");
            let t = &mut self.tracks[i];
            t.state = self.kf.update(&t.state, &measure(&det.bbox))?;
            if t.status == TrackStatus::Tentative {
                let id = self.next_id;
                self.next_id += 1;
                t.id = Some(id);
                outputs.push(TrackOutput {
                    frame: t.last_observation.frame,
                    id,
                    observation: t.last_observation.clone(),
                });
            }
            t.status = TrackStatus::Active;
            t.inactive_since = None;
            t.missed = 0;
            t.history.push_back(det.features);
            while t.history.len() > self.cfg.history {
                t.history.pop_front();
            }
            let mut obs = det.observation;
            obs.frame = frame;
            t.last_observation = obs.clone();
            outputs.push(TrackOutput {
                frame,
                id: t.id.expect("active tracklets carry an id"),
                observation: obs,
            });
        }
        let patience = self.cfg.patience_frames();
        for &i in &assoc.unmatched_tracks {
            let t = &mut self.tracks[i];
            t.missed += 1;
            match t.status {
                TrackStatus::Tentative => keep[i] = false,
                TrackStatus::Active => {
                    t.status = TrackStatus::Inactive;
                    t.inactive_since = Some(frame);
                }
                TrackStatus::Inactive => {}
            }
            if t.missed as f64 > patience {
                keep[i] = false;
            }
        }
        let mut idx = 0;
        self.tracks.retain(|_| {
            idx += 1;
            keep[idx - 1]
        });
        for det in dets.into_iter().flatten() {
            let mut history = VecDeque::with_capacity(self.cfg.history);
            history.push_back(det.features);
            let mut obs = det.observation;
            obs.frame = frame;
            self.tracks.push(Tracklet {
                id: None,
                state: self.kf.initiate(&measure(&det.bbox)),
                status: TrackStatus::Tentative,
                inactive_since: None,
                missed: 0,
                history,
                class_id: obs.class_id,
                last_observation: obs,
            });
        }
        outputs.sort_by_key(|o| (o.frame, o.id));
        Ok(outputs)
    }
}
