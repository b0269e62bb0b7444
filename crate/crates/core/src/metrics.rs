//! Tracking evaluation: CLEAR MOT (MOTA, ID switches), IDF1, mask IoU and
//! PCK.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::assign::{solve, CostMatrix};
use crate::error::{Error, Result};
use crate::geom::{body_size, BBox, Mask, Pose};

/// Spatial extent of one tracked entry.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Box(BBox),
    Mask(Mask),
}

impl Region {
    pub fn iou(&self, other: &Region) -> f64 {
        match (self, other) {
            (Region::Box(a), Region::Box(b)) => a.iou(b),
            (Region::Mask(a), Region::Mask(b)) => mask_iou(a, b),
            (Region::Box(b), Region::Mask(m)) | (Region::Mask(m), Region::Box(b)) => {
                mask_iou(&b.to_mask(m.width(), m.height()), m)
            }
        }
    }
}

/// Identities per frame; at most one entry per `(frame, id)`, ids positive.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackSet {
    frames: BTreeMap<usize, Vec<(u64, Region)>>,
}

impl TrackSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, frame: usize, id: u64, region: Region) -> Result<()> {
        if id == 0 {
            return Err(Error::Format("track ids must be positive".into()));
        }
        let entries = self.frames.entry(frame).or_default();
        if entries.iter().any(|(i, _)| *i == id) {
            return Err(Error::Format(format!("duplicate id {id} in frame {frame}")));
        }
        entries.push((id, region));
        Ok(())
    }

    pub fn frame(&self, frame: usize) -> &[(u64, Region)] {
        self.frames.get(&frame).map_or(&[], Vec::as_slice)
    }

    pub fn frames(&self) -> impl Iterator<Item = (usize, &[(u64, Region)])> {
        self.frames.iter().map(|(f, v)| (*f, v.as_slice()))
    }

    /// First and last frame holding an entry.
    pub fn frame_range(&self) -> Option<(usize, usize)> {
        let first = self.frames.iter().find(|(_, v)| !v.is_empty())?.0;
        let last = self.frames.iter().rev().find(|(_, v)| !v.is_empty())?.0;
        Some((*first, *last))
    }

    pub fn num_entries(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }

    pub fn ids(&self) -> BTreeSet<u64> {
        self.frames.values().flatten().map(|(id, _)| *id).collect()
    }

    /// Copy with every id passed through `f`.
    pub fn relabel(&self, mut f: impl FnMut(u64) -> u64) -> Result<TrackSet> {
        let mut out = TrackSet::new();
        for (frame, entries) in &self.frames {
            for (id, r) in entries {
                out.insert(*frame, f(*id), r.clone())?;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClearMetrics {
    pub mota: f64,
    pub id_switches: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub matches: usize,
    pub num_gt: usize,
}

fn all_frames(gt: &TrackSet, pred: &TrackSet) -> BTreeSet<usize> {
    gt.frames.keys().chain(pred.frames.keys()).copied().collect()
}

/// CLEAR MOT metrics. Ground-truth objects keep last frame's partner while
/// it still overlaps enough; the rest are matched by minimum `1 - IoU`. A
/// switch is counted whenever an object is matched to an id other than the
/// one it was last matched to.
pub fn clear_metrics(gt: &TrackSet, pred: &TrackSet, iou_thresh: f64) -> ClearMetrics {
    let mut last: HashMap<u64, u64> = HashMap::new();
    let mut current: HashMap<u64, u64> = HashMap::new();
    let (mut fp, mut fn_, mut ids, mut tp, mut n_gt) = (0, 0, 0, 0, 0);
    for frame in all_frames(gt, pred) {
        let g = gt.frame(frame);
        let p = pred.frame(frame);
        n_gt += g.len();
        let mut g_used = vec![false; g.len()];
        let mut p_used = vec![false; p.len()];
        let mut pairs = Vec::new();
        // keep matches from the previous frame that still hold
        for (gi, (gid, gr)) in g.iter().enumerate() {
            if let Some(pid) = current.get(gid) {
                if let Some(pi) = p.iter().position(|(id, _)| id == pid) {
                    if !p_used[pi] && gr.iou(&p[pi].1) >= iou_thresh {
                        g_used[gi] = true;
                        p_used[pi] = true;
                        pairs.push((gi, pi));
                    }
                }
            }
        }
        let rest_g: Vec<usize> = (0..g.len()).filter(|&i| !g_used[i]).collect();
        let rest_p: Vec<usize> = (0..p.len()).filter(|&i| !p_used[i]).collect();
        let costs = CostMatrix::from_fn(rest_g.len(), rest_p.len(), |a, b| {
            let iou = g[rest_g[a]].1.iou(&p[rest_p[b]].1);
            if iou >= iou_thresh {
                1.0 - iou
            } else {
                f64::INFINITY
            }
        });
        for (a, b) in solve(&costs) {
            pairs.push((rest_g[a], rest_p[b]));
        }
        current.clear();
        for &(gi, pi) in &pairs {
            let (gid, pid) = (g[gi].0, p[pi].0);
            if let Some(prev) = last.get(&gid) {
                if *prev != pid {
                    ids += 1;
                }
            }
            last.insert(gid, pid);
            current.insert(gid, pid);
        }
        tp += pairs.len();
        fn_ += g.len() - pairs.len();
        fp += p.len() - pairs.len();
    }
    let mota = if n_gt == 0 {
        if fp == 0 {
            1.0
        } else {
            -(fp as f64)
        }
    } else {
        1.0 - (fp + fn_ + ids) as f64 / n_gt as f64
    };
    ClearMetrics {
        mota,
        id_switches: ids,
        false_positives: fp,
        false_negatives: fn_,
        matches: tp,
        num_gt: n_gt,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityMetrics {
    pub idf1: f64,
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
}

/// IDF1 under the one-to-one id assignment that maximizes the number of
/// frames where a ground-truth id and its predicted id overlap by at least
/// `iou_thresh`.
pub fn idf1(gt: &TrackSet, pred: &TrackSet, iou_thresh: f64) -> IdentityMetrics {
    let g_ids: Vec<u64> = gt.ids().into_iter().collect();
    let p_ids: Vec<u64> = pred.ids().into_iter().collect();
    let g_index: HashMap<u64, usize> = g_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let p_index: HashMap<u64, usize> = p_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let mut overlap = vec![0usize; g_ids.len() * p_ids.len()];
    for frame in all_frames(gt, pred) {
        for (gid, gr) in gt.frame(frame) {
            for (pid, pr) in pred.frame(frame) {
                if gr.iou(pr) >= iou_thresh {
                    overlap[g_index[gid] * p_ids.len() + p_index[pid]] += 1;
                }
            }
        }
    }
    let costs = CostMatrix::from_fn(g_ids.len(), p_ids.len(), |i, j| {
        -(overlap[i * p_ids.len() + j] as f64)
    });
    let idtp: usize = solve(&costs)
        .into_iter()
        .map(|(i, j)| overlap[i * p_ids.len() + j])
        .sum();
    let idfn = gt.num_entries() - idtp;
    let idfp = pred.num_entries() - idtp;
    let denom = 2 * idtp + idfp + idfn;
    IdentityMetrics {
        idf1: if denom == 0 { 1.0 } else { 2.0 * idtp as f64 / denom as f64 },
        idtp,
        idfp,
        idfn,
    }
}

/// Region IoU; two empty masks count as a perfect match.
pub fn mask_iou(a: &Mask, b: &Mask) -> f64 {
    a.iou(b)
}

/// Fraction of visible ground-truth keypoints whose prediction lies within
/// `delta * body_size` (inclusive). Hidden predictions count as misses.
pub fn pck(gt: &[Pose], pred: &[Pose], delta: f64) -> Result<f64> {
    if gt.len() != pred.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} ground-truth poses against {} predictions",
            gt.len(),
            pred.len()
        )));
    }
    let (mut hits, mut total) = (0usize, 0usize);
    for (g, p) in gt.iter().zip(pred) {
        if g.keypoints.len() != p.keypoints.len() {
            return Err(Error::ShapeMismatch("poses differ in keypoint count".into()));
        }
        if g.num_visible() == 0 {
            continue;
        }
        let radius = delta * body_size(g)?;
        for (kg, kp) in g.keypoints.iter().zip(&p.keypoints) {
            if !kg.visible {
                continue;
            }
            total += 1;
            if kp.visible && (kg.x - kp.x).hypot(kg.y - kp.y) <= radius {
                hits += 1;
            }
        }
    }
    Ok(if total == 0 { 1.0 } else { hits as f64 / total as f64 })
}
