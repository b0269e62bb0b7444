//! Boxes, masks and poses, and the conversions between them.
//!
//! Mask pixels and keypoints use pixel-index coordinates: the pixel in
//! column `x`, row `y` sits at `(x, y)`. A box that exactly covers pixels
//! `0..10` horizontally therefore has `u = 4.5, w = 10` when derived from a
//! mask.

use crate::error::{Error, Result};

/// Axis-aligned box given by its center and size, in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub u: f64,
    pub v: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(u: f64, v: f64, w: f64, h: f64) -> Result<Self> {
        if !(w > 0.0 && h > 0.0) || !(u.is_finite() && v.is_finite() && w.is_finite() && h.is_finite())
        {
            return Err(Error::Format(format!(
                "box needs finite center and positive size, got ({u}, {v}, {w}, {h})"
            )));
        }
        Ok(BBox { u, v, w, h })
    }

    /// From top-left corner plus size (OTB / MOTChallenge layout).
    pub fn from_tlwh(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(x + w / 2.0, y + h / 2.0, w, h)
    }

    pub fn to_tlwh(&self) -> [f64; 4] {
        [self.u - self.w / 2.0, self.v - self.h / 2.0, self.w, self.h]
    }

    pub fn left(&self) -> f64 {
        self.u - self.w / 2.0
    }

    pub fn top(&self) -> f64 {
        self.v - self.h / 2.0
    }

    pub fn right(&self) -> f64 {
        self.u + self.w / 2.0
    }

    pub fn bottom(&self) -> f64 {
        self.v + self.h / 2.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let iw = (self.right().min(other.right()) - self.left().max(other.left())).max(0.0);
        let ih = (self.bottom().min(other.bottom()) - self.top().max(other.top())).max(0.0);
        let inter = iw * ih;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Aspect ratio `h / w`.
    pub fn aspect(&self) -> f64 {
        self.h / self.w
    }

    /// Rasterizes the box in pixel-index coordinates: pixel `x` is inside
    /// when `left <= x < right`.
    pub fn to_mask(&self, width: usize, height: usize) -> Mask {
        let x0 = self.left().ceil().max(0.0);
        let y0 = self.top().ceil().max(0.0);
        let x1 = (self.right().ceil() - 1.0).min(width as f64 - 1.0);
        let y1 = (self.bottom().ceil() - 1.0).min(height as f64 - 1.0);
        let mut mask = Mask::empty(width, height);
        if x1 < x0 || y1 < y0 {
            return mask;
        }
        for y in y0 as usize..=y1 as usize {
            for x in x0 as usize..=x1 as usize {
                mask.set(x, y, true);
            }
        }
        mask
    }
}

/// Converts a pixel-space box to feature-grid units by dividing every field
/// by `stride`.
pub fn box_to_grid(b: &BBox, stride: u32) -> BBox {
    assert!(stride >= 1, "stride must be at least 1");
    let s = f64::from(stride);
    BBox {
        u: b.u / s,
        v: b.v / s,
        w: b.w / s,
        h: b.h / s,
    }
}

/// Inverse of [`box_to_grid`].
pub fn box_from_grid(b: &BBox, stride: u32) -> BBox {
    assert!(stride >= 1, "stride must be at least 1");
    let s = f64::from(stride);
    BBox {
        u: b.u * s,
        v: b.v * s,
        w: b.w * s,
        h: b.h * s,
    }
}

/// Binary per-pixel mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn empty(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::dim(format!(
                "mask {width}x{height} needs {} bits, got {}",
                width * height,
                bits.len()
            )));
        }
        Ok(Mask {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Mask {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    /// Coordinates of every in-mask pixel, row-major.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }

    pub fn iou(&self, other: &Mask) -> f64 {
        let mut inter = 0usize;
        let mut union = 0usize;
        for (a, b) in self.bits.iter().zip(&other.bits) {
            inter += usize::from(*a && *b);
            union += usize::from(*a || *b);
        }
        if union == 0 {
            // two empty masks agree perfectly
            1.0
        } else {
            inter as f64 / union as f64
        }
    }
}

/// Box estimate from a mask: the center is the mean pixel coordinate and
/// each side is `4 / N * sum |coord - mean|`, clamped to at least one pixel.
pub fn mask_to_box(mask: &Mask) -> Result<BBox> {
    let n = mask.count();
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    let nf = n as f64;
    let (sx, sy) = mask
        .pixels()
        .fold((0.0, 0.0), |(sx, sy), (x, y)| (sx + x as f64, sy + y as f64));
    let (u, v) = (sx / nf, sy / nf);
    let (ax, ay) = mask.pixels().fold((0.0, 0.0), |(ax, ay), (x, y)| {
        (ax + (x as f64 - u).abs(), ay + (y as f64 - v).abs())
    });
    let w = (4.0 / nf * ax).max(1.0);
    let h = (4.0 / nf * ay).max(1.0);
    Ok(BBox { u, v, w, h })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub visible: bool,
}

impl Keypoint {
    pub fn new(x: f64, y: f64) -> Self {
        Keypoint {
            x,
            y,
            visible: true,
        }
    }

    pub fn hidden() -> Self {
        Keypoint {
            x: 0.0,
            y: 0.0,
            visible: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub keypoints: Vec<Keypoint>,
}

impl Pose {
    pub fn new(keypoints: Vec<Keypoint>) -> Self {
        Pose { keypoints }
    }

    pub fn from_points(points: &[(f64, f64)]) -> Self {
        Pose::new(points.iter().map(|&(x, y)| Keypoint::new(x, y)).collect())
    }

    pub fn visible(&self) -> impl Iterator<Item = &Keypoint> {
        self.keypoints.iter().filter(|k| k.visible)
    }

    pub fn num_visible(&self) -> usize {
        self.visible().count()
    }
}

/// Larger of the horizontal and vertical extents of the visible keypoints.
pub fn body_size(pose: &Pose) -> Result<f64> {
    let mut it = pose.visible();
    let first = it
        .next()
        .ok_or(Error::DegeneratePose("no visible keypoint"))?;
    let (mut x0, mut x1, mut y0, mut y1) = (first.x, first.x, first.y, first.y);
    for k in it {
        x0 = x0.min(k.x);
        x1 = x1.max(k.x);
        y0 = y0.min(k.y);
        y1 = y1.max(k.y);
    }
    Ok((x1 - x0).max(y1 - y0))
}

/// Which keypoints are joined by skeleton segments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton {
    pub num_keypoints: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Skeleton {
    pub fn new(num_keypoints: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if let Some(&(a, b)) = edges
            .iter()
            .find(|(a, b)| *a >= num_keypoints || *b >= num_keypoints)
        {
            return Err(Error::Config(format!(
                "skeleton edge ({a}, {b}) out of range for {num_keypoints} keypoints"
            )));
        }
        Ok(Skeleton {
            num_keypoints,
            edges,
        })
    }

    /// The 15-joint PoseTrack skeleton. Joint order: right ankle, right knee,
    /// right hip, left hip, left knee, left ankle, right wrist, right elbow,
    /// right shoulder, left shoulder, left elbow, left wrist, head bottom,
    /// nose, head top.
    pub fn human15() -> Self {
        Skeleton {
            num_keypoints: 15,
            edges: vec![
                (0, 1),
                (1, 2),
                (2, 3),
                (3, 4),
                (4, 5),
                (6, 7),
                (7, 8),
                (8, 9),
                (9, 10),
                (10, 11),
                (2, 8),
                (3, 9),
                (8, 12),
                (9, 12),
                (12, 13),
                (13, 14),
            ],
        }
    }
}

impl Default for Skeleton {
    fn default() -> Self {
        Skeleton::human15()
    }
}

/// Relative width of skeleton segments when rasterizing a pose.
pub const SKELETON_WIDTH_COEFF: f64 = 0.05;

/// Rasterizes a pose into a mask: skeleton segments of width
/// `max(1, coeff * body_size)` plus every closed polygon formed by the
/// skeleton edges, filled.
pub fn pose_to_mask(
    pose: &Pose,
    skeleton: &Skeleton,
    width: usize,
    height: usize,
    width_coeff: f64,
) -> Result<Mask> {
    if pose.num_visible() < 2 {
        return Err(Error::DegeneratePose("fewer than two visible keypoints"));
    }
    let thickness = (width_coeff * body_size(pose)?).max(1.0);
    let radius = thickness / 2.0;
    let mut mask = Mask::empty(width, height);
    let kp = &pose.keypoints;
    let usable = |i: usize| i < kp.len() && kp[i].visible;

    // every visible joint is stamped, so coincident or unconnected
    // keypoints still leave a dot
    for k in pose.visible() {
        stamp_segment(&mut mask, (k.x, k.y), (k.x, k.y), radius);
    }
    let edges: Vec<(usize, usize)> = skeleton
        .edges
        .iter()
        .copied()
        .filter(|&(a, b)| usable(a) && usable(b))
        .collect();
    for &(a, b) in &edges {
        stamp_segment(&mut mask, (kp[a].x, kp[a].y), (kp[b].x, kp[b].y), radius);
    }
    for cycle in fundamental_cycles(kp.len(), &edges) {
        let polygon: Vec<(f64, f64)> = cycle.iter().map(|&i| (kp[i].x, kp[i].y)).collect();
        fill_polygon(&mut mask, &polygon);
    }
    Ok(mask)
}

fn stamp_segment(mask: &mut Mask, a: (f64, f64), b: (f64, f64), radius: f64) {
    let (w, h) = (mask.width() as f64, mask.height() as f64);
    let x0 = (a.0.min(b.0) - radius).floor().max(0.0);
    let x1 = (a.0.max(b.0) + radius).ceil().min(w - 1.0);
    let y0 = (a.1.min(b.1) - radius).floor().max(0.0);
    let y1 = (a.1.max(b.1) + radius).ceil().min(h - 1.0);
    if x1 < x0 || y1 < y0 {
        return;
    }
    let r2 = radius * radius + 1e-9;
    for y in y0 as usize..=y1 as usize {
        for x in x0 as usize..=x1 as usize {
            if point_segment_dist2((x as f64, y as f64), a, b) <= r2 {
                mask.set(x, y, true);
            }
        }
    }
}

fn point_segment_dist2(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    (p.0 - cx).powi(2) + (p.1 - cy).powi(2)
}

/// Even-odd fill of pixel centers inside `polygon`.
fn fill_polygon(mask: &mut Mask, polygon: &[(f64, f64)]) {
    if polygon.len() < 3 {
        return;
    }
    let (w, h) = (mask.width() as f64, mask.height() as f64);
    let x0 = polygon.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).floor().max(0.0);
    let x1 = polygon.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max).ceil().min(w - 1.0);
    let y0 = polygon.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).floor().max(0.0);
    let y1 = polygon.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).ceil().min(h - 1.0);
    if x1 < x0 || y1 < y0 {
        return;
    }
    for y in y0 as usize..=y1 as usize {
        for x in x0 as usize..=x1 as usize {
            if point_in_polygon((x as f64, y as f64), polygon) {
                mask.set(x, y, true);
            }
        }
    }
}

fn point_in_polygon(p: (f64, f64), polygon: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let mut j = polygon.len() - 1;
    for i in 0..polygon.len() {
        let (xi, yi) = polygon[i];
        let (xj, yj) = polygon[j];
        if (yi > p.1) != (yj > p.1) && p.0 < (xj - xi) * (p.1 - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// One cycle per non-tree edge of a BFS spanning forest, as vertex lists.
fn fundamental_cycles(num_vertices: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adjacency = vec![Vec::new(); num_vertices];
    for (e, &(a, b)) in edges.iter().enumerate() {
        if a == b {
            continue;
        }
        adjacency[a].push((b, e));
        adjacency[b].push((a, e));
    }
    let mut parent: Vec<Option<usize>> = vec![None; num_vertices];
    let mut depth = vec![usize::MAX; num_vertices];
    let mut tree_edge = vec![false; edges.len()];
    for root in 0..num_vertices {
        if depth[root] != usize::MAX || adjacency[root].is_empty() {
            continue;
        }
        depth[root] = 0;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for &(n, e) in &adjacency[v] {
                if depth[n] == usize::MAX {
                    depth[n] = depth[v] + 1;
                    parent[n] = Some(v);
                    tree_edge[e] = true;
                    queue.push_back(n);
                }
            }
        }
    }
    let mut cycles = Vec::new();
    for (e, &(a, b)) in edges.iter().enumerate() {
        if tree_edge[e] || a == b {
            continue;
        }
        let (mut x, mut y) = (a, b);
        let mut left = vec![x];
        let mut right = vec![y];
        while x != y {
            if depth[x] >= depth[y] {
                x = parent[x].expect("non-root has a parent");
                left.push(x);
            } else {
                y = parent[y].expect("non-root has a parent");
                right.push(y);
            }
        }
        right.pop();
        left.extend(right.into_iter().rev());
        if left.len() >= 3 {
            cycles.push(left);
        }
    }
    cycles
}

/// Per-pixel object ids; `0` is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelImage {
    width: usize,
    height: usize,
    data: Vec<u16>,
}

impl LabelImage {
    pub fn new(width: usize, height: usize, data: Vec<u16>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::dim(format!(
                "label image {width}x{height} needs {} pixels, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(LabelImage {
            width,
            height,
            data,
        })
    }

    pub fn background(width: usize, height: usize) -> Self {
        LabelImage {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, id: u16) {
        self.data[y * self.width + x] = id;
    }

    /// Binary mask of the pixels labelled `id`.
    pub fn mask(&self, id: u16) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            bits: self.data.iter().map(|&v| v == id).collect(),
        }
    }

    /// Sorted non-background ids present in the image.
    pub fn ids(&self) -> Vec<u16> {
        let mut ids: Vec<u16> = self.data.iter().copied().filter(|&v| v != 0).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn box_to_grid_divides_every_field() {
        let b = BBox::new(80.0, 40.0, 16.0, 8.0).unwrap();
        assert_eq!(box_to_grid(&b, 8), BBox::new(10.0, 5.0, 2.0, 1.0).unwrap());
        assert_eq!(box_to_grid(&b, 1), b);
        let small = BBox::new(4.0, 4.0, 4.0, 4.0).unwrap();
        assert_eq!(box_to_grid(&small, 8), BBox::new(0.5, 0.5, 0.5, 0.5).unwrap());
    }

    #[test]
    fn filled_rectangle_box_estimate() {
        // brute-force evaluation of the estimator over all 200 pixels
        let mask = Mask::from_fn(30, 30, |x, y| x < 10 && y < 20);
        let pts: Vec<(f64, f64)> = (0..20)
            .flat_map(|y| (0..10).map(move |x| (x as f64, y as f64)))
            .collect();
        let n = pts.len() as f64;
        let cu = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let cv = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let h = 4.0 / n * pts.iter().map(|p| (p.1 - cv).abs()).sum::<f64>();
        let b = mask_to_box(&mask).unwrap();
        assert_eq!((b.u, b.v), (4.5, 9.5));
        assert_eq!((cu, cv), (4.5, 9.5));
        assert!((b.h - h).abs() < 1e-12);
        assert!((b.h - 20.0).abs() <= 1.0);
        assert!((b.w - 10.0).abs() <= 0.5);
    }

    #[test]
    fn single_pixel_clamps_to_one() {
        let mut mask = Mask::empty(10, 10);
        mask.set(3, 7, true);
        let b = mask_to_box(&mask).unwrap();
        assert_eq!((b.u, b.v, b.w, b.h), (3.0, 7.0, 1.0, 1.0));
    }

    #[test]
    fn two_pixel_column() {
        let mut mask = Mask::empty(10, 10);
        mask.set(0, 0, true);
        mask.set(0, 9, true);
        let b = mask_to_box(&mask).unwrap();
        assert_eq!(b.v, 4.5);
        assert_eq!(b.h, 18.0);
    }

    #[test]
    fn empty_mask_is_an_error() {
        assert!(matches!(mask_to_box(&Mask::empty(4, 4)), Err(Error::EmptyMask)));
    }

    #[test]
    fn body_size_examples() {
        assert_eq!(body_size(&Pose::from_points(&[(0.0, 0.0), (10.0, 20.0)])).unwrap(), 20.0);
        assert_eq!(body_size(&Pose::from_points(&[(5.0, 5.0)])).unwrap(), 0.0);
        assert_eq!(body_size(&Pose::from_points(&[(0.0, 0.0), (30.0, 5.0)])).unwrap(), 30.0);
        assert!(body_size(&Pose::new(vec![Keypoint::hidden()])).is_err());
    }

    #[test]
    fn two_keypoint_bar() {
        let pose = Pose::from_points(&[(0.0, 0.0), (0.0, 20.0)]);
        let sk = Skeleton::new(2, vec![(0, 1)]).unwrap();
        let mask = pose_to_mask(&pose, &sk, 30, 30, SKELETON_WIDTH_COEFF).unwrap();
        let expected = Mask::from_fn(30, 30, |x, y| x == 0 && y <= 20);
        assert_eq!(mask, expected);
    }

    #[test]
    fn triangle_interior_is_filled() {
        let pose = Pose::from_points(&[(2.0, 2.0), (40.0, 2.0), (21.0, 40.0)]);
        let sk = Skeleton::new(3, vec![(0, 1), (1, 2), (2, 0)]).unwrap();
        let mask = pose_to_mask(&pose, &sk, 50, 50, SKELETON_WIDTH_COEFF).unwrap();
        assert!(mask.get(21, 15));
        assert!(mask.get(21, 30));
        assert!(!mask.get(2, 40));
        // an open chain with the same joints leaves the interior empty
        let open = Skeleton::new(3, vec![(0, 1), (1, 2)]).unwrap();
        let mask = pose_to_mask(&pose, &open, 50, 50, SKELETON_WIDTH_COEFF).unwrap();
        assert!(!mask.get(21, 15));
    }

    #[test]
    fn coincident_keypoints_give_a_dot() {
        let pose = Pose::from_points(&[(5.0, 5.0), (5.0, 5.0)]);
        let sk = Skeleton::new(2, vec![(0, 1)]).unwrap();
        let mask = pose_to_mask(&pose, &sk, 10, 10, SKELETON_WIDTH_COEFF).unwrap();
        assert_eq!(mask.count(), 1);
        assert!(mask.get(5, 5));
        let lone = Pose::new(vec![Keypoint::new(1.0, 1.0), Keypoint::hidden()]);
        assert!(matches!(
            pose_to_mask(&lone, &sk, 10, 10, SKELETON_WIDTH_COEFF),
            Err(Error::DegeneratePose(_))
        ));
    }

    #[test]
    fn human_torso_is_filled() {
        let mut pts = vec![(0.0, 0.0); 15];
        pts[2] = (40.0, 80.0);
        pts[3] = (60.0, 80.0);
        pts[8] = (35.0, 40.0);
        pts[9] = (65.0, 40.0);
        pts[12] = (50.0, 30.0);
        pts[13] = (50.0, 20.0);
        pts[14] = (50.0, 10.0);
        pts[1] = (40.0, 100.0);
        pts[0] = (40.0, 120.0);
        pts[4] = (60.0, 100.0);
        pts[5] = (60.0, 120.0);
        pts[7] = (30.0, 60.0);
        pts[6] = (28.0, 78.0);
        pts[10] = (70.0, 60.0);
        pts[11] = (72.0, 78.0);
        let pose = Pose::from_points(&pts);
        let mask = pose_to_mask(&pose, &Skeleton::human15(), 100, 130, SKELETON_WIDTH_COEFF)
            .unwrap();
        assert!(mask.get(50, 60));
        assert!(!mask.get(5, 5));
    }

    proptest! {
        #[test]
        fn rectangle_round_trip(x0 in 0usize..20, y0 in 0usize..20, w in 10usize..40, h in 10usize..40) {
            let mask = Mask::from_fn(64, 64, |x, y| x >= x0 && x < x0 + w && y >= y0 && y < y0 + h);
            let b = mask_to_box(&mask).unwrap();
            prop_assert!((b.w - w as f64).abs() <= 0.05 * w as f64);
            prop_assert!((b.h - h as f64).abs() <= 0.05 * h as f64);
            let back = b.to_mask(64, 64);
            let bb = mask_to_box(&back).unwrap();
            prop_assert!((bb.w - w as f64).abs() <= 0.05 * w as f64);
            prop_assert!((bb.h - h as f64).abs() <= 0.05 * h as f64);
        }

        #[test]
        fn grid_round_trip(stride in 1u32..16, u in 0i32..100, v in 0i32..100, w in 1i32..50, h in 1i32..50) {
            let s = f64::from(stride);
            let b = BBox::new(u as f64 * s, v as f64 * s, w as f64 * s, h as f64 * s).unwrap();
            prop_assert_eq!(box_from_grid(&box_to_grid(&b, stride), stride), b);
            let g = BBox::new(u as f64, v as f64, w as f64, h as f64).unwrap();
            prop_assert_eq!(box_to_grid(&box_from_grid(&g, stride), stride), g);
        }

        #[test]
        fn pose_mask_stays_in_frame(pts in proptest::collection::vec((-50.0f64..150.0, -50.0f64..150.0), 15)) {
            let pose = Pose::from_points(&pts);
            let mask = pose_to_mask(&pose, &Skeleton::human15(), 100, 80, SKELETON_WIDTH_COEFF).unwrap();
            prop_assert_eq!(mask.width(), 100);
            prop_assert_eq!(mask.height(), 80);
            prop_assert_eq!(mask.bits().len(), 8000);
        }
    }
}
