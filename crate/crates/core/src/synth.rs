//! Deterministic synthetic sequences: textured rectangles moving at
//! constant velocity over a textured background, with ground truth and
//! noisy detections.

use std::ops::Range;

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geom::{BBox, LabelImage};
use crate::metrics::{Region, TrackSet};
use crate::types::{Observation, Shape};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthObject {
    pub color: [u8; 3],
    /// Width and height in pixels at frame 0.
    pub size: (f64, f64),
    /// Center at frame 0.
    pub start: (f64, f64),
    /// Pixels per frame.
    pub velocity: (f64, f64),
    /// Per-frame size multiplier.
    pub growth: f64,
    /// Frame ranges during which the object is hidden.
    pub occlusions: Vec<Range<usize>>,
    pub class_id: i32,
}

impl SynthObject {
    pub fn new(color: [u8; 3], size: (f64, f64), start: (f64, f64), velocity: (f64, f64)) -> Self {
        SynthObject {
            color,
            size,
            start,
            velocity,
            growth: 1.0,
            occlusions: Vec::new(),
            class_id: 0,
        }
    }

    pub fn with_occlusion(mut self, frames: Range<usize>) -> Self {
        self.occlusions.push(frames);
        self
    }

    pub fn with_growth(mut self, growth: f64) -> Self {
        self.growth = growth;
        self
    }

    pub fn occluded(&self, frame: usize) -> bool {
        self.occlusions.iter().any(|r| r.contains(&frame))
    }

    /// Unclipped pixel rectangle `[x0, x1) x [y0, y1)` at `frame`.
    pub fn rect(&self, frame: usize) -> (i64, i64, i64, i64) {
        let t = frame as f64;
        let scale = self.growth.powf(t);
        let (w, h) = (self.size.0 * scale, self.size.1 * scale);
        let (cx, cy) = (self.start.0 + t * self.velocity.0, self.start.1 + t * self.velocity.1);
        let x0 = (cx - w / 2.0).round() as i64;
        let y0 = (cy - h / 2.0).round() as i64;
        (x0, y0, x0 + (w.round() as i64).max(1), y0 + (h.round() as i64).max(1))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionNoise {
    /// Standard deviation of the detected center, in pixels.
    pub position_sigma: f64,
    pub miss_rate: f64,
    /// Probability of one spurious detection per frame.
    pub false_positive_rate: f64,
    /// Probability that a detection covers only the top or bottom half.
    pub crop_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub num_frames: usize,
    pub width: u32,
    pub height: u32,
    pub objects: Vec<SynthObject>,
    pub noise: DetectionNoise,
}

impl Scenario {
    pub fn new(seed: u64, num_frames: usize, width: u32, height: u32) -> Self {
        Scenario {
            seed,
            num_frames,
            width,
            height,
            objects: Vec::new(),
            noise: DetectionNoise::default(),
        }
    }

    pub fn with_object(mut self, o: SynthObject) -> Self {
        self.objects.push(o);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("frame size must be positive".into()));
        }
        if self.objects.len() >= usize::from(u16::MAX) {
            return Err(Error::Config("too many objects".into()));
        }
        for o in &self.objects {
            let finite = [o.size.0, o.size.1, o.start.0, o.start.1, o.velocity.0, o.velocity.1, o.growth];
            if finite.iter().any(|v| !v.is_finite()) || o.size.0 < 1.0 || o.size.1 < 1.0 || o.growth <= 0.0 {
                return Err(Error::Config("object geometry must be finite and at least 1 px".into()));
            }
        }
        let n = &self.noise;
        for rate in [n.miss_rate, n.false_positive_rate, n.crop_rate] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::Config("noise rates must lie in [0, 1]".into()));
            }
        }
        if !(n.position_sigma >= 0.0 && n.position_sigma.is_finite()) {
            return Err(Error::Config("position sigma must be non-negative".into()));
        }
        Ok(())
    }
}

/// Rendered sequence. Track ids are object index + 1.
#[derive(Debug, Clone)]
pub struct Rendered {
    pub frames: Vec<RgbImage>,
    pub gt: TrackSet,
    /// Box detections per frame.
    pub detections: Vec<Vec<Observation>>,
    /// Visible object per pixel.
    pub labels: Vec<LabelImage>,
}

impl Rendered {
    /// Mask detections: the visible pixels of every detectable object.
    pub fn mask_detections(&self, scenario: &Scenario, frame: usize) -> Vec<Observation> {
        let labels = &self.labels[frame];
        scenario
            .objects
            .iter()
            .enumerate()
            .filter(|(_, o)| !o.occluded(frame))
            .filter_map(|(k, o)| {
                let mask = labels.mask(k as u16 + 1);
                (!mask.is_empty())
                    .then(|| Observation::new(frame, Shape::Mask(mask)).with_class(o.class_id))
            })
            .collect()
    }

    /// Ground-truth box of object `k` (0-based) at `frame`, if visible.
    pub fn gt_box(&self, frame: usize, k: usize) -> Option<BBox> {
        self.gt.frame(frame).iter().find_map(|(id, r)| match r {
            Region::Box(b) if *id == k as u64 + 1 => Some(*b),
            _ => None,
        })
    }
}

fn hash(mut x: u64) -> u64 {
    // splitmix64 finalizer
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn hash3(a: u64, b: u64, c: u64) -> u64 {
    hash(hash(hash(a) ^ b) ^ c)
}

fn jitter(h: u64, shift: u32, amplitude: i32) -> i32 {
    ((h >> shift) & 0xff) as i32 * 2 * amplitude / 255 - amplitude
}

fn clamp_u8(v: i32) -> u8 {
    v.clamp(0, 255) as u8
}

/// Pixel rectangle clipped to the frame, or `None` when fully outside.
fn clip(r: (i64, i64, i64, i64), w: u32, h: u32) -> Option<(u32, u32, u32, u32)> {
    let x0 = r.0.max(0);
    let y0 = r.1.max(0);
    let x1 = r.2.min(i64::from(w));
    let y1 = r.3.min(i64::from(h));
    (x1 > x0 && y1 > y0).then_some((x0 as u32, y0 as u32, x1 as u32, y1 as u32))
}

/// Box covering pixels `[x0, x1) x [y0, y1)` in pixel-index coordinates.
fn pixel_box(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
    BBox {
        u: (x0 + x1 - 1.0) / 2.0,
        v: (y0 + y1 - 1.0) / 2.0,
        w: x1 - x0,
        h: y1 - y0,
    }
}

/// Renders every frame, the ground truth and the detections.
pub fn render(sc: &Scenario) -> Result<Rendered> {
    sc.validate()?;
    let (w, h) = (sc.width, sc.height);
    let background = RgbImage::from_fn(w, h, |x, y| {
        let v = hash3(sc.seed, u64::from(x / 2), u64::from(y / 2));
        let base = 110 + jitter(v, 0, 30);
        Rgb([
            clamp_u8(base + jitter(v, 8, 8)),
            clamp_u8(base + jitter(v, 16, 8)),
            clamp_u8(base + jitter(v, 24, 8)),
        ])
    });
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let normal = Normal::new(0.0, sc.noise.position_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut out = Rendered {
        frames: Vec::with_capacity(sc.num_frames),
        gt: TrackSet::new(),
        detections: Vec::with_capacity(sc.num_frames),
        labels: Vec::with_capacity(sc.num_frames),
    };
    for f in 0..sc.num_frames {
        let mut img = background.clone();
        let mut labels = LabelImage::background(w as usize, h as usize);
        let mut dets = Vec::new();
        for (k, o) in sc.objects.iter().enumerate() {
            if o.occluded(f) {
                continue;
            }
            let rect = o.rect(f);
            let Some((x0, y0, x1, y1)) = clip(rect, w, h) else {
                continue;
            };
            // texture lives in object coordinates so it moves and scales
            // with the object
            let scale = o.growth.powf(f as f64);
            let obj_seed = hash3(sc.seed, k as u64, 0x5eed);
            for y in y0..y1 {
                for x in x0..x1 {
                    let lx = ((i64::from(x) - rect.0) as f64 / scale / 3.0) as u64;
                    let ly = ((i64::from(y) - rect.1) as f64 / scale / 3.0) as u64;
                    let v = hash3(obj_seed, lx, ly);
                    img.put_pixel(
                        x,
                        y,
                        Rgb([
                            clamp_u8(i32::from(o.color[0]) + jitter(v, 0, 70)),
                            clamp_u8(i32::from(o.color[1]) + jitter(v, 8, 70)),
                            clamp_u8(i32::from(o.color[2]) + jitter(v, 16, 70)),
                        ]),
                    );
                    labels.set(x as usize, y as usize, k as u16 + 1);
                }
            }
            let gt = pixel_box(f64::from(x0), f64::from(y0), f64::from(x1), f64::from(y1));
            out.gt.insert(f, k as u64 + 1, Region::Box(gt))?;

            if rng.random::<f64>() < sc.noise.miss_rate {
                continue;
            }
            let mut det = gt;
            if sc.noise.position_sigma > 0.0 {
                det.u += normal.sample(&mut rng);
                det.v += normal.sample(&mut rng);
            }
            if rng.random::<f64>() < sc.noise.crop_rate {
                det.h /= 2.0;
                det.v += if rng.random::<bool>() { -det.h / 2.0 } else { det.h / 2.0 };
            }
            dets.push(Observation::new(f, Shape::Box(det)).with_class(o.class_id));
        }
        if rng.random::<f64>() < sc.noise.false_positive_rate {
            let bw = rng.random_range(8.0..(f64::from(w) / 4.0).max(9.0));
            let bh = rng.random_range(8.0..(f64::from(h) / 4.0).max(9.0));
            let u = rng.random_range(0.0..f64::from(w));
            let v = rng.random_range(0.0..f64::from(h));
            dets.push(Observation::new(f, Shape::Box(BBox { u, v, w: bw, h: bh })).with_confidence(0.5));
        }
        out.frames.push(img);
        out.labels.push(labels);
        out.detections.push(dets);
    }
    Ok(out)
}
