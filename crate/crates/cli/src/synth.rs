use std::fs;

use proptrack::config::parse_pair;
use proptrack::io::{self, MotRecord};
use proptrack::metrics::Region;
use proptrack::synth::{render, DetectionNoise, Scenario, SynthObject};
use proptrack::{LabelImage, Shape};

use crate::args::SynthArgs;
use crate::{input_error, CliResult};

const COLORS: [[u8; 3]; 6] = [
    [200, 60, 60],
    [60, 170, 70],
    [60, 80, 210],
    [210, 190, 50],
    [180, 70, 190],
    [60, 190, 190],
];

/// `K:A-B` with 1-based object and inclusive 1-based frames.
fn parse_occlusion(text: &str) -> CliResult<(usize, std::ops::Range<usize>)> {
    let bad = || input_error(format!("--occlude expects `K:A-B`, got `{text}`"));
    let (k, range) = text.split_once(':').ok_or_else(bad)?;
    let (a, b) = range.split_once('-').ok_or_else(bad)?;
    let k: usize = k.trim().parse().map_err(|_| bad())?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if k == 0 || a == 0 || b < a {
        return Err(bad());
    }
    Ok((k - 1, a - 1..b))
}

pub fn scenario(a: &SynthArgs) -> CliResult<Scenario> {
    let (w, h) = parse_pair(&a.size)?;
    let mut sc = Scenario::new(a.seed, a.num_frames, a.width, a.height);
    sc.noise = DetectionNoise {
        position_sigma: a.sigma,
        miss_rate: a.miss_rate,
        false_positive_rate: a.fp_rate,
        crop_rate: a.crop_rate,
    };
    let lanes = a.objects as f64 + 1.0;
    for k in 0..a.objects {
        let y = (k as f64 + 1.0) * f64::from(a.height) / lanes;
        let (x, vx) = if k % 2 == 0 {
            (f64::from(a.width) * 0.25, a.speed)
        } else {
            (f64::from(a.width) * 0.75, -a.speed)
        };
        sc = sc.with_object(SynthObject::new(
            COLORS[k % COLORS.len()],
            (w as f64, h as f64),
            (x, y),
            (vx, 0.0),
        ));
    }
    for o in &a.occlude {
        let (k, frames) = parse_occlusion(o)?;
        let obj = sc
            .objects
            .get_mut(k)
            .ok_or_else(|| input_error(format!("--occlude names object {} of {}", k + 1, a.objects)))?;
        obj.occlusions.push(frames);
    }
    sc.validate()?;
    Ok(sc)
}

pub fn run(a: &SynthArgs) -> CliResult<()> {
    let sc = scenario(a)?;
    let r = render(&sc)?;
    let out = &a.out;
    let dirs = ["frames", "masks", "det_masks"].map(|d| out.join(d));
    for d in &dirs {
        fs::create_dir_all(d).map_err(|e| input_error(format!("{}: {e}", d.display())))?;
    }
    let name = |f: usize, ext: &str| format!("{:05}.{ext}", f + 1);
    for f in 0..sc.num_frames {
        io::write_ppm(dirs[0].join(name(f, "ppm")), &r.frames[f])?;
        io::write_label_png(dirs[1].join(name(f, "png")), &r.labels[f])?;
        let mut dm = LabelImage::background(sc.width as usize, sc.height as usize);
        for (i, det) in r.mask_detections(&sc, f).iter().enumerate() {
            if let Shape::Mask(m) = &det.shape {
                for (x, y) in m.pixels() {
                    dm.set(x, y, i as u16 + 1);
                }
            }
        }
        io::write_label_png(dirs[2].join(name(f, "png")), &dm)?;
    }

    let mut gt = Vec::new();
    for (frame, entries) in r.gt.frames() {
        for (id, region) in entries {
            if let Region::Box(b) = region {
                gt.push(MotRecord {
                    frame,
                    id: *id as i64,
                    bbox: *b,
                    confidence: 1.0,
                });
            }
        }
    }
    gt.sort_by_key(|g| (g.frame, g.id));
    io::write_mot(out.join("gt.txt"), &gt)?;

    let dets: Vec<MotRecord> = r
        .detections
        .iter()
        .flatten()
        .filter_map(|d| match &d.shape {
            Shape::Box(b) => Some(MotRecord {
                frame: d.frame,
                id: -1,
                bbox: *b,
                confidence: d.confidence,
            }),
            _ => None,
        })
        .collect();
    io::write_mot(out.join("det.txt"), &dets)?;

    if let Some(b) = r.gt_box(0, 0) {
        io::write_otb(out.join("init.txt"), &[b])?;
    }
    Ok(())
}
