use std::fs;
use std::path::Path;

use proptrack::associate::{TrackOutput, Tracker};
use proptrack::boxprop::{BoxTracker, FrameInput};
use proptrack::io::{self, MotRecord};
use proptrack::labelprop::{
    beliefs_to_pose, finalize_mask, masks_to_labels, pose_to_beliefs, LabelPropagator,
};
use proptrack::{mask_to_box, BBox, Keypoint, LabelImage, Mask, Observation, Pose, Shape};

use crate::args::{MotArgs, MotsArgs, PosepropArgs, PosetrackArgs, Settings, SotArgs, VosArgs};
use crate::input::{resize_labels, Sequence};
use crate::{input_error, CliResult, Failure};

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)
        .map_err(|e| input_error(format!("{}: {e}", dir.display())))
}

fn frame_png(dir: &Path, frame: usize) -> std::path::PathBuf {
    dir.join(format!("{:05}.png", frame + 1))
}

fn parse_box(text: &str) -> CliResult<BBox> {
    let v: Vec<f64> = text
        .split(',')
        .map(|f| f.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| input_error(format!("--init expects `x,y,w,h`, got `{text}`")))?;
    if v.len() != 4 {
        return Err(input_error(format!("--init expects 4 numbers, got {}", v.len())));
    }
    Ok(io::box_from_file(v[0], v[1], v[2], v[3])?)
}

pub fn sot(a: &SotArgs, s: &Settings) -> CliResult<()> {
    let seq = Sequence::open(&a.input, &s.features)?;
    let init = parse_box(&a.init)?;
    let mut tracker = BoxTracker::new(s.boxprop.clone())?;
    let mut boxes = Vec::with_capacity(seq.len());
    for i in 0..seq.len() {
        // precomputed features take precedence over pixels
        let fm;
        let img;
        let input = if seq.has_features() {
            fm = seq.features(i, None)?;
            FrameInput::Features(&fm)
        } else {
            img = seq.frame(i)?.expect("frames present");
            FrameInput::Image(&img)
        };
        if i == 0 {
            tracker.init(input, init)?;
            boxes.push(init);
        } else {
            boxes.push(tracker.track_step(input)?);
        }
    }
    io::write_otb(&a.out, &boxes)?;
    Ok(())
}

/// Working resolution for built-in features, as `(width, height)`.
fn work_size(seq: &Sequence, size: (usize, usize)) -> Option<(u32, u32)> {
    (!seq.has_features()).then_some((size.1 as u32, size.0 as u32))
}

pub fn vos(a: &VosArgs, s: &Settings) -> CliResult<()> {
    let seq = Sequence::open(&a.input, &s.features)?;
    let init = io::read_label_png(&a.init_mask)?;
    let ids = init.ids();
    if ids.is_empty() {
        return Err(input_error("initial mask has no objects"));
    }
    let (w0, h0) = (init.width(), init.height());
    if let Some((fw, fh)) = seq.frame_size()? {
        if (fw as usize, fh as usize) != (w0, h0) {
            return Err(input_error(format!(
                "initial mask is {w0}x{h0} but frames are {fw}x{fh}"
            )));
        }
    }
    let work = work_size(&seq, s.labelprop.mask_size);
    let fm0 = seq.features(0, work)?;
    let stride = fm0.stride();
    let (ww, wh) = (fm0.width() * stride as usize, fm0.height() * stride as usize);
    let small = resize_labels(&init, ww, wh);
    let masks: Vec<Mask> = ids.iter().map(|id| small.mask(*id)).collect();
    let labels = masks_to_labels(&masks, fm0.height(), fm0.width(), stride)?;
    let mut prop = LabelPropagator::new(s.labelprop.clone())?;
    prop.init(&fm0, labels)?;

    create_dir(&a.out)?;
    io::write_label_png(frame_png(&a.out, 0), &init)?;
    for i in 1..seq.len() {
        let fm = seq.features(i, work)?;
        let z = prop.step(&fm)?;
        let channels = resize_labels(&finalize_mask(&z, stride, ww, wh), w0, h0);
        let data = channels
            .data()
            .iter()
            .map(|&k| if k == 0 { 0 } else { ids[k as usize - 1] })
            .collect();
        io::write_label_png(frame_png(&a.out, i), &LabelImage::new(w0, h0, data)?)?;
    }
    Ok(())
}

fn scale_pose(pose: &Pose, sx: f64, sy: f64) -> Pose {
    // pixel centers map to pixel centers
    Pose::new(
        pose.keypoints
            .iter()
            .map(|k| Keypoint {
                x: (k.x + 0.5) * sx - 0.5,
                y: (k.y + 0.5) * sy - 0.5,
                visible: k.visible,
            })
            .collect(),
    )
}

pub fn poseprop(a: &PosepropArgs, s: &Settings) -> CliResult<()> {
    let seq = Sequence::open(&a.input, &s.features)?;
    let rows: Vec<_> = io::read_pose_table(&a.init_pose, false)?
        .into_iter()
        .filter(|r| r.frame == 0)
        .collect();
    if rows.is_empty() {
        return Err(input_error("pose table has no frame-1 rows"));
    }
    let nk = a
        .keypoints
        .unwrap_or_else(|| rows.iter().map(|r| r.keypoint + 1).max().unwrap_or(0));
    let pose0 = io::group_poses(&rows, nk)?.remove(&(0, 0)).expect("frame-1 rows");

    let work = work_size(&seq, s.labelprop.pose_size);
    let fm0 = seq.features(0, work)?;
    let stride = fm0.stride();
    let (ww, wh) = (
        (fm0.width() * stride as usize) as f64,
        (fm0.height() * stride as usize) as f64,
    );
    let (w0, h0) = match seq.frame_size()? {
        Some((w, h)) => (f64::from(w), f64::from(h)),
        None => (ww, wh),
    };
    let (sx, sy) = (ww / w0, wh / h0);
    let beliefs = pose_to_beliefs(
        &scale_pose(&pose0, sx, sy),
        fm0.height(),
        fm0.width(),
        stride,
        s.labelprop.gaussian_coeff,
    )
    .map_err(|e| input_error(format!("initial pose: {e}")))?;
    let mut prop = LabelPropagator::new(s.labelprop.clone())?;
    prop.init(&fm0, beliefs)?;

    let mut poses = vec![pose0];
    for i in 1..seq.len() {
        let z = prop.step(&seq.features(i, work)?)?;
        let p = beliefs_to_pose(&z, stride, s.labelprop.visibility_threshold);
        poses.push(scale_pose(&p, 1.0 / sx, 1.0 / sy));
    }
    let table: Vec<_> = poses.iter().enumerate().map(|(i, p)| (i, None, p)).collect();
    fs::write(&a.out, io::format_pose_table(&table))
        .map_err(|e| input_error(format!("{}: {e}", a.out.display())))?;
    Ok(())
}

fn associate(seq: &Sequence, dets: &[Vec<Observation>], s: &Settings) -> CliResult<Vec<TrackOutput>> {
    if dets.len() > seq.len() {
        return Err(input_error(format!(
            "detections reach frame {} but the sequence has {} frames",
            dets.len(),
            seq.len()
        )));
    }
    let mut tracker = Tracker::new(s.associate.clone())?;
    let mut out = Vec::new();
    for i in 0..seq.len() {
        let fm = seq.features(i, None)?;
        let frame_dets = dets.get(i).map_or(&[][..], Vec::as_slice);
        out.extend(tracker.step(i, frame_dets, &fm)?);
    }
    out.sort_by_key(|o| (o.frame, o.id));
    Ok(out)
}

fn output_box(o: &TrackOutput) -> CliResult<BBox> {
    match &o.observation.shape {
        Shape::Box(b) => Ok(*b),
        Shape::Mask(m) => Ok(mask_to_box(m)?),
        Shape::Pose(_) => Err(Failure::Runtime("pose outputs have no box".into())),
    }
}

fn mot_rows(outputs: &[TrackOutput]) -> CliResult<Vec<MotRecord>> {
    outputs
        .iter()
        .map(|o| {
            Ok(MotRecord {
                frame: o.frame,
                id: o.id as i64,
                bbox: output_box(o)?,
                confidence: o.observation.confidence,
            })
        })
        .collect()
}

pub fn mot(a: &MotArgs, s: &Settings) -> CliResult<()> {
    let seq = Sequence::open(&a.input, &s.features)?;
    let dets = io::mot_detections(&io::read_mot(&a.dets)?, 0);
    let outputs = associate(&seq, &dets, s)?;
    io::write_mot(&a.out, &mot_rows(&outputs)?)?;
    Ok(())
}

pub fn mots(a: &MotsArgs, s: &Settings) -> CliResult<()> {
    let seq = Sequence::open(&a.input, &s.features)?;
    let paths = io::list_numbered(&a.det_masks, &["png"])?;
    let mut dets = Vec::with_capacity(paths.len());
    let mut size = None;
    for (i, p) in paths.iter().enumerate() {
        let labels = io::read_label_png(p)?;
        size.get_or_insert((labels.width(), labels.height()));
        dets.push(
            labels
                .ids()
                .into_iter()
                .map(|id| Observation::new(i, Shape::Mask(labels.mask(id))))
                .collect::<Vec<_>>(),
        );
    }
    let outputs = associate(&seq, &dets, s)?;
    io::write_mot(&a.out, &mot_rows(&outputs)?)?;

    if let Some(dir) = &a.out_masks {
        let (w, h) = match size {
            Some(sz) => sz,
            None => return Err(input_error("no detection masks found")),
        };
        create_dir(dir)?;
        for i in 0..seq.len() {
            let mut img = LabelImage::background(w, h);
            for o in outputs.iter().filter(|o| o.frame == i) {
                if let Shape::Mask(m) = &o.observation.shape {
                    let id = u16::try_from(o.id)
                        .map_err(|_| Failure::Runtime(format!("track id {} too large", o.id)))?;
                    for (x, y) in m.pixels() {
                        img.set(x, y, id);
                    }
                }
            }
            io::write_label_png(frame_png(dir, i), &img)?;
        }
    }
    Ok(())
}

pub fn posetrack(a: &PosetrackArgs, s: &Settings) -> CliResult<()> {
    let seq = Sequence::open(&a.input, &s.features)?;
    let rows = io::read_pose_table(&a.dets, true)?;
    let poses = io::group_poses(&rows, s.associate.skeleton.num_keypoints)?;
    let n = poses.keys().map(|(f, _)| f + 1).max().unwrap_or(0);
    let mut dets = vec![Vec::new(); n];
    for ((frame, _), pose) in poses {
        dets[frame].push(Observation::new(frame, Shape::Pose(pose)));
    }
    let outputs = associate(&seq, &dets, s)?;
    let table: Vec<_> = outputs
        .iter()
        .filter_map(|o| match &o.observation.shape {
            Shape::Pose(p) => Some((o.frame, Some(o.id as i64), p)),
            _ => None,
        })
        .collect();
    fs::write(&a.out, io::format_pose_table(&table))
        .map_err(|e| input_error(format!("{}: {e}", a.out.display())))?;
    Ok(())
}
