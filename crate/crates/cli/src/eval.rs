use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use proptrack::io;
use proptrack::metrics::{clear_metrics, idf1, pck, Region, TrackSet};
use proptrack::Pose;

use crate::args::EvalArgs;
use crate::{input_error, CliResult};

fn mask_track_set(dir: &Path) -> CliResult<TrackSet> {
    let mut set = TrackSet::new();
    for (frame, path) in io::list_numbered(dir, &["png"])?.iter().enumerate() {
        let labels = io::read_label_png(path)?;
        for id in labels.ids() {
            set.insert(frame, u64::from(id), Region::Mask(labels.mask(id)))?;
        }
    }
    Ok(set)
}

fn poses_by_frame(path: &Path) -> CliResult<Vec<(usize, Pose)>> {
    let rows = io::read_pose_table(path, false)?;
    let nk = rows.iter().map(|r| r.keypoint + 1).max().unwrap_or(0);
    Ok(io::group_poses(&rows, nk)?
        .into_iter()
        .map(|((f, _), p)| (f, p))
        .collect())
}

fn tracking_report(out: &mut String, gt: &TrackSet, pred: &TrackSet, iou: f64) {
    let c = clear_metrics(gt, pred, iou);
    let i = idf1(gt, pred, iou);
    let _ = writeln!(out, "IDF1={:.6}", i.idf1);
    let _ = writeln!(out, "MOTA={:.6}", c.mota);
    let _ = writeln!(out, "IDs={}", c.id_switches);
    let _ = writeln!(out, "IDTP={}", i.idtp);
    let _ = writeln!(out, "IDFP={}", i.idfp);
    let _ = writeln!(out, "IDFN={}", i.idfn);
    let _ = writeln!(out, "FP={}", c.false_positives);
    let _ = writeln!(out, "FN={}", c.false_negatives);
    let _ = writeln!(out, "matches={}", c.matches);
    let _ = writeln!(out, "GT={}", c.num_gt);
}

/// Mean IoU of every ground-truth (frame, id) against the same id in the
/// prediction; a missing prediction scores zero.
fn mean_region_iou(gt: &TrackSet, pred: &TrackSet) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for (frame, entries) in gt.frames() {
        let p = pred.frame(frame);
        for (id, region) in entries {
            total += p
                .iter()
                .find(|(pid, _)| pid == id)
                .map_or(0.0, |(_, r)| region.iou(r));
            n += 1;
        }
    }
    if n == 0 {
        1.0
    } else {
        total / n as f64
    }
}

pub fn run(a: &EvalArgs) -> CliResult<()> {
    let mut out = String::new();
    let mut any = false;
    if let (Some(gt), Some(pred)) = (&a.gt, &a.pred) {
        let gt = io::mot_track_set(&io::read_mot(gt)?)?;
        let pred = io::mot_track_set(&io::read_mot(pred)?)?;
        tracking_report(&mut out, &gt, &pred, a.iou);
        any = true;
    }
    if let (Some(gt), Some(pred)) = (&a.gt_masks, &a.pred_masks) {
        let gt = mask_track_set(gt)?;
        let pred = mask_track_set(pred)?;
        if !any {
            tracking_report(&mut out, &gt, &pred, a.iou);
        }
        let _ = writeln!(out, "mask_IoU={:.6}", mean_region_iou(&gt, &pred));
        any = true;
    }
    if let (Some(gt), Some(pred)) = (&a.gt_poses, &a.pred_poses) {
        let gt = poses_by_frame(gt)?;
        let pred = poses_by_frame(pred)?;
        let mut g = Vec::new();
        let mut p = Vec::new();
        for (frame, pose) in gt {
            let Some((_, q)) = pred.iter().find(|(f, _)| *f == frame) else {
                return Err(input_error(format!("no predicted pose for frame {}", frame + 1)));
            };
            g.push(pose);
            p.push(q.clone());
        }
        let _ = writeln!(out, "PCK={:.6}", pck(&g, &p, a.pck_delta)?);
        any = true;
    }
    if !any {
        return Err(input_error(
            "eval needs --gt/--pred, --gt-masks/--pred-masks or --gt-poses/--pred-poses",
        ));
    }
    print!("{out}");
    if let Some(path) = &a.out {
        fs::write(path, &out).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}
