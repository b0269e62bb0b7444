//! File formats at the batch boundary.
//!
//! Text files use 1-based pixel coordinates: pixel index `i` is written as
//! `i + 1`, and a box's `x, y` is the top-left pixel of the box. Internally
//! boxes are centered and pixel indices are 0-based, so a box covering
//! pixels `[x0, x1)` has `u = (x0 + x1 - 1) / 2` and `w = x1 - x0`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use image::RgbImage;

use crate::error::{Error, Result};
use crate::geom::{BBox, Keypoint, LabelImage, Pose};
use crate::metrics::{Region, TrackSet};
use crate::types::{Observation, Shape};

/// Offset from the internal box edge to the 1-based first pixel.
const EDGE_TO_FILE: f64 = 1.5;

/// Box from 1-based top-left file coordinates.
pub fn box_from_file(x: f64, y: f64, w: f64, h: f64) -> Result<BBox> {
    BBox::from_tlwh(x - EDGE_TO_FILE, y - EDGE_TO_FILE, w, h)
}

/// `[x, y, w, h]` in 1-based top-left file coordinates.
pub fn box_to_file(b: &BBox) -> [f64; 4] {
    [b.left() + EDGE_TO_FILE, b.top() + EDGE_TO_FILE, b.w, b.h]
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Non-empty, non-comment lines with their 1-based line numbers, split on
/// commas or whitespace.
fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            return None;
        }
        let fields = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        Some((i + 1, fields))
    })
}

fn field<T: std::str::FromStr>(fields: &[&str], i: usize, line: usize, what: &str) -> Result<T> {
    let raw = fields
        .get(i)
        .ok_or_else(|| Error::Format(format!("line {line}: missing {what}")))?;
    raw.parse()
        .map_err(|_| Error::Format(format!("line {line}: bad {what} `{raw}`")))
}

fn frame_field(fields: &[&str], line: usize) -> Result<usize> {
    let f: i64 = field(fields, 0, line, "frame")?;
    if f < 1 {
        return Err(Error::Format(format!("line {line}: frames are 1-based")));
    }
    Ok(f as usize - 1)
}

fn num(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// One MOTChallenge row. `frame` is 0-based here.
#[derive(Debug, Clone, PartialEq)]
pub struct MotRecord {
    pub frame: usize,
    pub id: i64,
    pub bbox: BBox,
    pub confidence: f32,
}

/// Parses `frame,id,x,y,w,h[,conf,...]`. A missing confidence reads as 1.
pub fn parse_mot(text: &str) -> Result<Vec<MotRecord>> {
    records(text)
        .map(|(line, f)| {
            let frame = frame_field(&f, line)?;
            let id: f64 = field(&f, 1, line, "id")?;
            let x = field(&f, 2, line, "x")?;
            let y = field(&f, 3, line, "y")?;
            let w = field(&f, 4, line, "width")?;
            let h = field(&f, 5, line, "height")?;
            let confidence = if f.len() > 6 {
                field(&f, 6, line, "confidence")?
            } else {
                1.0
            };
            let bbox = box_from_file(x, y, w, h)
                .map_err(|e| Error::Format(format!("line {line}: {e}")))?;
            Ok(MotRecord {
                frame,
                id: id as i64,
                bbox,
                confidence,
            })
        })
        .collect()
}

pub fn read_mot(path: impl AsRef<Path>) -> Result<Vec<MotRecord>> {
    parse_mot(&read_text(path.as_ref())?)
}

/// `frame,id,x,y,w,h,conf,-1,-1,-1` lines, in the given order.
pub fn format_mot(rows: &[MotRecord]) -> String {
    let mut out = String::new();
    for r in rows {
        let [x, y, w, h] = box_to_file(&r.bbox);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},-1,-1,-1",
            r.frame + 1,
            r.id,
            num(x),
            num(y),
            num(w),
            num(h),
            num(f64::from(r.confidence))
        );
    }
    out
}

pub fn write_mot(path: impl AsRef<Path>, rows: &[MotRecord]) -> Result<()> {
    write_text(path.as_ref(), &format_mot(rows))
}

/// Box observations grouped by frame; `num_frames` pads trailing frames.
pub fn mot_detections(rows: &[MotRecord], num_frames: usize) -> Vec<Vec<Observation>> {
    let n = rows.iter().map(|r| r.frame + 1).max().unwrap_or(0).max(num_frames);
    let mut out = vec![Vec::new(); n];
    for r in rows {
        out[r.frame].push(Observation::new(r.frame, Shape::Box(r.bbox)).with_confidence(r.confidence));
    }
    out
}

/// Ground truth or results as a track set. Ids must be positive.
pub fn mot_track_set(rows: &[MotRecord]) -> Result<TrackSet> {
    let mut set = TrackSet::new();
    for r in rows {
        if r.id < 1 {
            return Err(Error::Format(format!(
                "frame {}: track ids must be positive, got {}",
                r.frame + 1,
                r.id
            )));
        }
        set.insert(r.frame, r.id as u64, Region::Box(r.bbox))?;
    }
    Ok(set)
}

/// Parses an OTB-style file: one `x,y,w,h` line per frame.
pub fn parse_otb(text: &str) -> Result<Vec<BBox>> {
    records(text)
        .map(|(line, f)| {
            let v: Vec<f64> = (0..4)
                .map(|i| field(&f, i, line, "coordinate"))
                .collect::<Result<_>>()?;
            box_from_file(v[0], v[1], v[2], v[3])
                .map_err(|e| Error::Format(format!("line {line}: {e}")))
        })
        .collect()
}

pub fn read_otb(path: impl AsRef<Path>) -> Result<Vec<BBox>> {
    parse_otb(&read_text(path.as_ref())?)
}

pub fn format_otb(boxes: &[BBox]) -> String {
    let mut out = String::new();
    for b in boxes {
        let [x, y, w, h] = box_to_file(b);
        let _ = writeln!(out, "{},{},{},{}", num(x), num(y), num(w), num(h));
    }
    out
}

pub fn write_otb(path: impl AsRef<Path>, boxes: &[BBox]) -> Result<()> {
    write_text(path.as_ref(), &format_otb(boxes))
}

/// One keypoint row of a pose table. `frame` is 0-based; `id` is present
/// only in tables with an identity column.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseRow {
    pub frame: usize,
    pub id: Option<i64>,
    pub keypoint: usize,
    pub point: Keypoint,
}

/// Parses `frame,keypoint_index,x,y,visible`, or with `with_id`
/// `frame,id,keypoint_index,x,y,visible`.
pub fn parse_pose_table(text: &str, with_id: bool) -> Result<Vec<PoseRow>> {
    let o = usize::from(with_id);
    records(text)
        .map(|(line, f)| {
            let frame = frame_field(&f, line)?;
            let id = if with_id {
                Some(field::<f64>(&f, 1, line, "id")? as i64)
            } else {
                None
            };
            let keypoint = field(&f, 1 + o, line, "keypoint index")?;
            let x: f64 = field(&f, 2 + o, line, "x")?;
            let y: f64 = field(&f, 3 + o, line, "y")?;
            let visible: i64 = field(&f, 4 + o, line, "visibility")?;
            Ok(PoseRow {
                frame,
                id,
                keypoint,
                point: Keypoint {
                    x: x - 1.0,
                    y: y - 1.0,
                    visible: visible > 0,
                },
            })
        })
        .collect()
}

pub fn read_pose_table(path: impl AsRef<Path>, with_id: bool) -> Result<Vec<PoseRow>> {
    parse_pose_table(&read_text(path.as_ref())?, with_id)
}

/// Assembles rows into poses keyed by `(frame, id)`; rows without an id
/// use id 0. Unlisted keypoints are hidden.
pub fn group_poses(rows: &[PoseRow], num_keypoints: usize) -> Result<BTreeMap<(usize, i64), Pose>> {
    let mut out: BTreeMap<(usize, i64), Pose> = BTreeMap::new();
    for r in rows {
        if r.keypoint >= num_keypoints {
            return Err(Error::Format(format!(
                "frame {}: keypoint index {} exceeds skeleton size {num_keypoints}",
                r.frame + 1,
                r.keypoint
            )));
        }
        let pose = out
            .entry((r.frame, r.id.unwrap_or(0)))
            .or_insert_with(|| Pose::new(vec![Keypoint::hidden(); num_keypoints]));
        pose.keypoints[r.keypoint] = r.point;
    }
    Ok(out)
}

/// Writes every keypoint of every pose. `id` of `None` omits the column.
pub fn format_pose_table(poses: &[(usize, Option<i64>, &Pose)]) -> String {
    let mut out = String::new();
    for (frame, id, pose) in poses {
        for (k, p) in pose.keypoints.iter().enumerate() {
            let _ = write!(out, "{}", frame + 1);
            if let Some(id) = id {
                let _ = write!(out, ",{id}");
            }
            let _ = writeln!(
                out,
                ",{k},{},{},{}",
                num(p.x + 1.0),
                num(p.y + 1.0),
                u8::from(p.visible)
            );
        }
    }
    out
}

/// Palette entry for object id `i`: the usual bit-interleaved scheme, so
/// low ids get well-separated colors.
fn palette_color(i: u8) -> [u8; 3] {
    let (mut r, mut g, mut b) = (0u8, 0u8, 0u8);
    let mut c = i;
    for j in 0..8 {
        r |= ((c & 1) as u8) << (7 - j);
        g |= (((c >> 1) & 1) as u8) << (7 - j);
        b |= (((c >> 2) & 1) as u8) << (7 - j);
        c >>= 3;
        if c == 0 {
            break;
        }
    }
    [r, g, b]
}

/// Writes an 8-bit indexed PNG where the pixel index is the object id.
pub fn write_label_png(path: impl AsRef<Path>, labels: &LabelImage) -> Result<()> {
    let path = path.as_ref();
    if let Some(id) = labels.data().iter().find(|v| **v > 255) {
        return Err(Error::Format(format!(
            "object id {id} does not fit an 8-bit palette"
        )));
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let png_err = |e: png::EncodingError| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut enc = png::Encoder::new(
        BufWriter::new(file),
        labels.width() as u32,
        labels.height() as u32,
    );
    enc.set_color(png::ColorType::Indexed);
    enc.set_depth(png::BitDepth::Eight);
    enc.set_palette((0..=255u8).flat_map(palette_color).collect::<Vec<_>>());
    let mut writer = enc.write_header().map_err(png_err)?;
    let data: Vec<u8> = labels.data().iter().map(|v| *v as u8).collect();
    writer.write_image_data(&data).map_err(png_err)?;
    writer.finish().map_err(png_err)
}

/// Reads an indexed or grayscale PNG as object ids, without palette
/// expansion.
pub fn read_label_png(path: impl AsRef<Path>) -> Result<LabelImage> {
    let path = path.as_ref();
    let img_err = |message: String| Error::Image {
        path: path.to_path_buf(),
        message,
    };
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(std::io::BufReader::new(file));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| img_err(e.to_string()))?;
    let (color, depth) = reader.output_color_type();
    if !matches!(color, png::ColorType::Indexed | png::ColorType::Grayscale) {
        return Err(img_err(format!(
            "label images must be indexed or grayscale, found {color:?}"
        )));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| img_err("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| img_err(e.to_string()))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let bits = depth as usize;
    let mut data = Vec::with_capacity(w * h);
    for row in buf[..info.buffer_size()].chunks_exact(info.line_size) {
        for x in 0..w {
            let v = match bits {
                16 => u16::from_be_bytes([row[2 * x], row[2 * x + 1]]),
                8 => u16::from(row[x]),
                _ => {
                    let per_byte = 8 / bits;
                    let byte = row[x / per_byte];
                    let shift = 8 - bits * (x % per_byte + 1);
                    u16::from((byte >> shift) & ((1u8 << bits) - 1))
                }
            };
            data.push(v);
        }
    }
    LabelImage::new(w, h, data)
}

fn numeric_key(path: &Path) -> (Option<u64>, String) {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let digits: String = stem
        .chars()
        .rev()
        .take_while(char::is_ascii_digit)
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    (digits.parse().ok(), stem)
}

/// Files in `dir` with one of `extensions`, ordered by the trailing number
/// in the file stem, then by name.
pub fn list_numbered(dir: impl AsRef<Path>, extensions: &[&str]) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .map(|e| e.to_string_lossy().to_ascii_lowercase());
        if path.is_file() && ext.is_some_and(|e| extensions.contains(&e.as_str())) {
            paths.push(path);
        }
    }
    paths.sort_by_cached_key(|p| numeric_key(p));
    Ok(paths)
}

pub const FRAME_EXTENSIONS: &[&str] = &["ppm", "pnm", "pgm", "png"];

pub fn list_frames(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let paths = list_numbered(dir, FRAME_EXTENSIONS)?;
    if paths.is_empty() {
        return Err(Error::Format(format!("{}: no frames found", dir.display())));
    }
    Ok(paths)
}

pub fn list_feature_files(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let paths = list_numbered(dir, &["utfm"])?;
    if paths.is_empty() {
        return Err(Error::Format(format!(
            "{}: no feature files found",
            dir.display()
        )));
    }
    Ok(paths)
}

pub fn load_frame(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    image::open(path)
        .map(|img| img.to_rgb8())
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

/// Writes a binary portable pixmap.
pub fn write_ppm(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    let path = path.as_ref();
    img.save_with_format(path, image::ImageFormat::Pnm)
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}
