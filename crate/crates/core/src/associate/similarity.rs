//! Object-level appearance similarity: reconstruction similarity (RSM) and
//! the center, pooled and flattened baselines.

use std::str::FromStr;

use crate::error::{Error, Result};

/// Point features of one object, `len() x channels`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectFeatures {
    channels: usize,
    points: Vec<f32>,
    center: usize,
}

impl ObjectFeatures {
    /// `center` indexes the point at the object's mass center.
    pub fn new(channels: usize, points: Vec<f32>, center: usize) -> Result<Self> {
        if channels == 0 || points.len() % channels != 0 {
            return Err(Error::dim(format!(
                "{} values do not split into {channels}-channel points",
                points.len()
            )));
        }
        let n = points.len() / channels;
        if n > 0 && center >= n {
            return Err(Error::dim(format!("center {center} out of {n} points")));
        }
        Ok(ObjectFeatures {
            channels,
            points,
            center,
        })
    }

    pub fn from_points(points: &[Vec<f32>], center: usize) -> Result<Self> {
        let channels = points.first().map_or(1, Vec::len);
        if points.iter().any(|p| p.len() != channels) {
            return Err(Error::dim("points differ in channel count"));
        }
        Self::new(channels, points.concat(), center)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f32] {
        &self.points[i * self.channels..(i + 1) * self.channels]
    }

    pub fn data(&self) -> &[f32] {
        &self.points
    }

    pub fn center(&self) -> &[f32] {
        self.point(self.center)
    }

    pub fn pooled(&self) -> Vec<f64> {
        let n = self.len().max(1) as f64;
        let mut out = vec![0.0; self.channels];
        for p in self.points.chunks_exact(self.channels) {
            for (o, v) in out.iter_mut().zip(p) {
                *o += f64::from(*v) / n;
            }
        }
        out
    }

    /// Stacks several observations of one object into a single point set.
    /// The center of the last part is kept.
    pub fn concat(parts: &[&ObjectFeatures]) -> Result<Self> {
        let last = parts.last().ok_or(Error::EmptyFeature(0))?;
        if parts.iter().any(|p| p.channels != last.channels) {
            return Err(Error::dim("history entries differ in channel count"));
        }
        let offset: usize = parts[..parts.len() - 1].iter().map(|p| p.len()).sum();
        let points = parts.iter().flat_map(|p| p.points.iter().copied()).collect();
        Self::new(last.channels, points, offset + last.center)
    }
}

/// Appearance similarity used for association.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SimilarityMode {
    #[default]
    Rsm,
    /// Center point vector.
    Cf,
    /// Mean-pooled vector.
    Gpf,
    /// Flattened point grid; needs equal point counts.
    Gf,
}

impl FromStr for SimilarityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rsm" => Ok(SimilarityMode::Rsm),
            "cf" => Ok(SimilarityMode::Cf),
            "gpf" => Ok(SimilarityMode::Gpf),
            "gf" => Ok(SimilarityMode::Gf),
            other => Err(Error::Config(format!("unknown similarity mode `{other}`"))),
        }
    }
}

/// Cosine similarity with `cos(x, 0) = 0`.
pub fn cosine<A, B>(a: A, b: B) -> f64
where
    A: IntoIterator<Item = f64>,
    B: IntoIterator<Item = f64>,
{
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.into_iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

fn as_f64(v: &[f32]) -> impl Iterator<Item = f64> + '_ {
    v.iter().map(|x| f64::from(*x))
}

fn check(objects: &[ObjectFeatures], offset: usize) -> Result<()> {
    for (i, o) in objects.iter().enumerate() {
        if o.is_empty() {
            return Err(Error::EmptyFeature(offset + i));
        }
    }
    Ok(())
}

/// Row-softmax of `a . b^T` over all points of `a` against all points of `b`.
fn attention(a: &[f32], b: &[f32], channels: usize) -> Vec<f64> {
    let (na, nb) = (a.len() / channels, b.len() / channels);
    let mut out = vec![0.0; na * nb];
    for (i, row) in out.chunks_exact_mut(nb).enumerate() {
        let p = &a[i * channels..(i + 1) * channels];
        for (j, v) in row.iter_mut().enumerate() {
            *v = as_f64(p).zip(as_f64(&b[j * channels..(j + 1) * channels])).map(|(x, y)| x * y).sum();
        }
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            z += *v;
        }
        row.iter_mut().for_each(|v| *v /= z);
    }
    out
}

/// Cosine between object `i`'s points and their reconstruction from object
/// `j` through the `(i, j)` block of the attention matrix.
fn reconstruction_cosine(
    attn: &[f64],
    cols: usize,
    src: &ObjectFeatures,
    src_offset: usize,
    other: &ObjectFeatures,
    other_offset: usize,
) -> f64 {
    let c = src.channels;
    let mut recon = vec![0.0f64; src.len() * c];
    for a in 0..src.len() {
        let row = &attn[(src_offset + a) * cols..(src_offset + a + 1) * cols];
        let out = &mut recon[a * c..(a + 1) * c];
        for b in 0..other.len() {
            let w = row[other_offset + b];
            for (o, v) in out.iter_mut().zip(other.point(b)) {
                *o += w * f64::from(*v);
            }
        }
    }
    cosine(as_f64(&src.points), recon)
}

/// Reconstruction similarity between every tracklet and every detection.
///
/// Forward attention is the row-softmax of all tracklet points against all
/// detection points; each tracklet is rebuilt from each detection through
/// its block of that matrix and compared by cosine over the flattened
/// points. The backward direction swaps roles and the two cosines are
/// averaged.
pub fn rsm(tracks: &[ObjectFeatures], dets: &[ObjectFeatures]) -> Result<Vec<Vec<f64>>> {
    check(tracks, 0)?;
    check(dets, tracks.len())?;
    if tracks.is_empty() || dets.is_empty() {
        return Ok(vec![Vec::new(); tracks.len()]);
    }
    let c = tracks[0].channels;
    if tracks.iter().chain(dets).any(|o| o.channels != c) {
        return Err(Error::ShapeMismatch("objects differ in channel count".into()));
    }
    let t_all: Vec<f32> = tracks.iter().flat_map(|o| o.points.iter().copied()).collect();
    let d_all: Vec<f32> = dets.iter().flat_map(|o| o.points.iter().copied()).collect();
    let (nt, nd) = (t_all.len() / c, d_all.len() / c);
    let forward = attention(&t_all, &d_all, c);
    let backward = attention(&d_all, &t_all, c);
    let offsets = |objs: &[ObjectFeatures]| {
        objs.iter()
            .scan(0, |acc, o| {
                let at = *acc;
                *acc += o.len();
                Some(at)
            })
            .collect::<Vec<_>>()
    };
    let (t_off, d_off) = (offsets(tracks), offsets(dets));
    Ok(tracks
        .iter()
        .enumerate()
        .map(|(i, t)| {
            dets.iter()
                .enumerate()
                .map(|(j, d)| {
                    let fwd = reconstruction_cosine(&forward, nd, t, t_off[i], d, d_off[j]);
                    let bwd = reconstruction_cosine(&backward, nt, d, d_off[j], t, t_off[i]);
                    0.5 * (fwd + bwd)
                })
                .collect()
        })
        .collect())
}

/// Similarity matrix under any mode.
pub fn similarity(
    mode: SimilarityMode,
    tracks: &[ObjectFeatures],
    dets: &[ObjectFeatures],
) -> Result<Vec<Vec<f64>>> {
    if mode == SimilarityMode::Rsm {
        return rsm(tracks, dets);
    }
    check(tracks, 0)?;
    check(dets, tracks.len())?;
    tracks
        .iter()
        .map(|t| {
            dets.iter()
                .map(|d| match mode {
                    SimilarityMode::Cf => Ok(cosine(as_f64(t.center()), as_f64(d.center()))),
                    SimilarityMode::Gpf => Ok(cosine(t.pooled(), d.pooled())),
                    SimilarityMode::Gf => {
                        if t.points.len() != d.points.len() {
                            return Err(Error::ShapeMismatch(format!(
                                "flattened features need equal sizes, got {} and {} points",
                                t.len(),
                                d.len()
                            )));
                        }
                        Ok(cosine(as_f64(&t.points), as_f64(&d.points)))
                    }
                    SimilarityMode::Rsm => unreachable!(),
                })
                .collect()
        })
        .collect()
}
