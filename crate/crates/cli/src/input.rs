use std::path::PathBuf;

use proptrack::features::{load_feature_map, FeatureSource};
use proptrack::image::{imageops, RgbImage};
use proptrack::io;
use proptrack::{FeatureMap, LabelImage};

use crate::args::InputArgs;
use crate::{input_error, CliResult};

/// Frames and/or precomputed features of one video.
pub struct Sequence {
    frames: Option<Vec<PathBuf>>,
    features: Option<Vec<PathBuf>>,
    source: FeatureSource,
}

impl Sequence {
    pub fn open(args: &InputArgs, source: &FeatureSource) -> CliResult<Self> {
        let frames = args.frames.as_ref().map(io::list_frames).transpose()?;
        let features = args
            .features
            .as_ref()
            .map(io::list_feature_files)
            .transpose()?;
        match (&frames, &features) {
            (None, None) => return Err(input_error("need --frames or --features")),
            (Some(a), Some(b)) if a.len() != b.len() => {
                return Err(input_error(format!(
                    "{} frames but {} feature files",
                    a.len(),
                    b.len()
                )))
            }
            _ => {}
        }
        Ok(Sequence {
            frames,
            features,
            source: source.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.features
            .as_ref()
            .or(self.frames.as_ref())
            .map_or(0, Vec::len)
    }

    pub fn has_features(&self) -> bool {
        self.features.is_some()
    }

    pub fn frame(&self, i: usize) -> CliResult<Option<RgbImage>> {
        Ok(match &self.frames {
            Some(paths) => Some(io::load_frame(&paths[i])?),
            None => None,
        })
    }

    /// Raw features of frame `i`. Built-in features are extracted from the
    /// frame, optionally resized to `work` `(width, height)` first.
    pub fn features(&self, i: usize, work: Option<(u32, u32)>) -> CliResult<FeatureMap> {
        if let Some(paths) = &self.features {
            return Ok(load_feature_map(&paths[i])?);
        }
        let frame = self.frame(i)?.expect("sequence has frames or features");
        let frame = match work {
            Some((w, h)) if (w, h) != frame.dimensions() => {
                imageops::resize(&frame, w, h, imageops::FilterType::Triangle)
            }
            _ => frame,
        };
        Ok(self.source.features(0, Some(&frame))?)
    }

    /// `(width, height)` of the first frame, if frames were given.
    pub fn frame_size(&self) -> CliResult<Option<(u32, u32)>> {
        Ok(match &self.frames {
            Some(paths) => Some(io::load_frame(&paths[0])?.dimensions()),
            None => None,
        })
    }
}

/// Nearest-neighbour resize of an id image.
pub fn resize_labels(labels: &LabelImage, width: usize, height: usize) -> LabelImage {
    if (labels.width(), labels.height()) == (width, height) {
        return labels.clone();
    }
    let mut out = LabelImage::background(width, height);
    for y in 0..height {
        let sy = ((y as f64 + 0.5) * labels.height() as f64 / height as f64) as usize;
        for x in 0..width {
            let sx = ((x as f64 + 0.5) * labels.width() as f64 / width as f64) as usize;
            out.set(
                x,
                y,
                labels.get(sx.min(labels.width() - 1), sy.min(labels.height() - 1)),
            );
        }
    }
    out
}
