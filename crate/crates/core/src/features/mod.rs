//! The appearance-model boundary: feature maps either come from `UTFM`
//! files produced elsewhere or from the deterministic built-in extractor.

mod builtin;
pub mod utfm;

use std::path::PathBuf;

use image::RgbImage;

use crate::error::{Error, Result};
use crate::types::FeatureMap;

pub use builtin::{extract_builtin, BUILTIN_CHANNELS};
pub use utfm::{load_feature_map, write_feature_map};

/// Default total stride of the appearance model.
pub const DEFAULT_STRIDE: u32 = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMode {
    /// One `UTFM` file per frame, in frame order.
    Files(Vec<PathBuf>),
    Builtin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSource {
    pub mode: FeatureMode,
    pub stride: u32,
    pub normalize: bool,
}

impl Default for FeatureSource {
    fn default() -> Self {
        FeatureSource {
            mode: FeatureMode::Builtin,
            stride: DEFAULT_STRIDE,
            normalize: true,
        }
    }
}

impl FeatureSource {
    pub fn builtin(stride: u32) -> Self {
        FeatureSource {
            mode: FeatureMode::Builtin,
            stride,
            normalize: true,
        }
    }

    pub fn files(paths: Vec<PathBuf>) -> Self {
        FeatureSource {
            mode: FeatureMode::Files(paths),
            ..Self::default()
        }
    }

    pub fn num_frames(&self) -> Option<usize> {
        match &self.mode {
            FeatureMode::Files(paths) => Some(paths.len()),
            FeatureMode::Builtin => None,
        }
    }

    /// Features for frame `index`. The built-in mode needs the decoded frame.
    pub fn features(&self, index: usize, frame: Option<&RgbImage>) -> Result<FeatureMap> {
        let fm = match &self.mode {
            FeatureMode::Files(paths) => {
                let path = paths.get(index).ok_or_else(|| {
                    Error::Config(format!("no feature file for frame {}", index + 1))
                })?;
                load_feature_map(path)?
            }
            FeatureMode::Builtin => {
                let frame = frame.ok_or_else(|| {
                    Error::Config("built-in features need decoded frames".into())
                })?;
                extract_builtin(frame, self.stride)?
            }
        };
        Ok(if self.normalize {
            l2_normalize_points(&fm)
        } else {
            fm
        })
    }
}

/// Scales every point vector to unit L2 norm. All-zero points stay zero.
pub fn l2_normalize_points(fm: &FeatureMap) -> FeatureMap {
    let c = fm.channels();
    let mut data = fm.data().to_vec();
    for point in data.chunks_exact_mut(c) {
        let norm = point
            .iter()
            .map(|v| f64::from(*v) * f64::from(*v))
            .sum::<f64>()
            .sqrt();
        if norm > 0.0 {
            for v in point.iter_mut() {
                *v = (f64::from(*v) / norm) as f32;
            }
        }
    }
    FeatureMap::new(fm.height(), fm.width(), c, fm.stride(), data)
        .expect("normalization preserves shape and finiteness")
}

/// Prepares a raw feature map for attention. With `standardize`, every
/// channel is shifted to zero mean and scaled to unit variance over the
/// frame (constant channels become zero) before the points are normalized.
pub fn prepare_features(fm: &FeatureMap, standardize: bool) -> FeatureMap {
    if !standardize {
        return l2_normalize_points(fm);
    }
    let c = fm.channels();
    let n = fm.len() as f64;
    let mut mean = vec![0.0f64; c];
    for p in fm.points() {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += f64::from(*v) / n;
        }
    }
    let mut var = vec![0.0f64; c];
    for p in fm.points() {
        for ((s, v), m) in var.iter_mut().zip(p).zip(&mean) {
            *s += (f64::from(*v) - m).powi(2) / n;
        }
    }
    let scale: Vec<f64> = var
        .iter()
        .map(|v| if v.sqrt() > 1e-9 { 1.0 / v.sqrt() } else { 0.0 })
        .collect();
    let data: Vec<f32> = fm
        .points()
        .flat_map(|p| {
            p.iter()
                .zip(&mean)
                .zip(&scale)
                .map(|((v, m), s)| ((f64::from(*v) - m) * s) as f32)
        })
        .collect();
    let standardized = FeatureMap::new(fm.height(), fm.width(), c, fm.stride(), data)
        .expect("standardizing preserves shape");
    l2_normalize_points(&standardized)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalizes_three_four() {
        let fm = FeatureMap::new(1, 2, 2, 8, vec![3.0, 4.0, 0.0, 0.0]).unwrap();
        let n = l2_normalize_points(&fm);
        assert!((n.data()[0] - 0.6).abs() < 1e-7);
        assert!((n.data()[1] - 0.8).abs() < 1e-7);
        assert_eq!(&n.data()[2..], &[0.0, 0.0]);
    }

    #[test]
    fn unit_map_is_unchanged() {
        let fm = FeatureMap::new(1, 2, 2, 8, vec![0.6, 0.8, 1.0, 0.0]).unwrap();
        let n = l2_normalize_points(&fm);
        for (a, b) in n.data().iter().zip(fm.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn builtin_source_requires_frame() {
        let src = FeatureSource::default();
        assert!(src.features(0, None).is_err());
    }

    proptest! {
        #[test]
        fn normalized_self_products_are_zero_or_one(values in proptest::collection::vec(-100.0f32..100.0, 12)) {
            let mut values = values;
            values[0..3].iter_mut().for_each(|v| *v = 0.0);
            let fm = FeatureMap::new(2, 2, 3, 8, values).unwrap();
            let n = l2_normalize_points(&fm);
            for p in n.points() {
                let dot: f32 = p.iter().map(|v| v * v).sum();
                prop_assert!(dot.abs() < 1e-6 || (dot - 1.0).abs() < 1e-6);
            }
        }
    }
}
