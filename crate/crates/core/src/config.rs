//! Plain-text `key = value` configuration.
//!
//! Keys are `section.field`, where the section names a config type
//! (`boxprop`, `labelprop`, `associate`, `features`) and the field mirrors
//! the struct field. Kalman noise lives under `associate.noise.`. Lines
//! starting with `#` are comments.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::associate::{AssocConfig, KalmanNoise};
use crate::boxprop::BoxPropConfig;
use crate::error::{Error, Result};
use crate::features::FeatureSource;
use crate::geom::Skeleton;
use crate::labelprop::PropConfig;

pub const SECTIONS: &[&str] = &["boxprop", "labelprop", "associate", "features"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("line {}: expected `key = value`", i + 1)))?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::Format(format!("line {}: empty key", i + 1)));
            }
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Error::Format(format!("line {}: duplicate key `{key}`", i + 1)));
            }
        }
        Ok(ConfigFile { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Sets or replaces a key; used for command-line overrides.
    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.insert(key.into(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(field, value)` pairs under `section.`.
    pub fn section<'a>(&'a self, section: &'a str) -> impl Iterator<Item = (&'a str, &'a str)> {
        self.entries.iter().filter_map(move |(k, v)| {
            k.strip_prefix(section)
                .and_then(|rest| rest.strip_prefix('.'))
                .map(|field| (field, v.as_str()))
        })
    }

    /// Rejects keys outside the known sections.
    pub fn check_sections(&self) -> Result<()> {
        for key in self.entries.keys() {
            let known = key
                .split_once('.')
                .is_some_and(|(s, _)| SECTIONS.contains(&s));
            if !known {
                return Err(Error::Config(format!("unknown configuration key `{key}`")));
            }
        }
        Ok(())
    }

    /// Applies every field of `section` to `target`.
    pub fn apply<C: Configure>(&self, section: &str, target: &mut C) -> Result<()> {
        for (field, value) in self.section(section) {
            target
                .set_field(field, value)
                .map_err(|e| Error::Config(format!("{section}.{field}: {e}")))?;
        }
        Ok(())
    }
}

/// A config struct whose fields can be set by name from text.
pub trait Configure {
    fn set_field(&mut self, field: &str, value: &str) -> Result<()>;
}

fn parse<T: FromStr>(value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse `{value}`")))
}

pub fn parse_bool(value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("expected a boolean, got `{value}`"))),
    }
}

/// `a x b` or `a,b`.
pub fn parse_pair(value: &str) -> Result<(usize, usize)> {
    let (a, b) = value
        .split_once(['x', ','])
        .ok_or_else(|| Error::Config(format!("expected `AxB`, got `{value}`")))?;
    Ok((parse(a.trim())?, parse(b.trim())?))
}

/// `human15`, or `N: a-b, c-d, ...`.
pub fn parse_skeleton(value: &str) -> Result<Skeleton> {
    if value.eq_ignore_ascii_case("human15") {
        return Ok(Skeleton::human15());
    }
    let (n, edges) = value
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("expected `N: a-b, ...`, got `{value}`")))?;
    let edges = edges
        .split(',')
        .map(str::trim)
        .filter(|e| !e.is_empty())
        .map(|e| {
            let (a, b) = e
                .split_once('-')
                .ok_or_else(|| Error::Config(format!("bad skeleton edge `{e}`")))?;
            Ok((parse(a.trim())?, parse(b.trim())?))
        })
        .collect::<Result<_>>()?;
    Skeleton::new(parse(n.trim())?, edges)
}

fn unknown(field: &str) -> Result<()> {
    Err(Error::Config(format!("unknown field `{field}`")))
}

impl Configure for BoxPropConfig {
    fn set_field(&mut self, field: &str, value: &str) -> Result<()> {
        match field {
            "context_factor" => self.context_factor = parse(value)?,
            "patch_size" => self.patch_size = parse(value)?,
            "num_scales" => self.num_scales = parse(value)?,
            "scale_step" => self.scale_step = parse(value)?,
            "scale_penalty" => self.scale_penalty = parse(value)?,
            "ridge" => self.ridge = parse(value)?,
            "momentum" => self.momentum = parse(value)?,
            "head" => self.head = value.parse()?,
            "response_upsample" => self.response_upsample = parse(value)?,
            "stride" => self.stride = parse(value)?,
            "gaussian_sigma" => {
                self.gaussian_sigma = match value {
                    "auto" | "none" => None,
                    v => Some(parse(v)?),
                }
            }
            "displacement_window" => self.displacement_window = parse_bool(value)?,
            "feature_window" => self.feature_window = parse_bool(value)?,
            "normalize_features" => self.normalize_features = parse_bool(value)?,
            other => return unknown(other),
        }
        Ok(())
    }
}

impl Configure for PropConfig {
    fn set_field(&mut self, field: &str, value: &str) -> Result<()> {
        match field {
            "temperature" => self.temperature = parse(value)?,
            "memory_size" => self.memory_size = parse(value)?,
            "radius" => self.radius = parse(value)?,
            "circular" => self.circular = parse_bool(value)?,
            "topk" => self.topk = parse(value)?,
            "gaussian_coeff" => self.gaussian_coeff = parse(value)?,
            "visibility_threshold" => self.visibility_threshold = parse(value)?,
            "standardize_features" => self.standardize_features = parse_bool(value)?,
            "mask_size" => self.mask_size = parse_pair(value)?,
            "pose_size" => self.pose_size = parse_pair(value)?,
            other => return unknown(other),
        }
        Ok(())
    }
}

impl Configure for KalmanNoise {
    fn set_field(&mut self, field: &str, value: &str) -> Result<()> {
        match field {
            "position_weight" => self.position_weight = parse(value)?,
            "velocity_weight" => self.velocity_weight = parse(value)?,
            "aspect_position_std" => self.aspect_position_std = parse(value)?,
            "aspect_velocity_std" => self.aspect_velocity_std = parse(value)?,
            "measurement_weight" => self.measurement_weight = parse(value)?,
            "aspect_measurement_std" => self.aspect_measurement_std = parse(value)?,
            other => return unknown(other),
        }
        Ok(())
    }
}

impl Configure for AssocConfig {
    fn set_field(&mut self, field: &str, value: &str) -> Result<()> {
        if let Some(noise) = field.strip_prefix("noise.") {
            return self.noise.set_field(noise, value);
        }
        match field {
            "cost_weight" => self.cost_weight = parse(value)?,
            "gate" => self.gate = parse(value)?,
            "iou_threshold" => self.iou_threshold = parse(value)?,
            "inactive_patience" => self.inactive_patience = parse(value)?,
            "fps" => self.fps = parse(value)?,
            "similarity" => self.similarity = value.parse()?,
            "use_motion" => self.use_motion = parse_bool(value)?,
            "history" => self.history = parse(value)?,
            "gf_grid" => self.gf_grid = parse_pair(value)?,
            "standardize_features" => self.standardize_features = parse_bool(value)?,
            "skeleton" => self.skeleton = parse_skeleton(value)?,
            "skeleton_width" => self.skeleton_width = parse(value)?,
            other => return unknown(other),
        }
        Ok(())
    }
}

impl Configure for FeatureSource {
    fn set_field(&mut self, field: &str, value: &str) -> Result<()> {
        match field {
            "stride" => self.stride = parse(value)?,
            "normalize" => self.normalize = parse_bool(value)?,
            other => return unknown(other),
        }
        Ok(())
    }
}
