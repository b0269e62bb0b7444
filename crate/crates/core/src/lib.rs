//! Training-free tracking primitives over dense feature maps.
//!
//! Propagation heads carry an object's state forward from the previous
//! frame: [`boxprop`] for boxes (cross-correlation and correlation-filter
//! heads) and [`labelprop`] for masks and pose belief maps. Association
//! heads link externally supplied detections into identities: [`associate`]
//! combines a Kalman motion model with reconstruction-based appearance
//! similarity and two-stage [`assign`]ment.

pub mod assign;
pub mod associate;
pub mod boxprop;
pub mod config;
pub mod error;
pub mod features;
pub mod geom;
pub mod grid;
pub mod io;
pub mod labelprop;
pub mod metrics;
pub mod spectral;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use geom::{body_size, box_to_grid, mask_to_box, pose_to_mask, BBox, Keypoint, LabelImage, Mask, Pose, Skeleton};
pub use types::{FeatureMap, LabelMap, Observation, Shape};

pub use image;
