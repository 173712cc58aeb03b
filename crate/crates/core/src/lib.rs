//! Online multi-object tracking by detection with box-shape-aware
//! association, crowd-adaptive thresholds, location-aware track timeouts and
//! scene-aware offline refinement.

pub mod adaptation;
pub mod assignment;
pub mod bench;
pub mod error;
pub mod geometry;
pub mod mot_io;
pub mod postprocess;
pub mod scene_features;
pub mod tracker;

pub use adaptation::{default_config, Profile, SceneMetadata, TrackerConfig};
pub use error::{Error, Result};
pub use geometry::{BoundingBox, CostKind};
pub use tracker::{track_sequence, Detection, Track, TrackStatus, Tracker};
