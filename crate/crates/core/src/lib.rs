//! Coarse-to-fine segmentation of grayscale images.
//!
//! The input is squeezed into an averaging pyramid, only the small top level
//! is segmented outright, and the labels are then carried down level by level
//! with a local refinement of pixels that disagree with their region. Every
//! level's regions are described in an object list from which each level's
//! generalized intensity map can be rebuilt.

pub mod cli;
pub mod descent;
pub mod error;
pub mod image;
pub mod labels;
pub mod pipeline;
pub mod pnm;
pub mod pyramid;
pub mod reconstruct;
pub mod registry;
pub mod segment;
pub mod synth;

pub use descent::{DescentParams, LevelResult};
pub use error::{Error, PnmError, Result};
pub use image::GrayImage;
pub use labels::{Connectivity, LabelMap};
pub use pipeline::{segment_image, SegmentParams};
pub use pyramid::Pyramid;
pub use registry::{RegionRecord, SegmentationResult};
