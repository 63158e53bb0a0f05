//! Core algorithms for turning bounding-box labels into dense semantic
//! segmentation masks.
//!
//! The crate is `no_std` (with `alloc`) and does no IO: every operation
//! works on in-memory boxes, masks, point clouds and verdict records.
//! Files, images, the CLI and the HTTP surfaces live in the `boxmask`
//! crate.
//!
//! Pipeline stages, in the order a frame goes through them:
//!
//! 1. [`filter::filter_frame`]: clamp, validate, per-class dedup, top-k.
//! 2. [`fusion::fuse_frame`]: batched proposals from a [`backend::MaskBackend`]
//!    merged with the class-priority overwrite rule.
//! 3. [`resize::resize_labels`]: label-safe resize to the output side.
//! 4. Optional variants: [`camera::camera_annotation`] and
//!    [`lidar::lidar_annotation`].
//!
//! Alongside: [`refine::refine_mask`] for boundary correction of existing
//! masks, [`metrics`] for IoU evaluation, [`dataset`] for pixel statistics
//! and splits, and [`curation`] for the accept/reject review log.
#![cfg_attr(not(test), no_std)]
// NaN-rejecting comparisons are written as negations on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod backend;
pub mod camera;
pub mod class;
pub mod components;
pub mod curation;
pub mod dataset;
pub mod filter;
pub mod frame;
pub mod fusion;
pub mod geometry;
pub mod lidar;
pub mod mask;
pub mod metrics;
pub mod refine;
pub mod resize;
pub mod rle;

pub use backend::{BackendError, MaskBackend, MaskProposal, Prompt, SyntheticBackend};
pub use class::{InputClass, OutputClass, Weather, IGNORE, NUM_CLASSES};
pub use frame::FrameRecord;
pub use geometry::BoundingBox;
pub use mask::{Bitmap, SemanticMask};
pub use metrics::ConfusionMatrix;

/// Errors raised by core operations.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("unknown object class")]
    UnknownClass,
    #[error("unknown weather tag")]
    UnknownWeather,
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        found: (u32, u32),
    },
    #[error("invalid mask: {0}")]
    InvalidMask(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("prediction contains the ignore label")]
    IgnoreInPrediction,
    #[error("empty manifest")]
    EmptyManifest,
    #[error(transparent)]
    Backend(#[from] BackendError),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
