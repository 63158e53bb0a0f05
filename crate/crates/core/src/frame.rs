//! Manifest record for one camera frame.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::class::Weather;
use crate::geometry::BoundingBox;

/// One line of a frame manifest.
///
/// Paths are kept as opaque strings; resolving them is the job of the
/// IO layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub frame_id: String,
    pub image: String,
    pub width: u32,
    pub height: u32,
    pub weather: Weather,
    #[serde(default)]
    pub boxes: Vec<BoundingBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lidar: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<String>,
}
