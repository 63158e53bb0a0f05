//! Box filtering: clamping, per-box validity checks, intra-class IoU
//! deduplication and the top-k cap.

use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::class::InputClass;
use crate::geometry::{box_iou, clamp_box, BoundingBox};
use crate::{Error, Result};

/// Which box side the class minimum-size threshold is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeRule {
    /// Both sides must exceed the threshold.
    #[default]
    MinSide,
    /// The longer side must exceed the threshold.
    MaxSide,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub min_dim_vehicle: f64,
    /// Minimum for signs, pedestrians and cyclists.
    pub min_dim_small: f64,
    pub max_aspect_ratio: f64,
    pub max_area_fraction: f64,
    pub dedup_iou_threshold: f64,
    pub top_k: usize,
    pub size_rule: SizeRule,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_dim_vehicle: 30.0,
            min_dim_small: 15.0,
            max_aspect_ratio: 8.0,
            max_area_fraction: 0.40,
            dedup_iou_threshold: 0.3,
            top_k: 75,
            size_rule: SizeRule::MinSide,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.min_dim_vehicle,
            self.min_dim_small,
            self.max_aspect_ratio,
            self.max_area_fraction,
            self.dedup_iou_threshold,
        ];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidConfig("filter thresholds must be positive"));
        }
        if self.max_area_fraction > 1.0 {
            return Err(Error::InvalidConfig("max_area_fraction must be in (0, 1]"));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidConfig("top_k must be at least 1"));
        }
        Ok(())
    }

    pub fn min_dim(&self, class: InputClass) -> f64 {
        match class {
            InputClass::Vehicle => self.min_dim_vehicle,
            InputClass::Pedestrian | InputClass::Cyclist | InputClass::Sign => self.min_dim_small,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    TooSmall,
    TooElongated,
    TooLarge,
}

/// Checks size, aspect ratio and area of an already-clamped box.
pub fn validate_box(
    bbox: &BoundingBox,
    width: u32,
    height: u32,
    cfg: &FilterConfig,
) -> core::result::Result<(), RejectReason> {
    let (w, h) = (bbox.width(), bbox.height());
    let (short, long) = if w < h { (w, h) } else { (h, w) };
    let measured = match cfg.size_rule {
        SizeRule::MinSide => short,
        SizeRule::MaxSide => long,
    };
    if !(measured > cfg.min_dim(bbox.class)) {
        return Err(RejectReason::TooSmall);
    }
    if !(long / short < cfg.max_aspect_ratio) {
        return Err(RejectReason::TooElongated);
    }
    let image_area = f64::from(width) * f64::from(height);
    if bbox.area() > cfg.max_area_fraction * image_area {
        return Err(RejectReason::TooLarge);
    }
    Ok(())
}

/// Stable area-descending order (ties keep input order).
fn sort_by_area_desc(boxes: &mut [BoundingBox]) {
    boxes.sort_by(|a, b| b.area().partial_cmp(&a.area()).unwrap_or(Ordering::Equal));
}

/// Greedy per-class suppression: larger boxes win, a box survives iff its
/// IoU with every kept box of the same class is below `iou_threshold`.
/// Boxes of different classes never suppress each other.
pub fn dedup_boxes(boxes: &[BoundingBox], iou_threshold: f64) -> Vec<BoundingBox> {
    let mut sorted = boxes.to_vec();
    sort_by_area_desc(&mut sorted);
    let mut kept: Vec<BoundingBox> = Vec::with_capacity(sorted.len());
    for candidate in sorted {
        let conflicts = kept
            .iter()
            .any(|k| k.class == candidate.class && box_iou(k, &candidate) >= iou_threshold);
        if !conflicts {
            kept.push(candidate);
        }
    }
    kept
}

/// Per-frame filter outcome with rejection tallies.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterOutcome {
    pub boxes: Vec<BoundingBox>,
    pub degenerate: usize,
    pub too_small: usize,
    pub too_elongated: usize,
    pub too_large: usize,
    pub duplicates: usize,
    pub over_cap: usize,
}

/// Full filter stage with per-reason counters.
pub fn filter_frame_detailed(
    boxes: &[BoundingBox],
    width: u32,
    height: u32,
    cfg: &FilterConfig,
) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    let mut valid = Vec::with_capacity(boxes.len());
    for b in boxes {
        let Some(clamped) = clamp_box(b, width, height) else {
            out.degenerate += 1;
            continue;
        };
        match validate_box(&clamped, width, height, cfg) {
            Ok(()) => valid.push(clamped),
            Err(RejectReason::TooSmall) => out.too_small += 1,
            Err(RejectReason::TooElongated) => out.too_elongated += 1,
            Err(RejectReason::TooLarge) => out.too_large += 1,
        }
    }
    let mut merged = dedup_boxes(&valid, cfg.dedup_iou_threshold);
    out.duplicates = valid.len() - merged.len();
    if merged.len() > cfg.top_k {
        out.over_cap = merged.len() - cfg.top_k;
        merged.truncate(cfg.top_k);
    }
    out.boxes = merged;
    out
}

/// Clamp, validate, dedup and keep the `top_k` largest boxes, sorted by
/// area descending.
pub fn filter_frame(
    boxes: &[BoundingBox],
    width: u32,
    height: u32,
    cfg: &FilterConfig,
) -> Vec<BoundingBox> {
    filter_frame_detailed(boxes, width, height, cfg).boxes
}
