//! Axis-aligned boxes in continuous pixel coordinates.

use serde::{Deserialize, Serialize};

use crate::class::InputClass;

/// Axis-aligned box with an object class.
///
/// Coordinates are continuous pixel positions in the source image; the
/// box covers `[x_min, x_max) x [y_min, y_max)`. Rasterization happens
/// only at the point of use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub class: InputClass,
}

/// Half-open integer pixel window `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelWindow {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl PixelWindow {
    pub fn is_empty(&self) -> bool {
        self.x0 >= self.x1 || self.y0 >= self.y1
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn area(&self) -> u64 {
        if self.is_empty() {
            0
        } else {
            u64::from(self.x1 - self.x0) * u64::from(self.y1 - self.y0)
        }
    }
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64, class: InputClass) -> Self {
        BoundingBox {
            x_min,
            y_min,
            x_max,
            y_max,
            class,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        let (w, h) = (self.width(), self.height());
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.x_min.is_finite()
            && self.y_min.is_finite()
            && self.x_max.is_finite()
            && self.y_max.is_finite()
    }

    /// Uniformly scales every coordinate by `s`.
    pub fn scaled(&self, s: f64) -> BoundingBox {
        BoundingBox {
            x_min: self.x_min * s,
            y_min: self.y_min * s,
            x_max: self.x_max * s,
            y_max: self.y_max * s,
            class: self.class,
        }
    }

    /// Pixels touched by the box inside a `width x height` grid.
    pub fn pixel_window(&self, width: u32, height: u32) -> PixelWindow {
        let clampi = |v: f64, hi: u32| -> u32 {
            if v.is_nan() || v <= 0.0 {
                0
            } else if v >= f64::from(hi) {
                hi
            } else {
                v as u32
            }
        };
        PixelWindow {
            x0: clampi(libm::floor(self.x_min), width),
            y0: clampi(libm::floor(self.y_min), height),
            x1: clampi(libm::ceil(self.x_max), width),
            y1: clampi(libm::ceil(self.y_max), height),
        }
    }
}

/// Clamps a box to `[0, width] x [0, height]`.
///
/// Returns `None` when the clamped box has zero width or height (or the
/// input is not finite); the caller drops such boxes.
pub fn clamp_box(bbox: &BoundingBox, width: u32, height: u32) -> Option<BoundingBox> {
    if !bbox.is_finite() || width == 0 || height == 0 {
        return None;
    }
    let (w, h) = (f64::from(width), f64::from(height));
    let clamped = BoundingBox {
        x_min: bbox.x_min.clamp(0.0, w),
        y_min: bbox.y_min.clamp(0.0, h),
        x_max: bbox.x_max.clamp(0.0, w),
        y_max: bbox.y_max.clamp(0.0, h),
        class: bbox.class,
    };
    (clamped.x_max > clamped.x_min && clamped.y_max > clamped.y_min).then_some(clamped)
}

/// Intersection over union of two boxes; 0 when disjoint.
pub fn box_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = a.x_max.min(b.x_max) - a.x_min.max(b.x_min);
    let ih = a.y_max.min(b.y_max) - a.y_min.max(b.y_min);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}
