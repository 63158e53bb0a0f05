//! Camera-native annotation: Ignore band along the borders and removal of
//! small connected components.

use serde::{Deserialize, Serialize};

use crate::class::{OutputClass, IGNORE};
use crate::components::{connected_components, Connectivity};
use crate::mask::SemanticMask;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraAnnotConfig {
    /// Band width as a fraction of image height, applied to all four sides.
    pub border_fraction: f64,
    pub min_component_px: usize,
    pub connectivity: Connectivity,
}

impl Default for CameraAnnotConfig {
    fn default() -> Self {
        CameraAnnotConfig {
            border_fraction: 0.01,
            min_component_px: 25,
            connectivity: Connectivity::Eight,
        }
    }
}

impl CameraAnnotConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.border_fraction) {
            return Err(Error::InvalidConfig("border_fraction must be in [0, 0.5)"));
        }
        if self.min_component_px == 0 {
            return Err(Error::InvalidConfig("min_component_px must be at least 1"));
        }
        Ok(())
    }

    /// `max(1, round(border_fraction * height))`.
    pub fn band_width(&self, height: u32) -> u32 {
        (libm::round(self.border_fraction * f64::from(height)) as u32).max(1)
    }
}

/// Summary of what [`camera_annotation`] changed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CameraAnnotStats {
    pub band_width: u32,
    pub ignored_pixels: u64,
    pub components_removed: u64,
    pub pixels_removed: u64,
}

/// Marks the border band Ignore, then resets every single-class
/// foreground component smaller than `min_component_px` to Background.
pub fn camera_annotation(mask: &SemanticMask, cfg: &CameraAnnotConfig) -> (SemanticMask, CameraAnnotStats) {
    let (w, h) = mask.dims();
    let mut out = mask.clone();
    let band = cfg.band_width(h);
    let mut stats = CameraAnnotStats {
        band_width: band,
        ..CameraAnnotStats::default()
    };
    for y in 0..h {
        for x in 0..w {
            let edge = x < band || y < band || x + band >= w || y + band >= h;
            if edge {
                out.set(x, y, IGNORE);
                stats.ignored_pixels += 1;
            }
        }
    }
    for class in OutputClass::FOREGROUND {
        let bitmap = out.class_bitmap(class.id());
        for comp in connected_components(&bitmap, cfg.connectivity) {
            if comp.size() < cfg.min_component_px {
                stats.components_removed += 1;
                stats.pixels_removed += comp.size() as u64;
                let data = out.data_mut();
                for &p in &comp.pixels {
                    data[p] = OutputClass::Background.id();
                }
            }
        }
    }
    (out, stats)
}
