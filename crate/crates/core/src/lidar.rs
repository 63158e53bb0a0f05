//! LiDAR-native annotation: project returns into the image, keep labels
//! only where a return lands.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::class::IGNORE;
use crate::mask::{Bitmap, SemanticMask};
use crate::{Error, Result};

/// LiDAR returns in the sensor frame, meters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloudFrame {
    pub points: Vec<[f32; 3]>,
}

/// Row-major 3x4 camera projection (intrinsics times extrinsics).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionModel {
    pub matrix: [[f64; 4]; 3],
}

impl ProjectionModel {
    /// `K [I | 0]` for a pinhole with focal `f` and principal point.
    pub fn pinhole(f: f64, cx: f64, cy: f64) -> Self {
        ProjectionModel {
            matrix: [[f, 0.0, cx, 0.0], [0.0, f, cy, 0.0], [0.0, 0.0, 1.0, 0.0]],
        }
    }

    /// Same projection expressed in an image resampled by `(sx, sy)`.
    pub fn scaled(&self, sx: f64, sy: f64) -> Self {
        let mut m = self.matrix;
        for v in &mut m[0] {
            *v *= sx;
        }
        for v in &mut m[1] {
            *v *= sy;
        }
        ProjectionModel { matrix: m }
    }

    /// Image-plane position, or `None` when the projective depth is not
    /// positive.
    pub fn project(&self, p: [f64; 3]) -> Option<(f64, f64)> {
        let row = |r: &[f64; 4]| r[0] * p[0] + r[1] * p[1] + r[2] * p[2] + r[3];
        let w = row(&self.matrix[2]);
        if !(w > 0.0) {
            return None;
        }
        Some((row(&self.matrix[0]) / w, row(&self.matrix[1]) / w))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LidarAnnotConfig {
    pub max_range: f64,
    /// Must stay 0: labels are never grown beyond projected returns.
    pub dilation: u32,
}

impl Default for LidarAnnotConfig {
    fn default() -> Self {
        LidarAnnotConfig {
            max_range: 90.0,
            dilation: 0,
        }
    }
}

impl LidarAnnotConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_range > 0.0) {
            return Err(Error::InvalidConfig("max_range must be positive"));
        }
        if self.dilation != 0 {
            return Err(Error::InvalidConfig("dilation must be 0"));
        }
        Ok(())
    }
}

/// Pixels hit by at least one valid return, with the nearest range per
/// pixel (`f32::INFINITY` where uncovered).
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageMask {
    pub covered: Bitmap,
    pub min_range: Vec<f32>,
}

impl CoverageMask {
    pub fn dims(&self) -> (u32, u32) {
        self.covered.dims()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionStats {
    pub points: u64,
    pub non_finite: u64,
    pub out_of_range: u64,
    pub behind_camera: u64,
    pub outside_image: u64,
    pub projected: u64,
}

pub fn project_cloud(
    cloud: &PointCloudFrame,
    proj: &ProjectionModel,
    width: u32,
    height: u32,
    cfg: &LidarAnnotConfig,
) -> (CoverageMask, ProjectionStats) {
    let mut covered = Bitmap::new(width, height);
    let mut min_range = vec![f32::INFINITY; width as usize * height as usize];
    let mut stats = ProjectionStats {
        points: cloud.points.len() as u64,
        ..ProjectionStats::default()
    };
    for pt in &cloud.points {
        if pt.iter().any(|v| !v.is_finite()) {
            stats.non_finite += 1;
            continue;
        }
        let p = [f64::from(pt[0]), f64::from(pt[1]), f64::from(pt[2])];
        let range = libm::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
        if range > cfg.max_range {
            stats.out_of_range += 1;
            continue;
        }
        let Some((u, v)) = proj.project(p) else {
            stats.behind_camera += 1;
            continue;
        };
        if !(u >= 0.0 && v >= 0.0 && u < f64::from(width) && v < f64::from(height)) {
            stats.outside_image += 1;
            continue;
        }
        let (x, y) = (libm::floor(u) as u32, libm::floor(v) as u32);
        covered.set(x, y, true);
        let i = y as usize * width as usize + x as usize;
        min_range[i] = min_range[i].min(range as f32);
        stats.projected += 1;
    }
    (CoverageMask { covered, min_range }, stats)
}

/// Keeps the fused label on covered pixels and marks the rest Ignore.
pub fn lidar_annotation(mask: &SemanticMask, coverage: &CoverageMask) -> Result<SemanticMask> {
    if mask.dims() != coverage.dims() {
        return Err(Error::DimensionMismatch {
            expected: mask.dims(),
            found: coverage.dims(),
        });
    }
    let data = mask
        .as_slice()
        .iter()
        .zip(coverage.covered.as_slice())
        .map(|(&label, &hit)| if hit { label } else { IGNORE })
        .collect();
    SemanticMask::from_raw(mask.width(), mask.height(), data)
}
