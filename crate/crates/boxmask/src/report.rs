use std::ops::AddAssign;

use boxmask_core::{OutputClass, NUM_CLASSES};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;

/// Per-class pixel counts keyed by class name.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassPixels {
    pub background: u64,
    pub vehicle: u64,
    pub sign: u64,
    pub human: u64,
    pub ignore: u64,
}

impl ClassPixels {
    pub fn new(classes: [u64; NUM_CLASSES], ignore: u64) -> Self {
        ClassPixels {
            background: classes[OutputClass::Background.index()],
            vehicle: classes[OutputClass::Vehicle.index()],
            sign: classes[OutputClass::Sign.index()],
            human: classes[OutputClass::Human.index()],
            ignore,
        }
    }

    pub fn of(mask: &boxmask_core::SemanticMask) -> Self {
        let (c, i) = mask.class_counts();
        Self::new(c, i)
    }

    pub fn classes(&self) -> [u64; NUM_CLASSES] {
        [self.background, self.vehicle, self.sign, self.human]
    }

    pub fn total(&self) -> u64 {
        self.classes().iter().sum::<u64>() + self.ignore
    }
}

impl AddAssign for ClassPixels {
    fn add_assign(&mut self, o: Self) {
        self.background += o.background;
        self.vehicle += o.vehicle;
        self.sign += o.sign;
        self.human += o.human;
        self.ignore += o.ignore;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    ImageMissing,
    ImageUnreadable,
    DimensionMismatch,
    Backend,
    LidarUnreadable,
    CalibrationUnreadable,
    WriteFailed,
    MaskMissing,
    MaskUnreadable,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterCounts {
    pub degenerate: u64,
    pub too_small: u64,
    pub too_elongated: u64,
    pub too_large: u64,
    pub duplicates: u64,
    pub over_cap: u64,
}

impl FilterCounts {
    pub fn total(&self) -> u64 {
        self.degenerate + self.too_small + self.too_elongated + self.too_large + self.duplicates + self.over_cap
    }
}

impl AddAssign for FilterCounts {
    fn add_assign(&mut self, o: Self) {
        self.degenerate += o.degenerate;
        self.too_small += o.too_small;
        self.too_elongated += o.too_elongated;
        self.too_large += o.too_large;
        self.duplicates += o.duplicates;
        self.over_cap += o.over_cap;
    }
}

impl From<&boxmask_core::filter::FilterOutcome> for FilterCounts {
    fn from(o: &boxmask_core::filter::FilterOutcome) -> Self {
        FilterCounts {
            degenerate: o.degenerate as u64,
            too_small: o.too_small as u64,
            too_elongated: o.too_elongated as u64,
            too_large: o.too_large as u64,
            duplicates: o.duplicates as u64,
            over_cap: o.over_cap as u64,
        }
    }
}

/// Wall-clock milliseconds spent per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub load: f64,
    pub filter: f64,
    pub fuse: f64,
    pub resize: f64,
    pub variants: f64,
    pub write: f64,
}

impl AddAssign for StageTimings {
    fn add_assign(&mut self, o: Self) {
        self.load += o.load;
        self.filter += o.filter;
        self.fuse += o.fuse;
        self.resize += o.resize;
        self.variants += o.variants;
        self.write += o.write;
    }
}

/// Outcome of one optional annotation variant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum VariantOutcome {
    Written { pixels: ClassPixels },
    Skipped { reason: String },
}

/// LiDAR projection tallies carried into the report.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LidarCounts {
    pub points: u64,
    pub non_finite: u64,
    pub out_of_range: u64,
    pub behind_camera: u64,
    pub outside_image: u64,
    pub projected: u64,
}

impl From<boxmask_core::lidar::ProjectionStats> for LidarCounts {
    fn from(s: boxmask_core::lidar::ProjectionStats) -> Self {
        LidarCounts {
            points: s.points,
            non_finite: s.non_finite,
            out_of_range: s.out_of_range,
            behind_camera: s.behind_camera,
            outside_image: s.outside_image,
            projected: s.projected,
        }
    }
}

impl AddAssign for LidarCounts {
    fn add_assign(&mut self, o: Self) {
        self.points += o.points;
        self.non_finite += o.non_finite;
        self.out_of_range += o.out_of_range;
        self.behind_camera += o.behind_camera;
        self.outside_image += o.outside_image;
        self.projected += o.projected;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub frame_id: String,
    pub status: FrameStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<FailureReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    pub boxes_in: u64,
    pub filtered: FilterCounts,
    pub boxes_fused: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixels: Option<ClassPixels>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<VariantOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lidar: Option<VariantOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lidar_points: Option<LidarCounts>,
    pub timings_ms: StageTimings,
}

impl FrameReport {
    pub fn new(frame_id: &str, boxes_in: usize) -> Self {
        FrameReport {
            frame_id: frame_id.to_string(),
            status: FrameStatus::Ok,
            reason: None,
            detail: None,
            boxes_in: boxes_in as u64,
            filtered: FilterCounts::default(),
            boxes_fused: 0,
            pixels: None,
            camera: None,
            lidar: None,
            lidar_points: None,
            timings_ms: StageTimings::default(),
        }
    }

    pub fn fail(mut self, reason: FailureReason, detail: impl ToString) -> Self {
        self.status = FrameStatus::Failed;
        self.reason = Some(reason);
        self.detail = Some(detail.to_string());
        self.boxes_fused = 0;
        self.pixels = None;
        self.camera = None;
        self.lidar = None;
        self
    }
}

/// Run-wide counters; always equal to the fold of the frame entries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunCounters {
    pub frames: u64,
    pub ok: u64,
    pub failed: u64,
    pub skipped: u64,
    pub boxes_in: u64,
    pub boxes_filtered: u64,
    pub boxes_fused: u64,
    pub filtered: FilterCounts,
    pub pixels: ClassPixels,
    pub camera_masks: u64,
    pub lidar_masks: u64,
    pub lidar_points: LidarCounts,
}

impl RunCounters {
    pub fn from_frames(frames: &[FrameReport]) -> Self {
        let mut c = RunCounters::default();
        for f in frames {
            c.frames += 1;
            match f.status {
                FrameStatus::Ok => c.ok += 1,
                FrameStatus::Failed => c.failed += 1,
                FrameStatus::Skipped => c.skipped += 1,
            }
            c.boxes_in += f.boxes_in;
            c.boxes_filtered += f.filtered.total();
            c.filtered += f.filtered;
            c.boxes_fused += f.boxes_fused;
            if let Some(p) = f.pixels {
                c.pixels += p;
            }
            if matches!(f.camera, Some(VariantOutcome::Written { .. })) {
                c.camera_masks += 1;
            }
            if matches!(f.lidar, Some(VariantOutcome::Written { .. })) {
                c.lidar_masks += 1;
            }
            if let Some(l) = f.lidar_points {
                c.lidar_points += l;
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub config: PipelineConfig,
    pub backend: String,
    pub counters: RunCounters,
    pub stage_totals_ms: StageTimings,
    pub wall_ms: f64,
    pub frames: Vec<FrameReport>,
}

impl RunReport {
    pub fn new(config: PipelineConfig, backend: String, frames: Vec<FrameReport>, wall_ms: f64) -> Self {
        let mut totals = StageTimings::default();
        for f in &frames {
            totals += f.timings_ms;
        }
        RunReport {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            backend,
            counters: RunCounters::from_frames(&frames),
            stage_totals_ms: totals,
            wall_ms,
            frames,
        }
    }

    pub fn success(&self) -> bool {
        self.counters.failed == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
