//! Batch operations over a manifest and mask directories: filtering,
//! annotation variants, refinement, statistics, splitting and evaluation.

use std::fmt::Write as _;
use std::path::Path;

use boxmask_core::backend::ImageView;
use boxmask_core::camera::{camera_annotation, CameraAnnotConfig};
use boxmask_core::dataset::{compute_stats, frame_pixel_counts, stratified_split, SplitAssignment, SplitConfig, SplitFrame, StatsInput, StatsRow, StatsTable};
use boxmask_core::filter::filter_frame_detailed;
use boxmask_core::lidar::{lidar_annotation, project_cloud, LidarAnnotConfig};
use boxmask_core::refine::{refine_mask, BoxChange, RefineConfig};
use boxmask_core::{BoundingBox, ConfusionMatrix, FrameRecord, MaskBackend, OutputClass, SemanticMask, Weather};
use image::imageops::FilterType;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fsio::{read_calibration, read_mask, read_point_cloud, read_rgb, write_mask};
use crate::manifest::Manifest;
use crate::pipeline::mask_file;
use crate::report::{ClassPixels, FailureReason, FilterCounts, FrameStatus, LidarCounts};
use crate::{Error, Result};

/// Applies the box filter to every frame; survivors replace the boxes.
pub fn filter_manifest(frames: &[FrameRecord], cfg: &boxmask_core::filter::FilterConfig) -> (Vec<FrameRecord>, FilterCounts) {
    let mut counts = FilterCounts::default();
    let out = frames
        .iter()
        .map(|f| {
            let outcome = filter_frame_detailed(&f.boxes, f.width, f.height, cfg);
            counts += FilterCounts::from(&outcome);
            FrameRecord {
                boxes: outcome.boxes,
                ..f.clone()
            }
        })
        .collect();
    (out, counts)
}

/// Result for one frame of a mask-to-mask batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemReport {
    pub frame_id: String,
    pub status: FrameStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<FailureReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixels: Option<ClassPixels>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lidar_points: Option<LidarCounts>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub boxes: Vec<BoxChange>,
}

impl ItemReport {
    fn ok(frame_id: &str) -> Self {
        ItemReport {
            frame_id: frame_id.to_string(),
            status: FrameStatus::Ok,
            reason: None,
            detail: None,
            pixels: None,
            lidar_points: None,
            boxes: Vec::new(),
        }
    }

    fn failed(frame_id: &str, reason: FailureReason, detail: impl ToString) -> Self {
        ItemReport {
            status: FrameStatus::Failed,
            reason: Some(reason),
            detail: Some(detail.to_string()),
            ..ItemReport::ok(frame_id)
        }
    }
}

pub fn any_failed(items: &[ItemReport]) -> bool {
    items.iter().any(|i| i.status == FrameStatus::Failed)
}

fn load_input_mask(dir: &Path, frame_id: &str) -> std::result::Result<SemanticMask, Box<ItemReport>> {
    let path = mask_file(dir, frame_id);
    read_mask(&path).map_err(|e| {
        let reason = if e.is_not_found() {
            FailureReason::MaskMissing
        } else {
            FailureReason::MaskUnreadable
        };
        Box::new(ItemReport::failed(frame_id, reason, e))
    })
}

fn store(out_dir: &Path, frame_id: &str, mask: &SemanticMask, mut item: ItemReport) -> ItemReport {
    match write_mask(&mask_file(out_dir, frame_id), mask) {
        Ok(()) => {
            item.pixels = Some(ClassPixels::of(mask));
            item
        }
        Err(e) => ItemReport::failed(frame_id, FailureReason::WriteFailed, e),
    }
}

pub fn camera_batch(manifest: &Manifest, masks: &Path, out_dir: &Path, cfg: &CameraAnnotConfig) -> Vec<ItemReport> {
    manifest
        .frames
        .par_iter()
        .map(|f| {
            let mask = match load_input_mask(masks, &f.frame_id) {
                Ok(m) => m,
                Err(item) => return *item,
            };
            let (annot, _) = camera_annotation(&mask, cfg);
            store(out_dir, &f.frame_id, &annot, ItemReport::ok(&f.frame_id))
        })
        .collect()
}

pub fn lidar_batch(manifest: &Manifest, masks: &Path, out_dir: &Path, cfg: &LidarAnnotConfig) -> Vec<ItemReport> {
    manifest
        .frames
        .par_iter()
        .map(|f| {
            let id = f.frame_id.as_str();
            let (Some(cloud_ref), Some(cal_ref)) = (&f.lidar, &f.calibration) else {
                return ItemReport {
                    status: FrameStatus::Skipped,
                    detail: Some("frame has no lidar and calibration reference".into()),
                    ..ItemReport::ok(id)
                };
            };
            let mask = match load_input_mask(masks, id) {
                Ok(m) => m,
                Err(item) => return *item,
            };
            let cloud = match read_point_cloud(&manifest.resolve(cloud_ref)) {
                Ok(c) => c,
                Err(e) => return ItemReport::failed(id, FailureReason::LidarUnreadable, e),
            };
            let proj = match read_calibration(&manifest.resolve(cal_ref)) {
                Ok(p) => p,
                Err(e) => return ItemReport::failed(id, FailureReason::CalibrationUnreadable, e),
            };
            let (mw, mh) = mask.dims();
            let proj = proj.scaled(f64::from(mw) / f64::from(f.width), f64::from(mh) / f64::from(f.height));
            let (coverage, stats) = project_cloud(&cloud, &proj, mw, mh, cfg);
            let annot = lidar_annotation(&mask, &coverage).expect("coverage built at mask size");
            let item = ItemReport {
                lidar_points: Some(stats.into()),
                ..ItemReport::ok(id)
            };
            store(out_dir, id, &annot, item)
        })
        .collect()
}

/// Maps source-image boxes onto a mask of a different size.
fn rescale_box(b: &BoundingBox, sx: f64, sy: f64) -> BoundingBox {
    BoundingBox::new(b.x_min * sx, b.y_min * sy, b.x_max * sx, b.y_max * sy, b.class)
}

/// Refines existing masks. Images are resampled to the mask size and the
/// boxes are mapped with them; boxes whose proposal fails are skipped.
pub fn refine_batch(
    manifest: &Manifest,
    masks: &Path,
    out_dir: &Path,
    backend: &dyn MaskBackend,
    cfg: &RefineConfig,
) -> Vec<ItemReport> {
    manifest
        .frames
        .par_iter()
        .map(|f| {
            let id = f.frame_id.as_str();
            let mask = match load_input_mask(masks, id) {
                Ok(m) => m,
                Err(item) => return *item,
            };
            let (mw, mh) = mask.dims();
            let path = manifest.resolve(&f.image);
            if !path.is_file() {
                return ItemReport::failed(id, FailureReason::ImageMissing, path.display());
            }
            let rgb = if backend.needs_pixels() {
                match read_rgb(&path) {
                    Ok(img) if img.dimensions() == (mw, mh) => img.into_raw(),
                    Ok(img) => image::imageops::resize(&img, mw, mh, FilterType::Triangle).into_raw(),
                    Err(e) => return ItemReport::failed(id, FailureReason::ImageUnreadable, e),
                }
            } else {
                Vec::new()
            };
            let view = ImageView { width: mw, height: mh, rgb: &rgb };
            let (sx, sy) = (f64::from(mw) / f64::from(f.width), f64::from(mh) / f64::from(f.height));
            let boxes: Vec<BoundingBox> = f.boxes.iter().map(|b| rescale_box(b, sx, sy)).collect();
            let (refined, changes) = match refine_mask(&mask, &view, &boxes, backend, cfg) {
                Ok(r) => r,
                Err(e) => return ItemReport::failed(id, FailureReason::DimensionMismatch, e),
            };
            let item = ItemReport {
                boxes: changes,
                ..ItemReport::ok(id)
            };
            store(out_dir, id, &refined, item)
        })
        .collect()
}

/// Per-weather pixel statistics of the masks in `masks`, resampled to
/// `resolution x resolution`.
pub fn stats_batch(manifest: &Manifest, masks: &Path, resolution: u32) -> StatsTable {
    let counts: Vec<_> = manifest
        .frames
        .par_iter()
        .map(|f| {
            read_mask(&mask_file(masks, &f.frame_id))
                .ok()
                .map(|m| frame_pixel_counts(&m, resolution))
        })
        .collect();
    compute_stats(
        manifest.frames.iter().zip(counts).map(|(f, counts)| StatsInput {
            frame_id: &f.frame_id,
            weather: f.weather,
            counts,
        }),
        resolution,
    )
}

fn human(n: u64) -> String {
    match n {
        n if n >= 1_000_000 => format!("{:.1}M", n as f64 / 1e6),
        n if n >= 1_000 => format!("{:.1}K", n as f64 / 1e3),
        n => n.to_string(),
    }
}

fn stats_line(out: &mut String, label: &str, row: &StatsRow) {
    let pct = row.percentages();
    let _ = write!(out, "{label:<11} {:>7}", row.samples);
    for c in OutputClass::ALL {
        let _ = write!(out, " {:>8} {:>6.2}%", human(row.class_pixels[c.index()]), pct[c.index()]);
    }
    let _ = writeln!(out, " {:>8}", human(row.ignore_pixels));
}

pub fn format_stats(table: &StatsTable) -> String {
    let res = table.total.resolution;
    let mut out = format!("pixel statistics at {res}x{res}\n");
    let _ = write!(out, "{:<11} {:>7}", "weather", "samples");
    for c in OutputClass::ALL {
        let _ = write!(out, " {:>17}", c.name());
    }
    let _ = writeln!(out, " {:>8}", "ignore");
    for row in &table.rows {
        stats_line(&mut out, row.weather.map_or("total", Weather::as_str), row);
    }
    stats_line(&mut out, "total", &table.total);
    if !table.missing.is_empty() {
        let _ = writeln!(out, "missing masks: {}", table.missing.join(", "));
    }
    out
}

/// Splits the manifest using class pixels counted on the stored masks.
pub fn split_batch(manifest: &Manifest, masks: &Path, cfg: &SplitConfig) -> Result<SplitAssignment> {
    let frames: Vec<SplitFrame> = manifest
        .frames
        .par_iter()
        .map(|f| {
            let mask = read_mask(&mask_file(masks, &f.frame_id))?;
            Ok(SplitFrame {
                frame_id: f.frame_id.clone(),
                weather: f.weather,
                class_pixels: mask.class_counts().0,
            })
        })
        .collect::<Result<_>>()?;
    Ok(stratified_split(&frames, cfg)?)
}

/// IoU per class, `None` where undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassIous {
    pub background: Option<f64>,
    pub vehicle: Option<f64>,
    pub sign: Option<f64>,
    pub human: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub weather: Option<Weather>,
    pub frames: u64,
    pub confusion: ConfusionMatrix,
    pub iou: ClassIous,
    /// Over the foreground classes.
    pub miou: Option<f64>,
    pub fwiou: Option<f64>,
}

impl MetricsRow {
    pub fn from_matrix(weather: Option<Weather>, frames: u64, cm: ConfusionMatrix) -> Self {
        let ious = cm.class_ious();
        MetricsRow {
            weather,
            frames,
            confusion: cm,
            iou: ClassIous {
                background: ious[0],
                vehicle: ious[1],
                sign: ious[2],
                human: ious[3],
            },
            miou: cm.miou(&OutputClass::FOREGROUND),
            fwiou: cm.fwiou(&OutputClass::FOREGROUND),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalFailure {
    pub frame_id: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: MetricsRow,
    pub by_weather: Vec<MetricsRow>,
    pub failures: Vec<EvalFailure>,
}

/// Accumulates one confusion matrix per frame and merges them per weather.
pub fn eval_batch(manifest: &Manifest, gt: &Path, pred: &Path) -> EvalReport {
    let per_frame: Vec<std::result::Result<ConfusionMatrix, String>> = manifest
        .frames
        .par_iter()
        .map(|f| {
            let g = read_mask(&mask_file(gt, &f.frame_id)).map_err(|e| e.to_string())?;
            let p = read_mask(&mask_file(pred, &f.frame_id)).map_err(|e| e.to_string())?;
            let mut cm = ConfusionMatrix::new();
            cm.accumulate(&g, &p).map_err(|e| e.to_string())?;
            Ok(cm)
        })
        .collect();
    let mut by_weather = [(0u64, ConfusionMatrix::new()); 5];
    let mut failures = Vec::new();
    for (f, r) in manifest.frames.iter().zip(per_frame) {
        match r {
            Ok(cm) => {
                let slot = &mut by_weather[f.weather.index()];
                slot.0 += 1;
                slot.1 += cm;
            }
            Err(detail) => failures.push(EvalFailure {
                frame_id: f.frame_id.clone(),
                detail,
            }),
        }
    }
    let frames = by_weather.iter().map(|s| s.0).sum();
    let overall: ConfusionMatrix = by_weather.iter().map(|s| s.1).sum();
    EvalReport {
        overall: MetricsRow::from_matrix(None, frames, overall),
        by_weather: Weather::ALL
            .iter()
            .zip(by_weather)
            .filter(|(_, s)| s.0 > 0)
            .map(|(&w, (n, cm))| MetricsRow::from_matrix(Some(w), n, cm))
            .collect(),
        failures,
    }
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{:.2}", 100.0 * v))
}

pub fn format_eval(report: &EvalReport) -> String {
    let mut out = format!(
        "{:<11} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
        "weather", "frames", "backgr", "vehicle", "sign", "human", "mIoU", "FW IoU"
    );
    for row in report.by_weather.iter().chain([&report.overall]) {
        let _ = writeln!(
            out,
            "{:<11} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
            row.weather.map_or("overall", Weather::as_str),
            row.frames,
            pct(row.iou.background),
            pct(row.iou.vehicle),
            pct(row.iou.sign),
            pct(row.iou.human),
            pct(row.miou),
            pct(row.fwiou),
        );
    }
    for f in &report.failures {
        let _ = writeln!(out, "skipped {}: {}", f.frame_id, f.detail);
    }
    out
}

/// Checks a directory argument up front so batch commands fail fast.
pub fn require_dir(path: &Path) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "directory not found"),
        ))
    }
}
