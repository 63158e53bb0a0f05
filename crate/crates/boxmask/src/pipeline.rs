//! Batch orchestration: filter, fuse, resize and persist every manifest
//! frame, plus the optional camera and LiDAR variants.

use std::path::{Path, PathBuf};
use std::time::Instant;

use boxmask_core::backend::ImageView;
use boxmask_core::camera::camera_annotation;
use boxmask_core::filter::filter_frame_detailed;
use boxmask_core::fusion::{fuse_frame, prepare_working_frame};
use boxmask_core::lidar::{lidar_annotation, project_cloud};
use boxmask_core::resize::resize_labels;
use boxmask_core::{FrameRecord, MaskBackend, SemanticMask};
use image::imageops::FilterType;
use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::fsio::{read_calibration, read_point_cloud, read_rgb, write_atomic, write_mask};
use crate::manifest::Manifest;
use crate::report::{ClassPixels, FailureReason, FrameReport, FrameStatus, RunReport, VariantOutcome};
use crate::{Error, Result};

pub const MASK_DIR: &str = "masks";
pub const CAMERA_DIR: &str = "camera";
pub const LIDAR_DIR: &str = "lidar";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Leave frames whose dense mask already exists untouched.
    pub resume: bool,
}

pub fn mask_file(dir: &Path, frame_id: &str) -> PathBuf {
    dir.join(format!("{frame_id}.png"))
}

/// Rayon pool with `workers` threads (0: one per core).
pub fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Runs the pipeline and writes `report.json` under the output root.
///
/// Frame failures are recorded in the report, never returned as errors;
/// `Err` means the run could not start or the report could not be written.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    manifest: &Manifest,
    backend: &dyn MaskBackend,
    opts: RunOptions,
) -> Result<RunReport> {
    cfg.validate()?;
    let root = &cfg.output_root;
    let mut dirs = vec![MASK_DIR];
    if cfg.variants.camera {
        dirs.push(CAMERA_DIR);
    }
    if cfg.variants.lidar {
        dirs.push(LIDAR_DIR);
    }
    for d in dirs {
        let p = root.join(d);
        std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }

    let start = Instant::now();
    let pool = worker_pool(cfg.workers)?;
    let frames: Vec<FrameReport> = pool.install(|| {
        manifest
            .frames
            .par_iter()
            .map(|f| process_frame(cfg, manifest, f, backend, opts))
            .collect()
    });
    let report = RunReport::new(cfg.clone(), cfg.backend.endpoint.clone(), frames, ms(start));
    write_atomic(&root.join(REPORT_FILE), report.to_json().as_bytes())?;
    Ok(report)
}

struct Products {
    dense: SemanticMask,
    camera: Option<SemanticMask>,
    lidar: Option<SemanticMask>,
}

fn process_frame(
    cfg: &PipelineConfig,
    manifest: &Manifest,
    f: &FrameRecord,
    backend: &dyn MaskBackend,
    opts: RunOptions,
) -> FrameReport {
    let mut rep = FrameReport::new(&f.frame_id, f.boxes.len());
    let root = &cfg.output_root;
    let dense_path = mask_file(&root.join(MASK_DIR), &f.frame_id);
    if opts.resume && dense_path.exists() {
        rep.status = FrameStatus::Skipped;
        rep.detail = Some("mask already present".into());
        return rep;
    }

    let t = Instant::now();
    let outcome = filter_frame_detailed(&f.boxes, f.width, f.height, &cfg.filter);
    rep.filtered = (&outcome).into();
    rep.timings_ms.filter = ms(t);

    let t = Instant::now();
    let working = prepare_working_frame(f.width, f.height, &outcome.boxes, cfg.fusion.working_long_side);
    let image_path = manifest.resolve(&f.image);
    if !image_path.is_file() {
        return rep.fail(FailureReason::ImageMissing, image_path.display());
    }
    let rgb = if backend.needs_pixels() {
        let img = match read_rgb(&image_path) {
            Ok(img) => img,
            Err(e) => return rep.fail(FailureReason::ImageUnreadable, e),
        };
        if img.dimensions() != (f.width, f.height) {
            return rep.fail(
                FailureReason::DimensionMismatch,
                format!("image is {:?}, manifest says {}x{}", img.dimensions(), f.width, f.height),
            );
        }
        image::imageops::resize(&img, working.width, working.height, FilterType::Triangle).into_raw()
    } else {
        match image::image_dimensions(&image_path) {
            Ok(dims) if dims == (f.width, f.height) => Vec::new(),
            Ok(dims) => {
                return rep.fail(
                    FailureReason::DimensionMismatch,
                    format!("image is {dims:?}, manifest says {}x{}", f.width, f.height),
                )
            }
            Err(e) => return rep.fail(FailureReason::ImageUnreadable, e),
        }
    };
    rep.timings_ms.load = ms(t);

    let t = Instant::now();
    let view = ImageView {
        width: working.width,
        height: working.height,
        rgb: &rgb,
    };
    let fused = match fuse_frame(&view, &working.boxes, backend, &cfg.fusion) {
        Ok(m) => m,
        Err(e) => return rep.fail(FailureReason::Backend, e),
    };
    rep.timings_ms.fuse = ms(t);

    let t = Instant::now();
    let side = cfg.fusion.output_side;
    let dense = resize_labels(&fused, side, side, cfg.fusion.resize_mode);
    rep.timings_ms.resize = ms(t);

    let t = Instant::now();
    let mut products = Products {
        camera: cfg.variants.camera.then(|| camera_annotation(&dense, &cfg.camera).0),
        lidar: None,
        dense,
    };
    if cfg.variants.lidar {
        match (&f.lidar, &f.calibration) {
            (Some(cloud_ref), Some(cal_ref)) => {
                let cloud = match read_point_cloud(&manifest.resolve(cloud_ref)) {
                    Ok(c) => c,
                    Err(e) => return rep.fail(FailureReason::LidarUnreadable, e),
                };
                let proj = match read_calibration(&manifest.resolve(cal_ref)) {
                    Ok(p) => p,
                    Err(e) => return rep.fail(FailureReason::CalibrationUnreadable, e),
                };
                let proj = proj.scaled(
                    f64::from(side) / f64::from(f.width),
                    f64::from(side) / f64::from(f.height),
                );
                let (coverage, stats) = project_cloud(&cloud, &proj, side, side, &cfg.lidar);
                rep.lidar_points = Some(stats.into());
                products.lidar =
                    Some(lidar_annotation(&products.dense, &coverage).expect("coverage built at mask size"));
            }
            _ => {
                rep.lidar = Some(VariantOutcome::Skipped {
                    reason: "frame has no lidar and calibration reference".into(),
                })
            }
        }
    }
    rep.timings_ms.variants = ms(t);

    let t = Instant::now();
    let written = (|| -> Result<()> {
        if let Some(m) = &products.camera {
            write_mask(&mask_file(&root.join(CAMERA_DIR), &f.frame_id), m)?;
        }
        if let Some(m) = &products.lidar {
            write_mask(&mask_file(&root.join(LIDAR_DIR), &f.frame_id), m)?;
        }
        write_mask(&dense_path, &products.dense)
    })();
    if let Err(e) = written {
        return rep.fail(FailureReason::WriteFailed, e);
    }
    rep.timings_ms.write = ms(t);

    rep.boxes_fused = working.boxes.len() as u64;
    rep.pixels = Some(ClassPixels::of(&products.dense));
    if let Some(m) = &products.camera {
        rep.camera = Some(VariantOutcome::Written {
            pixels: ClassPixels::of(m),
        });
    }
    if let Some(m) = &products.lidar {
        rep.lidar = Some(VariantOutcome::Written {
            pixels: ClassPixels::of(m),
        });
    }
    rep
}
