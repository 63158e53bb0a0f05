//! Command-line front end.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use boxmask_core::dataset::SplitConfig;
use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::fsio::write_atomic;
use crate::manifest::{write_manifest, Manifest};
use crate::ops::{self, ItemReport};
use crate::pipeline::{run_pipeline, worker_pool, RunOptions, CAMERA_DIR, LIDAR_DIR, REPORT_FILE};
use crate::review::{self, ReviewStore};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "boxmask", version, about = "Turn box labels into semantic segmentation masks")]
pub struct Cli {
    /// Pipeline config (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (0: one per core). Overrides the config.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Seed for randomized steps.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clamp, validate and deduplicate boxes; writes a filtered manifest.
    Filter { manifest: PathBuf },
    /// Run the full pipeline: filter, fuse, resize and write masks.
    Fuse {
        manifest: PathBuf,
        /// Skip frames whose mask already exists.
        #[arg(long)]
        resume: bool,
        /// Also write camera-native masks.
        #[arg(long)]
        camera: bool,
        /// Also write LiDAR-native masks.
        #[arg(long)]
        lidar: bool,
    },
    /// Ignore band and small-component cleanup on existing masks.
    CameraAnnot {
        manifest: PathBuf,
        #[arg(long)]
        masks: PathBuf,
    },
    /// Restrict existing masks to LiDAR-covered pixels.
    LidarAnnot {
        manifest: PathBuf,
        #[arg(long)]
        masks: PathBuf,
    },
    /// Bounded edge refinement of existing masks with point prompts.
    Refine {
        manifest: PathBuf,
        #[arg(long)]
        masks: PathBuf,
    },
    /// Per-weather pixel statistics.
    Stats {
        manifest: PathBuf,
        #[arg(long)]
        masks: PathBuf,
        #[arg(long, default_value_t = 384)]
        resolution: u32,
    },
    /// Weather-stratified train/val/test split balanced on class pixels.
    Split {
        manifest: PathBuf,
        #[arg(long)]
        masks: PathBuf,
        /// Train, val and test fractions, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.25, 0.25])]
        ratios: Vec<f64>,
    },
    /// IoU metrics of predicted masks against ground truth.
    Eval {
        manifest: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
    },
    /// Serve the curation API and review UI.
    ServeReview {
        manifest: PathBuf,
        #[arg(long)]
        masks: PathBuf,
        /// Verdict log; created when missing.
        #[arg(long, default_value = "verdicts.jsonl")]
        log: PathBuf,
        /// Directory holding the built review UI.
        #[arg(long)]
        ui: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    cfg.apply_env();
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(o) = &cli.output {
        cfg.output_root = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct BatchReport<'a> {
    command: &'a str,
    ok: usize,
    failed: usize,
    skipped: usize,
    frames: &'a [ItemReport],
}

fn finish_batch(command: &str, out_dir: &Path, items: &[ItemReport]) -> Result<ExitCode> {
    use crate::report::FrameStatus;
    let count = |s| items.iter().filter(|i| i.status == s).count();
    let report = BatchReport {
        command,
        ok: count(FrameStatus::Ok),
        failed: count(FrameStatus::Failed),
        skipped: count(FrameStatus::Skipped),
        frames: items,
    };
    write_atomic(&out_dir.join(REPORT_FILE), to_json(&report).as_bytes())?;
    for i in items.iter().filter(|i| i.status == FrameStatus::Failed) {
        eprintln!("failed {}: {}", i.frame_id, i.detail.as_deref().unwrap_or(""));
    }
    eprintln!(
        "{command}: {} ok, {} failed, {} skipped -> {}",
        report.ok,
        report.failed,
        report.skipped,
        out_dir.display()
    );
    Ok(if ops::any_failed(items) { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Runs one parsed command line. Frame failures yield a failing exit code;
/// `Err` is reserved for problems that stop the command outright.
pub fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = load_config(&cli)?;
    let pool = worker_pool(cfg.workers)?;
    let out_or = |default: PathBuf| cli.output.clone().unwrap_or(default);

    match &cli.command {
        Command::Filter { manifest } => {
            let m = Manifest::load(manifest)?;
            let (frames, counts) = ops::filter_manifest(&m.frames, &cfg.filter);
            match &cli.output {
                Some(p) => write_manifest(p, &frames)?,
                None => print!("{}", crate::manifest::to_jsonl(&frames)),
            }
            eprintln!(
                "filter: {} boxes in, {} removed ({} degenerate, {} too small, {} elongated, {} too large, {} duplicates, {} over cap)",
                m.frames.iter().map(|f| f.boxes.len()).sum::<usize>(),
                counts.total(),
                counts.degenerate,
                counts.too_small,
                counts.too_elongated,
                counts.too_large,
                counts.duplicates,
                counts.over_cap
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Fuse {
            manifest,
            resume,
            camera,
            lidar,
        } => {
            let mut cfg = cfg.clone();
            cfg.variants.camera |= camera;
            cfg.variants.lidar |= lidar;
            let m = Manifest::load(manifest)?;
            let backend = cfg.backend.connect()?;
            let report = run_pipeline(&cfg, &m, backend.as_ref(), RunOptions { resume: *resume })?;
            for f in report.frames.iter().filter(|f| f.reason.is_some()) {
                eprintln!("failed {}: {}", f.frame_id, f.detail.as_deref().unwrap_or(""));
            }
            let c = &report.counters;
            eprintln!(
                "fuse: {} ok, {} failed, {} skipped; {} boxes in, {} fused -> {}",
                c.ok,
                c.failed,
                c.skipped,
                c.boxes_in,
                c.boxes_fused,
                cfg.output_root.display()
            );
            Ok(if report.success() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::CameraAnnot { manifest, masks } => {
            ops::require_dir(masks)?;
            let m = Manifest::load(manifest)?;
            let out = out_or(cfg.output_root.join(CAMERA_DIR));
            let items = pool.install(|| ops::camera_batch(&m, masks, &out, &cfg.camera));
            finish_batch("camera-annot", &out, &items)
        }
        Command::LidarAnnot { manifest, masks } => {
            ops::require_dir(masks)?;
            let m = Manifest::load(manifest)?;
            let out = out_or(cfg.output_root.join(LIDAR_DIR));
            let items = pool.install(|| ops::lidar_batch(&m, masks, &out, &cfg.lidar));
            finish_batch("lidar-annot", &out, &items)
        }
        Command::Refine { manifest, masks } => {
            ops::require_dir(masks)?;
            let m = Manifest::load(manifest)?;
            let out = out_or(cfg.output_root.join("refined"));
            let backend = cfg.backend.connect()?;
            let items = pool.install(|| ops::refine_batch(&m, masks, &out, backend.as_ref(), &cfg.refine));
            finish_batch("refine", &out, &items)
        }
        Command::Stats {
            manifest,
            masks,
            resolution,
        } => {
            ops::require_dir(masks)?;
            if *resolution == 0 {
                return Err(Error::Config("resolution must be positive".into()));
            }
            let m = Manifest::load(manifest)?;
            let table = pool.install(|| ops::stats_batch(&m, masks, *resolution));
            print!("{}", ops::format_stats(&table));
            if let Some(p) = &cli.output {
                write_atomic(p, to_json(&table).as_bytes())?;
            }
            Ok(if table.missing.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Split {
            manifest,
            masks,
            ratios,
        } => {
            let &[train, val, test] = ratios.as_slice() else {
                return Err(Error::Config(format!("--ratios takes 3 values, got {}", ratios.len())));
            };
            ops::require_dir(masks)?;
            let m = Manifest::load(manifest)?;
            let split_cfg = SplitConfig {
                ratios: [train, val, test],
                seed: cli.seed.unwrap_or(0),
                ..SplitConfig::default()
            };
            let a = pool.install(|| ops::split_batch(&m, masks, &split_cfg))?;
            for w in &a.warnings {
                eprintln!("warning: {w}");
            }
            let [train, val, test] = a.sizes();
            eprintln!("split: {train} train, {val} val, {test} test");
            let map: BTreeMap<&str, _> = a.assignment.iter().map(|(id, s)| (id.as_str(), *s)).collect();
            emit(cli.output.as_deref(), &to_json(&map))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval { manifest, gt, pred } => {
            ops::require_dir(gt)?;
            ops::require_dir(pred)?;
            let m = Manifest::load(manifest)?;
            let report = pool.install(|| ops::eval_batch(&m, gt, pred));
            print!("{}", ops::format_eval(&report));
            if let Some(p) = &cli.output {
                write_atomic(p, to_json(&report).as_bytes())?;
            }
            Ok(if report.failures.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::ServeReview {
            manifest,
            masks,
            log,
            ui,
            addr,
        } => {
            ops::require_dir(masks)?;
            if let Some(ui) = ui {
                ops::require_dir(ui)?;
            }
            let m = Manifest::load(manifest)?;
            let store = Arc::new(ReviewStore::open(m, masks, log)?);
            let app = review::router(store, ui.as_deref());
            let rt = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| Error::io(addr, e))?;
            rt.block_on(review::serve(addr, app))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
