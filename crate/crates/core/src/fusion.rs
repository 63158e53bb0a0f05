//! Batched mask proposals and class-priority fusion at working
//! resolution.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::backend::{check_response, BackendError, ImageView, MaskBackend, Prompt};
use crate::class::{label_priority, OutputClass};
use crate::geometry::BoundingBox;
use crate::mask::{Bitmap, SemanticMask};
use crate::resize::ResizeMode;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    pub working_long_side: u32,
    pub batch_size: usize,
    pub output_side: u32,
    pub resize_mode: ResizeMode,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            working_long_side: 1024,
            batch_size: 16,
            output_side: 768,
            resize_mode: ResizeMode::SoftArgmax,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.working_long_side == 0 || self.batch_size == 0 || self.output_side == 0 {
            return Err(Error::InvalidConfig("fusion sizes must be positive"));
        }
        if self.output_side > self.working_long_side {
            return Err(Error::InvalidConfig("output_side exceeds working_long_side"));
        }
        Ok(())
    }
}

/// Image geometry at backend resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkingFrame {
    pub scale: f64,
    pub width: u32,
    pub height: u32,
    pub boxes: Vec<BoundingBox>,
}

/// Scales the image so its long side is exactly `long_side`, preserving
/// aspect ratio, and maps the boxes with the same factor. No padding.
pub fn prepare_working_frame(
    width: u32,
    height: u32,
    boxes: &[BoundingBox],
    long_side: u32,
) -> WorkingFrame {
    let long = width.max(height).max(1);
    let scale = f64::from(long_side) / f64::from(long);
    let side = |v: u32| -> u32 {
        if v == long {
            long_side
        } else {
            (libm::round(f64::from(v) * scale) as u32).max(1)
        }
    };
    WorkingFrame {
        scale,
        width: side(width),
        height: side(height),
        boxes: boxes.iter().map(|b| b.scaled(scale)).collect(),
    }
}

/// Writes `label` into every on-pixel of `proposal` where the current cell
/// is Background or has priority not above the new label's.
pub fn apply_proposal(mask: &mut SemanticMask, label: OutputClass, proposal: &Bitmap) {
    let incoming = label.priority();
    for (cell, &on) in mask.data_mut().iter_mut().zip(proposal.as_slice()) {
        if !on {
            continue;
        }
        let overwrite = *cell == OutputClass::Background.id()
            || label_priority(*cell).is_some_and(|p| incoming >= p);
        if overwrite {
            *cell = label.id();
        }
    }
}

/// Fuses one proposal per box into a working-resolution semantic mask.
///
/// Boxes are sent in `batch_size` chunks in list order and merged in the
/// same order, so equal-priority overlaps resolve to the later box. Any
/// backend failure fails the whole frame.
pub fn fuse_frame(
    image: &ImageView<'_>,
    boxes: &[BoundingBox],
    backend: &dyn MaskBackend,
    cfg: &FusionConfig,
) -> core::result::Result<SemanticMask, BackendError> {
    let mut mask = SemanticMask::background(image.width, image.height);
    for batch in boxes.chunks(cfg.batch_size.max(1)) {
        let prompts: Vec<Prompt> = batch.iter().copied().map(Prompt::Box).collect();
        let proposals = check_response(image, prompts.len(), backend.predict(image, &prompts)?)?;
        for (bbox, proposal) in batch.iter().zip(&proposals) {
            apply_proposal(&mut mask, bbox.class.output_class(), &proposal.mask);
        }
    }
    Ok(mask)
}
