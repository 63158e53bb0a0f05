//! Bounded boundary refinement of an existing mask from center-point
//! proposals.
//!
//! For every box, in input order, one proposal is requested for the box
//! center. Expansion then adds Background pixels that touch the box class
//! and are on in the proposal; contraction removes box-class pixels that
//! touch Background and are off in the proposal. Each step sees the mask
//! as it was before that step, edits only the box window, and is capped at
//! `max_changes` pixels taken in scanline order.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::backend::{check_response, BackendError, ImageView, MaskBackend, Prompt};
use crate::class::OutputClass;
use crate::components::Connectivity;
use crate::geometry::{clamp_box, BoundingBox, PixelWindow};
use crate::mask::{Bitmap, SemanticMask};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    /// Per-step cap as a fraction of the clamped box area (rounded up).
    pub max_change_fraction: f64,
    /// Absolute per-step cap; overrides the fraction when set.
    pub max_changes: Option<u64>,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            max_change_fraction: 0.10,
            max_changes: None,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_change_fraction >= 0.0) || !self.max_change_fraction.is_finite() {
            return Err(Error::InvalidConfig("max_change_fraction must be >= 0"));
        }
        Ok(())
    }

    pub fn cap_for(&self, bbox: &BoundingBox) -> u64 {
        self.max_changes
            .unwrap_or_else(|| libm::ceil(self.max_change_fraction * bbox.area()) as u64)
    }
}

/// Outcome for one box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxChange {
    pub index: usize,
    pub class: OutputClass,
    pub max_changes: u64,
    pub added: u64,
    pub removed: u64,
    /// Set when the box was skipped (degenerate box or backend failure).
    pub skipped: Option<alloc::string::String>,
}

fn touches(mask: &SemanticMask, win: &PixelWindow, x: u32, y: u32, label: u8) -> bool {
    Connectivity::Eight.offsets().iter().any(|&(dx, dy)| {
        let (nx, ny) = (x as i64 + i64::from(dx), y as i64 + i64::from(dy));
        nx >= 0
            && ny >= 0
            && win.contains(nx as u32, ny as u32)
            && mask.get(nx as u32, ny as u32) == label
    })
}

/// Pixels of `win` passing `keep`, scanline order, at most `cap`.
fn select(win: &PixelWindow, cap: u64, mut keep: impl FnMut(u32, u32) -> bool) -> PixelList {
    let mut picked = Vec::new();
    'rows: for y in win.y0..win.y1 {
        for x in win.x0..win.x1 {
            if picked.len() as u64 >= cap {
                break 'rows;
            }
            if keep(x, y) {
                picked.push((x, y));
            }
        }
    }
    picked
}

/// Pixel coordinates touched by one refinement step.
pub type PixelList = Vec<(u32, u32)>;

/// Expansion then contraction for one box against a proposal.
///
/// Returns `(added, removed)` pixel lists.
pub fn refine_box(
    mask: &mut SemanticMask,
    win: &PixelWindow,
    class: OutputClass,
    proposal: &Bitmap,
    cap: u64,
) -> (PixelList, PixelList) {
    let (c, bg) = (class.id(), OutputClass::Background.id());

    let before = mask.clone();
    let added = select(win, cap, |x, y| {
        before.get(x, y) == bg && proposal.get(x, y) && touches(&before, win, x, y, c)
    });
    for &(x, y) in &added {
        mask.set(x, y, c);
    }

    let before = mask.clone();
    let removed = select(win, cap, |x, y| {
        before.get(x, y) == c && !proposal.get(x, y) && touches(&before, win, x, y, bg)
    });
    for &(x, y) in &removed {
        mask.set(x, y, bg);
    }
    (added, removed)
}

/// Refines `mask` box by box. Backend failures skip the box only.
pub fn refine_mask(
    mask: &SemanticMask,
    image: &ImageView<'_>,
    boxes: &[BoundingBox],
    backend: &dyn MaskBackend,
    cfg: &RefineConfig,
) -> Result<(SemanticMask, Vec<BoxChange>)> {
    if mask.dims() != (image.width, image.height) {
        return Err(Error::DimensionMismatch {
            expected: mask.dims(),
            found: (image.width, image.height),
        });
    }
    let (w, h) = mask.dims();
    let mut out = mask.clone();
    let mut changes = Vec::with_capacity(boxes.len());
    for (index, b) in boxes.iter().enumerate() {
        let class = b.class.output_class();
        let mut change = BoxChange {
            index,
            class,
            max_changes: 0,
            added: 0,
            removed: 0,
            skipped: None,
        };
        let Some(clamped) = clamp_box(b, w, h) else {
            change.skipped = Some("degenerate box".into());
            changes.push(change);
            continue;
        };
        change.max_changes = cfg.cap_for(&clamped);
        let prompts = [Prompt::center_of(&clamped)];
        let proposal = backend
            .predict(image, &prompts)
            .and_then(|r| check_response(image, 1, r));
        match proposal {
            Ok(mut p) => {
                let win = clamped.pixel_window(w, h);
                let (a, r) = refine_box(&mut out, &win, class, &p.remove(0).mask, change.max_changes);
                change.added = a.len() as u64;
                change.removed = r.len() as u64;
            }
            Err(BackendError { message, .. }) => change.skipped = Some(message),
        }
        changes.push(change);
    }
    Ok((out, changes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{BackendErrorKind, MaskProposal};
    use crate::class::InputClass;

    /// Returns a fixed bitmap for every prompt.
    struct Fixed(Bitmap);

    impl MaskBackend for Fixed {
        fn predict(
            &self,
            _image: &ImageView<'_>,
            prompts: &[Prompt],
        ) -> core::result::Result<Vec<MaskProposal>, BackendError> {
            Ok((0..prompts.len())
                .map(|slot| MaskProposal {
                    slot,
                    mask: self.0.clone(),
                    score: None,
                })
                .collect())
        }
    }

    struct Down;

    impl MaskBackend for Down {
        fn predict(
            &self,
            _image: &ImageView<'_>,
            _prompts: &[Prompt],
        ) -> core::result::Result<Vec<MaskProposal>, BackendError> {
            Err(BackendError::new(BackendErrorKind::Transport, "refused"))
        }
    }

    fn square(w: u32, x0: u32, x1: u32) -> Bitmap {
        Bitmap::from_fn(w, w, |x, y| x >= x0 && x < x1 && y >= x0 && y < x1)
    }

    fn to_mask(b: &Bitmap, label: u8) -> SemanticMask {
        let data = b.as_slice().iter().map(|&on| if on { label } else { 0 }).collect();
        SemanticMask::from_raw(b.width(), b.height(), data).unwrap()
    }

    #[test]
    fn agreement_is_identity() {
        let region = square(20, 5, 15);
        let mask = to_mask(&region, 1);
        let b = BoundingBox::new(2.0, 2.0, 18.0, 18.0, InputClass::Vehicle);
        let (out, ch) = refine_mask(
            &mask,
            &ImageView::dims_only(20, 20),
            &[b],
            &Fixed(region),
            &RefineConfig::default(),
        )
        .unwrap();
        assert_eq!(out, mask);
        assert_eq!((ch[0].added, ch[0].removed), (0, 0));
    }

    #[test]
    fn rim_added_then_removed() {
        let inner = square(20, 6, 14); // 8x8
        let outer = square(20, 5, 15); // 10x10, rim of 36
        let b = BoundingBox::new(2.0, 2.0, 18.0, 18.0, InputClass::Sign);
        let cfg = RefineConfig::default(); // cap = ceil(0.1 * 256) = 26
        let img = ImageView::dims_only(20, 20);

        let (grown, ch) = refine_mask(&to_mask(&inner, 2), &img, &[b], &Fixed(outer.clone()), &cfg).unwrap();
        assert_eq!(ch[0].max_changes, 26);
        assert_eq!(ch[0].added, 26);
        assert_eq!(grown.class_counts().0[2], 64 + 26);

        let loose = RefineConfig {
            max_changes: Some(100),
            ..cfg
        };
        let (grown, ch) = refine_mask(&to_mask(&inner, 2), &img, &[b], &Fixed(outer.clone()), &loose).unwrap();
        assert_eq!(grown, to_mask(&outer, 2));
        assert_eq!((ch[0].added, ch[0].removed), (36, 0));

        let (shrunk, ch) = refine_mask(&to_mask(&outer, 2), &img, &[b], &Fixed(inner.clone()), &loose).unwrap();
        assert_eq!(shrunk, to_mask(&inner, 2));
        assert_eq!((ch[0].added, ch[0].removed), (0, 36));
    }

    #[test]
    fn expansion_is_single_pass() {
        // Proposal covers everything; only the 1 px ring around the square
        // may be added in one pass.
        let inner = square(20, 8, 12);
        let all = Bitmap::from_fn(20, 20, |_, _| true);
        let b = BoundingBox::new(0.0, 0.0, 20.0, 20.0, InputClass::Vehicle);
        let cfg = RefineConfig {
            max_changes: Some(1000),
            ..RefineConfig::default()
        };
        let (out, ch) = refine_mask(&to_mask(&inner, 1), &ImageView::dims_only(20, 20), &[b], &Fixed(all), &cfg).unwrap();
        assert_eq!(ch[0].added, 36 - 16);
        assert_eq!(out.class_counts().0[1], 36);
    }

    #[test]
    fn edits_stay_in_box() {
        let inner = square(20, 6, 14);
        let outer = square(20, 5, 15);
        // box covers only the left half of the object
        let b = BoundingBox::new(0.0, 0.0, 10.0, 20.0, InputClass::Pedestrian);
        let cfg = RefineConfig {
            max_changes: Some(1000),
            ..RefineConfig::default()
        };
        let (out, _) = refine_mask(&to_mask(&inner, 3), &ImageView::dims_only(20, 20), &[b], &Fixed(outer), &cfg).unwrap();
        for y in 0..20 {
            for x in 10..20 {
                assert_eq!(out.get(x, y), to_mask(&inner, 3).get(x, y));
            }
        }
    }

    #[test]
    fn backend_failure_skips_box() {
        let mask = to_mask(&square(20, 6, 14), 1);
        let b = BoundingBox::new(2.0, 2.0, 18.0, 18.0, InputClass::Vehicle);
        let (out, ch) = refine_mask(&mask, &ImageView::dims_only(20, 20), &[b], &Down, &RefineConfig::default()).unwrap();
        assert_eq!(out, mask);
        assert_eq!(ch[0].skipped.as_deref(), Some("refused"));
    }

    #[test]
    fn dimension_mismatch() {
        let mask = SemanticMask::background(10, 10);
        assert!(refine_mask(&mask, &ImageView::dims_only(9, 10), &[], &Down, &RefineConfig::default()).is_err());
    }
}
