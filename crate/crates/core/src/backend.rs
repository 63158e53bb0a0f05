//! Mask-proposal backend interface and the deterministic synthetic
//! backend.
//!
//! A backend answers a batch of prompts against one working-resolution
//! image with one binary mask per prompt. The real promptable segmenter
//! runs out of process behind the HTTP adapter in the `boxmask` crate;
//! [`SyntheticBackend`] is an in-process stand-in used for tests and
//! determinism checks.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::BoundingBox;
use crate::mask::Bitmap;

/// Borrowed RGB8 image at working resolution.
#[derive(Debug, Clone, Copy)]
pub struct ImageView<'a> {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB triples; may be empty for backends that do not look at
    /// pixels.
    pub rgb: &'a [u8],
}

impl<'a> ImageView<'a> {
    /// A view that carries only dimensions.
    pub fn dims_only(width: u32, height: u32) -> ImageView<'static> {
        ImageView {
            width,
            height,
            rgb: &[],
        }
    }
}

/// A single prompt in working-resolution coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prompt {
    Box(BoundingBox),
    /// Point prompt at a box center. `context` is the box the point came
    /// from; point-only backends ignore it.
    Point { x: f64, y: f64, context: BoundingBox },
}

impl Prompt {
    pub fn center_of(bbox: &BoundingBox) -> Prompt {
        let (x, y) = bbox.center();
        Prompt::Point {
            x,
            y,
            context: *bbox,
        }
    }

    pub fn extent(&self) -> &BoundingBox {
        match self {
            Prompt::Box(b) => b,
            Prompt::Point { context, .. } => context,
        }
    }
}

/// Binary mask returned for one prompt slot.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskProposal {
    pub slot: usize,
    pub mask: Bitmap,
    /// Carried through but not used by fusion.
    pub score: Option<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendErrorKind {
    Timeout,
    Transport,
    Malformed,
    MissingSlot,
    DimensionMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendError {
    pub kind: BackendErrorKind,
    pub message: String,
}

impl BackendError {
    pub fn new(kind: BackendErrorKind, message: impl Into<String>) -> Self {
        BackendError {
            kind,
            message: message.into(),
        }
    }
}

impl fmt::Display for BackendError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "backend {:?}: {}", self.kind, self.message)
    }
}

impl core::error::Error for BackendError {}

/// Promptable mask generator.
pub trait MaskBackend: Sync {
    /// Returns exactly one proposal per prompt, in slot order.
    fn predict(
        &self,
        image: &ImageView<'_>,
        prompts: &[Prompt],
    ) -> Result<Vec<MaskProposal>, BackendError>;

    /// Whether [`ImageView::rgb`] must be filled. Callers may pass a
    /// dimensions-only view when this is false.
    fn needs_pixels(&self) -> bool {
        true
    }
}

impl<T: MaskBackend + ?Sized> MaskBackend for &T {
    fn predict(
        &self,
        image: &ImageView<'_>,
        prompts: &[Prompt],
    ) -> Result<Vec<MaskProposal>, BackendError> {
        (**self).predict(image, prompts)
    }

    fn needs_pixels(&self) -> bool {
        (**self).needs_pixels()
    }
}

/// Checks that a response maps one-to-one onto the request slots at the
/// image dimensions, and returns it ordered by slot.
pub fn check_response(
    image: &ImageView<'_>,
    prompt_count: usize,
    mut proposals: Vec<MaskProposal>,
) -> Result<Vec<MaskProposal>, BackendError> {
    proposals.sort_by_key(|p| p.slot);
    for (expected, p) in proposals.iter().enumerate() {
        if p.slot != expected {
            return Err(BackendError::new(
                BackendErrorKind::MissingSlot,
                alloc::format!("no proposal for slot {expected}"),
            ));
        }
        if p.mask.dims() != (image.width, image.height) {
            return Err(BackendError::new(
                BackendErrorKind::DimensionMismatch,
                alloc::format!(
                    "slot {} mask is {:?}, image is {}x{}",
                    p.slot,
                    p.mask.dims(),
                    image.width,
                    image.height
                ),
            ));
        }
    }
    if proposals.len() != prompt_count {
        return Err(BackendError::new(
            BackendErrorKind::MissingSlot,
            alloc::format!("{} proposals for {} prompts", proposals.len(), prompt_count),
        ));
    }
    Ok(proposals)
}

/// Deterministic backend: the axis-aligned ellipse inscribed in the
/// prompt's box, rasterized with a pixel-center test.
#[derive(Debug, Clone, Copy, Default)]
pub struct SyntheticBackend;

impl SyntheticBackend {
    /// Pixel test shared by [`synthetic_mask`] callers.
    pub fn inside(bbox: &BoundingBox, x: u32, y: u32) -> bool {
        let (cx, cy) = bbox.center();
        let rx = 0.5 * bbox.width();
        let ry = 0.5 * bbox.height();
        if rx <= 0.0 || ry <= 0.0 {
            return false;
        }
        let dx = (f64::from(x) + 0.5 - cx) / rx;
        let dy = (f64::from(y) + 0.5 - cy) / ry;
        dx * dx + dy * dy <= 1.0
    }
}

/// Inscribed ellipse of `bbox` on a `width x height` grid. A box too small
/// to contain any pixel center lights the single pixel holding its
/// center.
pub fn synthetic_mask(width: u32, height: u32, bbox: &BoundingBox) -> Bitmap {
    let mut mask = Bitmap::new(width, height);
    let win = bbox.pixel_window(width, height);
    let mut any = false;
    for y in win.y0..win.y1 {
        for x in win.x0..win.x1 {
            if SyntheticBackend::inside(bbox, x, y) {
                mask.set(x, y, true);
                any = true;
            }
        }
    }
    if !any {
        let (cx, cy) = bbox.center();
        if cx >= 0.0 && cy >= 0.0 && cx < f64::from(width) && cy < f64::from(height) {
            mask.set(cx as u32, cy as u32, true);
        }
    }
    mask
}

impl MaskBackend for SyntheticBackend {
    fn predict(
        &self,
        image: &ImageView<'_>,
        prompts: &[Prompt],
    ) -> Result<Vec<MaskProposal>, BackendError> {
        Ok(prompts
            .iter()
            .enumerate()
            .map(|(slot, p)| MaskProposal {
                slot,
                mask: synthetic_mask(image.width, image.height, p.extent()),
                score: Some(1.0),
            })
            .collect())
    }

    fn needs_pixels(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::class::InputClass;

    fn sb(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1, InputClass::Sign)
    }

    #[test]
    fn inscribed_disc_in_4x4() {
        let m = synthetic_mask(4, 4, &sb(0.0, 0.0, 4.0, 4.0));
        // Hand rasterization: centers at 0.5..3.5, radius 2; the four
        // corners fall outside ((1.5^2 + 1.5^2) / 4 = 1.125).
        let expected = [
            [false, true, true, false],
            [true, true, true, true],
            [true, true, true, true],
            [false, true, true, false],
        ];
        for y in 0..4 {
            for x in 0..4 {
                assert_eq!(m.get(x, y), expected[y as usize][x as usize], "({x},{y})");
            }
        }
        assert_eq!(m.count_ones(), 12);
    }

    #[test]
    fn unit_box_is_one_pixel() {
        let m = synthetic_mask(8, 8, &sb(3.0, 5.0, 4.0, 6.0));
        assert_eq!(m.count_ones(), 1);
        assert!(m.get(3, 5));
        let tiny = synthetic_mask(8, 8, &sb(2.1, 2.1, 2.3, 2.3));
        assert_eq!(tiny.count_ones(), 1);
        assert!(tiny.get(2, 2));
    }

    #[test]
    fn ellipse_inside_box() {
        let m = synthetic_mask(16, 16, &sb(0.0, 0.0, 10.0, 2.0));
        assert!(m.count_ones() < 20);
        assert!(m.count_ones() > 0);
        for y in 0..16 {
            for x in 0..16 {
                if m.get(x, y) {
                    assert!(x < 10 && y < 2);
                }
            }
        }
    }

    #[test]
    fn response_check() {
        let img = ImageView::dims_only(4, 4);
        let prompts = [Prompt::Box(sb(0.0, 0.0, 2.0, 2.0)), Prompt::Box(sb(1.0, 1.0, 3.0, 3.0))];
        let resp = SyntheticBackend.predict(&img, &prompts).unwrap();
        assert_eq!(check_response(&img, 2, resp.clone()).unwrap().len(), 2);
        let err = check_response(&img, 2, resp[..1].to_vec()).unwrap_err();
        assert_eq!(err.kind, BackendErrorKind::MissingSlot);
        let mut wrong = resp.clone();
        wrong[1].mask = Bitmap::new(3, 3);
        assert_eq!(
            check_response(&img, 2, wrong).unwrap_err().kind,
            BackendErrorKind::DimensionMismatch
        );
    }
}
