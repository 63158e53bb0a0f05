//! Label-safe resampling of semantic masks.

use serde::{Deserialize, Serialize};

use crate::class::{label_priority, IGNORE};
use crate::mask::SemanticMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResizeMode {
    /// Bilinear resampling of per-class indicator planes followed by a
    /// per-pixel argmax. Exact ties go to the higher-priority class.
    #[default]
    SoftArgmax,
    Nearest,
}

/// Tie-break rank; Ignore sits below every class.
fn tie_rank(label: u8) -> i16 {
    label_priority(label).map_or(-1, i16::from)
}

/// Source coordinate and the two taps for output index `i` with half-pixel
/// alignment.
fn taps(i: u32, src: u32, dst: u32) -> (u32, u32, f64) {
    let pos = (f64::from(i) + 0.5) * f64::from(src) / f64::from(dst) - 0.5;
    let pos = pos.clamp(0.0, f64::from(src - 1));
    let lo = libm::floor(pos) as u32;
    let hi = (lo + 1).min(src - 1);
    (lo, hi, pos - f64::from(lo))
}

/// Resamples `mask` to `width x height`.
///
/// Only labels present in the input can appear in the output.
pub fn resize_labels(mask: &SemanticMask, width: u32, height: u32, mode: ResizeMode) -> SemanticMask {
    if mask.dims() == (width, height) || mask.is_empty() {
        return mask.clone();
    }
    let (sw, sh) = mask.dims();
    let mut out = SemanticMask::filled(width, height, 0);
    match mode {
        ResizeMode::Nearest => {
            for y in 0..height {
                let sy = ((u64::from(y) * 2 + 1) * u64::from(sh) / (2 * u64::from(height))) as u32;
                for x in 0..width {
                    let sx = ((u64::from(x) * 2 + 1) * u64::from(sw) / (2 * u64::from(width))) as u32;
                    out.set(x, y, mask.get(sx.min(sw - 1), sy.min(sh - 1)));
                }
            }
        }
        ResizeMode::SoftArgmax => {
            let xtaps: alloc::vec::Vec<_> = (0..width).map(|x| taps(x, sw, width)).collect();
            for y in 0..height {
                let (y0, y1, fy) = taps(y, sh, height);
                for (x, &(x0, x1, fx)) in xtaps.iter().enumerate() {
                    let samples = [
                        (mask.get(x0, y0), (1.0 - fx) * (1.0 - fy)),
                        (mask.get(x1, y0), fx * (1.0 - fy)),
                        (mask.get(x0, y1), (1.0 - fx) * fy),
                        (mask.get(x1, y1), fx * fy),
                    ];
                    out.set(x as u32, y, soft_argmax(&samples));
                }
            }
        }
    }
    out
}

fn soft_argmax(samples: &[(u8, f64); 4]) -> u8 {
    // Up to four distinct labels; accumulate weight per label.
    let mut labels = [(IGNORE, 0.0f64); 4];
    let mut n = 0;
    for &(label, w) in samples {
        match labels[..n].iter_mut().find(|(l, _)| *l == label) {
            Some(entry) => entry.1 += w,
            None => {
                labels[n] = (label, w);
                n += 1;
            }
        }
    }
    let mut best = labels[0];
    for &cand in &labels[1..n] {
        if cand.1 > best.1 || (cand.1 == best.1 && tie_rank(cand.0) > tie_rank(best.0)) {
            best = cand;
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    #[test]
    fn uniform_background() {
        let m = SemanticMask::background(1024, 512);
        let r = resize_labels(&m, 768, 768, ResizeMode::SoftArgmax);
        assert_eq!(r.dims(), (768, 768));
        assert!(r.as_slice().iter().all(|&v| v == 0));
    }

    #[test]
    fn identity_at_target_size() {
        let data: Vec<u8> = (0..64u32 * 64).map(|i| (i % 7 % 4) as u8).collect();
        let m = SemanticMask::from_raw(64, 64, data).unwrap();
        assert_eq!(resize_labels(&m, 64, 64, ResizeMode::SoftArgmax), m);
        assert_eq!(resize_labels(&m, 64, 64, ResizeMode::Nearest), m);
    }

    #[test]
    fn half_split_boundary_lands_at_384() {
        let mut m = SemanticMask::filled(1024, 1024, 1);
        for y in 0..1024 {
            for x in 512..1024 {
                m.set(x, y, 2);
            }
        }
        for mode in [ResizeMode::SoftArgmax, ResizeMode::Nearest] {
            let r = resize_labels(&m, 768, 768, mode);
            assert_eq!(r.labels_present(), vec![1, 2]);
            for y in [0, 100, 767] {
                let first_sign = (0..768).find(|&x| r.get(x, y) == 2).unwrap();
                assert!((first_sign as i64 - 384).abs() <= 1, "{mode:?}: {first_sign}");
                assert!((first_sign..768).all(|x| r.get(x, y) == 2));
            }
        }
    }

    #[test]
    fn exact_tie_goes_to_higher_priority() {
        // 2x1 -> 1x1: both taps weigh 0.5.
        let m = SemanticMask::from_raw(2, 1, vec![3, 1]).unwrap();
        assert_eq!(resize_labels(&m, 1, 1, ResizeMode::SoftArgmax).get(0, 0), 3);
        let m = SemanticMask::from_raw(2, 1, vec![1, 3]).unwrap();
        assert_eq!(resize_labels(&m, 1, 1, ResizeMode::SoftArgmax).get(0, 0), 3);
        let m = SemanticMask::from_raw(2, 1, vec![255, 0]).unwrap();
        assert_eq!(resize_labels(&m, 1, 1, ResizeMode::SoftArgmax).get(0, 0), 0);
    }

    fn arb_mask() -> impl Strategy<Value = SemanticMask> {
        (1u32..24, 1u32..24).prop_flat_map(|(w, h)| {
            proptest::collection::vec(prop_oneof![Just(0u8), Just(1), Just(2), Just(3), Just(255)], (w * h) as usize)
                .prop_map(move |d| SemanticMask::from_raw(w, h, d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn never_mints_labels(m in arb_mask(), w in 1u32..40, h in 1u32..40, nearest in any::<bool>()) {
            let mode = if nearest { ResizeMode::Nearest } else { ResizeMode::SoftArgmax };
            let r = resize_labels(&m, w, h, mode);
            prop_assert_eq!(r.dims(), (w, h));
            let present = m.labels_present();
            for l in r.labels_present() {
                prop_assert!(present.contains(&l));
            }
        }
    }
}
