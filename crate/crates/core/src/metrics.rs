//! Confusion-matrix accumulation and IoU metrics.
//!
//! Rows are ground truth, columns are predictions. Ground-truth Ignore
//! pixels contribute nothing. Averages skip classes whose IoU is
//! undefined (0/0), and by default cover only the foreground classes.

use core::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::class::{OutputClass, IGNORE, NUM_CLASSES};
use crate::mask::SemanticMask;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn diag(&self, c: OutputClass) -> u64 {
        self.counts[c.index()][c.index()]
    }

    /// Ground-truth pixel count of `c`.
    pub fn gt_count(&self, c: OutputClass) -> u64 {
        self.counts[c.index()].iter().sum()
    }

    pub fn pred_count(&self, c: OutputClass) -> u64 {
        self.counts.iter().map(|row| row[c.index()]).sum()
    }

    /// Adds one gt/pred pair.
    pub fn accumulate(&mut self, gt: &SemanticMask, pred: &SemanticMask) -> Result<()> {
        if gt.dims() != pred.dims() {
            return Err(Error::DimensionMismatch {
                expected: gt.dims(),
                found: pred.dims(),
            });
        }
        if pred.has_ignore() {
            return Err(Error::IgnoreInPrediction);
        }
        for (&g, &p) in gt.as_slice().iter().zip(pred.as_slice()) {
            if g == IGNORE {
                continue;
            }
            self.counts[g as usize][p as usize] += 1;
        }
        Ok(())
    }

    /// `tp / (gt + pred - tp)`, `None` when the class is absent from both.
    pub fn class_iou(&self, c: OutputClass) -> Option<f64> {
        let tp = self.diag(c);
        let union = self.gt_count(c) + self.pred_count(c) - tp;
        (union > 0).then(|| tp as f64 / union as f64)
    }

    pub fn class_ious(&self) -> [Option<f64>; NUM_CLASSES] {
        OutputClass::ALL.map(|c| self.class_iou(c))
    }

    pub fn miou(&self, classes: &[OutputClass]) -> Option<f64> {
        mean_iou(classes.iter().map(|&c| self.class_iou(c)))
    }

    pub fn fwiou(&self, classes: &[OutputClass]) -> Option<f64> {
        frequency_weighted_iou(classes.iter().filter_map(|&c| {
            let freq = self.gt_count(c) as f64;
            self.class_iou(c).map(|iou| (freq, iou))
        }))
    }
}

impl Add for ConfusionMatrix {
    type Output = ConfusionMatrix;

    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl AddAssign for ConfusionMatrix {
    fn add_assign(&mut self, rhs: Self) {
        for (row, other) in self.counts.iter_mut().zip(rhs.counts) {
            for (a, b) in row.iter_mut().zip(other) {
                *a += b;
            }
        }
    }
}

impl core::iter::Sum for ConfusionMatrix {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ConfusionMatrix::new(), Add::add)
    }
}

/// Mean of the defined values; `None` when none are defined.
pub fn mean_iou(ious: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = ious
        .into_iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// `sum(freq * iou) / sum(freq)` over `(freq, iou)` pairs; `None` when the
/// total frequency is zero.
pub fn frequency_weighted_iou(pairs: impl IntoIterator<Item = (f64, f64)>) -> Option<f64> {
    let (num, den) = pairs
        .into_iter()
        .fold((0.0, 0.0), |(n, d), (f, iou)| (n + f * iou, d + f));
    (den > 0.0).then(|| num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    const FG: [OutputClass; 3] = OutputClass::FOREGROUND;

    #[test]
    fn perfect_prediction_is_diagonal() {
        let m = SemanticMask::from_raw(2, 2, vec![0, 1, 2, 3]).unwrap();
        let mut cm = ConfusionMatrix::new();
        cm.accumulate(&m, &m).unwrap();
        for g in 0..4 {
            for p in 0..4 {
                assert_eq!(cm.counts[g][p], u64::from(g == p));
            }
        }
        for c in OutputClass::ALL {
            assert_eq!(cm.class_iou(c), Some(1.0));
        }
    }

    #[test]
    fn ignore_gt_contributes_nothing() {
        let gt = SemanticMask::filled(3, 3, IGNORE);
        let pred = SemanticMask::filled(3, 3, 1);
        let mut cm = ConfusionMatrix::new();
        cm.accumulate(&gt, &pred).unwrap();
        assert_eq!(cm, ConfusionMatrix::new());
    }

    #[test]
    fn hand_filled_4x4() {
        #[rustfmt::skip]
        let gt = SemanticMask::from_raw(4, 4, vec![
            0, 0, 1, 1,
            0, 0, 1, 1,
            2, 2, 3, 255,
            2, 2, 3, 0,
        ]).unwrap();
        #[rustfmt::skip]
        let pred = SemanticMask::from_raw(4, 4, vec![
            0, 1, 1, 1,
            0, 0, 1, 0,
            2, 3, 3, 2,
            2, 2, 3, 0,
        ]).unwrap();
        let mut cm = ConfusionMatrix::new();
        cm.accumulate(&gt, &pred).unwrap();
        // disagreements: (0->1), (1->0), (2->3); Ignore cell skipped
        let expected = [[4, 1, 0, 0], [1, 3, 0, 0], [0, 0, 3, 1], [0, 0, 0, 2]];
        assert_eq!(cm.counts, expected);
        assert_eq!(cm.total(), 15);
    }

    #[test]
    fn errors() {
        let mut cm = ConfusionMatrix::new();
        let a = SemanticMask::background(2, 2);
        assert!(matches!(
            cm.accumulate(&a, &SemanticMask::background(2, 3)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert_eq!(
            cm.accumulate(&a, &SemanticMask::filled(2, 2, IGNORE)),
            Err(Error::IgnoreInPrediction)
        );
    }

    #[test]
    fn iou_arithmetic() {
        let mut cm = ConfusionMatrix::new();
        // Vehicle: diag 50, row 80, col 70
        cm.counts[1] = [20, 50, 10, 0];
        cm.counts[0][1] = 15;
        cm.counts[3][1] = 5;
        assert_eq!(cm.gt_count(OutputClass::Vehicle), 80);
        assert_eq!(cm.pred_count(OutputClass::Vehicle), 70);
        assert_eq!(cm.class_iou(OutputClass::Vehicle), Some(0.5));
        assert_eq!(ConfusionMatrix::new().class_iou(OutputClass::Sign), None);
    }

    #[test]
    fn averages() {
        assert_eq!(mean_iou([Some(0.5), None, Some(0.7)]).map(|v| (v * 1e12).round() / 1e12), Some(0.6));
        assert_eq!(mean_iou([None, None]), None);
        assert!((mean_iou([Some(0.4); 3]).unwrap() - 0.4).abs() < 1e-15);
        let eq = frequency_weighted_iou([(10.0, 0.2), (10.0, 0.4), (10.0, 0.9)]).unwrap();
        assert!((eq - mean_iou([Some(0.2), Some(0.4), Some(0.9)]).unwrap()).abs() < 1e-15);
        assert_eq!(frequency_weighted_iou([(5.0, 0.3)]), Some(0.3));
        assert_eq!(frequency_weighted_iou([(0.0, 0.3)]), None);
    }

    #[test]
    fn background_excluded_by_default() {
        let gt = SemanticMask::from_raw(4, 1, vec![0, 0, 1, 1]).unwrap();
        let pred = SemanticMask::from_raw(4, 1, vec![0, 1, 1, 1]).unwrap();
        let mut cm = ConfusionMatrix::new();
        cm.accumulate(&gt, &pred).unwrap();
        // Vehicle IoU 2/3; Sign/Human undefined.
        assert!((cm.miou(&FG).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((cm.fwiou(&FG).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((cm.miou(&OutputClass::ALL).unwrap() - (0.5 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
    }

    fn arb_pair() -> impl Strategy<Value = (SemanticMask, SemanticMask)> {
        let gt = proptest::collection::vec(prop_oneof![Just(0u8), Just(1), Just(2), Just(3), Just(255)], 64);
        let pred = proptest::collection::vec(0u8..4, 64);
        (gt, pred).prop_map(|(g, p)| {
            (
                SemanticMask::from_raw(8, 8, g).unwrap(),
                SemanticMask::from_raw(8, 8, p).unwrap(),
            )
        })
    }

    proptest! {
        #[test]
        fn accumulation_is_order_independent(pairs in proptest::collection::vec(arb_pair(), 1..6)) {
            let mut forward = ConfusionMatrix::new();
            for (g, p) in &pairs { forward.accumulate(g, p).unwrap(); }
            let mut backward = ConfusionMatrix::new();
            for (g, p) in pairs.iter().rev() { backward.accumulate(g, p).unwrap(); }
            let split = pairs.len() / 2;
            let parts: ConfusionMatrix = [&pairs[..split], &pairs[split..]].iter().map(|part| {
                let mut cm = ConfusionMatrix::new();
                for (g, p) in part.iter() { cm.accumulate(g, p).unwrap(); }
                cm
            }).sum();
            prop_assert_eq!(forward, backward);
            prop_assert_eq!(forward, parts);
            let valid: usize = pairs.iter().map(|(g, _)| g.as_slice().iter().filter(|&&v| v != IGNORE).count()).sum();
            prop_assert_eq!(forward.total(), valid as u64);
        }

        #[test]
        fn iou_bounds((g, p) in arb_pair()) {
            let mut cm = ConfusionMatrix::new();
            cm.accumulate(&g, &p).unwrap();
            let defined: alloc::vec::Vec<f64> = cm.class_ious().into_iter().flatten().collect();
            for c in OutputClass::ALL {
                if let Some(iou) = cm.class_iou(c) {
                    prop_assert!((0.0..=1.0).contains(&iou));
                    let full = cm.gt_count(c) == cm.diag(c) && cm.pred_count(c) == cm.diag(c);
                    prop_assert_eq!(iou == 1.0, full);
                }
            }
            if let Some(m) = cm.miou(&OutputClass::ALL) {
                let lo = defined.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = defined.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(m >= lo - 1e-12 && m <= hi + 1e-12);
            }
        }
    }
}
