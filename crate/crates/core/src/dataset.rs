//! Per-weather pixel statistics and the distribution-matched
//! train/val/test split.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::class::{OutputClass, Weather, NUM_CLASSES};
use crate::mask::SemanticMask;
use crate::resize::{resize_labels, ResizeMode};
use crate::{Error, Result};

/// Pixel totals for one weather stratum (or the Total row when `weather`
/// is `None`) at `resolution x resolution`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsRow {
    pub weather: Option<Weather>,
    pub samples: u64,
    pub resolution: u32,
    /// Indexed by [`OutputClass::index`].
    pub class_pixels: [u64; NUM_CLASSES],
    pub ignore_pixels: u64,
}

impl StatsRow {
    pub fn empty(weather: Option<Weather>, resolution: u32) -> Self {
        StatsRow {
            weather,
            samples: 0,
            resolution,
            class_pixels: [0; NUM_CLASSES],
            ignore_pixels: 0,
        }
    }

    /// `samples * resolution^2`.
    pub fn capacity(&self) -> u64 {
        self.samples * u64::from(self.resolution) * u64::from(self.resolution)
    }

    /// Pixels that carry a class label.
    pub fn labeled_pixels(&self) -> u64 {
        self.capacity().saturating_sub(self.ignore_pixels)
    }

    /// Class shares in percent of labeled pixels; Ignore is excluded.
    pub fn percentages(&self) -> [f64; NUM_CLASSES] {
        let total = self.labeled_pixels() as f64;
        self.class_pixels
            .map(|p| if total > 0.0 { 100.0 * p as f64 / total } else { 0.0 })
    }

    pub fn add_frame(&mut self, class_pixels: &[u64; NUM_CLASSES], ignore: u64) {
        self.samples += 1;
        for (a, b) in self.class_pixels.iter_mut().zip(class_pixels) {
            *a += b;
        }
        self.ignore_pixels += ignore;
    }

    pub fn merge(&mut self, other: &StatsRow) {
        self.samples += other.samples;
        for (a, b) in self.class_pixels.iter_mut().zip(other.class_pixels) {
            *a += b;
        }
        self.ignore_pixels += other.ignore_pixels;
    }
}

/// Class and Ignore counts of one mask after resizing to `resolution`.
pub fn frame_pixel_counts(mask: &SemanticMask, resolution: u32) -> ([u64; NUM_CLASSES], u64) {
    resize_labels(mask, resolution, resolution, ResizeMode::SoftArgmax).class_counts()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsTable {
    /// Weather rows in taxonomy order; strata without frames are omitted.
    pub rows: Vec<StatsRow>,
    pub total: StatsRow,
    /// Frames listed in the manifest but without a mask.
    pub missing: Vec<String>,
}

/// One manifest entry for [`compute_stats`].
#[derive(Debug, Clone, Copy)]
pub struct StatsInput<'a> {
    pub frame_id: &'a str,
    pub weather: Weather,
    /// Class and Ignore counts at the stats resolution, `None` if the mask
    /// is missing.
    pub counts: Option<([u64; NUM_CLASSES], u64)>,
}

pub fn compute_stats<'a>(inputs: impl IntoIterator<Item = StatsInput<'a>>, resolution: u32) -> StatsTable {
    let mut rows: Vec<StatsRow> = Weather::ALL
        .iter()
        .map(|&w| StatsRow::empty(Some(w), resolution))
        .collect();
    let mut missing = Vec::new();
    for input in inputs {
        match input.counts {
            Some((pixels, ignore)) => rows[input.weather.index()].add_frame(&pixels, ignore),
            None => missing.push(String::from(input.frame_id)),
        }
    }
    let mut total = StatsRow::empty(None, resolution);
    for r in &rows {
        total.merge(r);
    }
    rows.retain(|r| r.samples > 0);
    StatsTable {
        rows,
        total,
        missing,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Per-frame input to [`stratified_split`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitFrame {
    pub frame_id: String,
    pub weather: Weather,
    pub class_pixels: [u64; NUM_CLASSES],
}

impl SplitFrame {
    pub fn foreground(&self) -> u64 {
        OutputClass::FOREGROUND
            .iter()
            .map(|c| self.class_pixels[c.index()])
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub ratios: [f64; 3],
    pub seed: u64,
    /// Strata smaller than this are assigned by ratio alone.
    pub min_stratum: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            ratios: [0.50, 0.25, 0.25],
            seed: 0,
            min_stratum: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    /// One entry per input frame, in input order.
    pub assignment: Vec<(String, Split)>,
    pub warnings: Vec<String>,
}

impl SplitAssignment {
    pub fn get(&self, frame_id: &str) -> Option<Split> {
        self.assignment
            .iter()
            .find(|(id, _)| id == frame_id)
            .map(|&(_, s)| s)
    }

    pub fn sizes(&self) -> [usize; 3] {
        let mut n = [0; 3];
        for (_, s) in &self.assignment {
            n[s.index()] += 1;
        }
        n
    }
}

/// Largest-remainder apportionment of `n` items over `ratios`; remainder
/// ties go to the earlier split.
pub fn apportion(n: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let exact = ratios.map(|r| r * n as f64);
    let mut quota = exact.map(|e| libm::floor(e) as usize);
    let mut left = n - quota.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - quota[a] as f64, exact[b] - quota[b] as f64);
        rb.partial_cmp(&ra).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &s in order.iter().cycle() {
        if left == 0 {
            break;
        }
        quota[s] += 1;
        left -= 1;
    }
    quota
}

/// Seeded perturb-and-polish rounds after the first swap search.
const RESTARTS: usize = 24;
/// Composition gap (as a fraction) below which no restarts are tried.
const SETTLED_GAP: f64 = 0.005;

/// Greedy deficit-balancing split, stratified by weather.
///
/// Within each stratum the frame counts follow [`apportion`]; frames are
/// visited by foreground pixels descending and each goes to the split (with
/// quota left) whose class-pixel deficit, weighted by the frame's own class
/// composition and normalized by the stratum totals, is largest. Exact
/// score ties are broken by a seeded draw. A swap pass then trades frames
/// between splits while that narrows the worst composition gap, followed by
/// a few seeded perturb-and-polish rounds that keep the best result.
pub fn stratified_split(frames: &[SplitFrame], cfg: &SplitConfig) -> Result<SplitAssignment> {
    if frames.is_empty() {
        return Err(Error::EmptyManifest);
    }
    let sum: f64 = cfg.ratios.iter().sum();
    if cfg.ratios.iter().any(|r| !(*r >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig("split ratios must be non-negative and sum to 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out: Vec<Option<Split>> = alloc::vec![None; frames.len()];
    let mut warnings = Vec::new();
    let fg = OutputClass::FOREGROUND.map(OutputClass::index);

    for weather in Weather::ALL {
        let mut members: Vec<usize> = (0..frames.len())
            .filter(|&i| frames[i].weather == weather)
            .collect();
        if members.is_empty() {
            continue;
        }
        members.sort_by(|&a, &b| {
            frames[b]
                .foreground()
                .cmp(&frames[a].foreground())
                .then_with(|| frames[a].frame_id.cmp(&frames[b].frame_id))
        });
        let mut quota = apportion(members.len(), &cfg.ratios);

        if members.len() < cfg.min_stratum {
            warnings.push(format!(
                "stratum {weather} has {} frames; assigned by ratio only",
                members.len()
            ));
            for &i in &members {
                let s = (0..3).find(|&s| quota[s] > 0).unwrap_or(0);
                quota[s] -= 1;
                out[i] = Some(Split::ALL[s]);
            }
            continue;
        }

        let mut totals = [0f64; 3];
        for &i in &members {
            for (k, &c) in fg.iter().enumerate() {
                totals[k] += frames[i].class_pixels[c] as f64;
            }
        }
        let stratum_n = members.len() as f64;
        let mut current = [[0f64; 3]; 3];
        for &i in &members {
            let f = &frames[i];
            let f_fg = f.foreground() as f64;
            let score = |s: usize| -> f64 {
                if f_fg > 0.0 {
                    (0..3)
                        .filter(|&k| totals[k] > 0.0)
                        .map(|k| {
                            let share = f.class_pixels[fg[k]] as f64 / f_fg;
                            share * (cfg.ratios[s] * totals[k] - current[s][k]) / totals[k]
                        })
                        .sum()
                } else {
                    quota[s] as f64 / stratum_n
                }
            };
            let open: Vec<usize> = (0..3).filter(|&s| quota[s] > 0).collect();
            let best = open
                .iter()
                .map(|&s| score(s))
                .fold(f64::NEG_INFINITY, f64::max);
            let tied: Vec<usize> = open
                .iter()
                .copied()
                .filter(|&s| (score(s) - best).abs() <= 1e-12)
                .collect();
            let s = if tied.len() == 1 {
                tied[0]
            } else {
                tied[(rng.next_u64() % tied.len() as u64) as usize]
            };
            quota[s] -= 1;
            for k in 0..3 {
                current[s][k] += f.class_pixels[fg[k]] as f64;
            }
            out[i] = Some(Split::ALL[s]);
        }

        let mut placed: Vec<(usize, usize)> = members
            .iter()
            .map(|&i| (i, out[i].map_or(0, Split::index)))
            .collect();
        let mut best = improve_by_swaps(frames, &mut placed, &mut current, &totals);
        for _ in 0..RESTARTS {
            if best.0 <= SETTLED_GAP {
                break;
            }
            let mut trial = placed.clone();
            let mut trial_px = current;
            for _ in 0..trial.len() / 3 {
                let a = (rng.next_u64() % trial.len() as u64) as usize;
                let b = (rng.next_u64() % trial.len() as u64) as usize;
                let ((i, si), (j, sj)) = (trial[a], trial[b]);
                if si == sj {
                    continue;
                }
                for (k, &c) in fg.iter().enumerate() {
                    let d = frames[j].class_pixels[c] as f64 - frames[i].class_pixels[c] as f64;
                    trial_px[si][k] += d;
                    trial_px[sj][k] -= d;
                }
                trial[a].1 = sj;
                trial[b].1 = si;
            }
            let o = improve_by_swaps(frames, &mut trial, &mut trial_px, &totals);
            if o < best {
                best = o;
                placed = trial;
                current = trial_px;
            }
        }
        for (i, s) in placed {
            out[i] = Some(Split::ALL[s]);
        }
    }

    Ok(SplitAssignment {
        assignment: frames
            .iter()
            .zip(out)
            .map(|(f, s)| (f.frame_id.clone(), s.unwrap_or(Split::Train)))
            .collect(),
        warnings,
    })
}

/// Swap passes over one stratum. Exchanging two frames between splits keeps
/// the frame counts; a swap is kept when it lowers the worst deviation of any
/// split's foreground composition from the stratum composition, with the
/// squared deviation sum as the secondary key.
fn improve_by_swaps(
    frames: &[SplitFrame],
    placed: &mut [(usize, usize)],
    current: &mut [[f64; 3]; 3],
    totals: &[f64; 3],
) -> (f64, f64) {
    const MAX_PASSES: usize = 64;
    let fg = OutputClass::FOREGROUND.map(OutputClass::index);
    let grand: f64 = totals.iter().sum();
    if grand <= 0.0 {
        return (0.0, 0.0);
    }
    let local = totals.map(|t| t / grand);
    let px = |i: usize| fg.map(|c| frames[i].class_pixels[c] as f64);
    let objective = |splits: &[[f64; 3]; 3]| {
        let (mut worst, mut sq) = (0.0f64, 0.0);
        for v in splits {
            let sum: f64 = v.iter().sum();
            for k in 0..3 {
                let share = if sum > 0.0 { v[k] / sum } else { 0.0 };
                let d = (share - local[k]).abs();
                worst = worst.max(d);
                sq += d * d;
            }
        }
        (worst, sq)
    };
    let mut best = objective(current);
    for _ in 0..MAX_PASSES {
        let mut improved = false;
        for a in 0..placed.len() {
            for b in a + 1..placed.len() {
                let ((i, si), (j, sj)) = (placed[a], placed[b]);
                if si == sj {
                    continue;
                }
                let (pi, pj) = (px(i), px(j));
                let mut trial = *current;
                for k in 0..3 {
                    trial[si][k] += pj[k] - pi[k];
                    trial[sj][k] += pi[k] - pj[k];
                }
                let o = objective(&trial);
                let better = o.0 < best.0 - 1e-12 || (o.0 <= best.0 + 1e-12 && o.1 < best.1 - 1e-15);
                if better {
                    *current = trial;
                    best = o;
                    placed[a].1 = sj;
                    placed[b].1 = si;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    best
}
