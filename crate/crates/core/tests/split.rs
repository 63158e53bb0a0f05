//! Split quality on a skewed synthetic corpus, checked by recounting.

use boxmask_core::class::Weather;
use boxmask_core::dataset::{stratified_split, Split, SplitConfig, SplitFrame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 400 frames with Table-1-like weather mix and heavy-tailed class pixels.
fn corpus(seed: u64) -> Vec<SplitFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let strata = [
        (Weather::DayFair, 247),
        (Weather::DayRain, 41),
        (Weather::NightFair, 67),
        (Weather::NightRain, 17),
        (Weather::Snow, 28),
    ];
    let mut frames = Vec::new();
    for (weather, n) in strata {
        for i in 0..n {
            let vehicle = (rng.random::<f64>().powi(3) * 12_000.0) as u64;
            let sign = if rng.random_bool(0.6) { (rng.random::<f64>().powi(2) * 3_000.0) as u64 } else { 0 };
            let human = if rng.random_bool(0.3) { (rng.random::<f64>().powi(4) * 6_000.0) as u64 } else { 0 };
            let bg = 147_456 - vehicle - sign - human;
            frames.push(SplitFrame {
                frame_id: format!("{weather}_{i:04}"),
                weather,
                class_pixels: [bg, vehicle, sign, human],
            });
        }
    }
    frames
}

fn shares(frames: &[&SplitFrame]) -> [f64; 3] {
    let mut px = [0u64; 3];
    for f in frames {
        for (p, &c) in px.iter_mut().zip(&f.class_pixels[1..]) {
            *p += c;
        }
    }
    let total: u64 = px.iter().sum();
    px.map(|p| 100.0 * p as f64 / total as f64)
}

#[test]
fn split_matches_global_distribution() {
    for (corpus_seed, split_seed) in [(7, 11), (1, 2), (42, 0), (2024, 99)] {
        check(corpus_seed, split_seed);
    }
}

fn check(corpus_seed: u64, split_seed: u64) {
    let frames = corpus(corpus_seed);
    let cfg = SplitConfig { seed: split_seed, ..SplitConfig::default() };
    let a = stratified_split(&frames, &cfg).unwrap();
    assert_eq!(a.assignment.len(), frames.len());

    let global = shares(&frames.iter().collect::<Vec<_>>());
    for split in Split::ALL {
        let members: Vec<&SplitFrame> = frames
            .iter()
            .filter(|f| a.get(&f.frame_id) == Some(split))
            .collect();
        let s = shares(&members);
        for k in 0..3 {
            assert!((s[k] - global[k]).abs() <= 2.0, "{split:?} class {k}: {} vs {}", s[k], global[k]);
        }
    }
    for weather in Weather::ALL {
        let stratum: Vec<&SplitFrame> = frames.iter().filter(|f| f.weather == weather).collect();
        let n = stratum.len() as f64;
        let local = shares(&stratum);
        for (split, ratio) in Split::ALL.into_iter().zip(cfg.ratios) {
            let members: Vec<&SplitFrame> = stratum
                .iter()
                .copied()
                .filter(|f| a.get(&f.frame_id) == Some(split))
                .collect();
            assert!((members.len() as f64 - ratio * n).abs() <= 1.0);
            if stratum.len() >= 20 {
                let s = shares(&members);
                for k in 0..3 {
                    assert!(
                        (s[k] - local[k]).abs() <= 2.0,
                        "{weather} {split:?} class {k}: {} vs {}",
                        s[k],
                        local[k]
                    );
                }
            }
        }
    }
    let again = stratified_split(&frames, &cfg).unwrap();
    assert_eq!(again, a);
}

