use std::f64::consts::PI;

use zrfl_core::features::{compute_mfcc, log_mel_energies, MelFilterbank};

const SR: u32 = 16_000;

fn tone(freq: f64, n: usize) -> Vec<f32> {
    (0..n).map(|i| (0.5 * (2.0 * PI * freq * i as f64 / f64::from(SR)).sin()) as f32).collect()
}

/// Log filterbank energies of one frame via a direct DFT and a filterbank built here.
fn direct(samples: &[f32], frame: usize) -> Vec<f64> {
    let (window, hop, nfft, nfilt) = (400usize, 160usize, 512usize, 26usize);
    let x: Vec<f64> = (0..window)
        .map(|i| {
            let n = frame * hop + i;
            let prev = if n == 0 { 0.0 } else { f64::from(samples[n - 1]) };
            let ham = 0.54 - 0.46 * (2.0 * PI * i as f64 / (window - 1) as f64).cos();
            (f64::from(samples[n]) - 0.97 * prev) * ham
        })
        .collect();
    let power: Vec<f64> = (0..=nfft / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, &v) in x.iter().enumerate() {
                let ang = -2.0 * PI * (k * n) as f64 / nfft as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            re * re + im * im
        })
        .collect();
    let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
    let hz = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let top = mel(f64::from(SR) / 2.0);
    let pts: Vec<f64> = (0..nfilt + 2).map(|i| hz(top * i as f64 / (nfilt + 1) as f64)).collect();
    (0..nfilt)
        .map(|m| {
            let (lo, c, hi) = (pts[m], pts[m + 1], pts[m + 2]);
            let e: f64 = power
                .iter()
                .enumerate()
                .map(|(k, p)| {
                    let f = k as f64 * f64::from(SR) / nfft as f64;
                    let w = if f > lo && f <= c {
                        (f - lo) / (c - lo)
                    } else if f > c && f < hi {
                        (hi - f) / (hi - c)
                    } else {
                        0.0
                    };
                    w * p
                })
                .sum();
            e.max(1e-10).ln()
        })
        .collect()
}

#[test]
fn tone_peaks_in_nearest_filter() {
    let samples = tone(1000.0, SR as usize);
    let energies = log_mel_energies(&samples, SR).unwrap();
    assert_eq!(energies.nrows(), 98);
    let centers = MelFilterbank::new(26, 512, SR).centers_hz();
    let nearest = (0..centers.len())
        .min_by(|&a, &b| (centers[a] - 1000.0).abs().total_cmp(&(centers[b] - 1000.0).abs()))
        .unwrap();
    for row in energies.rows() {
        let peak = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        assert_eq!(peak, nearest);
    }
}

#[test]
fn filterbank_energies_match_direct_dft() {
    let samples: Vec<f32> = tone(1000.0, 4000)
        .iter()
        .zip(tone(2730.0, 4000))
        .map(|(a, b)| a + 0.3 * b)
        .collect();
    let energies = log_mel_energies(&samples, SR).unwrap();
    assert_eq!(energies.nrows(), 23);
    for frame in [0, 7, 22] {
        for (got, want) in energies.row(frame).iter().zip(direct(&samples, frame)) {
            assert!((got - want).abs() < 1e-6 * want.abs().max(1.0), "frame {frame}: {got} vs {want}");
        }
    }
}

#[test]
fn one_second_gives_98_frames_of_13_ceps() {
    let seq = compute_mfcc("u", &tone(440.0, SR as usize), SR).unwrap();
    assert_eq!(seq.num_frames(), 98);
    assert_eq!(seq.dim(), 13);
}
