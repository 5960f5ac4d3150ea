use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{FeatureSequence, FRAME_RATE_HZ};
use crate::error::{Error, Result};

/// Framing and filterbank parameters for MFCC extraction.
#[derive(Clone, Debug, PartialEq)]
pub struct MfccConfig {
    pub window_secs: f64,
    pub hop_secs: f64,
    pub preemphasis: f64,
    pub num_filters: usize,
    pub num_ceps: usize,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            window_secs: 0.025,
            hop_secs: 0.010,
            preemphasis: 0.97,
            num_filters: 26,
            num_ceps: 13,
            log_floor: 1e-10,
        }
    }
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters equally spaced on the mel scale from 0 Hz to Nyquist.
#[derive(Clone, Debug)]
pub struct MelFilterbank {
    /// `(lower, center, upper)` edge frequencies in Hz.
    edges: Vec<(f64, f64, f64)>,
    /// `num_filters x (fft_size/2 + 1)` weights.
    weights: Array2<f64>,
}

impl MelFilterbank {
    pub fn new(num_filters: usize, fft_size: usize, sample_rate_hz: u32) -> Self {
        let sr = f64::from(sample_rate_hz);
        let max_mel = hz_to_mel(sr / 2.0);
        let points: Vec<f64> = (0..num_filters + 2)
            .map(|i| mel_to_hz(max_mel * i as f64 / (num_filters + 1) as f64))
            .collect();
        let edges: Vec<_> = points.windows(3).map(|w| (w[0], w[1], w[2])).collect();
        let bins = fft_size / 2 + 1;
        let mut weights = Array2::zeros((num_filters, bins));
        for (m, &(lo, c, hi)) in edges.iter().enumerate() {
            for k in 0..bins {
                let f = k as f64 * sr / fft_size as f64;
                let w = if f > lo && f <= c {
                    (f - lo) / (c - lo)
                } else if f > c && f < hi {
                    (hi - f) / (hi - c)
                } else {
                    0.0
                };
                weights[[m, k]] = w;
            }
        }
        MelFilterbank { edges, weights }
    }

    pub fn centers_hz(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.1).collect()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }
}

struct Analysis {
    window: usize,
    hop: usize,
    fft_size: usize,
    hamming: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    filterbank: MelFilterbank,
}

impl MfccConfig {
    pub fn window_samples(&self, sample_rate_hz: u32) -> usize {
        (self.window_secs * f64::from(sample_rate_hz)).round() as usize
    }

    pub fn hop_samples(&self, sample_rate_hz: u32) -> usize {
        (self.hop_secs * f64::from(sample_rate_hz)).round() as usize
    }

    /// `floor((N - W) / H) + 1`, or 0 when `N < W`.
    pub fn frame_count(&self, num_samples: usize, sample_rate_hz: u32) -> usize {
        let w = self.window_samples(sample_rate_hz);
        let h = self.hop_samples(sample_rate_hz);
        if num_samples < w {
            0
        } else {
            (num_samples - w) / h + 1
        }
    }

    fn analysis(&self, samples: &[f32], sample_rate_hz: u32) -> Result<Analysis> {
        if sample_rate_hz < 8000 {
            return Err(Error::invalid(format!(
                "sample rate {sample_rate_hz} Hz is below 8000 Hz"
            )));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("audio contains non-finite samples"));
        }
        let window = self.window_samples(sample_rate_hz);
        let hop = self.hop_samples(sample_rate_hz);
        if samples.len() < window {
            return Err(Error::UtteranceTooShort {
                samples: samples.len(),
                window,
            });
        }
        let fft_size = window.next_power_of_two();
        let hamming = (0..window)
            .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (window - 1) as f64).cos())
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(fft_size);
        let filterbank = MelFilterbank::new(self.num_filters, fft_size, sample_rate_hz);
        Ok(Analysis {
            window,
            hop,
            fft_size,
            hamming,
            fft,
            filterbank,
        })
    }

    /// Log mel filterbank energies, one row per frame, before the DCT.
    pub fn log_mel_energies(&self, samples: &[f32], sample_rate_hz: u32) -> Result<Array2<f64>> {
        let an = self.analysis(samples, sample_rate_hz)?;
        let emphasized: Vec<f64> = samples
            .iter()
            .enumerate()
            .map(|(n, &x)| {
                let prev = if n == 0 { 0.0 } else { f64::from(samples[n - 1]) };
                f64::from(x) - self.preemphasis * prev
            })
            .collect();
        let frames = (emphasized.len() - an.window) / an.hop + 1;
        let bins = an.fft_size / 2 + 1;
        let mut out = Array2::zeros((frames, self.num_filters));
        let mut buf = vec![Complex::new(0.0, 0.0); an.fft_size];
        let mut power = vec![0.0; bins];
        for t in 0..frames {
            let start = t * an.hop;
            for (i, slot) in buf.iter_mut().enumerate() {
                *slot = if i < an.window {
                    Complex::new(emphasized[start + i] * an.hamming[i], 0.0)
                } else {
                    Complex::new(0.0, 0.0)
                };
            }
            an.fft.process(&mut buf);
            for (p, c) in power.iter_mut().zip(&buf) {
                *p = c.norm_sqr();
            }
            for m in 0..self.num_filters {
                let energy: f64 = an
                    .filterbank
                    .weights
                    .row(m)
                    .iter()
                    .zip(&power)
                    .map(|(w, p)| w * p)
                    .sum();
                out[[t, m]] = energy.max(self.log_floor).ln();
            }
        }
        Ok(out)
    }

    pub fn compute(&self, utterance_id: &str, samples: &[f32], sample_rate_hz: u32) -> Result<FeatureSequence> {
        let log_energies = self.log_mel_energies(samples, sample_rate_hz)?;
        let n = self.num_filters;
        let dct = dct_matrix(self.num_ceps, n);
        let ceps = log_energies.dot(&dct.t());
        FeatureSequence::new(utterance_id, ceps.mapv(|v| v as f32), FRAME_RATE_HZ)
    }
}

/// Orthonormal DCT-II basis, `num_ceps x n`.
fn dct_matrix(num_ceps: usize, n: usize) -> Array2<f64> {
    Array2::from_shape_fn((num_ceps, n), |(k, i)| {
        let scale = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        scale * (PI * k as f64 * (i as f64 + 0.5) / n as f64).cos()
    })
}

/// 13 MFCCs (c0..c12) per 10 ms frame with the default configuration.
pub fn compute_mfcc(utterance_id: &str, samples: &[f32], sample_rate_hz: u32) -> Result<FeatureSequence> {
    MfccConfig::default().compute(utterance_id, samples, sample_rate_hz)
}

/// Pre-DCT log mel energies with the default configuration.
pub fn log_mel_energies(samples: &[f32], sample_rate_hz: u32) -> Result<Array2<f64>> {
    MfccConfig::default().log_mel_energies(samples, sample_rate_hz)
}
