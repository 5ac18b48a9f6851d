//! Welch periodogram: periodic Hann window, 50% overlap.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

pub(crate) struct Welch {
    len: usize,
    window: Vec<f64>,
    window_power: f64,
    fft: Arc<dyn Fft<f64>>,
}

impl Welch {
    pub(crate) fn new(len: usize) -> Self {
        assert!(len >= 8);
        // periodic Hann: its DFT is nonzero only at bins 0 and +-1
        let window: Vec<f64> = (0..len)
            .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos()))
            .collect();
        let window_power = window.iter().map(|w| w * w).sum();
        let fft = FftPlanner::new().plan_fft_forward(len);
        Self {
            len,
            window,
            window_power,
            fft,
        }
    }

    /// Number of 50%-overlapping segments that fit into `samples` points.
    pub(crate) fn segments(&self, samples: usize) -> usize {
        if samples < self.len {
            0
        } else {
            (samples - self.len) / (self.len / 2) + 1
        }
    }

    /// First reported bin. Bins 0 and 1 overlap the window's own DFT and
    /// depend on the subtracted mean.
    pub(crate) const FIRST_BIN: usize = 2;

    /// Angular frequencies of the reported bins.
    pub(crate) fn frequencies(&self, dt: f64) -> Vec<f64> {
        (Self::FIRST_BIN..=self.len / 2)
            .map(|j| 2.0 * std::f64::consts::PI * j as f64 / (self.len as f64 * dt))
            .collect()
    }

    /// Segment-averaged two-sided density `dt / sum(w^2) |FFT(w x)|^2` for
    /// the reported bins. `x` should already be centred.
    pub(crate) fn average(&self, x: &[f64], dt: f64) -> Vec<f64> {
        let segments = self.segments(x.len());
        let bins = self.len / 2 + 1 - Self::FIRST_BIN;
        let mut acc = vec![0.0; bins];
        if segments == 0 {
            return acc;
        }
        let mut buf = vec![Complex::new(0.0, 0.0); self.len];
        let scale = dt / self.window_power;
        for s in 0..segments {
            let start = s * (self.len / 2);
            for (b, (v, w)) in buf.iter_mut().zip(x[start..start + self.len].iter().zip(&self.window)) {
                *b = Complex::new(v * w, 0.0);
            }
            self.fft.process(&mut buf);
            for (a, c) in acc.iter_mut().zip(&buf[Self::FIRST_BIN..=self.len / 2]) {
                *a += c.norm_sqr() * scale;
            }
        }
        acc.iter_mut().for_each(|a| *a /= segments as f64);
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn white_noise_density_is_flat() {
        // Parseval: unit-variance white samples have two-sided density dt
        let dt = 0.5;
        let w = Welch::new(64);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..64 * 400)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let p = w.average(&x, dt);
        let mean = p.iter().sum::<f64>() / p.len() as f64;
        assert!((mean / dt - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn constant_offset_does_not_reach_reported_bins() {
        let w = Welch::new(32);
        let x: Vec<f64> = (0..320).map(|i| (i as f64 * 0.7).sin()).collect();
        let shifted: Vec<f64> = x.iter().map(|v| v + 3.0).collect();
        let a = w.average(&x, 1.0);
        let b = w.average(&shifted, 1.0);
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-9 * (1.0 + u.abs()));
        }
    }

    #[test]
    fn segment_count_with_overlap() {
        let w = Welch::new(16);
        assert_eq!(w.segments(15), 0);
        assert_eq!(w.segments(16), 1);
        assert_eq!(w.segments(24), 2);
        assert_eq!(w.segments(160), 19);
        assert_eq!(w.frequencies(1.0).len(), 16 / 2 + 1 - Welch::FIRST_BIN);
    }
}
