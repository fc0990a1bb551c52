//! Per-node FFT frequency extraction, the baseline DMD is compared against.

use faer::c64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dmd::{LocalSpectrum, SpectralMode};
use crate::error::{Error, Result};
use crate::wave::lambda_from_omega;

pub const DEFAULT_THRESHOLD: f64 = 0.01;

/// Which bins set the unit magnitude before thresholding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Largest bin overall, DC included.
    Global,
    /// Largest bin outside the DC region (bins 0 and 1).
    #[default]
    ExcludeDc,
}

/// First bin that is not part of the constant mode's support.
pub const FIRST_OSCILLATORY_BIN: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FftBin {
    pub omega: f64,
    /// Normalized magnitude.
    pub magnitude: f64,
    pub coefficient: c64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FftSpectrum {
    pub node: usize,
    pub padded_len: usize,
    /// Bins `0..=padded_len / 2`.
    pub bins: Vec<FftBin>,
    /// Indices into `bins` at or above the threshold, ascending.
    pub retained: Vec<usize>,
}

/// Zero-pads to the next power of two and returns the full unnormalized DFT.
pub fn padded_dft(trace: &[f64]) -> Result<Vec<c64>> {
    if trace.is_empty() {
        return Err(Error::InvalidParameter("empty trace".into()));
    }
    let p = trace.len().next_power_of_two();
    let mut buf: Vec<c64> = trace.iter().map(|&x| c64::new(x, 0.0)).collect();
    buf.resize(p, c64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(p).process(&mut buf);
    Ok(buf)
}

pub fn fft_local_spectrum(node: usize, trace: &[f64], threshold: f64, norm: Normalization) -> Result<FftSpectrum> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidParameter(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    let dft = padded_dft(trace)?;
    let p = dft.len();
    let half = &dft[..=p / 2];
    let global = half.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if global == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let scale = match norm {
        Normalization::Global => global,
        Normalization::ExcludeDc => {
            let m = half.iter().skip(FIRST_OSCILLATORY_BIN).map(|z| z.norm()).fold(0.0, f64::max);
            if m > 0.0 { m } else { global }
        }
    };
    let bins: Vec<FftBin> = half
        .iter()
        .enumerate()
        .map(|(k, &z)| FftBin {
            omega: 2.0 * std::f64::consts::PI * k as f64 / p as f64,
            magnitude: z.norm() / scale,
            coefficient: z,
        })
        .collect();
    let retained = (0..bins.len()).filter(|&k| bins[k].magnitude >= threshold).collect();
    Ok(FftSpectrum { node, padded_len: p, bins, retained })
}

impl FftSpectrum {
    /// Retained oscillatory bins that are local maxima of the magnitude,
    /// ascending in frequency.
    pub fn peaks(&self) -> Vec<usize> {
        let mag = |k: usize| self.bins[k].magnitude;
        self.retained
            .iter()
            .copied()
            .filter(|&k| k >= FIRST_OSCILLATORY_BIN)
            .filter(|&k| mag(k) >= mag(k - 1) && (k + 1 >= self.bins.len() || mag(k) >= mag(k + 1)))
            .collect()
    }

    /// The node's view as a [`LocalSpectrum`]: the DC bin followed by one
    /// mode per peak.
    pub fn to_local_spectrum(&self, c: f64) -> LocalSpectrum {
        let scale = 1.0 / self.padded_len as f64;
        let mode = |k: usize| {
            let b = self.bins[k];
            SpectralMode { omega: b.omega, lambda: lambda_from_omega(b.omega, c), amplitude: b.coefficient * scale }
        };
        let modes = std::iter::once(0).chain(self.peaks()).map(mode).collect();
        LocalSpectrum { node: self.node, method: "fft", modes }
    }
}

/// Lowest-frequency peak outside the DC region.
pub fn fft_omega2_estimate(spectrum: &FftSpectrum) -> Result<f64> {
    spectrum.peaks().first().map(|&k| spectrum.bins[k].omega).ok_or(Error::NoOscillatoryBin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn naive_dft(x: &[f64]) -> Vec<c64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(t, &v)| c64::from_polar(v, -2.0 * PI * (k * t) as f64 / n as f64))
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft() {
        let x: Vec<f64> = (0..37).map(|t| (0.3 * t as f64).sin() + 0.1 * t as f64).collect();
        let fast = padded_dft(&x).unwrap();
        assert_eq!(fast.len(), 64);
        let mut padded = x.clone();
        padded.resize(64, 0.0);
        for (a, b) in fast.iter().zip(naive_dft(&padded)) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn parseval() {
        let x: Vec<f64> = (0..100).map(|t| ((t * 7919) % 31) as f64 / 31.0 - 0.4).collect();
        let dft = padded_dft(&x).unwrap();
        let lhs: f64 = dft.iter().map(|z| z.norm_sqr()).sum();
        let rhs = dft.len() as f64 * x.iter().map(|v| v * v).sum::<f64>();
        assert!((lhs - rhs).abs() <= 1e-9 * rhs);
    }

    #[test]
    fn on_grid_tone() {
        let x: Vec<f64> = (0..64).map(|t| (2.0 * PI * 8.0 * t as f64 / 64.0).cos()).collect();
        for norm in [Normalization::Global, Normalization::ExcludeDc] {
            let s = fft_local_spectrum(0, &x, DEFAULT_THRESHOLD, norm).unwrap();
            let positive: Vec<usize> = s.retained.iter().copied().filter(|&k| k > 0).collect();
            assert_eq!(positive, vec![8]);
            assert_eq!(s.bins[8].omega, PI / 4.0);
            assert_eq!(fft_omega2_estimate(&s).unwrap(), PI / 4.0);
        }
    }

    #[test]
    fn off_grid_tone_leaks() {
        let x: Vec<f64> = (0..64).map(|t| (1.0 * t as f64).cos()).collect();
        let s = fft_local_spectrum(0, &x, DEFAULT_THRESHOLD, Normalization::Global).unwrap();
        let near: Vec<usize> = s.retained.iter().copied().filter(|&k| (s.bins[k].omega - 1.0).abs() < 0.5).collect();
        assert!(near.len() > 1);
        let w = fft_omega2_estimate(&s).unwrap();
        let k = (w * 64.0 / (2.0 * PI)).round();
        assert_eq!(w, 2.0 * PI * k / 64.0);
        assert!((w - 1.0).abs() <= PI / 64.0);
    }

    #[test]
    fn errors() {
        assert_eq!(fft_local_spectrum(0, &[0.0; 16], 0.01, Normalization::Global).unwrap_err(), Error::ZeroSignal);
        assert!(fft_local_spectrum(0, &[], 0.01, Normalization::Global).is_err());
        assert!(fft_local_spectrum(0, &[1.0; 4], 1.5, Normalization::Global).is_err());
        let s = fft_local_spectrum(0, &[1.0; 16], 0.01, Normalization::Global).unwrap();
        assert_eq!(fft_omega2_estimate(&s).unwrap_err(), Error::NoOscillatoryBin);
    }

    #[test]
    fn dc_can_exceed_unit_under_exclude_dc() {
        let x: Vec<f64> = (0..64).map(|t| 5.0 + 0.1 * (2.0 * PI * 4.0 * t as f64 / 64.0).cos()).collect();
        let s = fft_local_spectrum(0, &x, DEFAULT_THRESHOLD, Normalization::ExcludeDc).unwrap();
        assert!((s.bins[4].magnitude - 1.0).abs() < 1e-12);
        assert!(s.bins[0].magnitude > 1.0);
        let g = fft_local_spectrum(0, &x, DEFAULT_THRESHOLD, Normalization::Global).unwrap();
        assert_eq!(g.bins.iter().map(|b| b.magnitude).fold(0.0, f64::max), 1.0);
    }

    #[test]
    fn local_spectrum_view() {
        let x: Vec<f64> = (0..64).map(|t| 1.0 - 0.5 * (2.0 * PI * 8.0 * t as f64 / 64.0).cos()).collect();
        let s = fft_local_spectrum(4, &x, DEFAULT_THRESHOLD, Normalization::ExcludeDc).unwrap();
        let ls = s.to_local_spectrum(1.0);
        assert_eq!(ls.method, "fft");
        assert_eq!(ls.modes.len(), 2);
        assert!(ls.modes[1].amplitude.re < 0.0);
        assert_eq!(ls.to_json_value()["node"], 4);
    }
}
