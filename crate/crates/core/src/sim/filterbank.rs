//! Zero-phase Butterworth band-pass filter banks.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sub-band `b` (from 1) weight `b^-1.25 + 0.25`.
pub fn default_band_weight(b: usize) -> f64 {
    (b as f64).powf(-1.25) + 0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBankSpec {
    /// Nominal `(low, high)` edges in Hz.
    pub bands: Vec<(f64, f64)>,
    /// Combination weight per band.
    pub weights: Vec<f64>,
    /// The high-pass corner sits this far below each low edge and the
    /// low-pass corner this far above each high edge, so a component at
    /// the nominal edge passes nearly unattenuated.
    pub edge_margin_hz: f64,
}

impl FilterBankSpec {
    pub fn new(bands: Vec<(f64, f64)>, weights: Vec<f64>) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::Config { key: "bands".into(), reason: "at least one band required".into() });
        }
        if weights.len() != bands.len() {
            return Err(Error::DimensionMismatch { expected: bands.len(), found: weights.len() });
        }
        Ok(Self { bands, weights, edge_margin_hz: 2.0 })
    }

    /// Bands `(8b, 90)` for `b = 1..=n` with the default weights.
    pub fn standard(n: usize) -> Result<Self> {
        let bands = (1..=n).map(|b| (8.0 * b as f64, 90.0)).collect();
        Self::new(bands, (1..=n).map(default_band_weight).collect())
    }

    /// Identity bank: one band, no filtering.
    pub fn passthrough() -> Self {
        Self { bands: Vec::new(), weights: vec![1.25], edge_margin_hz: 2.0 }
    }

    pub fn n_bands(&self) -> usize {
        self.bands.len().max(1)
    }

    pub fn is_passthrough(&self) -> bool {
        self.bands.is_empty()
    }

    fn filters(&self, sample_rate: f64) -> Result<Vec<Cascade>> {
        let nyquist = sample_rate / 2.0;
        self.bands
            .iter()
            .map(|&(low, high)| {
                let bad = |reason: &str| Error::InvalidBand { low, high, reason: reason.into() };
                if !(low > 0.0 && high > low) {
                    return Err(bad("need 0 < low < high"));
                }
                if high >= nyquist {
                    return Err(bad("high edge at or above Nyquist"));
                }
                let hp = low - self.edge_margin_hz;
                let lp = high + self.edge_margin_hz;
                if hp <= 0.0 {
                    return Err(bad("low edge minus margin is not positive"));
                }
                if lp >= nyquist {
                    return Err(bad("high edge plus margin reaches Nyquist"));
                }
                Ok(Cascade::bandpass4(hp, lp, sample_rate))
            })
            .collect()
    }
}

/// Second-order section in transposed direct form II, `a0 = 1`.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

// Pole-pair quality factors of a 4th-order Butterworth prototype.
const BUTTER4_Q: [f64; 2] = [0.541_196_100_146_197, 1.306_562_964_876_376_4];

impl Biquad {
    fn lowpass(fc: f64, fs: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * fc / fs;
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * q);
        let a0 = 1.0 + alpha;
        let b1 = (1.0 - c) / a0;
        Self { b: [b1 / 2.0, b1, b1 / 2.0], a: [-2.0 * c / a0, (1.0 - alpha) / a0] }
    }

    fn highpass(fc: f64, fs: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * fc / fs;
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * q);
        let a0 = 1.0 + alpha;
        let b1 = (1.0 + c) / a0;
        Self { b: [b1 / 2.0, -b1, b1 / 2.0], a: [-2.0 * c / a0, (1.0 - alpha) / a0] }
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Filters in place starting from the steady state for a constant input
    /// equal to `x[0]`.
    fn run(&self, x: &mut [f64]) {
        let Some(&x0) = x.first() else { return };
        let g = self.dc_gain();
        let y0 = g * x0;
        let mut z2 = self.b[2] * x0 - self.a[1] * y0;
        let mut z1 = y0 - self.b[0] * x0;
        for v in x.iter_mut() {
            let xi = *v;
            let y = self.b[0] * xi + z1;
            z1 = self.b[1] * xi - self.a[0] * y + z2;
            z2 = self.b[2] * xi - self.a[1] * y;
            *v = y;
        }
    }
}

#[derive(Debug, Clone)]
struct Cascade {
    sections: Vec<Biquad>,
    /// Reflection padding applied on each side before filtering.
    pad: usize,
}

impl Cascade {
    fn bandpass4(hp: f64, lp: f64, fs: f64) -> Self {
        let mut sections = Vec::with_capacity(4);
        for q in BUTTER4_Q {
            sections.push(Biquad::highpass(hp, fs, q));
        }
        for q in BUTTER4_Q {
            sections.push(Biquad::lowpass(lp, fs, q));
        }
        // roughly three periods of the high-pass corner
        let pad = ((3.0 * fs / hp).ceil() as usize).max(27);
        Self { sections, pad }
    }

    fn forward(&self, x: &mut [f64]) {
        for s in &self.sections {
            s.run(x);
        }
    }

    /// Forward-backward application with odd reflection padding.
    fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = self.pad.min(n - 1);
        let mut buf = Vec::with_capacity(n + 2 * pad);
        buf.extend((1..=pad).rev().map(|k| 2.0 * x[0] - x[k]));
        buf.extend_from_slice(x);
        buf.extend((1..=pad).map(|k| 2.0 * x[n - 1] - x[n - 1 - k]));
        self.forward(&mut buf);
        buf.reverse();
        self.forward(&mut buf);
        buf.reverse();
        buf[pad..pad + n].to_vec()
    }
}

/// One zero-phase band-passed copy of `x` (channels × samples) per band.
/// A passthrough bank returns `x` unchanged.
pub fn filter_bank_decompose(x: &[Vec<f64>], spec: &FilterBankSpec, sample_rate: f64) -> Result<Vec<Vec<Vec<f64>>>> {
    if spec.is_passthrough() {
        return Ok(vec![x.to_vec()]);
    }
    let filters = spec.filters(sample_rate)?;
    Ok(filters.iter().map(|f| x.iter().map(|ch| f.filtfilt(ch)).collect()).collect())
}

/// Validates `spec` against a sample rate without filtering anything.
pub fn check_filter_bank(spec: &FilterBankSpec, sample_rate: f64) -> Result<()> {
    if spec.weights.len() != spec.n_bands() {
        return Err(Error::DimensionMismatch { expected: spec.n_bands(), found: spec.weights.len() });
    }
    spec.filters(sample_rate).map(|_| ())
}
