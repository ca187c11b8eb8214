use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flicker frequencies and phases, one pair per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusTable {
    frequencies: Vec<f64>,
    phases: Vec<f64>,
}

impl StimulusTable {
    pub fn new(frequencies: Vec<f64>, phases: Vec<f64>) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(Error::Config { key: "frequencies".into(), reason: "empty stimulus table".into() });
        }
        if frequencies.len() != phases.len() {
            return Err(Error::DimensionMismatch { expected: frequencies.len(), found: phases.len() });
        }
        if let Some(f) = frequencies.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
            return Err(Error::Config { key: "frequencies".into(), reason: format!("{f} Hz is not positive") });
        }
        Ok(Self { frequencies, phases })
    }

    /// `n` targets on the speller grid: 8 Hz upward in 0.2 Hz steps, phase
    /// advancing by π/2 per target.
    pub fn grid(n: usize) -> Result<Self> {
        let frequencies = (0..n).map(|k| 8.0 + 0.2 * k as f64).collect();
        let phases = (0..n).map(|k| (k as f64 * 0.5 * PI).rem_euclid(2.0 * PI)).collect();
        Self::new(frequencies, phases)
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_channels: usize,
    pub n_trials: usize,
    /// Analysis window after the latency, in seconds.
    pub window_s: f64,
    pub sample_rate: f64,
    pub snr_db: f64,
    pub harmonics: usize,
    /// Delay between stimulus onset and response onset.
    pub latency_s: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_channels: 4,
            n_trials: 6,
            window_s: 0.5,
            sample_rate: 250.0,
            snr_db: 0.0,
            harmonics: 3,
            latency_s: 0.13,
            seed: 0,
        }
    }
}

/// Multichannel trials indexed by `(class, trial, channel, sample)`.
///
/// Each trial holds `latency + window` seconds of samples; the first
/// `latency_samples()` precede the response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialDataset {
    pub sample_rate: f64,
    pub window_s: f64,
    pub latency_s: f64,
    pub stimuli: StimulusTable,
    pub n_classes: usize,
    pub n_trials: usize,
    pub n_channels: usize,
    pub n_samples: usize,
    /// Row-major over `(class, trial, channel, sample)`.
    pub data: Vec<f64>,
}

impl TrialDataset {
    pub fn new(
        stimuli: StimulusTable,
        n_trials: usize,
        n_channels: usize,
        sample_rate: f64,
        window_s: f64,
        latency_s: f64,
        data: Vec<f64>,
    ) -> Result<Self> {
        let n_classes = stimuli.len();
        let n_samples = (((latency_s + window_s) * sample_rate).round()) as usize;
        let expected = n_classes * n_trials * n_channels * n_samples;
        if data.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: data.len() });
        }
        let ds = Self { sample_rate, window_s, latency_s, stimuli, n_classes, n_trials, n_channels, n_samples, data };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        if self.n_classes != self.stimuli.len() {
            return Err(Error::DimensionMismatch { expected: self.stimuli.len(), found: self.n_classes });
        }
        let expected = self.n_classes * self.n_trials * self.n_channels * self.n_samples;
        if self.data.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: self.data.len() });
        }
        if self.latency_samples() >= self.n_samples {
            return Err(Error::Config { key: "latency_s".into(), reason: "latency leaves no samples".into() });
        }
        if !(self.sample_rate > 0.0) || self.n_channels == 0 || self.n_trials == 0 {
            return Err(Error::Config { key: "dataset".into(), reason: "empty dimensions".into() });
        }
        Ok(())
    }

    pub fn latency_samples(&self) -> usize {
        (self.latency_s * self.sample_rate).round() as usize
    }

    /// Samples of one channel of one trial.
    pub fn channel(&self, class: usize, trial: usize, channel: usize) -> &[f64] {
        let start = ((class * self.n_trials + trial) * self.n_channels + channel) * self.n_samples;
        &self.data[start..start + self.n_samples]
    }

    /// One trial as `n_channels` rows of `n_samples`.
    pub fn trial(&self, class: usize, trial: usize) -> Vec<Vec<f64>> {
        (0..self.n_channels).map(|c| self.channel(class, trial, c).to_vec()).collect()
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer(w, self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        let ds: Self = serde_json::from_reader(r).map_err(|e| Error::Io(e.to_string()))?;
        ds.validate()?;
        Ok(ds)
    }
}

/// Synthetic SSVEP trials from `x_j(t) = a_j s(t) + b n_j(t)` with
/// `s(t) = Σ_k (1/k) sin(2π k f (t - L) + k φ)` after the latency `L` and
/// zero before it.
///
/// The mixing vector `a` is drawn once per dataset; the noise is white and
/// independent per channel, scaled so that the mean per-channel signal
/// power over noise power equals `snr_db`.
pub fn synth_ssvep(stimuli: &StimulusTable, cfg: &SynthConfig) -> Result<TrialDataset> {
    if cfg.n_channels == 0 || cfg.n_trials == 0 || cfg.harmonics == 0 {
        return Err(Error::Config { key: "synth".into(), reason: "channels, trials and harmonics must be positive".into() });
    }
    if !(cfg.window_s > 0.0 && cfg.sample_rate > 0.0 && cfg.latency_s >= 0.0 && cfg.snr_db.is_finite()) {
        return Err(Error::Config { key: "synth".into(), reason: "window and sample rate must be positive".into() });
    }
    let nyquist = cfg.sample_rate / 2.0;
    for &f in stimuli.frequencies() {
        if cfg.harmonics as f64 * f >= nyquist {
            return Err(Error::Nyquist { frequency: f, harmonic: cfg.harmonics, nyquist });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let mixing: Vec<f64> = (0..cfg.n_channels).map(|_| normal()).collect();
    let source_power: f64 = (1..=cfg.harmonics).map(|k| 0.5 / (k * k) as f64).sum();
    let mean_gain = mixing.iter().map(|a| a * a).sum::<f64>() / cfg.n_channels as f64;
    let noise_sd = (mean_gain * source_power / 10f64.powf(cfg.snr_db / 10.0)).sqrt();

    let n_samples = ((cfg.latency_s + cfg.window_s) * cfg.sample_rate).round() as usize;
    let onset = (cfg.latency_s * cfg.sample_rate).round() as usize;
    let mut data = Vec::with_capacity(stimuli.len() * cfg.n_trials * cfg.n_channels * n_samples);
    for (&f, &phi) in stimuli.frequencies().iter().zip(stimuli.phases()) {
        let source: Vec<f64> = (0..n_samples)
            .map(|t| {
                if t < onset {
                    return 0.0;
                }
                let tt = (t - onset) as f64 / cfg.sample_rate;
                (1..=cfg.harmonics)
                    .map(|k| {
                        let k = k as f64;
                        (2.0 * PI * k * f * tt + k * phi).sin() / k
                    })
                    .sum()
            })
            .collect();
        for _ in 0..cfg.n_trials {
            for &a in &mixing {
                data.extend(source.iter().map(|&s| a * s + noise_sd * normal()));
            }
        }
    }
    TrialDataset::new(stimuli.clone(), cfg.n_trials, cfg.n_channels, cfg.sample_rate, cfg.window_s, cfg.latency_s, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_table() {
        let t = StimulusTable::grid(40).unwrap();
        assert_eq!(t.len(), 40);
        assert!((t.frequencies()[39] - 15.8).abs() < 1e-12);
        assert!((t.phases()[3] - 1.5 * PI).abs() < 1e-12);
        assert!(t.phases()[4].abs() < 1e-12);
        assert!(StimulusTable::new(vec![8.0, -1.0], vec![0.0, 0.0]).is_err());
        assert!(StimulusTable::new(vec![8.0], vec![0.0, 0.0]).is_err());
        assert!(StimulusTable::new(vec![], vec![]).is_err());
    }

    #[test]
    fn generator_shape_and_determinism() {
        let t = StimulusTable::grid(3).unwrap();
        let cfg = SynthConfig { seed: 5, ..Default::default() };
        let a = synth_ssvep(&t, &cfg).unwrap();
        let b = synth_ssvep(&t, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_samples, 158);
        assert_eq!(a.latency_samples(), 33);
        assert_eq!(a.data.len(), 3 * 6 * 4 * 158);
        let c = synth_ssvep(&t, &SynthConfig { seed: 6, ..cfg }).unwrap();
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn generator_is_silent_before_latency_without_noise() {
        let t = StimulusTable::grid(2).unwrap();
        let cfg = SynthConfig { snr_db: 300.0, ..Default::default() };
        let d = synth_ssvep(&t, &cfg).unwrap();
        let x = d.channel(1, 0, 0);
        assert!(x[..d.latency_samples()].iter().all(|v| v.abs() < 1e-12));
        assert!(x[d.latency_samples()..].iter().any(|v| v.abs() > 1e-3));
    }

    #[test]
    fn generator_hits_requested_snr() {
        let t = StimulusTable::grid(1).unwrap();
        let cfg = SynthConfig { snr_db: 0.0, latency_s: 0.0, window_s: 4.0, n_trials: 40, ..Default::default() };
        let noisy = synth_ssvep(&t, &cfg).unwrap();
        let clean = synth_ssvep(&t, &SynthConfig { snr_db: 300.0, ..cfg.clone() }).unwrap();
        let sig: f64 = clean.data.iter().map(|x| x * x).sum();
        let noise: f64 = noisy.data.iter().zip(&clean.data).map(|(a, b)| (a - b) * (a - b)).sum();
        let snr = 10.0 * (sig / noise).log10();
        assert!(snr.abs() < 0.2, "{snr}");
    }

    #[test]
    fn nyquist_is_enforced() {
        let t = StimulusTable::grid(40).unwrap();
        let cfg = SynthConfig { sample_rate: 40.0, harmonics: 2, ..Default::default() };
        assert!(matches!(synth_ssvep(&t, &cfg), Err(Error::Nyquist { .. })));
        assert!(synth_ssvep(&t, &SynthConfig { harmonics: 0, ..Default::default() }).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let t = StimulusTable::grid(2).unwrap();
        let d = synth_ssvep(&t, &SynthConfig { n_trials: 2, window_s: 0.1, ..Default::default() }).unwrap();
        let mut buf = Vec::new();
        d.write_json(&mut buf).unwrap();
        assert_eq!(TrialDataset::read_json(buf.as_slice()).unwrap(), d);
        let mut bad = d.clone();
        bad.data.pop();
        let mut buf = Vec::new();
        bad.write_json(&mut buf).unwrap();
        assert!(TrialDataset::read_json(buf.as_slice()).is_err());
    }
}
