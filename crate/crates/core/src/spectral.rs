//! Short-time Fourier analysis and log-power features.
//!
//! Analysis uses a periodic Hann window. The signal is padded with
//! `fft_size - hop` zeros at both ends so every input sample sits under at
//! least one nonzero window sample, and synthesis divides the overlap-added
//! windowed frames by the summed squared window. That makes `istft(stft(w))`
//! exact up to rounding for any hop that leaves no sample uncovered.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::audio_io::Waveform;
use crate::error::{Error, Result};

/// Default LPS floor on power.
pub const LPS_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// `0.5 - 0.5 cos(2 pi n / N)`, the DFT-even variant.
    PeriodicHann,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::PeriodicHann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    pub fft_size: usize,
    pub hop: usize,
    pub window: Window,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            fft_size: 512,
            hop: 256,
            window: Window::PeriodicHann,
        }
    }
}

impl StftConfig {
    pub fn new(fft_size: usize, hop: usize) -> Result<Self> {
        let cfg = Self {
            fft_size,
            hop,
            window: Window::PeriodicHann,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fft_size < 2 || !self.fft_size.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "fft_size {} is not a power of two >= 2",
                self.fft_size
            )));
        }
        if self.hop == 0 || self.hop > self.fft_size {
            return Err(Error::InvalidConfig(format!(
                "hop {} must be in 1..={}",
                self.hop, self.fft_size
            )));
        }
        if self.hop == self.fft_size {
            // the periodic Hann window is zero at n = 0, so that sample would
            // never be covered
            return Err(Error::InvalidConfig(
                "hop equal to fft_size leaves samples uncovered".into(),
            ));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn padding(&self) -> usize {
        self.fft_size - self.hop
    }

    /// Number of frames `stft` produces for a signal of `len` samples.
    pub fn num_frames(&self, len: usize) -> usize {
        (len + 2 * self.padding() - self.fft_size) / self.hop + 1
    }

    /// Frequency of a bin centre in Hz.
    pub fn bin_hz(&self, bin: usize, sample_rate_hz: u32) -> f64 {
        bin as f64 * sample_rate_hz as f64 / self.fft_size as f64
    }
}

/// A one-sided complex spectrogram, frames by bins.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    data: Array2<Complex64>,
    config: StftConfig,
    sample_rate_hz: u32,
    num_samples: usize,
}

impl ComplexSpectrogram {
    /// Builds a spectrogram from raw data; `num_samples` is the length of the
    /// signal it will resynthesize to.
    pub fn from_parts(
        data: Array2<Complex64>,
        config: StftConfig,
        sample_rate_hz: u32,
        num_samples: usize,
    ) -> Result<Self> {
        config.validate()?;
        let expected = (config.num_frames(num_samples), config.bins());
        if num_samples < config.fft_size || data.dim() != expected {
            return Err(Error::InconsistentShape(format!(
                "spectrogram is {:?}, {num_samples} samples need {expected:?}",
                data.dim()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InconsistentShape("non-finite entry".into()));
        }
        Ok(Self {
            data,
            config,
            sample_rate_hz,
            num_samples,
        })
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn config(&self) -> StftConfig {
        self.config
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn bins(&self) -> usize {
        self.data.ncols()
    }

    /// Same metadata, new data of identical shape.
    pub(crate) fn with_data(&self, data: Array2<Complex64>) -> Self {
        debug_assert_eq!(data.dim(), self.data.dim());
        Self {
            data,
            config: self.config,
            sample_rate_hz: self.sample_rate_hz,
            num_samples: self.num_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeSpectrogram {
    data: Array2<f64>,
    config: StftConfig,
    sample_rate_hz: u32,
}

impl MagnitudeSpectrogram {
    pub fn new(data: Array2<f64>, config: StftConfig, sample_rate_hz: u32) -> Result<Self> {
        if data.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::InconsistentShape(
                "magnitudes must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            data,
            config,
            sample_rate_hz,
        })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn config(&self) -> StftConfig {
        self.config
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn dim(&self) -> (usize, usize) {
        self.data.dim()
    }
}

/// Natural-log power features, `ln(max(|X|^2, epsilon))`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpsFeatures {
    data: Array2<f64>,
    epsilon: f64,
}

impl LpsFeatures {
    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dim(&self) -> (usize, usize) {
        self.data.dim()
    }

    /// Per-bin mean and variance normalization over frames, the form the
    /// network consumes.
    pub fn normalized(&self) -> Array2<f64> {
        normalize_features(&self.data)
    }
}

/// Standardizes each column (frequency bin) to zero mean and unit variance.
/// Columns with near-zero spread are only mean-centred.
pub fn normalize_features(x: &Array2<f64>) -> Array2<f64> {
    let frames = x.nrows().max(1) as f64;
    let mut out = x.clone();
    for mut col in out.columns_mut() {
        let mean = col.sum() / frames;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / frames;
        let scale = if var > 1e-12 { 1.0 / var.sqrt() } else { 1.0 };
        col.mapv_inplace(|v| (v - mean) * scale);
    }
    out
}

fn plan(fft_size: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(fft_size)
    } else {
        planner.plan_fft_forward(fft_size)
    }
}

pub fn stft(w: &Waveform, cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    cfg.validate()?;
    let len = w.len();
    if len < cfg.fft_size {
        return Err(Error::SignalTooShort {
            len,
            needed: cfg.fft_size,
        });
    }
    let pad = cfg.padding();
    let mut padded = vec![0.0; len + 2 * pad];
    padded[pad..pad + len].copy_from_slice(w.samples());

    let window = cfg.window.coefficients(cfg.fft_size);
    let frames = cfg.num_frames(len);
    let bins = cfg.bins();
    let fft = plan(cfg.fft_size, false);
    let mut buf = vec![Complex64::new(0.0, 0.0); cfg.fft_size];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut data = Array2::zeros((frames, bins));
    for t in 0..frames {
        let start = t * cfg.hop;
        for (n, z) in buf.iter_mut().enumerate() {
            *z = Complex64::new(padded[start + n] * window[n], 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (k, z) in data.row_mut(t).iter_mut().enumerate() {
            *z = buf[k];
        }
    }
    ComplexSpectrogram::from_parts(data, *cfg, w.sample_rate_hz(), len)
}

pub fn istft(spec: &ComplexSpectrogram) -> Result<Waveform> {
    let cfg = spec.config;
    let n_fft = cfg.fft_size;
    let frames = spec.frames();
    if spec.bins() != cfg.bins() || frames != cfg.num_frames(spec.num_samples) {
        return Err(Error::InconsistentShape(format!(
            "{}x{} spectrogram does not match config for {} samples",
            frames,
            spec.bins(),
            spec.num_samples
        )));
    }
    let pad = cfg.padding();
    let total = spec.num_samples + 2 * pad;
    let window = cfg.window.coefficients(n_fft);
    let ifft = plan(n_fft, true);
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    let mut scratch = vec![Complex64::new(0.0, 0.0); ifft.get_inplace_scratch_len()];
    let mut acc = vec![0.0; total];
    let mut norm = vec![0.0; total];
    let scale = 1.0 / n_fft as f64;
    for t in 0..frames {
        let row = spec.data.row(t);
        // rebuild the Hermitian-symmetric full spectrum
        for k in 0..n_fft {
            buf[k] = if k < row.len() {
                row[k]
            } else {
                row[n_fft - k].conj()
            };
        }
        // DC and Nyquist are real for a real signal
        buf[0].im = 0.0;
        buf[n_fft / 2].im = 0.0;
        ifft.process_with_scratch(&mut buf, &mut scratch);
        let start = t * cfg.hop;
        for n in 0..n_fft {
            acc[start + n] += buf[n].re * scale * window[n];
            norm[start + n] += window[n] * window[n];
        }
    }
    let samples = acc[pad..pad + spec.num_samples]
        .iter()
        .zip(&norm[pad..pad + spec.num_samples])
        .map(|(a, w)| if *w > 1e-12 { a / w } else { 0.0 })
        .collect();
    Waveform::new(samples, spec.sample_rate_hz)
}

pub fn magnitude(spec: &ComplexSpectrogram) -> MagnitudeSpectrogram {
    MagnitudeSpectrogram {
        data: spec.data.mapv(|z| z.norm()),
        config: spec.config,
        sample_rate_hz: spec.sample_rate_hz,
    }
}

/// `ln(max(mag^2, epsilon))` elementwise. Panics if `epsilon <= 0`.
pub fn lps(mag: &MagnitudeSpectrogram, epsilon: f64) -> LpsFeatures {
    assert!(epsilon > 0.0, "LPS floor must be positive");
    LpsFeatures {
        data: mag.data.mapv(|m| (m * m).max(epsilon).ln()),
        epsilon,
    }
}

/// Log magnitude `ln|X|` recovered from LPS, i.e. half the log power.
pub fn log_magnitude(features: &LpsFeatures) -> Array2<f64> {
    features.data.mapv(|v| 0.5 * v)
}

/// Convenience: STFT, magnitude and a pipeline-rate check in one call.
pub fn analyze(
    w: &Waveform,
    cfg: &StftConfig,
) -> Result<(ComplexSpectrogram, MagnitudeSpectrogram)> {
    w.require_pipeline_rate()?;
    let spec = stft(w, cfg)?;
    let mag = magnitude(&spec);
    Ok((spec, mag))
}

/// Elementwise squared magnitude, `S^2` or `N^2`.
pub fn power(mag: &MagnitudeSpectrogram) -> Array2<f64> {
    let mut out = Array2::zeros(mag.dim());
    Zip::from(&mut out)
        .and(&mag.data)
        .for_each(|o, &m| *o = m * m);
    out
}
