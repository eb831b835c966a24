//! Ratio masks and their warping.
//!
//! Three masks share one shape, `(S^2 / (S^2 + N^2))^e` with a different
//! exponent each:
//!
//! * the ideal ratio mask uses `beta`,
//! * the training target uses the training warp `alpha`,
//! * the test mask uses the testing warp `gamma`.
//!
//! A network trained on the `alpha` target is turned into a test mask by raising
//! its prediction to `gamma / alpha`; `gamma = 0` yields an all-ones mask and
//! leaves the noisy signal untouched.

use std::fs;
use std::path::Path;

use ndarray::{Array2, Zip};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{ComplexSpectrogram, MagnitudeSpectrogram};

/// Lower bound for every mask entry, keeping `ln(m)` finite.
///
/// The bound sits far below anything audible so that re-warping a floored
/// training target by `gamma / alpha < 1` cannot lift it above the value the
/// direct test-mask formula would produce by more than `1e-12`.
pub const MASK_FLOOR: f64 = 1e-100;

pub const DEFAULT_BETA: f64 = 0.5;

/// The three warping exponents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpSpec {
    pub beta: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl WarpSpec {
    pub fn new(alpha: f64, gamma: f64) -> Result<Self> {
        let spec = Self {
            beta: DEFAULT_BETA,
            alpha,
            gamma,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_exponent("beta", self.beta, false)?;
        check_exponent("alpha", self.alpha, false)?;
        check_exponent("gamma", self.gamma, true)
    }

    /// Exponent applied to a predicted training mask at test time.
    pub fn rewarp_exponent(&self) -> f64 {
        self.gamma / self.alpha
    }
}

fn check_exponent(name: &str, value: f64, allow_zero: bool) -> Result<()> {
    let ok = value.is_finite() && (value > 0.0 || (allow_zero && value == 0.0));
    if ok {
        Ok(())
    } else {
        let bound = if allow_zero { ">= 0" } else { "> 0" };
        Err(Error::InvalidWarp(format!(
            "{name} = {value}, must be finite and {bound}"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    Irm,
    TrainTarget,
    Test,
    Predicted,
}

/// A frames by bins gain matrix with entries in `[MASK_FLOOR, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    data: Array2<f64>,
    kind: MaskKind,
}

impl Mask {
    /// Wraps raw values, clamping them into `[MASK_FLOOR, 1]`. NaN entries are
    /// rejected.
    pub fn new(mut data: Array2<f64>, kind: MaskKind) -> Result<Self> {
        if data.iter().any(|v| v.is_nan()) {
            return Err(Error::ShapeMismatch("mask contains NaN".into()));
        }
        data.mapv_inplace(clamp_gain);
        Ok(Self { data, kind })
    }

    pub fn filled(frames: usize, bins: usize, value: f64, kind: MaskKind) -> Self {
        Self {
            data: Array2::from_elem((frames, bins), clamp_gain(value)),
            kind,
        }
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn kind(&self) -> MaskKind {
        self.kind
    }

    pub fn dim(&self) -> (usize, usize) {
        self.data.dim()
    }
}

fn clamp_gain(v: f64) -> f64 {
    v.clamp(MASK_FLOOR, 1.0)
}

fn check_same_shape(a: (usize, usize), b: (usize, usize), what: &str) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!("{what}: {a:?} vs {b:?}")));
    }
    Ok(())
}

/// `s^2 / (s^2 + n^2)` with `0 / 0 = 0`.
pub fn speech_ratio(s: f64, n: f64) -> f64 {
    let s2 = s * s;
    let total = s2 + n * n;
    if total > 0.0 {
        s2 / total
    } else {
        0.0
    }
}

/// `(S^2 / (S^2 + N^2))^exponent`, floored. `exponent` may be zero, in which
/// case every entry is 1.
fn ratio_mask(
    s: &MagnitudeSpectrogram,
    n: &MagnitudeSpectrogram,
    exponent: f64,
    kind: MaskKind,
) -> Result<Mask> {
    check_same_shape(s.dim(), n.dim(), "speech and noise spectrograms")?;
    let mut data = Array2::zeros(s.dim());
    Zip::from(&mut data)
        .and(s.data())
        .and(n.data())
        .for_each(|m, &sv, &nv| *m = clamp_gain(speech_ratio(sv, nv).powf(exponent)));
    Ok(Mask { data, kind })
}

/// Ideal ratio mask with scaling exponent `beta`.
pub fn oracle_irm(s: &MagnitudeSpectrogram, n: &MagnitudeSpectrogram, beta: f64) -> Result<Mask> {
    check_exponent("beta", beta, false)?;
    ratio_mask(s, n, beta, MaskKind::Irm)
}

/// The learning target for a network trained with warp `alpha`.
pub fn oracle_training_mask(
    s: &MagnitudeSpectrogram,
    n: &MagnitudeSpectrogram,
    alpha: f64,
) -> Result<Mask> {
    check_exponent("alpha", alpha, false)?;
    ratio_mask(s, n, alpha, MaskKind::TrainTarget)
}

/// The test mask computed directly from ground truth with warp `gamma`.
pub fn oracle_test_mask(
    s: &MagnitudeSpectrogram,
    n: &MagnitudeSpectrogram,
    gamma: f64,
) -> Result<Mask> {
    check_exponent("gamma", gamma, true)?;
    ratio_mask(s, n, gamma, MaskKind::Test)
}

/// Re-warps a (predicted or oracle) training mask into a test mask,
/// `m^(gamma / alpha)`.
pub fn warp_mask(m_tr: &Mask, alpha: f64, gamma: f64) -> Result<Mask> {
    check_exponent("alpha", alpha, false)?;
    check_exponent("gamma", gamma, true)?;
    let exponent = gamma / alpha;
    Ok(Mask {
        data: m_tr.data.mapv(|v| clamp_gain(v.powf(exponent))),
        kind: MaskKind::Test,
    })
}

/// Scales every noisy bin by its mask gain and keeps the noisy phase.
///
/// This is the log-domain update `ln|S| = ln|Y| + ln m` carried out as a
/// multiplication, so a unit mask returns the input bit for bit.
pub fn apply_mask(noisy: &ComplexSpectrogram, m: &Mask) -> Result<ComplexSpectrogram> {
    check_same_shape(noisy.data().dim(), m.dim(), "spectrogram and mask")?;
    let mut data = noisy.data().clone();
    Zip::from(&mut data)
        .and(&m.data)
        .for_each(|z, &g| *z *= g);
    Ok(noisy.with_data(data))
}

/// `ln|Y| + ln m`, the enhanced log magnitude.
pub fn enhanced_log_magnitude(noisy_log_mag: &Array2<f64>, m: &Mask) -> Result<Array2<f64>> {
    check_same_shape(noisy_log_mag.dim(), m.dim(), "log magnitude and mask")?;
    let mut out = noisy_log_mag.clone();
    Zip::from(&mut out)
        .and(&m.data)
        .for_each(|v, &g| *v += g.ln());
    Ok(out)
}

/// Rebuilds a complex spectrogram from log magnitudes and the phase of
/// `noisy`. Bins where `noisy` is exactly zero stay zero.
pub fn with_noisy_phase(
    noisy: &ComplexSpectrogram,
    log_mag: &Array2<f64>,
) -> Result<ComplexSpectrogram> {
    check_same_shape(
        noisy.data().dim(),
        log_mag.dim(),
        "spectrogram and log magnitude",
    )?;
    let mut data = noisy.data().clone();
    Zip::from(&mut data).and(log_mag).for_each(|z, &lm| {
        let r = z.norm();
        *z = if r > 0.0 {
            *z * (lm.exp() / r)
        } else {
            Complex64::new(0.0, 0.0)
        };
    });
    Ok(noisy.with_data(data))
}

const MASK_MAGIC: &[u8; 8] = b"WMMASK01";

/// Serializes a mask as `WMMASK01`, `u32` frames, `u32` bins, then row-major
/// little-endian `f32` values.
pub fn encode_mask(m: &Mask) -> Vec<u8> {
    let (frames, bins) = m.dim();
    let mut out = Vec::with_capacity(16 + 4 * frames * bins);
    out.extend_from_slice(MASK_MAGIC);
    out.extend_from_slice(&(frames as u32).to_le_bytes());
    out.extend_from_slice(&(bins as u32).to_le_bytes());
    for &v in m.data.iter() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Parses a mask dump. Values are clamped back into the mask range, so entries
/// below the `f32` range come back as `MASK_FLOOR`.
pub fn decode_mask(bytes: &[u8], kind: MaskKind) -> Result<Mask> {
    if bytes.len() < 16 || &bytes[..8] != MASK_MAGIC {
        return Err(Error::InconsistentShape("missing WMMASK01 header".into()));
    }
    let frames = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let bins = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if body.len() != 4 * frames * bins {
        return Err(Error::InconsistentShape(format!(
            "{frames}x{bins} mask needs {} bytes, found {}",
            4 * frames * bins,
            body.len()
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let data = Array2::from_shape_vec((frames, bins), values)
        .map_err(|e| Error::InconsistentShape(e.to_string()))?;
    Mask::new(data, kind)
}

pub fn write_mask(path: impl AsRef<Path>, m: &Mask) -> Result<()> {
    fs::write(path, encode_mask(m))?;
    Ok(())
}

pub fn read_mask(path: impl AsRef<Path>, kind: MaskKind) -> Result<Mask> {
    decode_mask(&fs::read(path)?, kind)
}
