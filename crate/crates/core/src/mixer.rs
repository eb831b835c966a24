//! Additive mixing at an exact SNR and a small synthetic corpus.
//!
//! The corpus generators are stand-ins for real speech and noise recordings:
//! harmonic complexes with syllable-rate envelopes and gaps for "speech", and
//! white, pink or babble-like noise. Every generator is a pure function of its
//! seed.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

use crate::audio_io::{write_wav, Waveform, SAMPLE_RATE_HZ};
use crate::error::{Error, Result};

const PEAK: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseOffsetPolicy {
    /// Start reading the noise at a seed-dependent offset.
    #[default]
    Random,
    /// Always start at sample 0.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixSpec {
    pub snr_db: f64,
    pub seed: u64,
    pub noise_offset_policy: NoiseOffsetPolicy,
}

impl MixSpec {
    pub fn new(snr_db: f64, seed: u64) -> Self {
        Self {
            snr_db,
            seed,
            noise_offset_policy: NoiseOffsetPolicy::Random,
        }
    }
}

/// The result of mixing: `noisy = clean + scaled_noise`.
#[derive(Debug, Clone)]
pub struct Mixture {
    pub noisy: Waveform,
    pub scaled_noise: Waveform,
}

/// `10 log10(E_clean / E_noise)` over whole clips.
pub fn measured_snr_db(clean: &Waveform, noise: &Waveform) -> f64 {
    10.0 * (clean.energy() / noise.energy()).log10()
}

/// Loops or truncates `noise` to the clean length, scales it to `spec.snr_db`
/// and adds it to `clean`.
pub fn mix_at_snr(clean: &Waveform, noise: &Waveform, spec: &MixSpec) -> Result<Mixture> {
    if clean.sample_rate_hz() != noise.sample_rate_hz() {
        return Err(Error::RateMismatch(
            clean.sample_rate_hz(),
            noise.sample_rate_hz(),
        ));
    }
    if !spec.snr_db.is_finite() {
        return Err(Error::InvalidWaveform(format!(
            "SNR {} dB is not finite",
            spec.snr_db
        )));
    }
    let clean_energy = clean.energy();
    if clean_energy <= 0.0 {
        return Err(Error::ZeroEnergyInput("clean"));
    }
    let src = noise.samples();
    let offset = match spec.noise_offset_policy {
        NoiseOffsetPolicy::Fixed => 0,
        NoiseOffsetPolicy::Random => ChaCha8Rng::seed_from_u64(spec.seed).gen_range(0..src.len()),
    };
    let segment: Vec<f64> = (0..clean.len())
        .map(|i| src[(offset + i) % src.len()])
        .collect();
    let noise_energy: f64 = segment.iter().map(|v| v * v).sum();
    if noise_energy <= 0.0 {
        return Err(Error::ZeroEnergyInput("noise"));
    }
    let gain = (clean_energy / (noise_energy * 10f64.powf(spec.snr_db / 10.0))).sqrt();
    let scaled: Vec<f64> = segment.iter().map(|v| v * gain).collect();
    let noisy: Vec<f64> = clean
        .samples()
        .iter()
        .zip(&scaled)
        .map(|(c, n)| c + n)
        .collect();
    Ok(Mixture {
        noisy: Waveform::new(noisy, clean.sample_rate_hz())?,
        scaled_noise: Waveform::new(scaled, clean.sample_rate_hz())?,
    })
}

fn sample_count(duration_s: f64) -> usize {
    (duration_s * SAMPLE_RATE_HZ as f64).round() as usize
}

fn normalize_peak(mut samples: Vec<f64>) -> Vec<f64> {
    let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        let g = PEAK / peak;
        samples.iter_mut().for_each(|v| *v *= g);
    }
    samples
}

/// Parameters drawn for one synthetic talker; exposed for tests.
#[derive(Debug, Clone, PartialEq)]
pub struct TalkerParams {
    pub f0_hz: f64,
    /// Amplitude of harmonic k+1 in slot k; the fundamental has amplitude 1.
    pub harmonic_amps: Vec<f64>,
    pub am_rate_hz: f64,
}

impl TalkerParams {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        let f0_hz = rng.gen_range(100.0..300.0);
        let count = rng.gen_range(5..=12);
        let harmonic_amps = (1..=count)
            .map(|k| {
                if k == 1 {
                    1.0
                } else {
                    rng.gen_range(0.3..1.0) / k as f64
                }
            })
            .collect();
        let am_rate_hz = rng.gen_range(2.0..8.0);
        Self {
            f0_hz,
            harmonic_amps,
            am_rate_hz,
        }
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::draw(&mut ChaCha8Rng::seed_from_u64(seed))
    }
}

/// A harmonic complex with amplitude modulation and silent gaps, peak 0.5.
///
/// Panics if `duration_s < 0.5`.
pub fn synth_speech_like(duration_s: f64, seed: u64) -> Waveform {
    assert!(
        duration_s >= 0.5,
        "speech-like clips must be at least 0.5 s"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let talker = TalkerParams::draw(&mut rng);
    let len = sample_count(duration_s);
    let sr = SAMPLE_RATE_HZ as f64;
    let phases: Vec<f64> = talker
        .harmonic_amps
        .iter()
        .map(|_| rng.gen_range(0.0..2.0 * PI))
        .collect();
    let am_phase = rng.gen_range(0.0..2.0 * PI);

    // alternating voiced runs and gaps, with 10 ms raised-cosine ramps
    let mut gate = vec![0.0; len];
    let ramp = (0.01 * sr) as usize;
    let mut pos = sample_count(rng.gen_range(0.05..0.2));
    while pos < len {
        let voiced = sample_count(rng.gen_range(0.3..1.0));
        let end = (pos + voiced).min(len);
        for (i, g) in gate[pos..end].iter_mut().enumerate() {
            let from_start = i;
            let to_end = end - pos - 1 - i;
            let edge = from_start.min(to_end);
            *g = if edge < ramp {
                0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos()
            } else {
                1.0
            };
        }
        pos = end + sample_count(rng.gen_range(0.1..0.4));
    }

    let samples: Vec<f64> = (0..len)
        .map(|n| {
            if gate[n] == 0.0 {
                return 0.0;
            }
            let t = n as f64 / sr;
            let env = 0.6 + 0.4 * (2.0 * PI * talker.am_rate_hz * t + am_phase).sin();
            let tone: f64 = talker
                .harmonic_amps
                .iter()
                .zip(&phases)
                .enumerate()
                .map(|(k, (a, p))| a * (2.0 * PI * talker.f0_hz * (k + 1) as f64 * t + p).sin())
                .sum();
            gate[n] * env * tone
        })
        .collect();
    Waveform::from_samples(normalize_peak(samples)).expect("synthetic speech is finite")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    White,
    Pink,
    BabbleSurrogate,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [
        NoiseKind::White,
        NoiseKind::Pink,
        NoiseKind::BabbleSurrogate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::White => "white",
            NoiseKind::Pink => "pink",
            NoiseKind::BabbleSurrogate => "babble-surrogate",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "white" => Ok(NoiseKind::White),
            "pink" => Ok(NoiseKind::Pink),
            "babble-surrogate" | "babble" => Ok(NoiseKind::BabbleSurrogate),
            other => Err(Error::UnknownKind(other.to_string())),
        }
    }
}

fn gaussian(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Shapes white Gaussian noise to a 1/f power spectrum in the frequency domain.
fn pink(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut buf: Vec<Complex64> = gaussian(len, rng)
        .into_iter()
        .map(|v| Complex64::new(v, 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    buf[0] = Complex64::new(0.0, 0.0);
    for (k, z) in buf.iter_mut().enumerate().skip(1) {
        // distance to DC on the circle keeps the spectrum Hermitian
        let bin = k.min(len - k) as f64;
        *z *= 1.0 / bin.sqrt();
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    buf.into_iter().map(|z| z.re).collect()
}

/// Peak-normalized noise of the given colour.
pub fn synth_noise(kind: NoiseKind, duration_s: f64, seed: u64) -> Waveform {
    let len = sample_count(duration_s).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = match kind {
        NoiseKind::White => gaussian(len, &mut rng),
        NoiseKind::Pink => pink(len, &mut rng),
        NoiseKind::BabbleSurrogate => {
            let duration = (len as f64 / SAMPLE_RATE_HZ as f64).max(0.5);
            let mut acc = vec![0.0; len];
            for _ in 0..6 {
                let voice = synth_speech_like(duration, rng.gen());
                for (a, v) in acc.iter_mut().zip(voice.samples()) {
                    *a += v;
                }
            }
            // a faint floor so a clip is never exactly silent
            for a in acc.iter_mut() {
                *a += 1e-3 * rng.sample::<f64, _>(StandardNormal);
            }
            acc
        }
    };
    Waveform::from_samples(normalize_peak(samples)).expect("synthetic noise is finite")
}

/// One line of a corpus manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub clean_path: PathBuf,
    pub noise_path: PathBuf,
    pub snr_db: f64,
    pub seed: u64,
}

impl ManifestEntry {
    pub fn mix_spec(&self) -> MixSpec {
        MixSpec::new(self.snr_db, self.seed)
    }
}

/// Tab-separated `clean_path noise_path snr_db seed` lines.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |reason: &str| Error::Manifest {
                line: i + 1,
                reason: reason.to_string(),
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(bad(&format!(
                    "expected 4 tab-separated fields, found {}",
                    fields.len()
                )));
            }
            let resolve = |p: &str| {
                let p = PathBuf::from(p);
                match base_dir {
                    Some(base) if p.is_relative() => base.join(p),
                    _ => p,
                }
            };
            let snr_db: f64 = fields[2]
                .trim()
                .parse()
                .map_err(|_| bad("snr_db is not a number"))?;
            if !snr_db.is_finite() {
                return Err(bad("snr_db is not finite"));
            }
            let seed: u64 = fields[3]
                .trim()
                .parse()
                .map_err(|_| bad("seed is not an unsigned integer"))?;
            entries.push(ManifestEntry {
                clean_path: resolve(fields[0]),
                noise_path: resolve(fields[1]),
                snr_db,
                seed,
            });
        }
        Ok(Self { entries })
    }

    /// Reads a manifest; relative paths are resolved against its directory.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::parse(&text, path.parent())
    }

    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|e| {
                format!(
                    "{}\t{}\t{}\t{}\n",
                    e.clean_path.display(),
                    e.noise_path.display(),
                    e.snr_db,
                    e.seed
                )
            })
            .collect()
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Layout of a synthetic corpus on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub num_clean: usize,
    pub clean_duration_s: f64,
    pub noise_duration_s: f64,
    pub noise_kinds: Vec<NoiseKind>,
    pub snrs_db: Vec<f64>,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            num_clean: 20,
            clean_duration_s: 4.0,
            noise_duration_s: 6.0,
            noise_kinds: vec![NoiseKind::White, NoiseKind::Pink],
            snrs_db: vec![0.0, 5.0, 10.0],
            seed: 0,
        }
    }
}

/// Writes `clean_###.wav`, one noise file per kind and clip, and a
/// `manifest.tsv` pairing every clean clip with every noise kind at every SNR.
/// The file stores relative paths; the returned manifest has them resolved
/// against `dir`.
pub fn write_synthetic_corpus(
    dir: impl AsRef<Path>,
    spec: &CorpusSpec,
) -> Result<(Manifest, PathBuf)> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for i in 0..spec.num_clean {
        let clip_seed = spec.seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
        let clean_name = format!("clean_{i:03}.wav");
        write_wav(
            dir.join(&clean_name),
            &synth_speech_like(spec.clean_duration_s, clip_seed),
        )?;
        for (k, kind) in spec.noise_kinds.iter().enumerate() {
            let noise_name = format!("noise_{kind}_{i:03}.wav");
            let noise_seed = clip_seed.wrapping_mul(31).wrapping_add(k as u64 + 1);
            write_wav(
                dir.join(&noise_name),
                &synth_noise(*kind, spec.noise_duration_s, noise_seed),
            )?;
            for (j, &snr) in spec.snrs_db.iter().enumerate() {
                entries.push(ManifestEntry {
                    clean_path: PathBuf::from(&clean_name),
                    noise_path: PathBuf::from(&noise_name),
                    snr_db: snr,
                    seed: noise_seed.wrapping_mul(7).wrapping_add(j as u64),
                });
            }
        }
    }
    let manifest = Manifest { entries };
    let path = dir.join("manifest.tsv");
    manifest.write(&path)?;
    Ok((Manifest::read(&path)?, path))
}
