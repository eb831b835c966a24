//! End-to-end enhancement and the gamma sweep.
//!
//! `noisy -> STFT -> LPS -> network -> m^(gamma/alpha) -> scale noisy bins ->
//! inverse STFT`. The network only ever sees the normalized LPS; the mask is
//! applied to the untouched noisy spectrogram, so `gamma = 0` reproduces the
//! analysis/synthesis round trip of the input.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::audio_io::{read_wav, Waveform};
use crate::error::{Error, Result};
use crate::maskcore::{apply_mask, oracle_test_mask, warp_mask, Mask};
use crate::metrics::{log_spectral_distance, segmental_snr, si_sdr};
use crate::mixer::{mix_at_snr, Manifest, MixSpec};
use crate::neural::{forward, DBlstmParams};
use crate::spectral::{
    analyze, istft, lps, magnitude, stft, ComplexSpectrogram, StftConfig, LPS_EPSILON,
};

/// Testing warp presets per downstream task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// Speaker verification, mild enhancement.
    Asv,
    /// Speech recognition.
    Asr,
    /// Perceptual quality, strongest enhancement.
    Quality,
}

impl Task {
    pub fn gamma(self) -> f64 {
        match self {
            Task::Asv => 0.75,
            Task::Asr => 1.0,
            Task::Quality => 1.5,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "asv" => Some(Task::Asv),
            "asr" => Some(Task::Asr),
            "quality" | "pesq" => Some(Task::Quality),
            _ => None,
        }
    }
}

/// The gamma grid swept by default.
pub const DEFAULT_GAMMAS: [f64; 7] = [0.0, 0.375, 0.5, 0.75, 1.0, 1.5, 3.0];
/// Test SNRs in dB.
pub const DEFAULT_SNRS: [f64; 3] = [0.0, 10.0, 20.0];

/// STFT settings implied by a network's feature dimension, `2 (f - 1)`-point
/// FFT with 50 % overlap.
pub fn stft_for(p: &DBlstmParams) -> Result<StftConfig> {
    let f = p.config.feat_dim;
    if f < 2 {
        return Err(Error::InvalidConfig(format!(
            "feature dimension {f} has no FFT size"
        )));
    }
    let n = 2 * (f - 1);
    StftConfig::new(n, n / 2)
}

/// A trained network ready for inference, counting its forward passes.
pub struct Enhancer<'a> {
    params: &'a DBlstmParams,
    stft: StftConfig,
    forward_passes: AtomicUsize,
}

impl<'a> Enhancer<'a> {
    pub fn new(params: &'a DBlstmParams) -> Result<Self> {
        Ok(Self {
            params,
            stft: stft_for(params)?,
            forward_passes: AtomicUsize::new(0),
        })
    }

    /// Overrides the hop; the FFT size stays tied to the feature dimension.
    pub fn with_hop(mut self, hop: usize) -> Result<Self> {
        self.stft = StftConfig::new(self.stft.fft_size, hop)?;
        Ok(self)
    }

    pub fn stft_config(&self) -> StftConfig {
        self.stft
    }

    pub fn params(&self) -> &DBlstmParams {
        self.params
    }

    /// Network invocations since construction.
    pub fn forward_passes(&self) -> usize {
        self.forward_passes.load(Ordering::Relaxed)
    }

    /// Analyzes `noisy` and predicts its training-warped mask.
    pub fn predict(&self, noisy: &Waveform) -> Result<(ComplexSpectrogram, Mask)> {
        let (spec, mag) = analyze(noisy, &self.stft)?;
        let features = lps(&mag, LPS_EPSILON);
        self.forward_passes.fetch_add(1, Ordering::Relaxed);
        let mask = forward(self.params, &features)?;
        Ok((spec, mask))
    }

    /// Re-warps a prediction to `gamma` and resynthesizes. Also returns the
    /// test mask.
    pub fn render(
        &self,
        spec: &ComplexSpectrogram,
        predicted: &Mask,
        gamma: f64,
    ) -> Result<(Waveform, Mask)> {
        let test = warp_mask(predicted, self.params.alpha_trained, gamma)?;
        let out = istft(&apply_mask(spec, &test)?)?;
        Ok((out, test))
    }

    pub fn enhance(&self, noisy: &Waveform, gamma: f64) -> Result<Waveform> {
        check_gamma(gamma)?;
        let (spec, predicted) = self.predict(noisy)?;
        Ok(self.render(&spec, &predicted, gamma)?.0)
    }

    /// One forward pass shared by every gamma.
    pub fn enhance_many_with_masks(
        &self,
        noisy: &Waveform,
        gammas: &[f64],
    ) -> Result<Vec<(Waveform, Mask)>> {
        if gammas.is_empty() {
            return Err(Error::InvalidWarp("gamma list is empty".into()));
        }
        for &g in gammas {
            check_gamma(g)?;
        }
        let (spec, predicted) = self.predict(noisy)?;
        gammas
            .iter()
            .map(|&g| self.render(&spec, &predicted, g))
            .collect()
    }

    pub fn enhance_many(&self, noisy: &Waveform, gammas: &[f64]) -> Result<Vec<Waveform>> {
        Ok(self
            .enhance_many_with_masks(noisy, gammas)?
            .into_iter()
            .map(|(w, _)| w)
            .collect())
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidWarp(format!(
            "gamma = {gamma}, must be finite and >= 0"
        )))
    }
}

/// Enhances one utterance at testing warp `gamma`.
pub fn enhance(noisy: &Waveform, p: &DBlstmParams, gamma: f64) -> Result<Waveform> {
    Enhancer::new(p)?.enhance(noisy, gamma)
}

/// Enhances at several testing warps from a single network pass.
pub fn multi_gamma_enhance(
    noisy: &Waveform,
    p: &DBlstmParams,
    gammas: &[f64],
) -> Result<Vec<Waveform>> {
    Enhancer::new(p)?.enhance_many(noisy, gammas)
}

/// `istft(stft(w))`, what any enhancement with an all-ones mask returns.
pub fn resynthesize(w: &Waveform, cfg: &StftConfig) -> Result<Waveform> {
    istft(&stft(w, cfg)?)
}

/// Enhances `clean + noise` with the ground-truth test mask
/// `(S^2 / (S^2 + N^2))^gamma`, an upper bound for any learned estimator.
pub fn oracle_enhance(
    clean: &Waveform,
    noise: &Waveform,
    gamma: f64,
    cfg: &StftConfig,
) -> Result<Waveform> {
    if clean.len() != noise.len() {
        return Err(Error::ShapeMismatch(format!(
            "clean has {} samples, noise {}",
            clean.len(),
            noise.len()
        )));
    }
    let noisy = Waveform::new(
        clean
            .samples()
            .iter()
            .zip(noise.samples())
            .map(|(c, n)| c + n)
            .collect(),
        clean.sample_rate_hz(),
    )?;
    let (noisy_spec, _) = analyze(&noisy, cfg)?;
    let s = magnitude(&stft(clean, cfg)?);
    let n = magnitude(&stft(noise, cfg)?);
    let mask = oracle_test_mask(&s, &n, gamma)?;
    istft(&apply_mask(&noisy_spec, &mask)?)
}

/// One cell of a sweep report: metrics against the clean reference averaged
/// over the manifest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub gamma: f64,
    pub seg_snr_db: f64,
    pub si_sdr_db: f64,
    pub lsd_db: f64,
    pub mask_mse: f64,
    pub n_utts: usize,
}

pub const SWEEP_HEADER: &str = "snr_db,gamma,seg_snr_db,si_sdr_db,lsd_db,mask_mse,n_utts";

#[derive(Debug, Clone, Copy)]
struct CellMetrics {
    seg_snr_db: f64,
    si_sdr_db: f64,
    lsd_db: f64,
    mask_mse: f64,
}

fn cell_metrics(
    clean: &Waveform,
    est: &Waveform,
    test_mask: &Mask,
    oracle: &Mask,
) -> Result<CellMetrics> {
    let diff = test_mask.data() - oracle.data();
    Ok(CellMetrics {
        seg_snr_db: segmental_snr(clean, est)?,
        si_sdr_db: si_sdr(clean, est)?,
        lsd_db: log_spectral_distance(clean, est)?,
        mask_mse: diff.iter().map(|d| d * d).sum::<f64>() / diff.len() as f64,
    })
}

fn sorted_grid(values: &[f64], what: &str) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Config(format!("{what} grid is empty")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!("{what} grid has a non-finite value")));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(v)
}

fn load_pairs(manifest: &Manifest) -> Result<Vec<(Waveform, Waveform, u64)>> {
    if manifest.is_empty() {
        return Err(Error::EmptyManifest);
    }
    manifest
        .entries
        .par_iter()
        .map(|e| Ok((read_wav(&e.clean_path)?, read_wav(&e.noise_path)?, e.seed)))
        .collect()
}

/// Averages per-utterance cells, utterances in manifest order.
fn aggregate(per_utt: &[Vec<Vec<CellMetrics>>], snrs: &[f64], gammas: &[f64]) -> Vec<SweepRow> {
    let n = per_utt.len();
    let mut rows = Vec::with_capacity(snrs.len() * gammas.len());
    for (si, &snr_db) in snrs.iter().enumerate() {
        for (gi, &gamma) in gammas.iter().enumerate() {
            let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
            for utt in per_utt {
                let m = &utt[si][gi];
                a += m.seg_snr_db;
                b += m.si_sdr_db;
                c += m.lsd_db;
                d += m.mask_mse;
            }
            let k = n as f64;
            rows.push(SweepRow {
                snr_db,
                gamma,
                seg_snr_db: a / k,
                si_sdr_db: b / k,
                lsd_db: c / k,
                mask_mse: d / k,
                n_utts: n,
            });
        }
    }
    rows
}

/// Remixes every manifest pair at each SNR (with the entry's seed), enhances at
/// every gamma with one forward pass per mixture, and averages the metrics.
/// Rows are ordered by SNR, then gamma.
pub fn sweep(
    manifest: &Manifest,
    p: &DBlstmParams,
    gammas: &[f64],
    snrs: &[f64],
) -> Result<Vec<SweepRow>> {
    let gammas = sorted_grid(gammas, "gamma")?;
    let snrs = sorted_grid(snrs, "SNR")?;
    let pairs = load_pairs(manifest)?;
    let enhancer = Enhancer::new(p)?;
    let cfg = enhancer.stft_config();
    let per_utt: Vec<Vec<Vec<CellMetrics>>> = pairs
        .par_iter()
        .map(|(clean, noise, seed)| {
            snrs.iter()
                .map(|&snr| {
                    let mix = mix_at_snr(clean, noise, &MixSpec::new(snr, *seed))?;
                    let s = magnitude(&stft(clean, &cfg)?);
                    let n = magnitude(&stft(&mix.scaled_noise, &cfg)?);
                    let outputs = enhancer.enhance_many_with_masks(&mix.noisy, &gammas)?;
                    outputs
                        .iter()
                        .zip(&gammas)
                        .map(|((est, test_mask), &g)| {
                            let oracle = oracle_test_mask(&s, &n, g)?;
                            cell_metrics(clean, est, test_mask, &oracle)
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(aggregate(&per_utt, &snrs, &gammas))
}

/// The no-enhancement reference: every pair remixed at each SNR and passed
/// through analysis and synthesis only. One row per SNR with `gamma = 0`.
pub fn unenhanced_rows(
    manifest: &Manifest,
    snrs: &[f64],
    cfg: &StftConfig,
) -> Result<Vec<SweepRow>> {
    let snrs = sorted_grid(snrs, "SNR")?;
    let pairs = load_pairs(manifest)?;
    let per_utt: Vec<Vec<Vec<CellMetrics>>> = pairs
        .par_iter()
        .map(|(clean, noise, seed)| {
            snrs.iter()
                .map(|&snr| {
                    let mix = mix_at_snr(clean, noise, &MixSpec::new(snr, *seed))?;
                    let s = magnitude(&stft(clean, cfg)?);
                    let n = magnitude(&stft(&mix.scaled_noise, cfg)?);
                    let ones = oracle_test_mask(&s, &n, 0.0)?;
                    let est = resynthesize(&mix.noisy, cfg)?;
                    Ok(vec![cell_metrics(clean, &est, &ones, &ones)?])
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(aggregate(&per_utt, &snrs, &[0.0]))
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.8},{}",
            r.snr_db, r.gamma, r.seg_snr_db, r.si_sdr_db, r.lsd_db, r.mask_mse, r.n_utts
        );
    }
    out
}
