//! Signal-level quality measures used to compare enhancement settings.

use ndarray::Array2;

use crate::audio_io::Waveform;
use crate::error::{Error, Result};
use crate::spectral::{lps, magnitude, stft, StftConfig, LPS_EPSILON};

/// 30 ms at 16 kHz.
pub const SEG_FRAME: usize = 480;
pub const SEG_HOP: usize = 240;
pub const SEG_SNR_MIN_DB: f64 = -10.0;
pub const SEG_SNR_MAX_DB: f64 = 35.0;
/// Frames whose reference energy is below this are skipped.
pub const SILENT_FRAME_ENERGY: f64 = 1e-10;
pub const SI_SDR_CAP_DB: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub seg_snr_db: f64,
    pub si_sdr_db: f64,
    pub lsd_db: f64,
    pub mask_mse: f64,
    pub n_frames: usize,
}

fn check_lengths(reference: &Waveform, est: &Waveform) -> Result<()> {
    if reference.len() != est.len() {
        return Err(Error::LengthMismatch(reference.len(), est.len()));
    }
    Ok(())
}

/// Number of analysis frames `segmental_snr` uses for a signal length.
pub fn seg_frames(len: usize) -> usize {
    if len < SEG_FRAME {
        0
    } else {
        (len - SEG_FRAME) / SEG_HOP + 1
    }
}

/// Mean per-frame SNR in dB, each frame clamped to `[-10, 35]`.
pub fn segmental_snr(reference: &Waveform, est: &Waveform) -> Result<f64> {
    check_lengths(reference, est)?;
    let frames = seg_frames(reference.len());
    if frames == 0 {
        return Err(Error::LengthMismatch(reference.len(), SEG_FRAME));
    }
    let (r, e) = (reference.samples(), est.samples());
    let mut sum = 0.0;
    let mut used = 0usize;
    for i in 0..frames {
        let range = i * SEG_HOP..i * SEG_HOP + SEG_FRAME;
        let signal: f64 = r[range.clone()].iter().map(|v| v * v).sum();
        if signal < SILENT_FRAME_ENERGY {
            continue;
        }
        let noise: f64 = r[range.clone()]
            .iter()
            .zip(&e[range])
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let snr = if noise > 0.0 {
            10.0 * (signal / noise).log10()
        } else {
            SEG_SNR_MAX_DB
        };
        sum += snr.clamp(SEG_SNR_MIN_DB, SEG_SNR_MAX_DB);
        used += 1;
    }
    if used == 0 {
        return Err(Error::AllFramesSilent);
    }
    Ok(sum / used as f64)
}

/// Scale-invariant SDR in dB, limited to `[-60, 60]`.
pub fn si_sdr(reference: &Waveform, est: &Waveform) -> Result<f64> {
    check_lengths(reference, est)?;
    let (r, e) = (reference.samples(), est.samples());
    let rr: f64 = r.iter().map(|v| v * v).sum();
    let ee: f64 = e.iter().map(|v| v * v).sum();
    if rr <= 0.0 {
        return Err(Error::ZeroEnergy("reference"));
    }
    if ee <= 0.0 {
        return Err(Error::ZeroEnergy("estimate"));
    }
    let scale = r.iter().zip(e).map(|(a, b)| a * b).sum::<f64>() / rr;
    let (mut target, mut residual) = (0.0, 0.0);
    for (a, b) in r.iter().zip(e) {
        let t = scale * a;
        target += t * t;
        residual += (b - t) * (b - t);
    }
    let db = if residual > 0.0 {
        10.0 * (target / residual).log10()
    } else {
        SI_SDR_CAP_DB
    };
    Ok(db.clamp(-SI_SDR_CAP_DB, SI_SDR_CAP_DB))
}

/// RMS over frames of the per-frame RMS dB difference between log
/// magnitudes. Magnitudes are floored at `sqrt(1e-12)`.
pub fn log_spectral_distance(reference: &Waveform, est: &Waveform) -> Result<f64> {
    check_lengths(reference, est)?;
    let cfg = StftConfig::default();
    let r = lps(&magnitude(&stft(reference, &cfg)?), LPS_EPSILON);
    let e = lps(&magnitude(&stft(est, &cfg)?), LPS_EPSILON);
    Ok(lsd_from_lps(r.data(), e.data()))
}

/// LPS holds `2 ln|X|`, so `20 log10|R| - 20 log10|E| = (10 / ln 10) (lps_r - lps_e)`.
fn lsd_from_lps(r: &Array2<f64>, e: &Array2<f64>) -> f64 {
    let to_db = 10.0 / std::f64::consts::LN_10;
    let frames = r.nrows() as f64;
    let mean_square_sum: f64 = r
        .rows()
        .into_iter()
        .zip(e.rows())
        .map(|(rr, er)| {
            let bins = rr.len() as f64;
            rr.iter()
                .zip(er.iter())
                .map(|(a, b)| (to_db * (a - b)).powi(2))
                .sum::<f64>()
                / bins
        })
        .sum();
    (mean_square_sum / frames).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(len: usize, seed: u64) -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Waveform::from_samples((0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn scaled(w: &Waveform, g: f64) -> Waveform {
        Waveform::from_samples(w.samples().iter().map(|v| v * g).collect()).unwrap()
    }

    #[test]
    fn seg_snr_identity_and_zero_estimate() {
        let r = random(4800, 1);
        assert_eq!(segmental_snr(&r, &r).unwrap(), 35.0);
        let zero = Waveform::from_samples(vec![0.0; 4800]).unwrap();
        // the error equals the reference, so every frame is exactly 0 dB
        assert_eq!(segmental_snr(&r, &zero).unwrap(), 0.0);
    }

    /// Independent per-frame loop with explicit indices.
    fn seg_snr_oracle(r: &[f64], e: &[f64]) -> f64 {
        let mut vals = Vec::new();
        let mut start = 0;
        while start + 480 <= r.len() {
            let mut s = 0.0;
            let mut n = 0.0;
            for i in start..start + 480 {
                s += r[i] * r[i];
                n += (r[i] - e[i]) * (r[i] - e[i]);
            }
            if s >= 1e-10 {
                let v = 10.0 * (s / n).log10();
                vals.push(v.clamp(-10.0, 35.0));
            }
            start += 240;
        }
        vals.iter().sum::<f64>() / vals.len() as f64
    }

    #[test]
    fn seg_snr_matches_oracle() {
        let r = random(5000, 2);
        let e = random(5000, 3);
        let mixed = Waveform::from_samples(
            r.samples()
                .iter()
                .zip(e.samples())
                .map(|(a, b)| a + 0.3 * b)
                .collect(),
        )
        .unwrap();
        for est in [&e, &mixed] {
            let got = segmental_snr(&r, est).unwrap();
            assert!((got - seg_snr_oracle(r.samples(), est.samples())).abs() < 1e-12);
        }
    }

    #[test]
    fn seg_snr_errors_and_silence() {
        let r = random(1000, 1);
        assert!(matches!(
            segmental_snr(&r, &random(999, 1)),
            Err(Error::LengthMismatch(..))
        ));
        let silent = Waveform::from_samples(vec![0.0; 1000]).unwrap();
        assert!(matches!(
            segmental_snr(&silent, &r),
            Err(Error::AllFramesSilent)
        ));
        let mut samples = vec![0.0; 2400];
        samples[1500..].copy_from_slice(&r.samples()[..900]);
        let partly = Waveform::from_samples(samples).unwrap();
        assert_eq!(segmental_snr(&partly, &partly).unwrap(), 35.0);
    }

    #[test]
    fn seg_snr_is_not_scale_invariant() {
        let r = random(4800, 4);
        let e = random(4800, 5);
        let noisy = Waveform::from_samples(
            r.samples()
                .iter()
                .zip(e.samples())
                .map(|(a, b)| a + 0.5 * b)
                .collect(),
        )
        .unwrap();
        let a = segmental_snr(&r, &noisy).unwrap();
        let b = segmental_snr(&r, &scaled(&noisy, 0.5)).unwrap();
        assert!((a - b).abs() > 0.1);
    }

    #[test]
    fn si_sdr_scale_invariance_and_cap() {
        let r = random(4000, 6);
        assert_eq!(si_sdr(&r, &scaled(&r, 0.3)).unwrap(), 60.0);
        let e = random(4000, 7);
        let noisy = Waveform::from_samples(
            r.samples()
                .iter()
                .zip(e.samples())
                .map(|(a, b)| a + 0.5 * b)
                .collect(),
        )
        .unwrap();
        let a = si_sdr(&r, &noisy).unwrap();
        let b = si_sdr(&r, &scaled(&noisy, 3.0)).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn si_sdr_orthogonal_pair() {
        let n = 4800;
        let r: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 10.0 * i as f64 / n as f64).sin())
            .collect();
        let e: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 10.0 * i as f64 / n as f64).cos())
            .collect();
        let v = si_sdr(
            &Waveform::from_samples(r).unwrap(),
            &Waveform::from_samples(e).unwrap(),
        )
        .unwrap();
        assert!(v <= -20.0, "{v}");
    }

    #[test]
    fn si_sdr_hand_computed() {
        // ref = [1, 0], est = [1, 1]: projection [1, 0], residual [0, 1], 0 dB
        let r = Waveform::from_samples(vec![1.0, 0.0]).unwrap();
        let e = Waveform::from_samples(vec![1.0, 1.0]).unwrap();
        assert!(si_sdr(&r, &e).unwrap().abs() < 1e-12);
        // ref = [1, 1], est = [2, 0]: scale 1, target [1, 1], residual [1, -1], 0 dB
        let r = Waveform::from_samples(vec![1.0, 1.0]).unwrap();
        let e = Waveform::from_samples(vec![2.0, 0.0]).unwrap();
        assert!(si_sdr(&r, &e).unwrap().abs() < 1e-12);
        // ref = [3, 4], est = [3, 4] + [4, -3] * 0.1: 10 log10(25 / 0.25) = 20 dB
        let r = Waveform::from_samples(vec![3.0, 4.0]).unwrap();
        let e = Waveform::from_samples(vec![3.4, 3.7]).unwrap();
        assert!((si_sdr(&r, &e).unwrap() - 20.0).abs() < 1e-9);
        let zero = Waveform::from_samples(vec![0.0, 0.0]).unwrap();
        assert!(matches!(si_sdr(&zero, &e), Err(Error::ZeroEnergy(_))));
        assert!(matches!(si_sdr(&r, &zero), Err(Error::ZeroEnergy(_))));
    }

    #[test]
    fn lsd_values() {
        let r = random(4000, 8);
        assert_eq!(log_spectral_distance(&r, &r).unwrap(), 0.0);
        let half = log_spectral_distance(&r, &scaled(&r, 0.5)).unwrap();
        assert!((half - 20.0 * 2f64.log10()).abs() < 1e-9, "{half}");
    }

    #[test]
    fn lsd_matches_scalar_oracle() {
        let r = random(3000, 9);
        let e = random(3000, 10);
        let cfg = StftConfig::default();
        let sr = stft(&r, &cfg).unwrap();
        let se = stft(&e, &cfg).unwrap();
        let mut total = 0.0;
        for t in 0..sr.frames() {
            let mut acc = 0.0;
            for k in 0..sr.bins() {
                let a = sr.data()[[t, k]].norm().max(1e-6);
                let b = se.data()[[t, k]].norm().max(1e-6);
                acc += (20.0 * a.log10() - 20.0 * b.log10()).powi(2);
            }
            total += acc / sr.bins() as f64;
        }
        let expected = (total / sr.frames() as f64).sqrt();
        assert!((log_spectral_distance(&r, &e).unwrap() - expected).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn si_sdr_decreases_with_noise_gain(seed in any::<u64>()) {
            let clean = random(2000, seed);
            let noise = random(2000, seed ^ 1);
            let mut prev = f64::INFINITY;
            for g in [0.01, 0.05, 0.1, 0.3, 1.0, 3.0] {
                let est = Waveform::from_samples(clean.samples().iter().zip(noise.samples()).map(|(c, n)| c + g * n).collect()).unwrap();
                let v = si_sdr(&clean, &est).unwrap();
                prop_assert!(v < prev);
                prev = v;
            }
        }
    }
}
