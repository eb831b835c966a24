//! Trains the desk-size network on the synthetic corpus and reports the
//! segmental SNR gain on unseen 0 dB mixtures.
//!
//! `cargo run --release -p warpmask --example toy_training -- [alpha]`

use std::time::Instant;

use warpmask::metrics::segmental_snr;
use warpmask::mixer::{
    mix_at_snr, synth_noise, synth_speech_like, write_synthetic_corpus, CorpusSpec, MixSpec,
    NoiseKind,
};
use warpmask::neural::{train, NetConfig, TrainConfig};
use warpmask::pipeline::{enhance, oracle_enhance};
use warpmask::spectral::StftConfig;

fn main() -> warpmask::Result<()> {
    let alpha: f64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("alpha must be a number"))
        .unwrap_or(1.5);
    let dir = tempfile::tempdir()?;
    let (manifest, _) = write_synthetic_corpus(dir.path(), &CorpusSpec::default())?;

    let start = Instant::now();
    let (params, history) = train(&manifest, &TrainConfig::desk(alpha), &NetConfig::desk())?;
    println!("trained in {:.1} s", start.elapsed().as_secs_f64());
    for e in &history.epochs {
        println!(
            "epoch {:>2}  lr {:.6}  train {:.5}  validation {:.5}",
            e.epoch,
            e.lr,
            e.train_loss,
            e.validation_loss.unwrap_or(f64::NAN)
        );
    }

    let n = 10;
    let (mut base, mut gain, mut oracle_gain) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let clean = synth_speech_like(4.0, 900 + i);
        let kind = [NoiseKind::White, NoiseKind::Pink][i as usize % 2];
        let noise = synth_noise(kind, 6.0, 1900 + i);
        let mix = mix_at_snr(&clean, &noise, &MixSpec::new(0.0, i))?;
        let b = segmental_snr(&clean, &mix.noisy)?;
        let e = segmental_snr(&clean, &enhance(&mix.noisy, &params, alpha)?)?;
        let o = segmental_snr(
            &clean,
            &oracle_enhance(&clean, &mix.scaled_noise, 0.5, &StftConfig::default())?,
        )?;
        base += b;
        gain += e - b;
        oracle_gain += o - b;
    }
    let k = n as f64;
    println!(
        "noisy seg-SNR {:.2} dB, model gain {:.2} dB, oracle gain {:.2} dB",
        base / k,
        gain / k,
        oracle_gain / k
    );
    Ok(())
}
