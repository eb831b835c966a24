//! Minibatch training on random fixed-length crops.

use ndarray::{s, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::model::{backward, forward_normalized};
use super::params::{init_params, DBlstmParams, Weights};
use super::NetConfig;
use crate::audio_io::{read_wav, Waveform, SAMPLE_RATE_HZ};
use crate::error::{Error, Result};
use crate::maskcore::oracle_training_mask;
use crate::mixer::{mix_at_snr, Manifest, MixSpec};
use crate::spectral::{analyze, lps, StftConfig, LPS_EPSILON};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr0: f64,
    /// Multiplier applied to the learning rate after every epoch.
    pub lr_decay_per_epoch: f64,
    pub minibatch: usize,
    pub segment_s: f64,
    pub epochs: usize,
    /// Training warp baked into the targets.
    pub alpha: f64,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Share of the manifest held out when `train` splits it itself.
    pub validation_fraction: f64,
    /// Random crops drawn from every clip per epoch.
    pub crops_per_clip: usize,
    pub stft: StftConfig,
}

impl TrainConfig {
    /// 8-s segments, minibatch 80, 15 epochs, lr 0.001 decayed by 20 % per
    /// epoch.
    pub fn full(alpha: f64) -> Self {
        Self {
            lr0: 0.001,
            lr_decay_per_epoch: 0.8,
            minibatch: 80,
            segment_s: 8.0,
            epochs: 15,
            alpha,
            seed: 0,
            adam: AdamConfig::default(),
            validation_fraction: 0.1,
            crops_per_clip: 1,
            stft: StftConfig::default(),
        }
    }

    /// The full schedule with 2-s segments and minibatch 8.
    pub fn desk(alpha: f64) -> Self {
        Self {
            minibatch: 8,
            segment_s: 2.0,
            ..Self::full(alpha)
        }
    }

    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        self.lr0 * self.lr_decay_per_epoch.powi(epoch as i32)
    }

    pub fn segment_frames(&self) -> usize {
        ((self.segment_s * SAMPLE_RATE_HZ as f64 / self.stft.hop as f64).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::Config(what));
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return bad(format!("lr0 = {} must be > 0", self.lr0));
        }
        if !(self.lr_decay_per_epoch > 0.0 && self.lr_decay_per_epoch < 1.0) {
            return bad(format!(
                "lr decay {} must be in (0, 1)",
                self.lr_decay_per_epoch
            ));
        }
        if self.epochs == 0 || self.minibatch == 0 || self.crops_per_clip == 0 {
            return bad("epochs, minibatch and crops_per_clip must be >= 1".into());
        }
        if self.segment_s.is_nan() || self.segment_s <= 0.0 {
            return bad(format!("segment_s = {} must be > 0", self.segment_s));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad(format!(
                "validation_fraction = {} must be in [0, 1)",
                self.validation_fraction
            ));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidWarp(format!(
                "alpha = {} must be > 0",
                self.alpha
            )));
        }
        self.stft.validate()
    }
}

/// Network input and target for one noisy utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    /// Normalized noisy LPS, `T x f`.
    pub features: Array2<f64>,
    /// Oracle training mask, `T x f`.
    pub target: Array2<f64>,
}

impl Example {
    pub fn frames(&self) -> usize {
        self.features.nrows()
    }
}

/// Mixes one pair and computes its features and `alpha` target.
pub fn prepare_example(
    clean: &Waveform,
    noise: &Waveform,
    spec: &MixSpec,
    alpha: f64,
    stft_cfg: &StftConfig,
) -> Result<Example> {
    let mix = mix_at_snr(clean, noise, spec)?;
    let (_, noisy_mag) = analyze(&mix.noisy, stft_cfg)?;
    let (_, clean_mag) = analyze(clean, stft_cfg)?;
    let (_, noise_mag) = analyze(&mix.scaled_noise, stft_cfg)?;
    let target = oracle_training_mask(&clean_mag, &noise_mag, alpha)?;
    Ok(Example {
        features: lps(&noisy_mag, LPS_EPSILON).normalized(),
        target: target.into_data(),
    })
}

/// Loads every manifest entry, in manifest order.
pub fn load_examples(
    manifest: &Manifest,
    alpha: f64,
    stft_cfg: &StftConfig,
) -> Result<Vec<Example>> {
    if manifest.is_empty() {
        return Err(Error::EmptyManifest);
    }
    manifest
        .entries
        .par_iter()
        .map(|e| {
            let clean = read_wav(&e.clean_path)?;
            let noise = read_wav(&e.noise_path)?;
            prepare_example(&clean, &noise, &e.mix_spec(), alpha, stft_cfg)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean mask MSE over the epoch's training crops.
    pub train_loss: f64,
    /// Mask MSE over the full validation utterances after the epoch.
    pub validation_loss: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingHistory {
    pub fn final_validation_loss(&self) -> Option<f64> {
        self.epochs.last().and_then(|e| e.validation_loss)
    }
}

/// Loss and gradient over a minibatch, weighting every example by its number
/// of mask entries. Gradients are computed in parallel and summed in batch
/// order.
pub fn batch_gradients(
    p: &DBlstmParams,
    batch: &[(ArrayView2<f64>, ArrayView2<f64>)],
) -> Result<(f64, Weights)> {
    let per_example: Vec<(f64, usize, Weights)> = batch
        .par_iter()
        .map(|(x, t)| backward(p, *x, *t).map(|(loss, g)| (loss, t.len(), g)))
        .collect::<Result<_>>()?;
    let total: usize = per_example.iter().map(|e| e.1).sum();
    let mut grads = Weights::zeros(&p.config);
    let mut loss = 0.0;
    for (l, n, g) in &per_example {
        let w = *n as f64 / total as f64;
        loss += w * l;
        grads.add_scaled(g, w);
    }
    Ok((loss, grads))
}

/// Mask MSE over whole utterances.
pub fn evaluate_loss(p: &DBlstmParams, examples: &[Example]) -> Result<f64> {
    let sums: Vec<(f64, usize)> = examples
        .par_iter()
        .map(|e| {
            let y = forward_normalized(p, e.features.view())?;
            let sse: f64 = y
                .iter()
                .zip(e.target.iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            Ok((sse, y.len()))
        })
        .collect::<Result<_>>()?;
    let (sse, n) = sums.iter().fold((0.0, 0), |(s, c), (a, b)| (s + a, c + b));
    Ok(sse / n as f64)
}

/// Splits the manifest (seeded), loads it, and trains.
pub fn train(
    manifest: &Manifest,
    cfg: &TrainConfig,
    net_cfg: &NetConfig,
) -> Result<(DBlstmParams, TrainingHistory)> {
    cfg.validate()?;
    let examples = load_examples(manifest, cfg.alpha, &cfg.stft)?;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_5a11));
    let held = if examples.len() > 1 {
        ((examples.len() as f64 * cfg.validation_fraction).ceil() as usize).min(examples.len() - 1)
    } else {
        0
    };
    let valid_idx: Vec<usize> = order[order.len() - held..].to_vec();
    let mut train_set = Vec::new();
    let mut valid_set = Vec::new();
    for (i, e) in examples.into_iter().enumerate() {
        if valid_idx.contains(&i) {
            valid_set.push(e);
        } else {
            train_set.push(e);
        }
    }
    train_on_examples(&train_set, &valid_set, cfg, net_cfg)
}

/// Trains on prepared examples; `validation` may be empty.
pub fn train_on_examples(
    train_set: &[Example],
    validation: &[Example],
    cfg: &TrainConfig,
    net_cfg: &NetConfig,
) -> Result<(DBlstmParams, TrainingHistory)> {
    cfg.validate()?;
    net_cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyManifest);
    }
    if let Some(e) = train_set
        .iter()
        .chain(validation)
        .find(|e| e.features.ncols() != net_cfg.feat_dim)
    {
        return Err(Error::ShapeMismatch(format!(
            "example has {} bins, network expects {}",
            e.features.ncols(),
            net_cfg.feat_dim
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = init_params(net_cfg, cfg.alpha, rng.gen())?;
    let mut adam = AdamState::new(&params);
    let seg = cfg.segment_frames();
    let mut history = TrainingHistory::default();

    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at_epoch(epoch);
        let mut order: Vec<usize> = (0..train_set.len())
            .flat_map(|i| std::iter::repeat_n(i, cfg.crops_per_clip))
            .collect();
        order.shuffle(&mut rng);
        let crops: Vec<(usize, usize, usize)> = order
            .into_iter()
            .map(|i| {
                let frames = train_set[i].frames();
                if frames <= seg {
                    (i, 0, frames)
                } else {
                    (i, rng.gen_range(0..=frames - seg), seg)
                }
            })
            .collect();

        let (mut sse, mut count) = (0.0, 0usize);
        for (step, chunk) in crops.chunks(cfg.minibatch).enumerate() {
            let batch: Vec<_> = chunk
                .iter()
                .map(|&(i, start, len)| {
                    let e = &train_set[i];
                    (
                        e.features.slice(s![start..start + len, ..]),
                        e.target.slice(s![start..start + len, ..]),
                    )
                })
                .collect();
            let (loss, grads) = batch_gradients(&params, &batch)?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step, loss });
            }
            let n: usize = batch.iter().map(|b| b.1.len()).sum();
            sse += loss * n as f64;
            count += n;
            adam_step(&mut params, &grads, &mut adam, lr, &cfg.adam)?;
        }
        let validation_loss = if validation.is_empty() {
            None
        } else {
            Some(evaluate_loss(&params, validation)?)
        };
        history.epochs.push(EpochRecord {
            epoch,
            lr,
            train_loss: sse / count as f64,
            validation_loss,
        });
    }
    Ok((params, history))
}
