//! Flat `key = value` run configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::neural::{NetConfig, TrainConfig};
use crate::pipeline::{DEFAULT_GAMMAS, DEFAULT_SNRS};
use crate::spectral::StftConfig;

/// Every recognised key, in the order `to_text` echoes them.
pub const KEYS: [&str; 20] = [
    "manifest",
    "model",
    "out",
    "fft_size",
    "hop",
    "context",
    "hidden",
    "layers",
    "alpha",
    "lr0",
    "lr_decay",
    "minibatch",
    "segment_s",
    "epochs",
    "crops_per_clip",
    "validation_fraction",
    "seed",
    "gamma",
    "gammas",
    "snrs",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub stft: StftConfig,
    pub net: NetConfig,
    pub train: TrainConfig,
    pub gamma: f64,
    pub gammas: Vec<f64>,
    pub snrs: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            model: None,
            out: None,
            stft: StftConfig::default(),
            net: NetConfig::desk(),
            train: TrainConfig::desk(1.5),
            gamma: 1.0,
            gammas: DEFAULT_GAMMAS.to_vec(),
            snrs: DEFAULT_SNRS.to_vec(),
        }
    }
}

/// Parses `0, 0.5,1.5` into numbers.
pub fn parse_list(value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Config(format!("{s:?} is not a finite number")))
        })
        .collect()
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Applies one setting. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "manifest" => self.manifest = opt_path(value),
            "model" => self.model = opt_path(value),
            "out" => self.out = opt_path(value),
            "fft_size" => {
                self.stft.fft_size = num(key, value)?;
                self.net.feat_dim = self.stft.fft_size / 2 + 1;
                self.net.fc_dim = self.net.feat_dim;
            }
            "hop" => self.stft.hop = num(key, value)?,
            "context" => self.net.context = num(key, value)?,
            "hidden" => self.net.hidden = num(key, value)?,
            "layers" => self.net.num_blstm_layers = num(key, value)?,
            "alpha" => self.train.alpha = num(key, value)?,
            "lr0" => self.train.lr0 = num(key, value)?,
            "lr_decay" => self.train.lr_decay_per_epoch = num(key, value)?,
            "minibatch" => self.train.minibatch = num(key, value)?,
            "segment_s" => self.train.segment_s = num(key, value)?,
            "epochs" => self.train.epochs = num(key, value)?,
            "crops_per_clip" => self.train.crops_per_clip = num(key, value)?,
            "validation_fraction" => self.train.validation_fraction = num(key, value)?,
            "seed" => self.train.seed = num(key, value)?,
            "gamma" => self.gamma = num(key, value)?,
            "gammas" => self.gammas = parse_list(value)?,
            "snrs" => self.snrs = parse_list(value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        self.train.stft = self.stft;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        self.net.validate()?;
        self.train.validate()?;
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidWarp(format!("gamma = {}", self.gamma)));
        }
        if self.gammas.iter().any(|g| *g < 0.0) {
            return Err(Error::InvalidWarp("gammas must be >= 0".into()));
        }
        Ok(())
    }

    /// Every setting as `key=value` lines, for run logs.
    pub fn to_text(&self) -> String {
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        };
        let mut out = String::new();
        for key in KEYS {
            let value = match key {
                "manifest" => path(&self.manifest),
                "model" => path(&self.model),
                "out" => path(&self.out),
                "fft_size" => self.stft.fft_size.to_string(),
                "hop" => self.stft.hop.to_string(),
                "context" => self.net.context.to_string(),
                "hidden" => self.net.hidden.to_string(),
                "layers" => self.net.num_blstm_layers.to_string(),
                "alpha" => self.train.alpha.to_string(),
                "lr0" => self.train.lr0.to_string(),
                "lr_decay" => self.train.lr_decay_per_epoch.to_string(),
                "minibatch" => self.train.minibatch.to_string(),
                "segment_s" => self.train.segment_s.to_string(),
                "epochs" => self.train.epochs.to_string(),
                "crops_per_clip" => self.train.crops_per_clip.to_string(),
                "validation_fraction" => self.train.validation_fraction.to_string(),
                "seed" => self.train.seed.to_string(),
                "gamma" => self.gamma.to_string(),
                "gammas" => join(&self.gammas),
                "snrs" => join(&self.snrs),
                _ => unreachable!(),
            };
            let _ = writeln!(out, "{key}={value}");
        }
        out
    }
}
