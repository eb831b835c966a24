use std::io;

use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt WAV header: {0}")]
    CorruptHeader(String),
    #[error("audio contains no samples")]
    EmptyAudio,
    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),
    #[error("I/O failure: {0}")]
    Io(#[from] io::Error),

    #[error("signal too short: {len} samples, need at least {needed}")]
    SignalTooShort { len: usize, needed: usize },
    #[error("invalid STFT configuration: {0}")]
    InvalidConfig(String),
    #[error("inconsistent shape: {0}")]
    InconsistentShape(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid warping factor: {0}")]
    InvalidWarp(String),

    #[error("input has zero energy: {0}")]
    ZeroEnergyInput(&'static str),
    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    RateMismatch(u32, u32),
    #[error("unknown noise kind {0:?}")]
    UnknownKind(String),

    #[error("manifest is empty")]
    EmptyManifest,
    #[error("malformed manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
    #[error("non-finite loss at epoch {epoch}, step {step}: {loss}")]
    NonFiniteLoss {
        epoch: usize,
        step: usize,
        loss: f64,
    },
    #[error("corrupt model file: {0}")]
    CorruptModel(String),

    #[error("length mismatch: {0} vs {1} samples")]
    LengthMismatch(usize, usize),
    #[error("every frame of the reference is silent")]
    AllFramesSilent,
    #[error("zero-energy signal: {0}")]
    ZeroEnergy(&'static str),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
