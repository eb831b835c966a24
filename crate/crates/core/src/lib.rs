//! Mask-based speech enhancement with a training warp and a testing warp.
//!
//! A network is trained to predict `(S^2 / (S^2 + N^2))^alpha` from noisy
//! log-power spectra. At inference the prediction is raised to
//! `gamma / alpha`, which turns one trained model into a family of enhancers:
//! `gamma = 0` leaves the input alone, larger `gamma` removes more noise at
//! the cost of more speech distortion.
//!
//! ```
//! use warpmask::maskcore::{warp_mask, Mask, MaskKind};
//!
//! let predicted = Mask::filled(2, 3, 0.25, MaskKind::Predicted);
//! // trained with alpha = 1.5, evaluated at gamma = 0.75: 0.25^0.5
//! let test = warp_mask(&predicted, 1.5, 0.75).unwrap();
//! assert!((test.data()[[0, 0]] - 0.5).abs() < 1e-15);
//! ```
//!
//! The `book/` directory walks through each stage; its code blocks are
//! compiled as doc-tests of this crate.

pub mod audio_io;
pub mod config;
pub mod error;
pub mod maskcore;
pub mod metrics;
pub mod mixer;
pub mod neural;
pub mod pipeline;
pub mod spectral;

pub use audio_io::{read_wav, write_wav, Waveform};
pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/spectral.md")]
    mod spectral {}
    #[doc = include_str!("../../../book/src/masks.md")]
    mod masks {}
    #[doc = include_str!("../../../book/src/mixing.md")]
    mod mixing {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
}
