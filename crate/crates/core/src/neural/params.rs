use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::NetConfig;
use crate::error::{Error, Result};

/// Weights of one LSTM direction. Gate columns are ordered input, forget,
/// candidate, output, `h` columns each.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmDirection {
    /// `in x 4h`
    pub w_ih: Array2<f64>,
    /// `h x 4h`
    pub w_hh: Array2<f64>,
    /// `4h`
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlstmBlock {
    pub forward: LstmDirection,
    pub backward: LstmDirection,
    /// `2h x f`
    pub proj_w: Array2<f64>,
    pub proj_b: Array1<f64>,
}

/// Every learnable tensor. Also used for gradients and optimizer moments.
///
/// The convolution weight is stored flattened as `(kernel * f) x f`, row
/// `j * f + i` holding tap `j` of input channel `i`; this is the row-major
/// layout of a `kernel x in x out` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub conv_w: Array2<f64>,
    pub conv_b: Array1<f64>,
    pub blocks: Vec<BlstmBlock>,
    pub fc1_w: Array2<f64>,
    pub fc1_b: Array1<f64>,
    pub fc2_w: Array2<f64>,
    pub fc2_b: Array1<f64>,
}

fn lstm_zeros(input: usize, h: usize) -> LstmDirection {
    LstmDirection {
        w_ih: Array2::zeros((input, 4 * h)),
        w_hh: Array2::zeros((h, 4 * h)),
        bias: Array1::zeros(4 * h),
    }
}

impl Weights {
    pub fn zeros(cfg: &NetConfig) -> Self {
        let f = cfg.feat_dim;
        let h = cfg.hidden;
        Self {
            conv_w: Array2::zeros((cfg.kernel() * f, f)),
            conv_b: Array1::zeros(f),
            blocks: (0..cfg.num_blstm_layers)
                .map(|k| BlstmBlock {
                    forward: lstm_zeros(cfg.block_input_dim(k), h),
                    backward: lstm_zeros(cfg.block_input_dim(k), h),
                    proj_w: Array2::zeros((2 * h, f)),
                    proj_b: Array1::zeros(f),
                })
                .collect(),
            fc1_w: Array2::zeros((f, cfg.fc_dim)),
            fc1_b: Array1::zeros(cfg.fc_dim),
            fc2_w: Array2::zeros((cfg.fc_dim, f)),
            fc2_b: Array1::zeros(f),
        }
    }

    /// All tensors as flat slices, in serialization order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![slice(&self.conv_w), self.conv_b.as_slice().unwrap()];
        for b in &self.blocks {
            for d in [&b.forward, &b.backward] {
                out.push(slice(&d.w_ih));
                out.push(slice(&d.w_hh));
                out.push(d.bias.as_slice().unwrap());
            }
            out.push(slice(&b.proj_w));
            out.push(b.proj_b.as_slice().unwrap());
        }
        out.push(slice(&self.fc1_w));
        out.push(self.fc1_b.as_slice().unwrap());
        out.push(slice(&self.fc2_w));
        out.push(self.fc2_b.as_slice().unwrap());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![
            self.conv_w.as_slice_mut().unwrap(),
            self.conv_b.as_slice_mut().unwrap(),
        ];
        for b in &mut self.blocks {
            for d in [&mut b.forward, &mut b.backward] {
                out.push(d.w_ih.as_slice_mut().unwrap());
                out.push(d.w_hh.as_slice_mut().unwrap());
                out.push(d.bias.as_slice_mut().unwrap());
            }
            out.push(b.proj_w.as_slice_mut().unwrap());
            out.push(b.proj_b.as_slice_mut().unwrap());
        }
        out.push(self.fc1_w.as_slice_mut().unwrap());
        out.push(self.fc1_b.as_slice_mut().unwrap());
        out.push(self.fc2_w.as_slice_mut().unwrap());
        out.push(self.fc2_b.as_slice_mut().unwrap());
        out
    }

    pub fn num_values(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Tensor lengths in order, used to check two weight sets line up.
    pub fn layout(&self) -> Vec<usize> {
        self.tensors().iter().map(|t| t.len()).collect()
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Weights, scale: f64) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }
}

fn slice(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("weights are kept in standard layout")
}

/// A trained (or freshly initialized) network together with the training
/// warp its targets used.
#[derive(Debug, Clone, PartialEq)]
pub struct DBlstmParams {
    pub config: NetConfig,
    pub weights: Weights,
    pub alpha_trained: f64,
}

fn draw_uniform(a: &mut [f64], fan_in: usize, rng: &mut ChaCha8Rng) {
    let bound = 1.0 / (fan_in as f64).sqrt();
    for v in a {
        *v = rng.gen_range(-bound..bound);
    }
}

/// Uniform `+-1/sqrt(fan_in)` weights, forget-gate biases 1, other biases 0.
pub fn init_params(cfg: &NetConfig, alpha: f64, seed: u64) -> Result<DBlstmParams> {
    cfg.validate()?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidWarp(format!("alpha = {alpha}, must be > 0")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = Weights::zeros(cfg);
    let h = cfg.hidden;
    let fan_conv = cfg.kernel() * cfg.feat_dim;
    draw_uniform(w.conv_w.as_slice_mut().unwrap(), fan_conv, &mut rng);
    for (k, block) in w.blocks.iter_mut().enumerate() {
        for dir in [&mut block.forward, &mut block.backward] {
            draw_uniform(
                dir.w_ih.as_slice_mut().unwrap(),
                cfg.block_input_dim(k),
                &mut rng,
            );
            draw_uniform(dir.w_hh.as_slice_mut().unwrap(), h, &mut rng);
            dir.bias.slice_mut(ndarray::s![h..2 * h]).fill(1.0);
        }
        draw_uniform(block.proj_w.as_slice_mut().unwrap(), 2 * h, &mut rng);
    }
    draw_uniform(w.fc1_w.as_slice_mut().unwrap(), cfg.feat_dim, &mut rng);
    draw_uniform(w.fc2_w.as_slice_mut().unwrap(), cfg.fc_dim, &mut rng);
    Ok(DBlstmParams {
        config: *cfg,
        weights: w,
        alpha_trained: alpha,
    })
}

pub const MODEL_MAGIC: &[u8; 9] = b"WARPMASK1";

/// `WARPMASK1`, `u32` f, n, h, layers, `f64` alpha, then every tensor as
/// little-endian `f64` in [`Weights::tensors`] order.
pub fn encode_model(p: &DBlstmParams) -> Vec<u8> {
    let c = &p.config;
    let mut out = Vec::with_capacity(9 + 16 + 8 + 8 * p.weights.num_values());
    out.extend_from_slice(MODEL_MAGIC);
    for v in [c.feat_dim, c.context, c.hidden, c.num_blstm_layers] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&p.alpha_trained.to_le_bytes());
    for t in p.weights.tensors() {
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<DBlstmParams> {
    let header = MODEL_MAGIC.len() + 16 + 8;
    if bytes.len() < header || &bytes[..MODEL_MAGIC.len()] != MODEL_MAGIC {
        return Err(Error::CorruptModel("missing WARPMASK1 header".into()));
    }
    let u32_at = |i: usize| {
        let at = MODEL_MAGIC.len() + 4 * i;
        u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize
    };
    let feat_dim = u32_at(0);
    let config = NetConfig {
        feat_dim,
        context: u32_at(1),
        hidden: u32_at(2),
        num_blstm_layers: u32_at(3),
        fc_dim: feat_dim,
    };
    config
        .validate()
        .map_err(|e| Error::CorruptModel(e.to_string()))?;
    let at = MODEL_MAGIC.len() + 16;
    let alpha_trained = f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    if !(alpha_trained > 0.0 && alpha_trained.is_finite()) {
        return Err(Error::CorruptModel(format!(
            "alpha_trained = {alpha_trained}"
        )));
    }
    let mut weights = Weights::zeros(&config);
    let body = &bytes[header..];
    if body.len() != 8 * weights.num_values() {
        return Err(Error::CorruptModel(format!(
            "expected {} parameter bytes for {config:?}, found {}",
            8 * weights.num_values(),
            body.len()
        )));
    }
    let mut values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    for t in weights.tensors_mut() {
        for v in t.iter_mut() {
            *v = values.next().unwrap();
        }
    }
    if !weights.is_finite() {
        return Err(Error::CorruptModel("non-finite parameter".into()));
    }
    Ok(DBlstmParams {
        config,
        weights,
        alpha_trained,
    })
}

pub fn write_model(path: impl AsRef<Path>, p: &DBlstmParams) -> Result<()> {
    fs::write(path, encode_model(p))?;
    Ok(())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<DBlstmParams> {
    decode_model(&fs::read(path)?)
}
