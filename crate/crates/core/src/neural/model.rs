//! Forward pass with activation caching and hand-written reverse mode.
//!
//! Row-vector convention throughout: a layer computes `x W + b` on a
//! `T x in` activation matrix.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};

use super::params::{DBlstmParams, LstmDirection, Weights};
use super::NetConfig;
use crate::error::{Error, Result};
use crate::maskcore::{Mask, MaskKind};
use crate::spectral::LpsFeatures;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Activations of one LSTM direction, indexed by true time.
struct DirCache {
    /// post-activation gates `[i, f, g, o]`, `T x 4h`
    gates: Array2<f64>,
    cells: Array2<f64>,
    tanh_cells: Array2<f64>,
    hidden: Array2<f64>,
}

struct BlockCache {
    input: Array2<f64>,
    fwd: DirCache,
    bwd: DirCache,
    concat: Array2<f64>,
}

struct Cache {
    im2col: Array2<f64>,
    blocks: Vec<BlockCache>,
    block_outs: Vec<Array2<f64>>,
    fc1_pre: Array2<f64>,
    fc1_out: Array2<f64>,
    output: Array2<f64>,
}

fn check_input(cfg: &NetConfig, x: &ArrayView2<f64>) -> Result<()> {
    if x.ncols() != cfg.feat_dim {
        return Err(Error::ShapeMismatch(format!(
            "input has {} bins, network expects {}",
            x.ncols(),
            cfg.feat_dim
        )));
    }
    if x.nrows() == 0 {
        return Err(Error::ShapeMismatch("input has no frames".into()));
    }
    Ok(())
}

/// Row `t` holds frames `t - n ..= t + n` side by side, zeros outside the
/// sequence.
fn im2col(x: &ArrayView2<f64>, context: usize) -> Array2<f64> {
    let (frames, f) = x.dim();
    let kernel = 2 * context + 1;
    let mut out = Array2::zeros((frames, kernel * f));
    for t in 0..frames {
        for j in 0..kernel {
            let src = t as isize + j as isize - context as isize;
            if src >= 0 && (src as usize) < frames {
                out.slice_mut(s![t, j * f..(j + 1) * f])
                    .assign(&x.row(src as usize));
            }
        }
    }
    out
}

fn add_bias(mut m: Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    m += b;
    m
}

fn lstm_forward(dir: &LstmDirection, input: &Array2<f64>, reverse: bool) -> DirCache {
    let frames = input.nrows();
    let h = dir.w_hh.nrows();
    let pre = add_bias(input.dot(&dir.w_ih), &dir.bias);
    let mut gates = Array2::zeros((frames, 4 * h));
    let mut cells = Array2::zeros((frames, h));
    let mut tanh_cells = Array2::zeros((frames, h));
    let mut hidden = Array2::zeros((frames, h));
    let mut h_prev = Array1::<f64>::zeros(h);
    let mut c_prev = Array1::<f64>::zeros(h);
    for step in 0..frames {
        let t = if reverse { frames - 1 - step } else { step };
        let a = &pre.row(t) + &h_prev.dot(&dir.w_hh);
        let mut g_row = gates.row_mut(t);
        for j in 0..h {
            let i_g = sigmoid(a[j]);
            let f_g = sigmoid(a[h + j]);
            let c_g = a[2 * h + j].tanh();
            let o_g = sigmoid(a[3 * h + j]);
            g_row[j] = i_g;
            g_row[h + j] = f_g;
            g_row[2 * h + j] = c_g;
            g_row[3 * h + j] = o_g;
            let c = f_g * c_prev[j] + i_g * c_g;
            let tc = c.tanh();
            cells[[t, j]] = c;
            tanh_cells[[t, j]] = tc;
            hidden[[t, j]] = o_g * tc;
        }
        h_prev.assign(&hidden.row(t));
        c_prev.assign(&cells.row(t));
    }
    DirCache {
        gates,
        cells,
        tanh_cells,
        hidden,
    }
}

/// Returns the gradient w.r.t. the gate pre-activations (`T x 4h`) and
/// accumulates the recurrent weight gradient.
fn lstm_backward(
    dir: &LstmDirection,
    cache: &DirCache,
    d_hidden: ArrayView2<f64>,
    reverse: bool,
    d_w_hh: &mut Array2<f64>,
) -> Array2<f64> {
    let frames = cache.hidden.nrows();
    let h = dir.w_hh.nrows();
    let mut d_pre = Array2::zeros((frames, 4 * h));
    let mut dh_next = Array1::<f64>::zeros(h);
    let mut dc_next = Array1::<f64>::zeros(h);
    for step in 0..frames {
        // walk against the direction the LSTM ran in
        let t = if reverse { step } else { frames - 1 - step };
        let prev = if reverse {
            (t + 1 < frames).then_some(t + 1)
        } else {
            t.checked_sub(1)
        };
        let g = cache.gates.row(t);
        {
            let mut da = d_pre.row_mut(t);
            for j in 0..h {
                let dh = d_hidden[[t, j]] + dh_next[j];
                let (i_g, f_g, c_g, o_g) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                let tc = cache.tanh_cells[[t, j]];
                let c_prev = prev.map_or(0.0, |p| cache.cells[[p, j]]);
                let d_o = dh * tc;
                let dc = dh * o_g * (1.0 - tc * tc) + dc_next[j];
                da[j] = dc * c_g * i_g * (1.0 - i_g);
                da[h + j] = dc * c_prev * f_g * (1.0 - f_g);
                da[2 * h + j] = dc * i_g * (1.0 - c_g * c_g);
                da[3 * h + j] = d_o * o_g * (1.0 - o_g);
                dc_next[j] = dc * f_g;
            }
        }
        let da = d_pre.row(t);
        dh_next = dir.w_hh.dot(&da);
        if let Some(p) = prev {
            let h_prev = cache.hidden.row(p);
            for (r, &hv) in h_prev.iter().enumerate() {
                if hv != 0.0 {
                    d_w_hh.row_mut(r).scaled_add(hv, &da);
                }
            }
        }
    }
    d_pre
}

fn run_forward(p: &DBlstmParams, x: &ArrayView2<f64>) -> Result<Cache> {
    let cfg = &p.config;
    check_input(cfg, x)?;
    let w = &p.weights;
    let h = cfg.hidden;
    let im2col = im2col(x, cfg.context);
    let conv_out = add_bias(im2col.dot(&w.conv_w), &w.conv_b);

    let mut block_outs: Vec<Array2<f64>> = vec![conv_out];
    let mut blocks = Vec::with_capacity(w.blocks.len());
    for block in &w.blocks {
        let views: Vec<_> = block_outs.iter().map(|a| a.view()).collect();
        let input = concatenate(Axis(1), &views).expect("block outputs share frame count");
        let fwd = lstm_forward(&block.forward, &input, false);
        let bwd = lstm_forward(&block.backward, &input, true);
        let concat = concatenate(Axis(1), &[fwd.hidden.view(), bwd.hidden.view()])
            .expect("directions share frame count");
        debug_assert_eq!(concat.ncols(), 2 * h);
        let out = add_bias(concat.dot(&block.proj_w), &block.proj_b);
        blocks.push(BlockCache {
            input,
            fwd,
            bwd,
            concat,
        });
        block_outs.push(out);
    }
    let last = block_outs.last().unwrap();
    let fc1_pre = add_bias(last.dot(&w.fc1_w), &w.fc1_b);
    let fc1_out = fc1_pre.mapv(|v| v.max(0.0));
    let output = add_bias(fc1_out.dot(&w.fc2_w), &w.fc2_b).mapv(sigmoid);
    Ok(Cache {
        im2col,
        blocks,
        block_outs,
        fc1_pre,
        fc1_out,
        output,
    })
}

/// Runs the network on already-normalized features, `T x f` in, `T x f`
/// sigmoid outputs out.
pub fn forward_normalized(p: &DBlstmParams, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    Ok(run_forward(p, &x)?.output)
}

/// Predicts the training-warped mask for one utterance of LPS features. The
/// features are mean/variance normalized per bin first.
pub fn forward(p: &DBlstmParams, x: &LpsFeatures) -> Result<Mask> {
    let normalized = x.normalized();
    let out = forward_normalized(p, normalized.view())?;
    Mask::new(out, MaskKind::Predicted)
}

/// Mean squared error over all entries.
pub fn loss_mse(pred: &Array2<f64>, target: &Array2<f64>) -> Result<f64> {
    if pred.dim() != target.dim() {
        return Err(Error::ShapeMismatch(format!(
            "prediction {:?} vs target {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    if pred.is_empty() {
        return Err(Error::ShapeMismatch("empty mask".into()));
    }
    let sum: f64 = pred
        .iter()
        .zip(target.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Loss and exact gradient of `loss_mse(forward_normalized(p, x), target)`
/// with respect to every weight.
pub fn backward(
    p: &DBlstmParams,
    x: ArrayView2<f64>,
    target: ArrayView2<f64>,
) -> Result<(f64, Weights)> {
    let cache = run_forward(p, &x)?;
    if target.dim() != cache.output.dim() {
        return Err(Error::ShapeMismatch(format!(
            "target {:?} vs output {:?}",
            target.dim(),
            cache.output.dim()
        )));
    }
    let cfg = &p.config;
    let w = &p.weights;
    let f = cfg.feat_dim;
    let mut g = Weights::zeros(cfg);

    let y = &cache.output;
    let diff = y - &target;
    let count = y.len() as f64;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / count;

    // through the sigmoid
    let d_fc2_pre = Array2::from_shape_fn(y.dim(), |(t, k)| {
        let yv = y[[t, k]];
        2.0 * diff[[t, k]] / count * yv * (1.0 - yv)
    });
    g.fc2_w = cache.fc1_out.t().dot(&d_fc2_pre);
    g.fc2_b = d_fc2_pre.sum_axis(Axis(0));
    let mut d_fc1_pre = d_fc2_pre.dot(&w.fc2_w.t());
    ndarray::Zip::from(&mut d_fc1_pre)
        .and(&cache.fc1_pre)
        .for_each(|d, &pre| {
            if pre <= 0.0 {
                *d = 0.0
            }
        });
    let last = cache.block_outs.last().unwrap();
    g.fc1_w = last.t().dot(&d_fc1_pre);
    g.fc1_b = d_fc1_pre.sum_axis(Axis(0));

    // gradients w.r.t. the conv output (slot 0) and each block output
    let mut d_outs: Vec<Array2<f64>> = cache
        .block_outs
        .iter()
        .map(|o| Array2::zeros(o.dim()))
        .collect();
    *d_outs.last_mut().unwrap() = d_fc1_pre.dot(&w.fc1_w.t());

    for k in (0..w.blocks.len()).rev() {
        let block = &w.blocks[k];
        let bc = &cache.blocks[k];
        let gb = &mut g.blocks[k];
        let d_out = std::mem::take(&mut d_outs[k + 1]);
        gb.proj_w = bc.concat.t().dot(&d_out);
        gb.proj_b = d_out.sum_axis(Axis(0));
        let d_concat = d_out.dot(&block.proj_w.t());
        let h = cfg.hidden;

        let d_pre_f = lstm_backward(
            &block.forward,
            &bc.fwd,
            d_concat.slice(s![.., ..h]),
            false,
            &mut gb.forward.w_hh,
        );
        let d_pre_b = lstm_backward(
            &block.backward,
            &bc.bwd,
            d_concat.slice(s![.., h..]),
            true,
            &mut gb.backward.w_hh,
        );
        gb.forward.w_ih = bc.input.t().dot(&d_pre_f);
        gb.forward.bias = d_pre_f.sum_axis(Axis(0));
        gb.backward.w_ih = bc.input.t().dot(&d_pre_b);
        gb.backward.bias = d_pre_b.sum_axis(Axis(0));

        let d_input = d_pre_f.dot(&block.forward.w_ih.t()) + d_pre_b.dot(&block.backward.w_ih.t());
        // input columns are [conv, B1, ..., B_k]
        for (m, d) in d_outs.iter_mut().enumerate().take(k + 1) {
            *d += &d_input.slice(s![.., m * f..(m + 1) * f]);
        }
    }

    let d_conv = &d_outs[0];
    g.conv_w = cache.im2col.t().dot(d_conv);
    g.conv_b = d_conv.sum_axis(Axis(0));
    Ok((loss, g))
}
