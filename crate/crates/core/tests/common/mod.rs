#![allow(dead_code, clippy::needless_range_loop)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use warpmask::neural::{
    backward, forward_normalized, init_params, loss_mse, DBlstmParams, LstmDirection, NetConfig,
};

/// A tiny network with every tensor, biases included, drawn from `U(-0.5, 0.5)`.
pub fn random_net(cfg: NetConfig, seed: u64) -> DBlstmParams {
    let mut p = init_params(&cfg, 1.0, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
    for t in p.weights.tensors_mut() {
        for v in t.iter_mut() {
            *v = rng.gen_range(-0.5..0.5);
        }
    }
    p
}

pub fn random_matrix(rows: usize, cols: usize, lo: f64, hi: f64, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(lo..hi))
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn affine(x: &[Vec<f64>], w: &Array2<f64>, b: &[f64]) -> Vec<Vec<f64>> {
    x.iter()
        .map(|row| {
            (0..w.ncols())
                .map(|o| b[o] + (0..w.nrows()).map(|i| row[i] * w[[i, o]]).sum::<f64>())
                .collect()
        })
        .collect()
}

fn lstm(dir: &LstmDirection, x: &[Vec<f64>], reverse: bool) -> Vec<Vec<f64>> {
    let frames = x.len();
    let h = dir.w_hh.nrows();
    let mut out = vec![vec![0.0; h]; frames];
    let mut hp = vec![0.0; h];
    let mut cp = vec![0.0; h];
    let order: Vec<usize> = if reverse {
        (0..frames).rev().collect()
    } else {
        (0..frames).collect()
    };
    for t in order {
        let mut hn = vec![0.0; h];
        let mut cn = vec![0.0; h];
        for j in 0..h {
            let pre = |gate: usize| {
                let col = gate * h + j;
                let mut a = dir.bias[col];
                for (i, xv) in x[t].iter().enumerate() {
                    a += xv * dir.w_ih[[i, col]];
                }
                for (r, hv) in hp.iter().enumerate() {
                    a += hv * dir.w_hh[[r, col]];
                }
                a
            };
            let ig = sig(pre(0));
            let fg = sig(pre(1));
            let gg = pre(2).tanh();
            let og = sig(pre(3));
            cn[j] = fg * cp[j] + ig * gg;
            hn[j] = og * cn[j].tanh();
        }
        out[t] = hn.clone();
        hp = hn;
        cp = cn;
    }
    out
}

/// Plain nested loops, no ndarray arithmetic.
pub fn oracle_forward(p: &DBlstmParams, x: &Array2<f64>) -> Array2<f64> {
    let cfg = p.config;
    let w = &p.weights;
    let (frames, f) = x.dim();
    let n = cfg.context as isize;

    // temporal convolution, zero-padded
    let mut conv = vec![vec![0.0; f]; frames];
    for t in 0..frames {
        for o in 0..f {
            let mut acc = w.conv_b[o];
            for j in 0..cfg.kernel() {
                let src = t as isize + j as isize - n;
                if src < 0 || src >= frames as isize {
                    continue;
                }
                for i in 0..f {
                    acc += x[[src as usize, i]] * w.conv_w[[j * f + i, o]];
                }
            }
            conv[t][o] = acc;
        }
    }

    let mut outs = vec![conv];
    for block in &w.blocks {
        let input: Vec<Vec<f64>> = (0..frames)
            .map(|t| outs.iter().flat_map(|o| o[t].iter().copied()).collect())
            .collect();
        let fw = lstm(&block.forward, &input, false);
        let bw = lstm(&block.backward, &input, true);
        let both: Vec<Vec<f64>> = (0..frames)
            .map(|t| fw[t].iter().chain(&bw[t]).copied().collect())
            .collect();
        outs.push(affine(
            &both,
            &block.proj_w,
            block.proj_b.as_slice().unwrap(),
        ));
    }
    let hidden: Vec<Vec<f64>> = affine(outs.last().unwrap(), &w.fc1_w, w.fc1_b.as_slice().unwrap())
        .into_iter()
        .map(|r| r.into_iter().map(|v| v.max(0.0)).collect())
        .collect();
    let y = affine(&hidden, &w.fc2_w, w.fc2_b.as_slice().unwrap());
    Array2::from_shape_fn((frames, f), |(t, k)| sig(y[t][k]))
}

pub const STEP: f64 = 1e-5;
pub const TOL: f64 = 1e-4;
pub const DENOM_FLOOR: f64 = 1e-6;

fn loss(p: &DBlstmParams, x: &Array2<f64>, target: &Array2<f64>) -> f64 {
    loss_mse(&forward_normalized(p, x.view()).unwrap(), target).unwrap()
}

/// Worst relative error over every parameter.
pub fn check(p: &mut DBlstmParams, x: &Array2<f64>, target: &Array2<f64>) -> f64 {
    let (l, grads) = backward(p, x.view(), target.view()).unwrap();
    assert!((l - loss(p, x, target)).abs() < 1e-14);
    let analytic: Vec<f64> = grads.tensors().concat();
    let mut worst = 0.0f64;
    let mut idx = 0;
    let n_tensors = p.weights.tensors().len();
    for ti in 0..n_tensors {
        let len = p.weights.tensors()[ti].len();
        for k in 0..len {
            let orig = p.weights.tensors_mut()[ti][k];
            p.weights.tensors_mut()[ti][k] = orig + STEP;
            let up = loss(p, x, target);
            p.weights.tensors_mut()[ti][k] = orig - STEP;
            let down = loss(p, x, target);
            p.weights.tensors_mut()[ti][k] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let a = analytic[idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(DENOM_FLOOR);
            worst = worst.max(rel);
            idx += 1;
        }
    }
    assert_eq!(idx, analytic.len());
    worst
}

/// Draws tiny configuration number `case` (f <= 8, h <= 4, at most 6 frames)
/// and returns its worst relative gradient error.
pub fn gradient_check_case(case: u64) -> (NetConfig, usize, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024 + case);
    let cfg = NetConfig {
        num_blstm_layers: rng.gen_range(1..=3),
        ..NetConfig::tiny(
            rng.gen_range(1..=8),
            rng.gen_range(0..=2),
            rng.gen_range(1..=4),
        )
    };
    let frames = rng.gen_range(1..=6);
    let mut p = random_net(cfg, 500 + case);
    let x = random_matrix(frames, cfg.feat_dim, -1.5, 1.5, 600 + case);
    let target = random_matrix(frames, cfg.feat_dim, 0.0, 1.0, 700 + case);
    let worst = check(&mut p, &x, &target);
    (cfg, frames, worst)
}
