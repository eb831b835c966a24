//! The vectorized forward pass against a plain nested-loop implementation.

mod common;

use common::{oracle_forward, random_matrix, random_net};
use warpmask::neural::{forward_normalized, NetConfig};

#[test]
fn matches_scalar_loops() {
    let cases = [
        (NetConfig::tiny(4, 1, 3), 5),
        (NetConfig::tiny(6, 2, 2), 6),
        (NetConfig::tiny(1, 0, 1), 3),
        (
            NetConfig {
                num_blstm_layers: 1,
                ..NetConfig::tiny(5, 1, 4)
            },
            4,
        ),
        (
            NetConfig {
                num_blstm_layers: 2,
                ..NetConfig::tiny(8, 3, 4)
            },
            6,
        ),
        (NetConfig::tiny(3, 1, 2), 1),
    ];
    for (i, (cfg, frames)) in cases.into_iter().enumerate() {
        let p = random_net(cfg, 10 + i as u64);
        let x = random_matrix(frames, cfg.feat_dim, -2.0, 2.0, 100 + i as u64);
        let got = forward_normalized(&p, x.view()).unwrap();
        let want = oracle_forward(&p, &x);
        let err = got
            .iter()
            .zip(want.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-12, "case {i}: max error {err:e}");
    }
}

#[test]
fn bidirectional_context_reaches_both_ends() {
    // perturbing the last frame must change the first output, and vice versa
    let cfg = NetConfig::tiny(3, 0, 2);
    let p = random_net(cfg, 3);
    let x = random_matrix(6, 3, -1.0, 1.0, 4);
    let base = forward_normalized(&p, x.view()).unwrap();
    let mut late = x.clone();
    late[[5, 0]] += 1.0;
    let mut early = x.clone();
    early[[0, 0]] += 1.0;
    let y_late = forward_normalized(&p, late.view()).unwrap();
    let y_early = forward_normalized(&p, early.view()).unwrap();
    assert_ne!(base.row(0), y_late.row(0));
    assert_ne!(base.row(5), y_early.row(5));
}
