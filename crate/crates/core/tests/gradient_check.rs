//! Analytic gradients against central finite differences.

mod common;

use std::time::Instant;

use common::{gradient_check_case, TOL};

#[test]
fn random_tiny_configurations() {
    let start = Instant::now();
    for case in 0..12u64 {
        let (cfg, frames, worst) = gradient_check_case(case);
        assert!(
            worst < TOL,
            "case {case} {cfg:?} frames {frames}: relative error {worst:e}"
        );
    }
    assert!(start.elapsed().as_secs_f64() < 60.0);
}
