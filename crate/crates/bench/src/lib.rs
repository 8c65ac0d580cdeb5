//! Fixtures shared by the criterion benches.

use mollify::auc::{synthetic_blobs, Dataset};
use mollify::objectives::StepPlusQuadratic;
use mollify::smoothers::draw_batch;
use mollify::{Noise, Substream};

/// Separable blobs with `p` features, as used by the AUC demo.
pub fn blobs(p: usize, n_data: usize) -> Dataset {
    synthetic_blobs(
        p,
        n_data,
        4.0,
        0.5,
        &mut Substream::new(7, 0, "bench").rng(),
    )
    .expect("valid blob parameters")
}

/// `n` losses of the step-plus-quadratic objective around `theta = 0.3`.
pub fn step_losses(n: usize) -> Vec<f64> {
    let obj = StepPlusQuadratic { weight: 0.05 };
    draw_batch(
        &obj,
        &[0.3],
        0.2,
        &Noise::None,
        n,
        &Substream::new(7, 1, "bench"),
    )
    .expect("finite losses")
    .losses
}
