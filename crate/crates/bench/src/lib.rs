//! Shared fixtures for the benchmarks.

use snmix::study::model_one;
use snmix::{sample_mixture, RngHandle};

/// Model I sample of size `n` with a fixed seed.
pub fn model_one_sample(n: usize) -> Vec<f64> {
    sample_mixture(&model_one(), n, &mut RngHandle::new(42)).expect("n > 0")
}
