//! Seeded randomness helpers; every stochastic choice in the crate flows from
//! an explicit `u64` seed so equal configurations reproduce byte-identical
//! outputs.

use crate::grid::GridFunction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream for a named sub-task.
pub fn substream(seed: u64, tag: &str) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

/// Random band-limited real function: mean plus modes `1..=max_mode` with
/// amplitudes drawn uniformly from `[-amplitude, amplitude]`.
pub fn band_limited(
    rng: &mut ChaCha8Rng,
    n: usize,
    mean: f64,
    amplitude: f64,
    max_mode: usize,
) -> GridFunction {
    let coeffs: Vec<(f64, f64)> = (0..max_mode)
        .map(|_| {
            (
                rng.gen_range(-amplitude..=amplitude),
                rng.gen_range(-amplitude..=amplitude),
            )
        })
        .collect();
    GridFunction::from_fn(n, |x| {
        mean + coeffs
            .iter()
            .enumerate()
            .map(|(i, &(s, c))| {
                let k = (i + 1) as f64;
                s * (k * x).sin() + c * (k * x).cos()
            })
            .sum::<f64>()
    })
}
