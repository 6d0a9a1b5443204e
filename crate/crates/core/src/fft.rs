//! Shared FFT plans, cached per grid size.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

#[derive(Clone)]
pub struct Plans {
    pub forward: Arc<dyn Fft<f64>>,
    pub inverse: Arc<dyn Fft<f64>>,
}

fn cache() -> &'static Mutex<HashMap<usize, Plans>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Plans>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

pub fn plans(n: usize) -> Plans {
    let mut map = cache().lock().unwrap();
    map.entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Plans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            }
        })
        .clone()
}

/// Forward transform of real samples into coefficients normalized so that
/// `u(x_j) = sum_k uhat_k exp(i k x_j)` with the usual DFT index order
/// (`k = i` for `i <= n/2`, `k = i - n` beyond).
pub fn forward(values: &[f64]) -> Vec<Complex64> {
    let n = values.len();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plans(n).forward.process(&mut buf);
    let scale = 1.0 / n as f64;
    for c in &mut buf {
        *c *= scale;
    }
    buf
}

/// Inverse of [`forward`]; returns the real parts of the synthesized samples.
pub fn inverse(coeffs: &[Complex64]) -> Vec<f64> {
    let mut buf = coeffs.to_vec();
    plans(coeffs.len()).inverse.process(&mut buf);
    buf.iter().map(|c| c.re).collect()
}

/// Signed wavenumber for slot `i` of an `n`-point transform.
#[inline]
pub fn wavenumber(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}
