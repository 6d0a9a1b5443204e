//! Real periodic functions on the circle as pseudospectral grid functions.
//!
//! A [`GridFunction`] keeps both the `N` samples at `x_j = 2 pi j / N` and the
//! Fourier coefficients, consistent by construction and immutable afterwards.
//! The reflection `rho_a u(x) = u(2a - x)` and translation
//! `sigma_a u(x) = u(x + a)` are exact in spectral space.

use crate::fft;
use num_complex::Complex64;
use std::f64::consts::TAU;

/// Samples plus cached spectral coefficients of a real function on `S^1`.
#[derive(Debug, Clone)]
pub struct GridFunction {
    values: Vec<f64>,
    coeffs: Vec<Complex64>,
}

impl GridFunction {
    /// Builds from samples at `x_j = 2 pi j / N`. `N` must be a power of two,
    /// at least 16.
    pub fn from_values(values: Vec<f64>) -> Self {
        let n = values.len();
        assert!(n >= 16 && n.is_power_of_two(), "grid size {n} must be a power of two >= 16");
        let coeffs = fft::forward(&values);
        Self { values, coeffs }
    }

    /// Builds from spectral coefficients in DFT order. The coefficients are
    /// expected to be conjugate-symmetric (real function); the synthesized
    /// imaginary parts are discarded.
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Self {
        let n = coeffs.len();
        assert!(n >= 16 && n.is_power_of_two(), "grid size {n} must be a power of two >= 16");
        let values = fft::inverse(&coeffs);
        Self { values, coeffs }
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_values(vec![0.0; n])
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self::from_values(vec![c; n])
    }

    /// Samples `f` on the grid.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Self {
        Self::from_values((0..n).map(|j| f(TAU * j as f64 / n as f64)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Grid node `x_j`.
    pub fn node(&self, j: usize) -> f64 {
        TAU * j as f64 / self.len() as f64
    }

    /// Spectral derivative: coefficients multiplied by `i k`, Nyquist zeroed.
    pub fn deriv(&self) -> GridFunction {
        let n = self.len();
        let mut c = self.coeffs.clone();
        for (i, ci) in c.iter_mut().enumerate() {
            let k = fft::wavenumber(i, n);
            if i == n / 2 {
                *ci = Complex64::new(0.0, 0.0);
            } else {
                *ci *= Complex64::new(0.0, k as f64);
            }
        }
        GridFunction::from_coeffs(c)
    }

    /// Reflection through `a`: `(rho_a u)(x) = u(2a - x)`, an involution.
    pub fn reflect(&self, a: f64) -> GridFunction {
        let n = self.len();
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let k = fft::wavenumber(i, n);
            if i == n / 2 {
                // Nyquist cosine mode: reflection contributes cos(N a) on the
                // sample grid (the odd part vanishes at the nodes).
                c[i] = Complex64::new(self.coeffs[i].re * (n as f64 * a).cos(), 0.0);
            } else {
                // v_k = conj(u_k) e^{-2 i k a} under u(x) = sum u_k e^{ikx}.
                let phase = Complex64::from_polar(1.0, -2.0 * k as f64 * a);
                c[i] = self.coeffs[i].conj() * phase;
            }
        }
        GridFunction::from_coeffs(c)
    }

    /// Spatial translation: `(sigma_a u)(x) = u(x + a)`.
    pub fn translate(&self, a: f64) -> GridFunction {
        let n = self.len();
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let k = fft::wavenumber(i, n);
            if i == n / 2 {
                c[i] = Complex64::new(self.coeffs[i].re * (k as f64 * a).cos(), 0.0);
            } else {
                c[i] = self.coeffs[i] * Complex64::from_polar(1.0, k as f64 * a);
            }
        }
        GridFunction::from_coeffs(c)
    }

    /// Evaluates the trigonometric interpolant at an arbitrary point.
    pub fn eval_at(&self, x: f64) -> f64 {
        let n = self.len();
        let mut acc = self.coeffs[0].re;
        for i in 1..n / 2 {
            let k = i as f64;
            let (s, c) = (k * x).sin_cos();
            acc += 2.0 * (self.coeffs[i].re * c - self.coeffs[i].im * s);
        }
        acc + self.coeffs[n / 2].re * ((n / 2) as f64 * x).cos()
    }

    /// Derivative of the interpolant at an arbitrary point (Nyquist dropped,
    /// consistent with [`Self::deriv`]).
    pub fn deriv_at(&self, x: f64) -> f64 {
        let n = self.len();
        let mut acc = 0.0;
        for i in 1..n / 2 {
            let k = i as f64;
            let (s, c) = (k * x).sin_cos();
            acc += 2.0 * k * (-self.coeffs[i].re * s - self.coeffs[i].im * c);
        }
        acc
    }

    /// Sup norm over the grid samples.
    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    /// Discrete L2 norm, `sqrt((1/N) sum u_j^2)`; matches
    /// `sqrt(sum |u_k|^2)` by Parseval.
    pub fn l2(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.len() as f64).sqrt()
    }

    /// Same norm computed from the coefficients.
    pub fn l2_spectral(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `||u||_inf + ||u_x||_inf`, the closeness measure used by the
    /// zero-number and omega-limit analyses.
    pub fn c1_norm(&self) -> f64 {
        self.linf() + self.deriv().linf()
    }

    /// `||u||_2 + ||u_x||_2`.
    pub fn h1_norm(&self) -> f64 {
        self.l2() + self.deriv().l2()
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    /// Pointwise difference.
    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        assert_eq!(self.len(), other.len());
        GridFunction::from_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn add(&self, other: &GridFunction) -> GridFunction {
        assert_eq!(self.len(), other.len());
        GridFunction::from_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> GridFunction {
        GridFunction::from_values(self.values.iter().map(|v| v * s).collect())
    }

    /// C1 distance to another grid function.
    pub fn c1_distance(&self, other: &GridFunction) -> f64 {
        self.sub(other).c1_norm()
    }

    /// Samples the interpolant on a `factor * N` grid via zero-padded
    /// synthesis.
    pub fn refined_values(&self, factor: usize) -> Vec<f64> {
        refined_synthesis(self.len(), &self.coeffs, factor)
    }

    /// Samples the interpolant's derivative on a `factor * N` grid
    /// (Nyquist dropped, consistent with [`Self::deriv`]).
    pub fn refined_deriv_values(&self, factor: usize) -> Vec<f64> {
        let n = self.len();
        let mut c = self.coeffs.clone();
        for (i, ci) in c.iter_mut().enumerate() {
            let k = fft::wavenumber(i, n);
            if i == n / 2 {
                *ci = Complex64::default();
            } else {
                *ci *= Complex64::new(0.0, k as f64);
            }
        }
        refined_synthesis(n, &c, factor)
    }

    /// Maximum of the interpolant: dense candidates from the grid, one Newton
    /// polish of `u'(x) = 0` on the winner. Returns `(max, argmax)`.
    pub fn max_value(&self) -> (f64, f64) {
        let n = self.len();
        let refine = 4;
        let mut best_x = 0.0;
        let mut best_v = f64::NEG_INFINITY;
        for j in 0..n * refine {
            let x = TAU * j as f64 / (n * refine) as f64;
            let v = self.eval_at(x);
            if v > best_v {
                best_v = v;
                best_x = x;
            }
        }
        // Newton on the derivative; fall back to the sampled point if the
        // curvature is degenerate (e.g. constants).
        let mut x = best_x;
        for _ in 0..3 {
            let d1 = self.deriv_at(x);
            let d2 = second_deriv_at(self, x);
            if d2.abs() < 1e-14 {
                break;
            }
            let step = d1 / d2;
            if !step.is_finite() || step.abs() > TAU / n as f64 {
                break;
            }
            x -= step;
        }
        let x = x.rem_euclid(TAU);
        let v = self.eval_at(x);
        if v >= best_v {
            (v, x)
        } else {
            (best_v, best_x)
        }
    }

    /// Minimum of the interpolant, via `max_value` of the negation.
    pub fn min_value(&self) -> (f64, f64) {
        let (m, x) = self.scale(-1.0).max_value();
        (-m, x)
    }
}

fn refined_synthesis(n: usize, coeffs: &[Complex64], factor: usize) -> Vec<f64> {
    assert!(factor >= 1);
    let m = n * factor.next_power_of_two();
    if m == n {
        return fft::inverse(coeffs);
    }
    let mut padded = vec![Complex64::default(); m];
    for i in 0..n {
        let k = fft::wavenumber(i, n);
        if i == n / 2 {
            // Split the Nyquist cosine across the +-N/2 slots.
            let half = coeffs[i] * 0.5;
            padded[n / 2] = half;
            padded[m - n / 2] = half;
        } else {
            let slot = if k >= 0 { k as usize } else { (m as i64 + k) as usize };
            padded[slot] = coeffs[i];
        }
    }
    fft::inverse(&padded)
}

fn second_deriv_at(u: &GridFunction, x: f64) -> f64 {
    let n = u.len();
    let mut acc = 0.0;
    for i in 1..n / 2 {
        let k = i as f64;
        let (s, c) = (k * x).sin_cos();
        acc += 2.0 * k * k * (-u.coeffs()[i].re * c + u.coeffs()[i].im * s);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sin_x(n: usize) -> GridFunction {
        GridFunction::from_fn(n, |x| x.sin())
    }

    #[test]
    fn roundtrip_values_coeffs_values() {
        let u = GridFunction::from_fn(64, |x| (3.0 * x).sin() + 0.5 * (5.0 * x).cos() - 0.2);
        let back = GridFunction::from_coeffs(u.coeffs().to_vec());
        for (a, b) in u.values().iter().zip(back.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn conjugate_symmetry() {
        let u = GridFunction::from_fn(32, |x| x.sin() + 0.3 * (2.0 * x).cos());
        let n = u.len();
        for i in 1..n / 2 {
            let a = u.coeffs()[i];
            let b = u.coeffs()[n - i];
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-12);
            assert_abs_diff_eq!(a.im, -b.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn parseval() {
        let u = GridFunction::from_fn(64, |x| 1.3 * x.sin() - 0.4 * (7.0 * x).cos() + 0.9);
        let a = u.l2();
        let b = u.l2_spectral();
        assert!((a - b).abs() / a.max(1e-30) < 1e-10);
    }

    #[test]
    fn deriv_of_sin_is_cos() {
        let du = sin_x(64).deriv();
        for (j, &v) in du.values().iter().enumerate() {
            assert_abs_diff_eq!(v, du.node(j).cos(), epsilon = 1e-12);
        }
    }

    #[test]
    fn deriv_of_constant_is_zero() {
        let du = GridFunction::constant(32, 1.0).deriv();
        assert!(du.linf() < 1e-14);
    }

    #[test]
    fn deriv_of_sin3x() {
        let u = GridFunction::from_fn(64, |x| (3.0 * x).sin());
        let du = u.deriv();
        for (j, &v) in du.values().iter().enumerate() {
            assert_abs_diff_eq!(v, 3.0 * (3.0 * du.node(j)).cos(), epsilon = 1e-12);
        }
    }

    #[test]
    fn reflect_sin_through_zero() {
        let r = sin_x(64).reflect(0.0);
        for (j, &v) in r.values().iter().enumerate() {
            assert_abs_diff_eq!(v, -r.node(j).sin(), epsilon = 1e-12);
        }
    }

    #[test]
    fn reflect_sin_through_half_pi_is_identity() {
        let u = sin_x(64);
        let r = u.reflect(PI / 2.0);
        for (a, b) in u.values().iter().zip(r.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn reflect_matches_resampling_oracle() {
        // Direct resampling of u(2a - x_j) is the independent check for the
        // spectral implementation.
        let u = GridFunction::from_fn(
            64,
            |x| 0.7 * x.sin() + 0.2 * (4.0 * x).cos() - 0.1 * (9.0 * x).sin() + 0.05,
        );
        for &a in &[0.0, 0.3, 1.9, 4.4] {
            let r = u.reflect(a);
            for j in 0..u.len() {
                let x = u.node(j);
                assert_abs_diff_eq!(r.values()[j], u.eval_at(2.0 * a - x), epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn reflect_is_involution() {
        let u = GridFunction::from_fn(32, |x| x.sin() + 0.3 * (2.0 * x).cos());
        let r = u.reflect(1.234).reflect(1.234);
        for (a, b) in u.values().iter().zip(r.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn translate_by_zero_and_full_loop() {
        let u = GridFunction::from_fn(32, |x| x.sin() - 0.2 * (3.0 * x).cos());
        for &a in &[0.0, TAU] {
            let t = u.translate(a);
            for (x, y) in u.values().iter().zip(t.values()) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn translate_sin_by_pi() {
        let t = sin_x(64).translate(PI);
        for (j, &v) in t.values().iter().enumerate() {
            assert_abs_diff_eq!(v, -t.node(j).sin(), epsilon = 1e-12);
        }
    }

    #[test]
    fn max_of_sin() {
        let (m, x) = sin_x(64).max_value();
        assert_abs_diff_eq!(m, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(x, PI / 2.0, epsilon = 1e-6);
    }

    #[test]
    fn max_of_constant() {
        let (m, _) = GridFunction::constant(16, 3.0).max_value();
        assert_abs_diff_eq!(m, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn refined_values_match_interpolant() {
        let u = GridFunction::from_fn(32, |x| 0.4 * x.sin() - 0.3 * (5.0 * x).cos() + 0.2);
        let fine = u.refined_values(4);
        let m = fine.len();
        for (j, &v) in fine.iter().enumerate() {
            let x = TAU * j as f64 / m as f64;
            assert_abs_diff_eq!(v, u.eval_at(x), epsilon = 1e-11);
        }
        let dfine = u.refined_deriv_values(4);
        for (j, &v) in dfine.iter().enumerate() {
            let x = TAU * j as f64 / m as f64;
            assert_abs_diff_eq!(v, u.deriv_at(x), epsilon = 1e-11);
        }
    }

    #[test]
    fn max_of_two_mode_combination() {
        // Frozen from a dense 2^16-point scan with root polish:
        // max (0.3 sin x + 0.1 cos 2x) = 0.2125 at x = asin(3/4).
        let u = GridFunction::from_fn(64, |x| 0.3 * x.sin() + 0.1 * (2.0 * x).cos());
        let (m, x) = u.max_value();
        assert_abs_diff_eq!(m, 0.2125, epsilon = 1e-10);
        assert_abs_diff_eq!(x, 0.848062078981481, epsilon = 1e-6);
    }

    proptest! {
        #[test]
        fn translation_group_law(a in 0.0..TAU, b in 0.0..TAU) {
            let u = GridFunction::from_fn(32, |x| x.sin() + 0.25 * (5.0 * x).cos());
            let one = u.translate(a).translate(b);
            let two = u.translate(a + b);
            for (p, q) in one.values().iter().zip(two.values()) {
                prop_assert!((p - q).abs() < 1e-12);
            }
        }

        #[test]
        fn reflection_involution_random(a in 0.0..TAU, amp in -1.0f64..1.0) {
            let u = GridFunction::from_fn(32, |x| amp * x.sin() + 0.1 * (3.0 * x).cos());
            let r = u.reflect(a).reflect(a);
            for (p, q) in u.values().iter().zip(r.values()) {
                prop_assert!((p - q).abs() < 1e-12);
            }
        }

        #[test]
        fn interpolant_matches_nodes(seed in 0u64..1000) {
            let u = GridFunction::from_fn(32, |x| ((seed % 7 + 1) as f64 * x).sin());
            for j in 0..u.len() {
                prop_assert!((u.eval_at(u.node(j)) - u.values()[j]).abs() < 1e-11);
            }
        }
    }
}
