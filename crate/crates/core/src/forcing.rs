//! The nonlinearity `f(t, u, p)` with its reflection-symmetry contract and
//! hull (time-translation) flow.
//!
//! Every built-in kind is structurally even in `p = u_x`, so
//! `f(t,u,p) = f(t,u,-p)` holds exactly: the scalar-linear and pendulum kinds
//! have no `p` dependence at all, and the autonomous kind depends on `p` only
//! through `q = p^2`.

use crate::error::Error;
use crate::signal::QuasiPeriodicSum;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Polynomial in `(u, q)` with `q = p^2`; the general form of the built-in
/// autonomous reflection-symmetric nonlinearities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvenPoly {
    /// Terms `(u_power, q_power, coefficient)`.
    pub terms: Vec<(u32, u32, f64)>,
}

impl EvenPoly {
    /// `h(u, q) = u - u^3`, the bistable cubic.
    pub fn bistable() -> Self {
        Self {
            terms: vec![(1, 0, 1.0), (3, 0, -1.0)],
        }
    }

    pub fn eval(&self, u: f64, q: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(i, j, c)| c * u.powi(i as i32) * q.powi(j as i32))
            .sum()
    }

    /// `dh/du`.
    pub fn du(&self, u: f64, q: f64) -> f64 {
        self.terms
            .iter()
            .filter(|&&(i, _, _)| i > 0)
            .map(|&(i, j, c)| c * i as f64 * u.powi(i as i32 - 1) * q.powi(j as i32))
            .sum()
    }

    /// `dh/dq`.
    pub fn dq(&self, u: f64, q: f64) -> f64 {
        self.terms
            .iter()
            .filter(|&&(_, j, _)| j > 0)
            .map(|&(i, j, c)| c * j as f64 * u.powi(i as i32) * q.powi(j as i32 - 1))
            .sum()
    }

    /// Degree in `u` of the expanded polynomial in `(u, p)`; drives the
    /// dealiasing default.
    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|&(i, j, _)| i + 2 * j)
            .max()
            .unwrap_or(0)
    }
}

/// The shape of the nonlinearity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldKind {
    /// `f(t,u,p) = (s(t) - lambda) u`.
    ScalarLinear {
        signal: QuasiPeriodicSum,
        lambda: f64,
    },
    /// `f(t,u,p) = -(a(t) cos u + b(t) sin u) sin u`.
    Pendulum {
        a: QuasiPeriodicSum,
        b: QuasiPeriodicSum,
    },
    /// `f(t,u,p) = h(u, p^2)`, autonomous and even in `p`.
    AutonomousEven { h: EvenPoly },
}

/// A forcing nonlinearity together with its position on the hull phase torus.
///
/// The hull of a finite quasi-periodic sum is realized as the torus of phase
/// vectors, one coordinate per distinct frequency across all member signals;
/// time translation is rotation on that torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingField {
    pub kind: FieldKind,
    /// Distinct frequencies across member signals, ascending.
    frequencies: Vec<f64>,
    /// Summed |amplitude| carried by each frequency; weights the hull metric.
    weights: Vec<f64>,
    /// Accumulated translation phase per frequency, in `[0, 2*pi)`.
    hull_phase: Vec<f64>,
}

fn wrap(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

impl ForcingField {
    pub fn new(kind: FieldKind) -> Self {
        let mut pairs: Vec<(f64, f64)> = Vec::new();
        let mut push = |s: &QuasiPeriodicSum| {
            for t in &s.terms {
                match pairs.iter_mut().find(|(f, _)| *f == t.frequency) {
                    Some((_, w)) => *w += t.amplitude.abs(),
                    None => pairs.push((t.frequency, t.amplitude.abs())),
                }
            }
        };
        match &kind {
            FieldKind::ScalarLinear { signal, .. } => push(signal),
            FieldKind::Pendulum { a, b } => {
                push(a);
                push(b);
            }
            FieldKind::AutonomousEven { .. } => {}
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let frequencies: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let hull_phase = vec![0.0; frequencies.len()];
        Self {
            kind,
            frequencies,
            weights,
            hull_phase,
        }
    }

    pub fn scalar_linear(signal: QuasiPeriodicSum, lambda: f64) -> Self {
        Self::new(FieldKind::ScalarLinear { signal, lambda })
    }

    pub fn pendulum(a: QuasiPeriodicSum, b: QuasiPeriodicSum) -> Self {
        Self::new(FieldKind::Pendulum { a, b })
    }

    pub fn autonomous_even(h: EvenPoly) -> Self {
        Self::new(FieldKind::AutonomousEven { h })
    }

    /// `f(t, u, p)`.
    pub fn eval(&self, t: f64, u: f64, p: f64) -> f64 {
        match &self.kind {
            FieldKind::ScalarLinear { signal, lambda } => (signal.eval(t) - lambda) * u,
            FieldKind::Pendulum { a, b } => {
                -(a.eval(t) * u.cos() + b.eval(t) * u.sin()) * u.sin()
            }
            FieldKind::AutonomousEven { h } => h.eval(u, p * p),
        }
    }

    /// `df/du(t, u, p)`, analytic per kind.
    pub fn du(&self, t: f64, u: f64, p: f64) -> f64 {
        match &self.kind {
            FieldKind::ScalarLinear { signal, lambda } => signal.eval(t) - lambda,
            FieldKind::Pendulum { a, b } => {
                let (av, bv) = (a.eval(t), b.eval(t));
                let (su, cu) = u.sin_cos();
                -((-av * su + bv * cu) * su + (av * cu + bv * su) * cu)
            }
            FieldKind::AutonomousEven { h } => h.du(u, p * p),
        }
    }

    /// `df/dp(t, u, p)`, analytic per kind; odd in `p` by symmetry, so it
    /// vanishes wherever `p = 0`.
    pub fn dp(&self, _t: f64, u: f64, p: f64) -> f64 {
        match &self.kind {
            FieldKind::ScalarLinear { .. } | FieldKind::Pendulum { .. } => 0.0,
            FieldKind::AutonomousEven { h } => 2.0 * p * h.dq(u, p * p),
        }
    }

    /// True when `f(t, u, p) = c(t) u` with a spatially uniform coefficient;
    /// the stepper exploits this to stay in spectral space.
    pub fn is_linear_uniform(&self) -> bool {
        matches!(self.kind, FieldKind::ScalarLinear { .. })
    }

    /// Whether the nonlinearity actually reads the gradient.
    pub fn uses_gradient(&self) -> bool {
        match &self.kind {
            FieldKind::ScalarLinear { .. } | FieldKind::Pendulum { .. } => false,
            FieldKind::AutonomousEven { h } => h.terms.iter().any(|&(_, j, c)| j > 0 && c != 0.0),
        }
    }

    /// Polynomial degree of the nonlinearity in `(u, u_x)` when known;
    /// `None` for the trigonometric pendulum kind.
    pub fn polynomial_degree(&self) -> Option<u32> {
        match &self.kind {
            FieldKind::ScalarLinear { .. } => Some(1),
            FieldKind::Pendulum { .. } => None,
            FieldKind::AutonomousEven { h } => Some(h.degree()),
        }
    }

    /// Time translation: member signals shifted, hull phases advanced by
    /// `w_i * tau` (mod 2 pi).
    pub fn translate(&self, tau: f64) -> Self {
        let kind = match &self.kind {
            FieldKind::ScalarLinear { signal, lambda } => FieldKind::ScalarLinear {
                signal: signal.translated(tau),
                lambda: *lambda,
            },
            FieldKind::Pendulum { a, b } => FieldKind::Pendulum {
                a: a.translated(tau),
                b: b.translated(tau),
            },
            FieldKind::AutonomousEven { h } => FieldKind::AutonomousEven { h: h.clone() },
        };
        Self {
            kind,
            frequencies: self.frequencies.clone(),
            weights: self.weights.clone(),
            hull_phase: self
                .hull_phase
                .iter()
                .zip(&self.frequencies)
                .map(|(&p, &w)| wrap(p + w * tau))
                .collect(),
        }
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn hull_phase(&self) -> &[f64] {
        &self.hull_phase
    }

    /// Hull phase after flowing for time `t` from the current position.
    pub fn hull_phase_at(&self, t: f64) -> Vec<f64> {
        self.hull_phase
            .iter()
            .zip(&self.frequencies)
            .map(|(&p, &w)| wrap(p + w * t))
            .collect()
    }

    /// Weighted torus distance between two hull phase vectors:
    /// `sum_i 2 w_i |sin((phi_i - psi_i)/2)|`, a tight upper bound for the
    /// sup-norm distance between the corresponding signals. Coordinates with
    /// small amplitude weight contribute proportionally, which keeps the
    /// metric faithful to the compact-open topology on the hull.
    pub fn hull_phase_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        assert_eq!(a.len(), self.weights.len());
        assert_eq!(b.len(), self.weights.len());
        a.iter()
            .zip(b)
            .zip(&self.weights)
            .map(|((&x, &y), &w)| 2.0 * w * ((x - y) / 2.0).sin().abs())
            .sum()
    }

    /// [`Self::hull_phase_distance`] between the hull positions of this field
    /// at two times separated by `dt`; a function of the offset alone.
    pub fn hull_offset_distance(&self, dt: f64) -> f64 {
        self.frequencies
            .iter()
            .zip(&self.weights)
            .map(|(&w, &wt)| 2.0 * wt * (w * dt / 2.0).sin().abs())
            .sum()
    }

    /// Empirical hull distance: max of `|f1 - f2|` over `samples` times in
    /// `[-window, window]` and a fixed `(u, p)` lattice in `[-2, 2]^2`.
    ///
    /// Errors when the fields have different kinds or frequency sets.
    pub fn hull_distance(&self, other: &ForcingField, window: f64, samples: usize) -> Result<f64> {
        let compatible = match (&self.kind, &other.kind) {
            (FieldKind::ScalarLinear { lambda: l1, .. }, FieldKind::ScalarLinear { lambda: l2, .. }) => {
                l1 == l2
            }
            (FieldKind::Pendulum { .. }, FieldKind::Pendulum { .. }) => true,
            (FieldKind::AutonomousEven { h: h1 }, FieldKind::AutonomousEven { h: h2 }) => h1 == h2,
            _ => false,
        };
        if !compatible || self.frequencies != other.frequencies {
            return Err(Error::IncomparableFields);
        }
        let lattice = 9;
        let mut max = 0.0f64;
        for i in 0..samples.max(1) {
            let t = if samples <= 1 {
                0.0
            } else {
                -window + 2.0 * window * i as f64 / (samples - 1) as f64
            };
            for ui in 0..lattice {
                let u = -2.0 + 4.0 * ui as f64 / (lattice - 1) as f64;
                for pi in 0..lattice {
                    let p = -2.0 + 4.0 * pi as f64 / (lattice - 1) as f64;
                    max = max.max((self.eval(t, u, p) - other.eval(t, u, p)).abs());
                }
            }
        }
        Ok(max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::QuasiPeriodicSum;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn dyadic_field(lambda: f64) -> ForcingField {
        ForcingField::scalar_linear(QuasiPeriodicSum::dyadic(1e-12), lambda)
    }

    fn pendulum_field() -> ForcingField {
        ForcingField::pendulum(
            QuasiPeriodicSum::single(0.8, 1.0, 0.0),
            QuasiPeriodicSum::single(0.2, std::f64::consts::SQRT_2, 0.7),
        )
    }

    #[test]
    fn reflection_symmetry_is_exact() {
        // All built-in kinds are structurally even in p: equality must be
        // exact, not approximate.
        let fields = [
            dyadic_field(0.0),
            pendulum_field(),
            ForcingField::autonomous_even(EvenPoly {
                terms: vec![(1, 0, 1.0), (3, 0, -1.0), (1, 1, 0.25)],
            }),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for field in &fields {
            for _ in 0..10_000 {
                let t: f64 = rng.gen_range(-50.0..50.0);
                let u: f64 = rng.gen_range(-3.0..3.0);
                let p: f64 = rng.gen_range(-3.0..3.0);
                assert_eq!(field.eval(t, u, p), field.eval(t, u, -p));
            }
        }
    }

    #[test]
    fn translate_zero_keeps_phases() {
        let f = dyadic_field(0.0);
        let g = f.translate(0.0);
        assert_eq!(f.hull_phase(), g.hull_phase());
        assert_eq!(f, g);
    }

    #[test]
    fn translate_matches_shifted_evaluation() {
        let f = dyadic_field(-1.0);
        let tau = 7.0;
        let g = f.translate(tau);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let t: f64 = rng.gen_range(-30.0..30.0);
            let u: f64 = rng.gen_range(-2.0..2.0);
            assert_abs_diff_eq!(g.eval(t, u, 0.3), f.eval(t + tau, u, 0.3), epsilon = 1e-12);
        }
    }

    #[test]
    fn translation_cocycle_on_phases() {
        let f = pendulum_field();
        let a = f.translate(1.3).translate(2.9);
        let b = f.translate(1.3 + 2.9);
        for (x, y) in a.hull_phase().iter().zip(b.hull_phase()) {
            let d = (x - y).rem_euclid(TAU);
            let d = d.min(TAU - d);
            assert_abs_diff_eq!(d, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn hull_distance_to_self_is_zero() {
        let f = dyadic_field(0.0);
        assert_eq!(f.hull_distance(&f, 10.0, 33).unwrap(), 0.0);
    }

    #[test]
    fn hull_distance_vanishes_on_full_period() {
        // A single-frequency field returns to itself after one period.
        let f = ForcingField::scalar_linear(QuasiPeriodicSum::single(1.0, 2.0, 0.3), 0.0);
        let g = f.translate(PI); // w * tau = 2 pi
        let d = f.hull_distance(&g, 5.0, 41).unwrap();
        assert!(d < 1e-12, "d = {d:e}");
    }

    #[test]
    fn hull_distance_incomparable_kinds() {
        let f = dyadic_field(0.0);
        let g = pendulum_field();
        assert!(matches!(
            f.hull_distance(&g, 1.0, 3),
            Err(Error::IncomparableFields)
        ));
    }

    #[test]
    fn hull_distance_monotone_under_refinement() {
        // Nested time samples: (2m+1) points refine (m+1) points on the same
        // window, so the max can only grow.
        let f = dyadic_field(0.0);
        let g = f.translate(0.37);
        let mut prev = 0.0;
        let mut samples = 5;
        for _ in 0..4 {
            let d = f.hull_distance(&g, 8.0, samples).unwrap();
            assert!(d >= prev - 1e-15);
            prev = d;
            samples = 2 * samples - 1;
        }
    }

    #[test]
    fn pendulum_linearization_at_zero() {
        // d/du [-(a cos u + b sin u) sin u] at u = 0 equals -a(t).
        let f = pendulum_field();
        for &t in &[0.0, 0.4, 2.2, 9.1] {
            let a_t = match &f.kind {
                FieldKind::Pendulum { a, .. } => a.eval(t),
                _ => unreachable!(),
            };
            assert_abs_diff_eq!(f.du(t, 0.0, 0.0), -a_t, epsilon = 1e-12);
        }
    }

    #[test]
    fn gradient_derivative_vanishes_at_zero_slope() {
        let h = EvenPoly {
            terms: vec![(1, 0, 1.0), (0, 1, 0.5)],
        };
        let f = ForcingField::autonomous_even(h);
        for &u in &[-1.0, 0.0, 2.3] {
            assert_eq!(f.dp(0.0, u, 0.0), 0.0);
        }
        assert!(f.uses_gradient());
    }

    #[test]
    fn serde_roundtrip_bit_exact() {
        let f = pendulum_field().translate(1.234567);
        let json = serde_json::to_string(&f).unwrap();
        let g: ForcingField = serde_json::from_str(&json).unwrap();
        assert_eq!(f, g);
    }
}
