//! Finite quasi-periodic sums: the scalar almost-periodic signals that drive
//! the forcing terms.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// One sinusoidal term `amplitude * sin(frequency * t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalTerm {
    pub amplitude: f64,
    /// Angular frequency, strictly positive.
    pub frequency: f64,
    /// Phase in `[0, 2*pi)`.
    pub phase: f64,
}

/// A finite trigonometric sum `mean + sum_k a_k sin(w_k t + theta_k)` with
/// strictly positive, pairwise distinct frequencies.
///
/// These realize the almost-periodic time signals of the model; the hull of
/// such a sum is the torus of phase vectors, and time translation advances
/// each phase by `w_k * tau` (mod 2*pi).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiPeriodicSum {
    /// Constant (DC) offset. Zero for pure trigonometric sums; present so
    /// constant coefficients can be expressed in the same type.
    #[serde(default)]
    pub mean: f64,
    pub terms: Vec<SignalTerm>,
}

fn wrap_phase(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

impl QuasiPeriodicSum {
    /// Builds a sum from raw terms, normalizing phases into `[0, 2*pi)`.
    ///
    /// Panics if a frequency is non-positive or repeated: the hull phase
    /// torus needs one coordinate per distinct frequency.
    pub fn new(terms: Vec<SignalTerm>) -> Self {
        Self::with_mean(0.0, terms)
    }

    pub fn with_mean(mean: f64, terms: Vec<SignalTerm>) -> Self {
        let terms: Vec<SignalTerm> = terms
            .into_iter()
            .map(|t| SignalTerm {
                amplitude: t.amplitude,
                frequency: t.frequency,
                phase: wrap_phase(t.phase),
            })
            .collect();
        for (i, t) in terms.iter().enumerate() {
            assert!(
                t.frequency > 0.0,
                "signal frequency must be positive, got {}",
                t.frequency
            );
            for s in &terms[..i] {
                assert!(
                    s.frequency != t.frequency,
                    "signal frequencies must be distinct, {} repeats",
                    t.frequency
                );
            }
        }
        Self { mean, terms }
    }

    /// The zero signal.
    pub fn zero() -> Self {
        Self {
            mean: 0.0,
            terms: Vec::new(),
        }
    }

    /// The constant signal `c`.
    pub fn constant(c: f64) -> Self {
        Self {
            mean: c,
            terms: Vec::new(),
        }
    }

    /// A single sinusoid `a sin(w t + theta)`.
    pub fn single(amplitude: f64, frequency: f64, phase: f64) -> Self {
        Self::new(vec![SignalTerm {
            amplitude,
            frequency,
            phase,
        }])
    }

    /// The dyadic-frequency drift signal
    /// `f(t) = -sum_{k=1}^{K} 2^{-k} pi sin(2^{-k} pi t)`,
    /// truncated at the smallest `K` whose tail sup bound
    /// `sum_{k>K} 2^{-k} pi = 2^{-K} pi` falls below `tail_bound`.
    ///
    /// Its antiderivative `I(t) = sum_k (cos(2^{-k} pi t) - 1)` satisfies
    /// `exp(I(2^n)) >= e^{-2 pi - 2}` for all n while `exp(I(t))` dips
    /// arbitrarily close to zero along other time sequences, which is what
    /// makes the associated linear equation's omega-limit set non-minimal.
    pub fn dyadic(tail_bound: f64) -> Self {
        assert!(tail_bound > 0.0);
        let mut terms = Vec::new();
        let mut k = 1u32;
        loop {
            let w = 2f64.powi(-(k as i32)) * PI;
            terms.push(SignalTerm {
                amplitude: -w,
                frequency: w,
                phase: 0.0,
            });
            // Keeping terms 1..=K leaves the tail sum_{k>K} 2^-k pi = w_K,
            // so stop at the first term whose own frequency is below the bound.
            if w < tail_bound {
                break;
            }
            k += 1;
        }
        Self {
            mean: 0.0,
            terms,
        }
    }

    /// Number of retained trigonometric terms.
    pub fn truncation_count(&self) -> usize {
        self.terms.len()
    }

    /// `mean + sum_k a_k sin(w_k t + theta_k)`.
    pub fn eval(&self, t: f64) -> f64 {
        self.mean
            + self
                .terms
                .iter()
                .map(|s| s.amplitude * (s.frequency * t + s.phase).sin())
                .sum::<f64>()
    }

    /// Exact antiderivative: `int_0^t s(tau) d tau` via the closed form of
    /// each sinusoid.
    pub fn integral(&self, t: f64) -> f64 {
        self.mean * t
            + self
                .terms
                .iter()
                .map(|s| {
                    s.amplitude * (s.phase.cos() - (s.frequency * t + s.phase).cos()) / s.frequency
                })
                .sum::<f64>()
    }

    /// Time translation: each phase advanced by `w_k * tau` (mod 2*pi), so
    /// `translated(tau).eval(t) == eval(t + tau)`.
    pub fn translated(&self, tau: f64) -> Self {
        Self {
            mean: self.mean,
            terms: self
                .terms
                .iter()
                .map(|s| SignalTerm {
                    amplitude: s.amplitude,
                    frequency: s.frequency,
                    phase: wrap_phase(s.phase + s.frequency * tau),
                })
                .collect(),
        }
    }

    /// `|mean| + sum |a_k|`, a uniform bound for `|eval(t)|`.
    pub fn amplitude_bound(&self) -> f64 {
        self.mean.abs() + self.terms.iter().map(|s| s.amplitude.abs()).sum::<f64>()
    }
}
