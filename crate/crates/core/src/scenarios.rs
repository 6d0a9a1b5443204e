//! Canned experiments: forcing field, initial data, solver settings, optional
//! closed-form oracle, and the expected analysis fragments, bundled so runs
//! are reproducible from a name plus a seed.

use crate::error::Error;
use crate::forcing::{EvenPoly, ForcingField};
use crate::grid::GridFunction;
use crate::omega::TrichotomyCase;
use crate::rng;
use crate::signal::QuasiPeriodicSum;
use crate::solver::SolverConfig;
use crate::Result;
use serde::{Deserialize, Serialize};

/// Symbolic initial data, realized on a grid with a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    Constant { value: f64 },
    /// `mean + sum_k (sin_amp_k sin(kx) + cos_amp_k cos(kx))`.
    Modes {
        mean: f64,
        terms: Vec<(u32, f64, f64)>,
    },
    /// Band-limited noise with the given mean; realized deterministically
    /// from the run seed.
    RandomBandLimited {
        mean: f64,
        amplitude: f64,
        max_mode: usize,
    },
}

impl InitialData {
    pub fn build(&self, n: usize, seed: u64) -> GridFunction {
        match self {
            InitialData::Constant { value } => GridFunction::constant(n, *value),
            InitialData::Modes { mean, terms } => GridFunction::from_fn(n, |x| {
                mean + terms
                    .iter()
                    .map(|&(k, s, c)| {
                        let kx = k as f64 * x;
                        s * kx.sin() + c * kx.cos()
                    })
                    .sum::<f64>()
            }),
            InitialData::RandomBandLimited {
                mean,
                amplitude,
                max_mode,
            } => {
                let mut r = rng::substream(seed, "initial-data");
                rng::band_limited(&mut r, n, *mean, *amplitude, *max_mode)
            }
        }
    }
}

/// Closed-form solution maps for scenarios that have one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Oracle {
    /// `phi(t, x) = exp(int_0^t s) u0(x)` for the scalar-linear field whose
    /// coefficient is `s(t) - lambda` and whose initial datum is the
    /// eigenfunction of the second derivative with eigenvalue `lambda`.
    LinearEigenmode {
        signal: QuasiPeriodicSum,
        lambda: f64,
        eigenfunction: Eigenfunction,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Eigenfunction {
    One,
    SinX,
    CosX,
}

impl Eigenfunction {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Eigenfunction::One => 1.0,
            Eigenfunction::SinX => x.sin(),
            Eigenfunction::CosX => x.cos(),
        }
    }
}

impl Oracle {
    /// Point evaluation `phi(t, x)`.
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self {
            Oracle::LinearEigenmode {
                signal,
                eigenfunction,
                ..
            } => signal.integral(t).exp() * eigenfunction.eval(x),
        }
    }

    /// The exact state at time `t` on an `n`-point grid.
    pub fn state(&self, n: usize, t: f64) -> GridFunction {
        GridFunction::from_fn(n, |x| self.eval(t, x))
    }
}

/// Settings for spectrum runs of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSettings {
    pub m: usize,
    pub horizon: f64,
    pub gap_tol: f64,
    pub dt: f64,
    /// Wavenumber cutoff for the Floquet cross-check.
    pub k_max: u32,
}

/// Settings for omega-limit runs of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaSettings {
    pub t_end: f64,
    pub t_transient: f64,
    /// Snapshot spacing; must be an integer multiple of `dt`.
    pub spacing: f64,
    pub dt: f64,
}

/// Expected spectrum fragments with tolerances; pure data consumed by the
/// verification pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedSpectrum {
    pub exponents: Vec<f64>,
    pub tol: f64,
    pub dim_u: usize,
    pub dim_c: usize,
}

/// Expected omega-report fragments; `None` entries are unconstrained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedOmega {
    pub homogeneous: Option<bool>,
    pub minimal_set_count: Option<usize>,
    pub count_at_most: Option<usize>,
    pub connecting: Option<bool>,
    pub trichotomy: Option<TrichotomyCase>,
    pub cover: Option<usize>,
}

impl ExpectedOmega {
    fn unconstrained() -> Self {
        Self {
            homogeneous: None,
            minimal_set_count: None,
            count_at_most: None,
            connecting: None,
            trichotomy: None,
            cover: None,
        }
    }
}

/// A fully specified experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub field: ForcingField,
    pub u0: InitialData,
    pub config: SolverConfig,
    pub spectrum: SpectrumSettings,
    pub omega: OmegaSettings,
    pub oracle: Option<Oracle>,
    pub expected_spectrum: Option<ExpectedSpectrum>,
    pub expected_omega: Option<ExpectedOmega>,
}

impl Scenario {
    /// Residual self-check: where an oracle exists, it must satisfy the PDE
    /// at 100 sample points under spectral differentiation (time derivative
    /// by five-point central differences). Runs at load time.
    pub fn validate(&self) -> Result<()> {
        let Some(oracle) = &self.oracle else {
            return Ok(());
        };
        let n = self.config.n;
        let mut worst = 0.0f64;
        // Deterministic sample points.
        let mut state = 0x51a7b2c9d3e4f605u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let h = 1e-3;
        for _ in 0..100 {
            let t = 0.5 + 19.5 * next();
            let x = std::f64::consts::TAU * next();
            let grid = oracle.state(n, t);
            let u = grid.eval_at(x);
            let ux = grid.deriv_at(x);
            let uxx = grid.deriv().deriv_at(x);
            // Five-point stencil for the time derivative.
            let ut = (-oracle.eval(t + 2.0 * h, x) + 8.0 * oracle.eval(t + h, x)
                - 8.0 * oracle.eval(t - h, x)
                + oracle.eval(t - 2.0 * h, x))
                / (12.0 * h);
            let residual = (ut - uxx - self.field.eval(t, u, ux)).abs();
            worst = worst.max(residual);
        }
        if worst >= 1e-6 {
            return Err(Error::Config(format!(
                "oracle residual {worst:.3e} exceeds 1e-6 for scenario '{}'",
                self.name
            )));
        }
        Ok(())
    }
}

/// The almost-periodic linear scenario `u_t = u_xx + (f(t) - lambda) u` with
/// the dyadic drift signal. Admissible eigenvalues: `0` (eigenfunction 1)
/// and `-1` (eigenfunction sin x, or cos x behind the flag).
pub fn ex61_with(lambda: f64, eigenfunction: Eigenfunction) -> Result<Scenario> {
    let signal = QuasiPeriodicSum::dyadic(1e-12);
    let (expected_exponents, dim_u, dim_c, u0, name, expected_omega) = if lambda == 0.0 {
        if eigenfunction != Eigenfunction::One {
            return Err(Error::Config(
                "eigenvalue 0 pairs with the constant eigenfunction".into(),
            ));
        }
        (
            vec![0.0, -1.0, -1.0, -4.0, -4.0],
            0usize,
            1usize,
            InitialData::Constant { value: 1.0 },
            "ex61-l0".to_string(),
            ExpectedOmega {
                homogeneous: Some(true),
                minimal_set_count: Some(1),
                count_at_most: Some(2),
                connecting: Some(true),
                trichotomy: Some(TrichotomyCase::OneMinimalPlusConnecting),
                cover: Some(1),
            },
        )
    } else if lambda == -1.0 {
        let (u0, name) = match eigenfunction {
            Eigenfunction::SinX => (
                InitialData::Modes {
                    mean: 0.0,
                    terms: vec![(1, 1.0, 0.0)],
                },
                "ex61-l-1".to_string(),
            ),
            Eigenfunction::CosX => (
                InitialData::Modes {
                    mean: 0.0,
                    terms: vec![(1, 0.0, 1.0)],
                },
                "ex61-l-1-cos".to_string(),
            ),
            Eigenfunction::One => {
                return Err(Error::Config(
                    "eigenvalue -1 pairs with sin x or cos x".into(),
                ))
            }
        };
        (
            vec![1.0, 0.0, 0.0, -3.0, -3.0],
            1,
            2,
            u0,
            name,
            ExpectedOmega {
                homogeneous: Some(false),
                minimal_set_count: Some(1),
                count_at_most: Some(2),
                connecting: Some(true),
                trichotomy: Some(TrichotomyCase::OneMinimalPlusConnecting),
                cover: Some(1),
            },
        )
    } else {
        return Err(Error::InvalidEigenvalue { lambda });
    };

    let field = ForcingField::scalar_linear(signal.clone(), lambda);
    let scenario = Scenario {
        name,
        field,
        u0,
        config: SolverConfig::default(),
        spectrum: SpectrumSettings {
            m: 5,
            horizon: 4096.0,
            gap_tol: 0.1,
            dt: 1e-3,
            k_max: 2,
        },
        omega: OmegaSettings {
            t_end: 3400.0,
            t_transient: 300.0,
            spacing: 1.0,
            dt: 5e-3,
        },
        oracle: Some(Oracle::LinearEigenmode {
            signal,
            lambda,
            eigenfunction,
        }),
        expected_spectrum: Some(ExpectedSpectrum {
            exponents: expected_exponents,
            tol: 0.05,
            dim_u,
            dim_c,
        }),
        expected_omega: Some(expected_omega),
    };
    scenario.validate()?;
    Ok(scenario)
}

/// [`ex61_with`] using the canonical eigenfunction for each eigenvalue.
pub fn ex61(lambda: f64) -> Result<Scenario> {
    let eig = if lambda == 0.0 {
        Eigenfunction::One
    } else {
        Eigenfunction::SinX
    };
    ex61_with(lambda, eig)
}

/// The quasi-periodically forced pendulum-type scenario
/// `u_t = u_xx - (a(t) cos u + b(t) sin u) sin u` with caller-supplied
/// signals. No oracle; the only hard expectation is "at most two minimal
/// sets".
pub fn ex62(a: QuasiPeriodicSum, b: QuasiPeriodicSum) -> Scenario {
    let field = ForcingField::pendulum(a, b);
    Scenario {
        name: "ex62".to_string(),
        field,
        u0: InitialData::RandomBandLimited {
            mean: 0.4,
            amplitude: 0.1,
            max_mode: 3,
        },
        config: SolverConfig {
            dt: 2e-3,
            ..SolverConfig::default()
        },
        spectrum: SpectrumSettings {
            m: 5,
            horizon: 512.0,
            gap_tol: 0.1,
            dt: 2e-3,
            k_max: 2,
        },
        omega: OmegaSettings {
            t_end: 1600.0,
            t_transient: 150.0,
            spacing: 0.5,
            dt: 2e-3,
        },
        oracle: None,
        expected_spectrum: None,
        expected_omega: Some(ExpectedOmega {
            count_at_most: Some(2),
            ..ExpectedOmega::unconstrained()
        }),
    }
}

/// Default surrogate signals for the pendulum scenario: two incommensurate
/// frequencies whose hull returns are dense enough for fiber statistics on
/// runs of a couple thousand time units.
pub fn ex62_default() -> Scenario {
    ex62(
        QuasiPeriodicSum::single(0.8, 1.0, 0.0),
        QuasiPeriodicSum::single(0.2, std::f64::consts::SQRT_2, 0.7),
    )
}

/// Autonomous bistable sanity scenario `u_t = u_xx + u - u^3`: hyperbolic
/// homogeneous limits at +-1, the clean test bed for the hyperbolic
/// classification rule. Not derived from the almost-periodic theory; plain
/// plumbing.
pub fn bistable() -> Scenario {
    Scenario {
        name: "bistable".to_string(),
        field: ForcingField::autonomous_even(EvenPoly::bistable()),
        u0: InitialData::Modes {
            mean: 0.1,
            terms: vec![(1, 0.05, 0.0)],
        },
        config: SolverConfig {
            dt: 2e-3,
            ..SolverConfig::default()
        },
        spectrum: SpectrumSettings {
            m: 3,
            horizon: 256.0,
            gap_tol: 0.1,
            dt: 2e-3,
            k_max: 1,
        },
        omega: OmegaSettings {
            t_end: 80.0,
            t_transient: 25.0,
            spacing: 0.5,
            dt: 2e-3,
        },
        oracle: None,
        expected_spectrum: Some(ExpectedSpectrum {
            exponents: vec![-2.0, -3.0, -3.0],
            tol: 1e-2,
            dim_u: 0,
            dim_c: 0,
        }),
        expected_omega: Some(ExpectedOmega {
            homogeneous: Some(true),
            minimal_set_count: Some(1),
            count_at_most: Some(2),
            connecting: Some(false),
            trichotomy: Some(TrichotomyCase::Minimal),
            cover: Some(1),
        }),
    }
}

/// Names of the built-in scenarios.
pub fn catalog() -> Vec<&'static str> {
    vec!["ex61-l0", "ex61-l-1", "ex61-l-1-cos", "bistable", "ex62"]
}

/// Looks a scenario up by its catalog name.
pub fn by_name(name: &str) -> Result<Scenario> {
    match name {
        "ex61-l0" => ex61(0.0),
        "ex61-l-1" => ex61(-1.0),
        "ex61-l-1-cos" => ex61_with(-1.0, Eigenfunction::CosX),
        "bistable" => Ok(bistable()),
        "ex62" => Ok(ex62_default()),
        other => Err(Error::UnknownScenario(other.to_string())),
    }
}

/// Outcome of the auxiliary scalar integration `y' = a(t) y + b(t)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OdeSolution {
    pub series: Vec<(f64, f64)>,
    /// Time at which |y| crossed 1e12, when it did.
    pub diverged: Option<f64>,
}

/// Classical fourth-order integration of `y' = a(t) y + b(t)`; used to probe
/// boundedness of candidate pendulum forcings.
pub fn ode_scalar_solve(
    a: &QuasiPeriodicSum,
    b: &QuasiPeriodicSum,
    y0: f64,
    t_end: f64,
    dt: f64,
) -> OdeSolution {
    assert!(dt > 0.0);
    let rhs = |t: f64, y: f64| a.eval(t) * y + b.eval(t);
    let steps = (t_end / dt).ceil() as usize;
    let mut y = y0;
    let mut series = vec![(0.0, y0)];
    for s in 0..steps {
        let t = s as f64 * dt;
        let h = dt.min(t_end - t);
        if h <= 0.0 {
            break;
        }
        let k1 = rhs(t, y);
        let k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1);
        let k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2);
        let k4 = rhs(t + h, y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let t1 = t + h;
        series.push((t1, y));
        if y.abs() > 1e12 {
            return OdeSolution {
                series,
                diverged: Some(t1),
            };
        }
    }
    OdeSolution {
        series,
        diverged: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::evolve;
    use approx::assert_abs_diff_eq;

    #[test]
    fn catalog_scenarios_load_and_validate() {
        for name in catalog() {
            let s = by_name(name).unwrap();
            s.validate().unwrap();
            assert_eq!(s.name, name);
        }
    }

    #[test]
    fn ex61_rejects_other_eigenvalues() {
        assert!(matches!(
            ex61(-4.0),
            Err(Error::InvalidEigenvalue { .. })
        ));
        assert!(matches!(ex61(0.5), Err(Error::InvalidEigenvalue { .. })));
    }

    #[test]
    fn ex61_l0_oracle_at_time_zero() {
        let s = ex61(0.0).unwrap();
        let oracle = s.oracle.as_ref().unwrap();
        for i in 0..8 {
            let x = 0.7 * i as f64;
            assert_abs_diff_eq!(oracle.eval(0.0, x), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn ex61_lm1_oracle_section_is_exponential_integral() {
        let s = ex61(-1.0).unwrap();
        let oracle = s.oracle.as_ref().unwrap();
        let signal = QuasiPeriodicSum::dyadic(1e-12);
        for &t in &[0.5, 3.0, 17.0] {
            let psi = signal.integral(t).exp();
            assert_abs_diff_eq!(
                oracle.eval(t, std::f64::consts::FRAC_PI_2),
                psi,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn ex61_expected_spectrum_fragments() {
        let s = ex61(0.0).unwrap();
        let exp = s.expected_spectrum.unwrap();
        assert_eq!(exp.exponents, vec![0.0, -1.0, -1.0, -4.0, -4.0]);
        let s = ex61(-1.0).unwrap();
        let exp = s.expected_spectrum.unwrap();
        assert_eq!(exp.exponents, vec![1.0, 0.0, 0.0, -3.0, -3.0]);
        assert_eq!(exp.dim_c, 2);
        assert_eq!(exp.dim_u, 1);
    }

    #[test]
    fn ex62_zero_and_pi_are_equilibria() {
        let sc = ex62_default();
        let cfg = sc.config;
        for value in [0.0, std::f64::consts::PI] {
            let u0 = GridFunction::constant(cfg.n, value);
            let traj = evolve(&u0, &sc.field, 2.0, &cfg, usize::MAX).unwrap();
            let last = &traj.samples.last().unwrap().state;
            assert!(
                last.sub(&GridFunction::constant(cfg.n, value)).linf() < 1e-12,
                "u = {value} should be an equilibrium"
            );
        }
    }

    #[test]
    fn ex62_linearized_decay_near_zero() {
        // a = 0, b = 1: near u = 0 the equation linearizes to
        // v_t = v_xx - v, so small data decays at rate about 1.
        let sc = ex62(QuasiPeriodicSum::zero(), QuasiPeriodicSum::constant(1.0));
        let cfg = sc.config;
        let u0 = GridFunction::from_fn(cfg.n, |x| 1e-3 * (1.0 + 0.5 * x.sin()));
        let traj = evolve(&u0, &sc.field, 3.0, &cfg, usize::MAX).unwrap();
        let last = traj.samples.last().unwrap();
        let expected = 1e-3 * (-3.0f64).exp();
        assert!((last.state.mean() - expected).abs() < 0.05 * expected);
    }

    #[test]
    fn bistable_from_two_converges_to_one() {
        let sc = bistable();
        let cfg = sc.config;
        let u0 = GridFunction::constant(cfg.n, 2.0);
        let traj = evolve(&u0, &sc.field, 10.0, &cfg, usize::MAX).unwrap();
        let last = &traj.samples.last().unwrap().state;
        // Scalar oracle for c' = c - c^3 from 2 at t = 10: c ~ 1 to high
        // accuracy by then.
        assert!(last.sub(&GridFunction::constant(cfg.n, 1.0)).linf() < 1e-6);
    }

    #[test]
    fn bistable_zero_is_stationary() {
        let sc = bistable();
        let cfg = sc.config;
        let u0 = GridFunction::zeros(cfg.n);
        let traj = evolve(&u0, &sc.field, 5.0, &cfg, usize::MAX).unwrap();
        assert!(traj.samples.last().unwrap().state.linf() < 1e-12);
    }

    #[test]
    fn bistable_linearization_at_one() {
        let sc = bistable();
        let u = GridFunction::constant(64, 1.0);
        let co = crate::variational::linearize(&sc.field, &u, 0.0);
        for &b in co.b.values() {
            assert_abs_diff_eq!(b, -2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ode_solver_trivial_cases() {
        let zero = QuasiPeriodicSum::zero();
        let sol = ode_scalar_solve(&zero, &zero, 1.0, 5.0, 1e-3);
        for &(_, y) in &sol.series {
            assert_abs_diff_eq!(y, 1.0, epsilon = 1e-12);
        }
        assert!(sol.diverged.is_none());
    }

    #[test]
    fn ode_solver_exponential_decay() {
        let a = QuasiPeriodicSum::constant(-1.0);
        let b = QuasiPeriodicSum::zero();
        let sol = ode_scalar_solve(&a, &b, 1.0, 5.0, 1e-3);
        let (t, y) = *sol.series.last().unwrap();
        assert_abs_diff_eq!(y, (-t).exp(), epsilon = 1e-8);
    }

    #[test]
    fn ode_solver_quadrature() {
        // a = 0, b = sin t, y0 = 0: y = 1 - cos t.
        let a = QuasiPeriodicSum::zero();
        let b = QuasiPeriodicSum::single(1.0, 1.0, 0.0);
        let sol = ode_scalar_solve(&a, &b, 0.0, 7.0, 1e-3);
        for &(t, y) in sol.series.iter().step_by(500) {
            assert_abs_diff_eq!(y, 1.0 - t.cos(), epsilon = 1e-8);
        }
    }

    #[test]
    fn ode_solver_flags_divergence() {
        let a = QuasiPeriodicSum::constant(5.0);
        let b = QuasiPeriodicSum::zero();
        let sol = ode_scalar_solve(&a, &b, 1.0, 10.0, 1e-3);
        assert!(sol.diverged.is_some());
    }

    #[test]
    fn scenario_serde_roundtrip() {
        let s = ex61(-1.0).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: Scenario = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
    }
}
