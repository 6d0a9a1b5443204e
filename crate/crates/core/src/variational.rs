//! Linearization along trajectories and what it buys: tangent-frame
//! evolution, finite-time Lyapunov exponents with dimension counts, and the
//! explicit sin/cos Floquet modes along spatially homogeneous orbits.
//!
//! The linearized equation along a base solution `u(t)` is
//! `v_t = v_xx + a(x,t) v_x + b(x,t) v` with `a = df/dp` and `b = df/du`
//! evaluated along `(t, u, u_x)`. For reflection-symmetric fields `a`
//! vanishes wherever `u_x` does, and along spatially homogeneous orbits it
//! vanishes identically, which is what makes the sin/cos Floquet basis exact
//! there.

use crate::error::Error;
use crate::fft;
use crate::forcing::ForcingField;
use crate::grid::GridFunction;
use crate::solver::{EtdTables, SolverConfig, Stepper, Trajectory};
use crate::Result;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Fraction of the horizon discarded before exponents accumulate.
const TRANSIENT_FRACTION: f64 = 0.1;

/// Minimum reorthonormalization cycles for a spectrum estimate.
const MIN_QR_CYCLES: usize = 100;

/// Number of consecutive blocks used for the windowed exponent ranges; the
/// last half of the blocks populate the reported intervals.
const INTERVAL_BLOCKS: usize = 8;

/// Coefficients of the linearized equation at one time.
#[derive(Debug, Clone)]
pub struct LinearCoefficients {
    /// Coefficient of `v_x`, i.e. `df/dp` along the state.
    pub a: GridFunction,
    /// Coefficient of `v`, i.e. `df/du` along the state.
    pub b: GridFunction,
    pub t: f64,
}

/// `a = df/dp`, `b = df/du` along `(t, u(x), u_x(x))`, analytic for the
/// built-in kinds.
pub fn linearize(field: &ForcingField, u: &GridFunction, t: f64) -> LinearCoefficients {
    let n = u.len();
    let ux = u.deriv();
    let a = GridFunction::from_values(
        (0..n)
            .map(|j| field.dp(t, u.values()[j], ux.values()[j]))
            .collect(),
    );
    let b = GridFunction::from_values(
        (0..n)
            .map(|j| field.du(t, u.values()[j], ux.values()[j]))
            .collect(),
    );
    LinearCoefficients { a, b, t }
}

/// Central-difference fallback for the same coefficients; the cross-check for
/// the analytic path and the route for user-supplied maps.
pub fn linearize_fd(field: &ForcingField, u: &GridFunction, t: f64) -> LinearCoefficients {
    let n = u.len();
    let ux = u.deriv();
    let step = |base: f64| 1e-6 * base.abs().max(1.0);
    let a = GridFunction::from_values(
        (0..n)
            .map(|j| {
                let (uv, pv) = (u.values()[j], ux.values()[j]);
                let h = step(pv);
                (field.eval(t, uv, pv + h) - field.eval(t, uv, pv - h)) / (2.0 * h)
            })
            .collect(),
    );
    let b = GridFunction::from_values(
        (0..n)
            .map(|j| {
                let (uv, pv) = (u.values()[j], ux.values()[j]);
                let h = step(uv);
                (field.eval(t, uv + h, pv) - field.eval(t, uv - h, pv)) / (2.0 * h)
            })
            .collect(),
    );
    LinearCoefficients { a, b, t }
}

/// An evolving orthonormal family of tangent vectors with accumulated
/// log-growth per direction.
#[derive(Debug, Clone)]
pub struct TangentFrame {
    pub vectors: Vec<GridFunction>,
    pub log_growth: Vec<f64>,
}

impl TangentFrame {
    /// The first `m` Fourier modes `{1, sin x, cos x, sin 2x, ...}`,
    /// orthonormal in the discrete L2 inner product.
    pub fn fourier(n: usize, m: usize) -> Self {
        let mut vectors = Vec::with_capacity(m);
        for i in 0..m {
            let v = match i {
                0 => GridFunction::constant(n, 1.0),
                _ => {
                    let k = ((i + 1) / 2) as f64;
                    if i % 2 == 1 {
                        GridFunction::from_fn(n, |x| std::f64::consts::SQRT_2 * (k * x).sin())
                    } else {
                        GridFunction::from_fn(n, |x| std::f64::consts::SQRT_2 * (k * x).cos())
                    }
                }
            };
            vectors.push(v);
        }
        Self {
            vectors,
            log_growth: vec![0.0; m],
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Largest pairwise Gram deviation from orthonormality.
    pub fn gram_deviation(&self) -> f64 {
        let m = self.len();
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in i..m {
                let dot = l2_dot_values(self.vectors[i].values(), self.vectors[j].values());
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

fn l2_dot_values(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64
}

/// Discrete-L2 inner product in spectral space (Parseval).
fn l2_dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum::<f64>()
}

/// Modified Gram-Schmidt in place; returns the diagonal norms before
/// normalization.
fn gram_schmidt(vectors: &mut [Vec<Complex64>]) -> Result<Vec<f64>> {
    let m = vectors.len();
    let mut norms = Vec::with_capacity(m);
    for i in 0..m {
        for j in 0..i {
            let (head, tail) = vectors.split_at_mut(i);
            let proj = l2_dot(&head[j], &tail[0]);
            for (v, w) in tail[0].iter_mut().zip(&head[j]) {
                *v -= proj * w;
            }
        }
        let norm = l2_dot(&vectors[i], &vectors[i]).sqrt();
        if norm < 1e-300 {
            return Err(Error::FrameCollapse);
        }
        let inv = 1.0 / norm;
        for v in vectors[i].iter_mut() {
            *v *= inv;
        }
        norms.push(norm);
    }
    Ok(norms)
}

/// Frozen linearized coefficients for one step, in the representation the
/// tangent stepper consumes.
enum Frozen {
    /// `a = 0`, `b` constant in space: the whole stage stays spectral.
    Uniform { b: f64 },
    /// Physical-space samples of `a` and `b`; `a_zero` skips the gradient
    /// transform when the field has no `p` dependence.
    General {
        a: Vec<f64>,
        b: Vec<f64>,
        a_zero: bool,
    },
}

/// Tangent-equation stepper sharing the exponential tables of the nonlinear
/// solver; coefficients are frozen over each step.
struct TangentStepper {
    n: usize,
    tables: EtdTables,
    plans: fft::Plans,
    scratch: Vec<Complex64>,
    grad: Vec<Complex64>,
    stage_a: Vec<Complex64>,
    stage_b: Vec<Complex64>,
    stage_c: Vec<Complex64>,
    n1: Vec<Complex64>,
    n2: Vec<Complex64>,
    n3: Vec<Complex64>,
    n4: Vec<Complex64>,
}

impl TangentStepper {
    fn new(n: usize, dt: f64) -> Self {
        Self {
            n,
            tables: EtdTables::new(n, dt),
            plans: fft::plans(n),
            scratch: vec![Complex64::default(); n],
            grad: vec![Complex64::default(); n],
            stage_a: vec![Complex64::default(); n],
            stage_b: vec![Complex64::default(); n],
            stage_c: vec![Complex64::default(); n],
            n1: vec![Complex64::default(); n],
            n2: vec![Complex64::default(); n],
            n3: vec![Complex64::default(); n],
            n4: vec![Complex64::default(); n],
        }
    }

    fn apply(&mut self, co: &Frozen, vhat: &[Complex64], out: &mut Vec<Complex64>) {
        let n = self.n;
        match co {
            Frozen::Uniform { b } => {
                out.clear();
                out.extend(vhat.iter().map(|&v| v * *b));
            }
            Frozen::General { a, b, a_zero } => {
                self.scratch.copy_from_slice(vhat);
                self.plans.inverse.process(&mut self.scratch);
                if !a_zero {
                    for i in 0..n {
                        let k = fft::wavenumber(i, n) as f64;
                        self.grad[i] = if i == n / 2 {
                            Complex64::default()
                        } else {
                            vhat[i] * Complex64::new(0.0, k)
                        };
                    }
                    self.plans.inverse.process(&mut self.grad);
                }
                out.clear();
                for j in 0..n {
                    let vx = if *a_zero { 0.0 } else { self.grad[j].re };
                    out.push(Complex64::new(a[j] * vx + b[j] * self.scratch[j].re, 0.0));
                }
                self.plans.forward.process(out);
                let scale = 1.0 / n as f64;
                for c in out.iter_mut() {
                    *c *= scale;
                }
            }
        }
    }

    fn advance(&mut self, co: &Frozen, vhat: &mut [Complex64]) {
        let n = self.n;
        let mut nl = std::mem::take(&mut self.n1);
        self.apply(co, vhat, &mut nl);
        self.n1 = nl;
        for i in 0..n {
            self.stage_a[i] = self.tables.e2[i] * vhat[i] + self.tables.q[i] * self.n1[i];
        }
        let stage_a = std::mem::take(&mut self.stage_a);
        let mut nl = std::mem::take(&mut self.n2);
        self.apply(co, &stage_a, &mut nl);
        self.n2 = nl;
        self.stage_a = stage_a;
        for i in 0..n {
            self.stage_b[i] = self.tables.e2[i] * vhat[i] + self.tables.q[i] * self.n2[i];
        }
        let stage_b = std::mem::take(&mut self.stage_b);
        let mut nl = std::mem::take(&mut self.n3);
        self.apply(co, &stage_b, &mut nl);
        self.n3 = nl;
        self.stage_b = stage_b;
        for i in 0..n {
            self.stage_c[i] = self.tables.e2[i] * self.stage_a[i]
                + self.tables.q[i] * (2.0 * self.n3[i] - self.n1[i]);
        }
        let stage_c = std::mem::take(&mut self.stage_c);
        let mut nl = std::mem::take(&mut self.n4);
        self.apply(co, &stage_c, &mut nl);
        self.n4 = nl;
        self.stage_c = stage_c;
        for i in 0..n {
            vhat[i] = self.tables.e[i] * vhat[i]
                + self.tables.b1[i] * self.n1[i]
                + self.tables.b2[i] * (self.n2[i] + self.n3[i])
                + self.tables.b4[i] * self.n4[i];
        }
    }
}

/// Freezes the linearized coefficients at the current base state (spectral).
fn freeze(
    field: &ForcingField,
    plans: &fft::Plans,
    base: &[Complex64],
    t: f64,
    scratch: &mut Vec<Complex64>,
    grad: &mut Vec<Complex64>,
) -> Frozen {
    let n = base.len();
    if field.is_linear_uniform() {
        return Frozen::Uniform {
            b: field.du(t, 0.0, 0.0),
        };
    }
    scratch.copy_from_slice(base);
    plans.inverse.process(scratch);
    let needs_grad = field.uses_gradient();
    if needs_grad {
        for i in 0..n {
            let k = fft::wavenumber(i, n) as f64;
            grad[i] = if i == n / 2 {
                Complex64::default()
            } else {
                base[i] * Complex64::new(0.0, k)
            };
        }
        plans.inverse.process(grad);
    }
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut a_zero = true;
    for j in 0..n {
        let u = scratch[j].re;
        let p = if needs_grad { grad[j].re } else { 0.0 };
        let av = field.dp(t, u, p);
        if av != 0.0 {
            a_zero = false;
        }
        a.push(av);
        b.push(field.du(t, u, p));
    }
    Frozen::General { a, b, a_zero }
}

/// Drives the base orbit and tangent vectors together, invoking `on_qr` with
/// `(time, pre-normalization norms)` at every reorthonormalization.
///
/// Coefficients are frozen at the step midpoint (state advanced by a half
/// step on a scratch copy), which keeps the commutator error of the frozen
/// stepping at O(dt^2) instead of O(dt).
fn run_tangent(
    traj: &Trajectory,
    vectors: &mut [Vec<Complex64>],
    qr_interval: usize,
    steps: usize,
    mut on_qr: impl FnMut(f64, &[f64]),
) -> Result<()> {
    let cfg = &traj.config;
    let n = cfg.n;
    let field = &traj.field;
    let mut base_stepper = Stepper::new(cfg);
    let mut half_cfg = *cfg;
    half_cfg.dt = 0.5 * cfg.dt;
    let mut half_stepper = Stepper::new(&half_cfg);
    let mut tan = TangentStepper::new(n, cfg.dt);
    let plans = fft::plans(n);
    let mut base = traj.initial_state().coeffs().to_vec();
    let mut half = base.clone();
    let mut scratch = vec![Complex64::default(); n];
    let mut grad = vec![Complex64::default(); n];
    let qr = qr_interval.max(1);
    let uniform = field.is_linear_uniform();
    for s in 0..steps {
        let t = s as f64 * cfg.dt;
        let t_mid = t + 0.5 * cfg.dt;
        let co = if uniform {
            Frozen::Uniform {
                b: field.du(t_mid, 0.0, 0.0),
            }
        } else {
            half.copy_from_slice(&base);
            half_stepper.advance(field, &mut half, t, 0.5 * cfg.dt)?;
            freeze(field, &plans, &half, t_mid, &mut scratch, &mut grad)
        };
        for v in vectors.iter_mut() {
            tan.advance(&co, v);
        }
        base_stepper.advance(field, &mut base, t, cfg.dt)?;
        if (s + 1) % qr == 0 {
            let norms = gram_schmidt(vectors)?;
            on_qr((s + 1) as f64 * cfg.dt, &norms);
        }
    }
    Ok(())
}

/// Evolves a tangent frame along the trajectory's full span with the frozen
/// per-step linearization, reorthonormalizing every `qr_interval` steps and
/// accumulating log-growth per direction.
pub fn evolve_tangent(
    traj: &Trajectory,
    frame: &TangentFrame,
    qr_interval: usize,
) -> Result<TangentFrame> {
    let n = traj.config.n;
    for v in &frame.vectors {
        if v.len() != n {
            return Err(Error::Config(
                "tangent vectors must live on the trajectory grid".into(),
            ));
        }
    }
    let mut vectors: Vec<Vec<Complex64>> = frame
        .vectors
        .iter()
        .map(|v| v.coeffs().to_vec())
        .collect();
    let steps = (traj.duration() / traj.config.dt).round() as usize;
    let mut log_growth = frame.log_growth.clone();
    run_tangent(traj, &mut vectors, qr_interval, steps, |_, norms| {
        for (g, &r) in log_growth.iter_mut().zip(norms) {
            *g += r.ln();
        }
    })?;
    // Final renormalization so the returned frame is orthonormal even when
    // the step count is not a multiple of qr_interval.
    if steps % qr_interval.max(1) != 0 {
        let norms = gram_schmidt(&mut vectors)?;
        for (g, &r) in log_growth.iter_mut().zip(&norms) {
            *g += r.ln();
        }
    }
    Ok(TangentFrame {
        vectors: vectors
            .into_iter()
            .map(GridFunction::from_coeffs)
            .collect(),
        log_growth,
    })
}

/// Finite-time Lyapunov exponents with derived dimension counts and windowed
/// interval estimates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    /// Sorted descending.
    pub exponents: Vec<f64>,
    pub horizon: f64,
    pub gap_tol: f64,
    /// `#{lambda_i > gap_tol}`.
    pub dim_u: usize,
    /// `#{|lambda_i| <= gap_tol}`.
    pub dim_c: usize,
    /// `dim_u` rounded up to the nearest even integer: the zero-number level
    /// separating stable and unstable behavior.
    pub n_u: usize,
    /// Per-exponent `[min, max]` of windowed finite-time rates over the last
    /// half of the accumulation horizon.
    pub intervals: Vec<[f64; 2]>,
}

/// Estimates the leading `m` Lyapunov exponents over `horizon`, discarding a
/// 10% transient, with dimension counts at tolerance `gap_tol`.
pub fn lyapunov_spectrum(
    traj: &Trajectory,
    m: usize,
    horizon: f64,
    gap_tol: f64,
) -> Result<SpectrumEstimate> {
    Ok(lyapunov_spectrum_traced(traj, m, horizon, gap_tol)?.0)
}

/// [`lyapunov_spectrum`] plus the running exponent estimates at each
/// reorthonormalization time (sorted like the final exponents); the
/// convergence trace behind the exported diagnostics.
pub fn lyapunov_spectrum_traced(
    traj: &Trajectory,
    m: usize,
    horizon: f64,
    gap_tol: f64,
) -> Result<(SpectrumEstimate, Vec<(f64, Vec<f64>)>)> {
    let cfg = &traj.config;
    if horizon > traj.duration() + 1e-9 {
        return Err(Error::Config(format!(
            "horizon {} exceeds trajectory duration {}",
            horizon,
            traj.duration()
        )));
    }
    if m > cfg.n / 4 {
        return Err(Error::Config(format!(
            "frame size {} exceeds N/4 = {}",
            m,
            cfg.n / 4
        )));
    }
    let qr = cfg.qr_interval.max(1);
    let cycles = (horizon / (qr as f64 * cfg.dt)) as usize;
    if cycles < MIN_QR_CYCLES {
        return Err(Error::InsufficientHorizon {
            cycles,
            required: MIN_QR_CYCLES,
        });
    }
    let steps = (horizon / cfg.dt).round() as usize;
    let transient_t = TRANSIENT_FRACTION * horizon;

    let frame = TangentFrame::fourier(cfg.n, m);
    let mut vectors: Vec<Vec<Complex64>> = frame
        .vectors
        .iter()
        .map(|v| v.coeffs().to_vec())
        .collect();

    let mut log_growth = vec![0.0; m];
    let mut accounted = 0.0;
    let mut prev_qr_t = 0.0;
    // (t, per-vector local rate) for each included qr event, plus the running
    // cumulative estimates.
    let mut rates: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut trace: Vec<(f64, Vec<f64>)> = Vec::new();
    run_tangent(traj, &mut vectors, qr, steps, |t, norms| {
        let dt_event = t - prev_qr_t;
        if prev_qr_t >= transient_t - 1e-12 && dt_event > 0.0 {
            let mut local = Vec::with_capacity(m);
            for (i, &r) in norms.iter().enumerate() {
                log_growth[i] += r.ln();
                local.push(r.ln() / dt_event);
            }
            accounted += dt_event;
            rates.push((t, local));
            trace.push((t, log_growth.iter().map(|g| g / accounted).collect()));
        }
        prev_qr_t = t;
    })?;
    if accounted <= 0.0 {
        return Err(Error::InsufficientHorizon {
            cycles: 0,
            required: MIN_QR_CYCLES,
        });
    }

    let mut order: Vec<usize> = (0..m).collect();
    let raw: Vec<f64> = log_growth.iter().map(|g| g / accounted).collect();
    order.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]));
    let exponents: Vec<f64> = order.iter().map(|&i| raw[i]).collect();

    // Windowed ranges: consecutive blocks of qr events, last half reported.
    let blocks = INTERVAL_BLOCKS.min(rates.len().max(1));
    let block_len = (rates.len() / blocks).max(1);
    let mut block_rates: Vec<Vec<f64>> = Vec::new();
    for c in rates.chunks(block_len) {
        let mut mean = vec![0.0; m];
        for (_, local) in c {
            for (i, &v) in local.iter().enumerate() {
                mean[i] += v;
            }
        }
        for v in mean.iter_mut() {
            *v /= c.len() as f64;
        }
        block_rates.push(mean);
    }
    let half = block_rates.len() / 2;
    let tail = &block_rates[half..];
    let intervals: Vec<[f64; 2]> = order
        .iter()
        .map(|&i| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for b in tail {
                lo = lo.min(b[i]);
                hi = hi.max(b[i]);
            }
            [lo, hi]
        })
        .collect();

    let dim_u = exponents.iter().filter(|&&l| l > gap_tol).count();
    let dim_c = exponents.iter().filter(|&&l| l.abs() <= gap_tol).count();
    let n_u = if dim_u % 2 == 0 { dim_u } else { dim_u + 1 };
    // Order the trace rows like the sorted exponents.
    let trace: Vec<(f64, Vec<f64>)> = trace
        .into_iter()
        .map(|(t, row)| (t, order.iter().map(|&i| row[i]).collect()))
        .collect();
    Ok((
        SpectrumEstimate {
            exponents,
            horizon,
            gap_tol,
            dim_u,
            dim_c,
            n_u,
            intervals,
        },
        trace,
    ))
}

/// Parity of a Floquet mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeParity {
    Cos,
    Sin,
}

/// One explicit Floquet mode along a spatially homogeneous orbit:
/// `v_k = e^{-k^2 t + int b} {sin,cos}(k (x - c(t)))` with drift
/// `c' = -a(t)`; for reflection-symmetric fields `a = 0` along homogeneous
/// orbits, so the drift vanishes identically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FloquetMode {
    pub k: u32,
    pub parity: ModeParity,
    /// `-k^2 + mean(b)` over the horizon.
    pub exponent: f64,
    /// Sampled drift series `(t, c(t))`.
    pub drift: Vec<(f64, f64)>,
}

/// Homogeneity gate for Floquet construction.
const HOMOGENEITY_TOL: f64 = 1e-8;

/// Builds the sin/cos Floquet modes along a spatially homogeneous trajectory
/// for wavenumbers `0..=k_max`.
pub fn floquet_homogeneous(
    field: &ForcingField,
    traj: &Trajectory,
    k_max: u32,
    horizon: f64,
) -> Result<Vec<FloquetMode>> {
    let max_slope = traj
        .samples
        .iter()
        .map(|s| s.state.deriv().linf())
        .fold(0.0f64, f64::max);
    if max_slope >= HOMOGENEITY_TOL {
        return Err(Error::InhomogeneousTrajectory {
            max_slope,
            tol: HOMOGENEITY_TOL,
        });
    }

    // mean(b) over [0, horizon] and the drift integral of -a along the orbit.
    let drift_samples = 128usize;
    let (mean_b, drift) = homogeneous_coefficient_means(field, traj, horizon, drift_samples)?;
    for &(_, c) in &drift {
        debug_assert!(c.abs() < 1e-9, "nonzero drift {c:e} under even symmetry");
    }

    let mut modes = Vec::new();
    for k in 0..=k_max {
        let exponent = -((k * k) as f64) + mean_b;
        modes.push(FloquetMode {
            k,
            parity: ModeParity::Cos,
            exponent,
            drift: drift.clone(),
        });
        if k > 0 {
            modes.push(FloquetMode {
                k,
                parity: ModeParity::Sin,
                exponent,
                drift: drift.clone(),
            });
        }
    }
    Ok(modes)
}

/// Integrates `b(t)` and `-a(t)` along the homogeneous orbit. Scalar-linear
/// fields use the exact signal antiderivative; other kinds re-integrate the
/// base and accumulate by the trapezoid rule.
fn homogeneous_coefficient_means(
    field: &ForcingField,
    traj: &Trajectory,
    horizon: f64,
    drift_samples: usize,
) -> Result<(f64, Vec<(f64, f64)>)> {
    use crate::forcing::FieldKind;
    if let FieldKind::ScalarLinear { signal, lambda } = &field.kind {
        let mean_b = (signal.integral(horizon) - lambda * horizon) / horizon;
        let drift = (0..=drift_samples)
            .map(|i| (horizon * i as f64 / drift_samples as f64, 0.0))
            .collect();
        return Ok((mean_b, drift));
    }
    let cfg = &traj.config;
    let steps = (horizon / cfg.dt).round() as usize;
    let mut stepper = Stepper::new(cfg);
    let mut base = traj.initial_state().coeffs().to_vec();
    let mean0 = traj.initial_state().mean();
    let mut b_prev = field.du(0.0, mean0, 0.0);
    let mut a_prev = field.dp(0.0, mean0, 0.0);
    let mut int_b = 0.0;
    let mut int_neg_a = 0.0;
    let mut drift = Vec::with_capacity(drift_samples + 1);
    drift.push((0.0, 0.0));
    let record_every = (steps / drift_samples).max(1);
    for s in 0..steps {
        let t = s as f64 * cfg.dt;
        stepper.advance(field, &mut base, t, cfg.dt)?;
        let c = base[0].re; // homogeneous state = mean mode
        let t1 = (s + 1) as f64 * cfg.dt;
        let b_now = field.du(t1, c, 0.0);
        let a_now = field.dp(t1, c, 0.0);
        int_b += 0.5 * (b_prev + b_now) * cfg.dt;
        int_neg_a += 0.5 * (-a_prev - a_now) * cfg.dt;
        b_prev = b_now;
        a_prev = a_now;
        if (s + 1) % record_every == 0 {
            drift.push((t1, int_neg_a));
        }
    }
    Ok((int_b / (steps as f64 * cfg.dt), drift))
}

/// Outcome of checking the explicit Floquet exponents against the
/// frame-evolution estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrosscheckReport {
    /// Floquet exponents as a sorted multiset (sin/cos doubling for k >= 1).
    pub floquet: Vec<f64>,
    /// Frame exponents, sorted.
    pub frame: Vec<f64>,
    pub max_discrepancy: f64,
}

/// Compares `floquet_homogeneous` exponents against `lyapunov_spectrum` on
/// the same trajectory: matched multisets, maximum absolute discrepancy.
pub fn floquet_vs_frame_crosscheck(
    traj: &Trajectory,
    k_max: u32,
    horizon: f64,
    gap_tol: f64,
) -> Result<CrosscheckReport> {
    let m = (2 * k_max + 1) as usize;
    let spectrum = lyapunov_spectrum(traj, m, horizon, gap_tol)?;
    let modes = floquet_homogeneous(&traj.field, traj, k_max, horizon)?;
    let mut floq: Vec<f64> = modes.iter().map(|md| md.exponent).collect();
    floq.sort_by(|a, b| b.total_cmp(a));
    let max_discrepancy = floq
        .iter()
        .zip(&spectrum.exponents)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    Ok(CrosscheckReport {
        floquet: floq,
        frame: spectrum.exponents,
        max_discrepancy,
    })
}

/// Observed convergence slope of tangent linearization against the finite
/// difference of the nonlinear flow: for each `eps`, evolve `u0` and
/// `u0 + eps v`, compare `(phi(u0 + eps v) - phi(u0)) / eps` with the evolved
/// tangent vector, and regress `log error` on `log eps`. A slope near 1 is
/// first-order remainder decay, i.e. a correct linearization.
pub fn linearization_consistency_slope(
    field: &ForcingField,
    u0: &GridFunction,
    v: &GridFunction,
    epsilons: &[f64],
    t_end: f64,
    config: &SolverConfig,
) -> Result<f64> {
    use crate::solver::evolve;
    let base = evolve(u0, field, t_end, config, usize::MAX)?;
    let frame = TangentFrame {
        vectors: vec![v.clone()],
        log_growth: vec![0.0],
    };
    // One vector, no reorthonormalization inside the window.
    let steps = (t_end / config.dt).round() as usize;
    let mut vectors = vec![v.coeffs().to_vec()];
    run_tangent(&base, &mut vectors, steps + 1, steps, |_, _| {})?;
    let tangent_end = GridFunction::from_coeffs(vectors.pop().unwrap());
    let base_end = &base.samples.last().unwrap().state;

    let mut logs: Vec<(f64, f64)> = Vec::new();
    for &eps in epsilons {
        let pert = u0.add(&v.scale(eps));
        let run = evolve(&pert, field, t_end, config, usize::MAX)?;
        let diff = run
            .samples
            .last()
            .unwrap()
            .state
            .sub(base_end)
            .scale(1.0 / eps);
        let err = diff.sub(&tangent_end).linf();
        logs.push((eps.ln(), err.max(1e-300).ln()));
    }
    // Least-squares slope.
    let n = logs.len() as f64;
    let sx: f64 = logs.iter().map(|p| p.0).sum();
    let sy: f64 = logs.iter().map(|p| p.1).sum();
    let sxx: f64 = logs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = logs.iter().map(|p| p.0 * p.1).sum();
    Ok((n * sxy - sx * sy) / (n * sxx - sx * sx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forcing::{EvenPoly, ForcingField};
    use crate::signal::QuasiPeriodicSum;
    use crate::solver::evolve;
    use approx::assert_abs_diff_eq;

    fn zero_field() -> ForcingField {
        ForcingField::scalar_linear(QuasiPeriodicSum::zero(), 0.0)
    }

    fn heat_traj(t_end: f64) -> Trajectory {
        let cfg = SolverConfig::default();
        let u0 = GridFunction::constant(64, 0.0);
        evolve(&u0, &zero_field(), t_end, &cfg, usize::MAX).unwrap()
    }

    #[test]
    fn linearize_scalar_linear_is_uniform() {
        let field = ForcingField::scalar_linear(QuasiPeriodicSum::dyadic(1e-12), 0.0);
        let u = GridFunction::from_fn(64, |x| x.sin());
        let t = 0.7;
        let co = linearize(&field, &u, t);
        assert!(co.a.linf() == 0.0);
        let expected = match &field.kind {
            crate::forcing::FieldKind::ScalarLinear { signal, .. } => signal.eval(t),
            _ => unreachable!(),
        };
        for &b in co.b.values() {
            assert_abs_diff_eq!(b, expected, epsilon = 1e-13);
        }
    }

    #[test]
    fn linearize_bistable_at_constant() {
        let field = ForcingField::autonomous_even(EvenPoly::bistable());
        let u = GridFunction::constant(64, 0.5);
        let co = linearize(&field, &u, 0.0);
        assert!(co.a.linf() == 0.0);
        for &b in co.b.values() {
            assert_abs_diff_eq!(b, 1.0 - 3.0 * 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn analytic_matches_finite_difference() {
        let field = ForcingField::pendulum(
            QuasiPeriodicSum::single(0.8, 1.0, 0.0),
            QuasiPeriodicSum::single(0.3, 2.3, 0.5),
        );
        let u = GridFunction::from_fn(64, |x| 0.4 * x.sin() + 0.2);
        let t = 1.3;
        let exact = linearize(&field, &u, t);
        let approx = linearize_fd(&field, &u, t);
        assert!(exact.b.sub(&approx.b).linf() < 1e-6);
        assert!(exact.a.sub(&approx.a).linf() < 1e-6);
    }

    #[test]
    fn heat_modes_have_exact_growth_rates() {
        let traj = heat_traj(2.0);
        let frame = TangentFrame::fourier(64, 3);
        let out = evolve_tangent(&traj, &frame, 1000).unwrap();
        let rates: Vec<f64> = out.log_growth.iter().map(|g| g / 2.0).collect();
        assert_abs_diff_eq!(rates[0], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(rates[1], -1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(rates[2], -1.0, epsilon = 1e-6);
        assert!(out.gram_deviation() < 1e-8);
    }

    #[test]
    fn dyadic_constant_mode_growth_matches_integral() {
        // For the dyadic field with lambda = 0 the constant tangent mode
        // grows exactly like exp(int f).
        let signal = QuasiPeriodicSum::dyadic(1e-12);
        let field = ForcingField::scalar_linear(signal.clone(), 0.0);
        let cfg = SolverConfig::default();
        let u0 = GridFunction::constant(64, 1.0);
        let t_end = 4.0;
        let traj = evolve(&u0, &field, t_end, &cfg, usize::MAX).unwrap();
        let frame = TangentFrame::fourier(64, 1);
        let out = evolve_tangent(&traj, &frame, 4000).unwrap();
        assert_abs_diff_eq!(out.log_growth[0], signal.integral(t_end), epsilon = 1e-5);
    }

    #[test]
    fn heat_spectrum_is_exact() {
        let cfg = SolverConfig::default();
        let u0 = GridFunction::constant(64, 0.0);
        let traj = evolve(&u0, &zero_field(), 150.0, &cfg, usize::MAX).unwrap();
        let est = lyapunov_spectrum(&traj, 5, 150.0, 0.1).unwrap();
        let expect = [0.0, -1.0, -1.0, -4.0, -4.0];
        for (a, e) in est.exponents.iter().zip(expect) {
            assert_abs_diff_eq!(a, &e, epsilon = 1e-3);
        }
        assert_eq!(est.dim_u, 0);
        assert_eq!(est.dim_c, 1);
        assert_eq!(est.n_u, 0);
    }

    #[test]
    fn insufficient_horizon_is_an_error() {
        let traj = heat_traj(2.0);
        assert!(matches!(
            lyapunov_spectrum(&traj, 3, 2.0, 0.1),
            Err(Error::InsufficientHorizon { .. })
        ));
    }

    #[test]
    fn floquet_constant_damping() {
        // b = -1 via lambda = 1 on the zero signal: exponents -1, -2, -2, -5, -5.
        let field = ForcingField::scalar_linear(QuasiPeriodicSum::zero(), 1.0);
        let cfg = SolverConfig::default();
        let u0 = GridFunction::constant(64, 0.0);
        let traj = evolve(&u0, &field, 1.0, &cfg, usize::MAX).unwrap();
        let modes = floquet_homogeneous(&field, &traj, 2, 1.0).unwrap();
        let mut exps: Vec<f64> = modes.iter().map(|m| m.exponent).collect();
        exps.sort_by(|a, b| b.total_cmp(a));
        let expect = [-1.0, -2.0, -2.0, -5.0, -5.0];
        for (a, e) in exps.iter().zip(expect) {
            assert_abs_diff_eq!(a, &e, epsilon = 1e-12);
        }
    }

    #[test]
    fn floquet_rejects_inhomogeneous_orbit() {
        let field = zero_field();
        let cfg = SolverConfig::default();
        let u0 = GridFunction::from_fn(64, |x| x.sin());
        let traj = evolve(&u0, &field, 1.0, &cfg, usize::MAX).unwrap();
        assert!(matches!(
            floquet_homogeneous(&field, &traj, 2, 1.0),
            Err(Error::InhomogeneousTrajectory { .. })
        ));
    }

    #[test]
    fn floquet_drift_vanishes_for_symmetric_fields() {
        let field = ForcingField::autonomous_even(EvenPoly::bistable());
        let cfg = SolverConfig::default();
        let u0 = GridFunction::constant(64, 2.0);
        let traj = evolve(&u0, &field, 2.0, &cfg, usize::MAX).unwrap();
        let modes = floquet_homogeneous(&field, &traj, 2, 2.0).unwrap();
        for m in &modes {
            for &(_, c) in &m.drift {
                assert_eq!(c, 0.0);
            }
        }
    }

    #[test]
    fn crosscheck_on_pure_heat() {
        let cfg = SolverConfig::default();
        let u0 = GridFunction::constant(64, 0.0);
        let traj = evolve(&u0, &zero_field(), 150.0, &cfg, usize::MAX).unwrap();
        let rep = floquet_vs_frame_crosscheck(&traj, 2, 150.0, 0.1).unwrap();
        assert!(rep.max_discrepancy < 1e-6, "{:e}", rep.max_discrepancy);
    }

    #[test]
    fn linearization_consistency_bistable() {
        let field = ForcingField::autonomous_even(EvenPoly::bistable());
        let u0 = GridFunction::from_fn(64, |x| 0.3 + 0.1 * x.sin());
        let v = GridFunction::from_fn(64, |x| (2.0 * x).cos());
        let cfg = SolverConfig::default();
        let slope = linearization_consistency_slope(
            &field,
            &u0,
            &v,
            &[1e-3, 1e-4, 1e-5],
            1.0,
            &cfg,
        )
        .unwrap();
        assert!(slope >= 0.9, "slope {slope}");
    }
}
