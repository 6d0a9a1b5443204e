//! Zero number (lap number) machinery: counting certified-simple zeros of a
//! grid function on the circle, stability radii, and the Sturm monotonicity
//! monitor along differences of solutions.
//!
//! The zero number `z(u) = card{x in S^1 : u(x) = 0}` of the difference of
//! two solutions is non-increasing in time and drops exactly at multiple
//! zeros. Discretely we certify rather than guess: a zero is *simple* when
//! the interpolant's slope at the polished root clears a tolerance, and a
//! sample that cannot be certified is marked indeterminate and excluded from
//! monotonicity assertions instead of silently counted.

use crate::error::Error;
use crate::grid::GridFunction;
use crate::solver::{Stepper, Trajectory};
use crate::Result;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Refinement factor for zero location: the interpolant is scanned on a
/// `4 N` grid before root polishing.
const REFINE: usize = 4;

/// Tolerances for zero certification.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ZeroTolerances {
    /// Relative value tolerance: a sample is "at zero" when
    /// `|u| < value_rel * ||u||_inf`.
    pub value_rel: f64,
    /// Absolute slope tolerance for simplicity certification.
    pub slope: f64,
    /// Differences with `||w||_inf` below this absolute floor are treated as
    /// collapsed (numerically identical solutions), not counted.
    pub collapse_abs: f64,
}

impl Default for ZeroTolerances {
    fn default() -> Self {
        Self {
            value_rel: 1e-9,
            slope: 1e-6,
            collapse_abs: 1e-12,
        }
    }
}

/// Certified zero count of a grid function.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZeroCount {
    pub count: usize,
    /// All zeros certified simple and no near-tangency detected.
    pub simple: bool,
    /// Polished zero positions, strictly increasing in `[0, 2 pi)`.
    pub locations: Vec<f64>,
    /// Smallest `|u_x|` over the certified zeros; 0 when non-simple.
    pub margin: f64,
}

/// One zero-number drop along a monitored pair of trajectories.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DropEvent {
    pub t_lo: f64,
    pub t_hi: f64,
    pub before: usize,
    pub after: usize,
    /// Location where `|w|` and `|w_x|` are simultaneously small inside the
    /// bracket: the multiple-zero witness.
    pub witness_x: f64,
    pub witness_t: f64,
    pub witness_value: f64,
    pub witness_slope: f64,
    /// `||w||_inf` at the witness time; the scale for the relative value
    /// tolerance.
    pub witness_scale: f64,
}

/// Status of one monitored sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LapStatus {
    Certified,
    Indeterminate,
    Collapsed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LapSample {
    pub t: f64,
    pub count: Option<usize>,
    pub status: LapStatus,
}

/// Result of monitoring `z(u_1(t) - u_2(t))` along two trajectories.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LapReport {
    pub samples: Vec<LapSample>,
    pub drops: Vec<DropEvent>,
    /// Certified count increases, which the Sturm principle forbids; empty on
    /// a healthy run.
    pub violations: Vec<(f64, usize, usize)>,
}

/// Counts zeros of the spectral interpolant with explicit tolerances.
///
/// Sign changes on the refined grid are bracketed and polished; a zero is
/// simple iff `|u_x|` at the polished root exceeds `tol_slope`. Any refined
/// sample where `|u|` and `|u_x|` are simultaneously below their tolerances
/// marks the count as not certified (`simple = false`), which covers
/// tangencies and intervals where `u` hovers at zero.
pub fn zero_count(u: &GridFunction, tol_val: f64, tol_slope: f64) -> Result<ZeroCount> {
    let sup = u.linf();
    if sup < tol_val || sup == 0.0 {
        return Err(Error::NumericallyZero {
            norm: sup,
            tol: tol_val,
        });
    }
    let vals = u.refined_values(REFINE);
    let derivs = u.refined_deriv_values(REFINE);
    let m = vals.len();

    let mut locations = Vec::new();
    let mut simple = true;
    let mut margin = f64::INFINITY;

    for j in 0..m {
        let a = vals[j];
        let b = vals[(j + 1) % m];
        if a == 0.0 {
            // Exact grid zero: classify by the local slope.
            let x = TAU * j as f64 / m as f64;
            let slope = u.deriv_at(x);
            locations.push(x);
            if slope.abs() > tol_slope {
                margin = margin.min(slope.abs());
            } else {
                simple = false;
            }
            continue;
        }
        if a * b < 0.0 {
            let x_lo = TAU * j as f64 / m as f64;
            let x_hi = TAU * (j + 1) as f64 / m as f64;
            let x = polish_root(u, x_lo, x_hi, a);
            let slope = u.deriv_at(x);
            locations.push(x);
            if slope.abs() > tol_slope {
                margin = margin.min(slope.abs());
            } else {
                simple = false;
            }
        }
    }

    // Near-tangency sweep: small value and small slope at the same refined
    // sample means a multiple zero may hide between crossings.
    for j in 0..m {
        if vals[j].abs() < tol_val && derivs[j].abs() < tol_slope {
            simple = false;
        }
    }

    locations.sort_by(|a, b| a.total_cmp(b));
    let margin = if simple && margin.is_finite() { margin } else { 0.0 };
    Ok(ZeroCount {
        count: locations.len(),
        simple,
        locations,
        margin,
    })
}

/// [`zero_count`] with the default tolerances (`1e-9` relative value,
/// `1e-6` slope).
pub fn zero_count_default(u: &GridFunction) -> Result<ZeroCount> {
    let tols = ZeroTolerances::default();
    zero_count(u, tols.value_rel * u.linf(), tols.slope)
}

fn polish_root(u: &GridFunction, mut lo: f64, mut hi: f64, f_lo: f64) -> f64 {
    let mut sign_lo = f_lo.signum();
    for _ in 0..12 {
        let mid = 0.5 * (lo + hi);
        let fm = u.eval_at(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
        sign_lo = u.eval_at(lo).signum();
    }
    // Newton finish from the bisection midpoint.
    let mut x = 0.5 * (lo + hi);
    for _ in 0..8 {
        let f = u.eval_at(x);
        let d = u.deriv_at(x);
        if d == 0.0 {
            break;
        }
        let step = f / d;
        if !step.is_finite() || step.abs() > hi - lo {
            break;
        }
        x -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    x.rem_euclid(TAU)
}

/// A radius `delta` such that any perturbation `v` with `||v||_C1 < delta`
/// preserves the zero count of `u`.
///
/// Around each zero take the window of quarter-gap radius `r`; inside the
/// windows `|u_x| >= delta_near` keeps the perturbed function monotone, and
/// outside them `|u| >= delta_far` forbids new zeros. `delta` is half the
/// smaller of the two margins; with no zeros at all, `delta = min |u|`.
pub fn perturbation_radius(u: &GridFunction) -> Result<f64> {
    let zc = zero_count_default(u)?;
    if !zc.simple {
        return Err(Error::NoStableRadius);
    }
    let vals = u.refined_values(REFINE);
    let derivs = u.refined_deriv_values(REFINE);
    let m = vals.len();
    if zc.locations.is_empty() {
        let min_abs = vals.iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
        return Ok(min_abs);
    }
    let k = zc.locations.len();
    let mut min_gap = f64::INFINITY;
    for i in 0..k {
        let a = zc.locations[i];
        let b = zc.locations[(i + 1) % k] + if i + 1 == k { TAU } else { 0.0 };
        min_gap = min_gap.min(b - a);
    }
    let r = 0.25 * min_gap;
    let dist_to_zero = |x: f64| -> f64 {
        zc.locations
            .iter()
            .map(|&z| {
                let d = (x - z).rem_euclid(TAU);
                d.min(TAU - d)
            })
            .fold(f64::INFINITY, f64::min)
    };
    let mut delta_far = f64::INFINITY;
    let mut delta_near = f64::INFINITY;
    for j in 0..m {
        let x = TAU * j as f64 / m as f64;
        if dist_to_zero(x) >= r {
            delta_far = delta_far.min(vals[j].abs());
        } else {
            delta_near = delta_near.min(derivs[j].abs());
        }
    }
    Ok(0.5 * delta_far.min(delta_near))
}

/// Monitors `z(u_1(t_i) - u_2(t_i))` along two trajectories on the same grid,
/// field, and sample times.
///
/// Certified counts must be non-increasing; each certified decrease is
/// bracketed and refined by re-integration from the stored states, bisecting
/// in time until a multiple-zero witness (small `|w|` and `|w_x|` at one
/// point) is located. Samples that cannot be certified are reported as
/// indeterminate and excluded from the monotonicity sequence.
pub fn lap_monitor(
    traj1: &Trajectory,
    traj2: &Trajectory,
    tols: &ZeroTolerances,
) -> Result<LapReport> {
    if traj1.config.n != traj2.config.n {
        return Err(Error::MismatchedTrajectories("grid sizes differ".into()));
    }
    if traj1.field != traj2.field {
        return Err(Error::MismatchedTrajectories("fields differ".into()));
    }
    if traj1.samples.len() != traj2.samples.len() {
        return Err(Error::MismatchedTrajectories("sample counts differ".into()));
    }
    for (a, b) in traj1.samples.iter().zip(&traj2.samples) {
        if (a.t - b.t).abs() > 1e-12 * a.t.abs().max(1.0) {
            return Err(Error::MismatchedTrajectories("sample times differ".into()));
        }
    }
    let max_dist = traj1
        .samples
        .iter()
        .zip(&traj2.samples)
        .map(|(a, b)| a.state.sub(&b.state).linf())
        .fold(0.0f64, f64::max);
    if max_dist <= tols.collapse_abs {
        return Err(Error::IndistinctTrajectories(max_dist));
    }

    let mut samples = Vec::with_capacity(traj1.samples.len());
    for (a, b) in traj1.samples.iter().zip(&traj2.samples) {
        let w = a.state.sub(&b.state);
        let sup = w.linf();
        if sup < tols.collapse_abs {
            samples.push(LapSample {
                t: a.t,
                count: None,
                status: LapStatus::Collapsed,
            });
            continue;
        }
        match zero_count(&w, tols.value_rel * sup, tols.slope) {
            Ok(zc) if zc.simple => samples.push(LapSample {
                t: a.t,
                count: Some(zc.count),
                status: LapStatus::Certified,
            }),
            Ok(zc) => samples.push(LapSample {
                t: a.t,
                count: Some(zc.count),
                status: LapStatus::Indeterminate,
            }),
            Err(_) => samples.push(LapSample {
                t: a.t,
                count: None,
                status: LapStatus::Collapsed,
            }),
        }
    }

    let mut drops = Vec::new();
    let mut violations = Vec::new();
    let mut prev: Option<(usize, usize)> = None; // (sample index, count)
    for (i, s) in samples.iter().enumerate() {
        if s.status != LapStatus::Certified {
            continue;
        }
        let count = s.count.unwrap();
        if let Some((pi, pc)) = prev {
            if count > pc {
                violations.push((s.t, pc, count));
            } else if count < pc {
                drops.push(refine_drop(traj1, traj2, tols, pi, i, pc, count));
            }
        }
        prev = Some((i, count));
    }

    Ok(LapReport {
        samples,
        drops,
        violations,
    })
}

/// Bisects the drop bracket by re-integrating both trajectories from the
/// stored checkpoint. The witness is the extremum of `w` nearest the
/// vanishing zero pair: there `w_x = 0` up to root-polish precision and `|w|`
/// shrinks linearly with the remaining time-bracket width.
fn refine_drop(
    traj1: &Trajectory,
    traj2: &Trajectory,
    tols: &ZeroTolerances,
    i_lo: usize,
    i_hi: usize,
    before: usize,
    after: usize,
) -> DropEvent {
    let dt = traj1.config.dt;
    let mut stepper1 = Stepper::new(&traj1.config);
    let mut stepper2 = Stepper::new(&traj2.config);
    let mut t_lo = traj1.samples[i_lo].t;
    let mut t_hi = traj1.samples[i_hi].t;
    let mut u1 = traj1.samples[i_lo].state.coeffs().to_vec();
    let mut u2 = traj2.samples[i_lo].state.coeffs().to_vec();

    let mut best: Option<(f64, f64, f64, f64, f64)> = None; // (score, x, value, slope, scale)
    let mut best_t = t_lo;

    let budget = 40;
    for _ in 0..budget {
        if t_hi - t_lo <= f64::EPSILON * t_hi.abs().max(1.0) {
            break;
        }
        let t_mid = 0.5 * (t_lo + t_hi);
        let mut v1 = u1.clone();
        let mut v2 = u2.clone();
        let mut t = t_lo;
        while t < t_mid - 1e-15 {
            let h = dt.min(t_mid - t);
            let _ = stepper1.advance(&traj1.field, &mut v1, t, h);
            let _ = stepper2.advance(&traj2.field, &mut v2, t, h);
            t += h;
        }
        let w = GridFunction::from_coeffs(v1.iter().zip(&v2).map(|(a, b)| a - b).collect());
        let sup = w.linf();
        let (x, val, slope) = witness_candidate(&w);
        let score = (val / (10.0 * tols.value_rel * sup.max(1e-300)))
            .max(slope / (10.0 * tols.slope));
        if best.map_or(true, |(s, ..)| score < s) {
            best = Some((score, x, val, slope, sup));
            best_t = t_mid;
        }
        match zero_count(&w, tols.value_rel * sup, tols.slope) {
            Ok(zc) if zc.simple && zc.count >= before => {
                t_lo = t_mid;
                u1 = v1;
                u2 = v2;
            }
            _ => {
                t_hi = t_mid;
            }
        }
    }

    let (_, x, val, slope, scale) =
        best.unwrap_or((f64::INFINITY, 0.0, f64::INFINITY, f64::INFINITY, 1.0));
    DropEvent {
        t_lo: traj1.samples[i_lo].t,
        t_hi: traj1.samples[i_hi].t,
        before,
        after,
        witness_x: x,
        witness_t: best_t,
        witness_value: val,
        witness_slope: slope,
        witness_scale: scale,
    }
}

/// Finds the point with the smallest `max(|w|, |w_x|)` signature: scans the
/// refined grid, then polishes the nearest extremum (`w_x = 0`) by bisection
/// so the slope half of the witness is exact to roundoff.
fn witness_candidate(w: &GridFunction) -> (f64, f64, f64) {
    let vals = w.refined_values(REFINE);
    let derivs = w.refined_deriv_values(REFINE);
    let m = vals.len();
    let sup = w.linf().max(1e-300);
    let mut best_j = 0;
    let mut best_score = f64::INFINITY;
    for j in 0..m {
        let score = (vals[j].abs() / sup).max(derivs[j].abs());
        if score < best_score {
            best_score = score;
            best_j = j;
        }
    }
    let x_best = TAU * best_j as f64 / m as f64;
    let mut result = (x_best, vals[best_j].abs(), derivs[best_j].abs());
    for off in 0..2 {
        let j0 = (best_j + m - 1 + off) % m;
        let j1 = (j0 + 1) % m;
        if derivs[j0] * derivs[j1] < 0.0 {
            let mut lo = TAU * j0 as f64 / m as f64;
            let mut hi = lo + TAU / m as f64;
            let mut s_lo = derivs[j0].signum();
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let d = w.deriv_at(mid);
                if d == 0.0 {
                    lo = mid;
                    break;
                }
                if d.signum() == s_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
                s_lo = w.deriv_at(lo).signum();
            }
            let x = 0.5 * (lo + hi);
            let val = w.eval_at(x).abs();
            let slope = w.deriv_at(x).abs();
            if val.max(slope) < result.1.max(result.2) {
                result = (x.rem_euclid(TAU), val, slope);
            }
        }
    }
    result
}
