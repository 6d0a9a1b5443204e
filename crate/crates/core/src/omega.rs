//! Sampling and classification of approximate omega-limit sets.
//!
//! A long trajectory's post-transient snapshots approximate its omega-limit
//! set in state x hull space. The analyses here extract the structure the
//! theory predicts for reflection-symmetric forcing: a common critical point
//! shared by every limit state, spatial homogeneity, the number of minimal
//! sets (at most two), fiber cardinality over the hull (1-cover evidence),
//! and proximality of trajectory pairs.
//!
//! Finite samples only certify what they visit: recurrence is detected by
//! near-returns at hull-phase distance below `hull_tol` and state distance
//! below `fiber_tol`, and every verdict is tolerance-stamped.

use crate::error::Error;
use crate::forcing::ForcingField;
use crate::grid::GridFunction;
use crate::solver::{SolverConfig, Trajectory};
use crate::variational::SpectrumEstimate;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Tolerances for the omega-limit analyses.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OmegaTolerances {
    /// Hull-phase proximity (weighted torus metric) for fiber membership and
    /// recurrence.
    pub hull_tol: f64,
    /// C1 state distance treated as "the same limit state".
    pub fiber_tol: f64,
    /// Minimum time separation of a recurrence pair.
    pub t_min: f64,
    /// A largest-gap split of section values is accepted only when the gap
    /// exceeds this factor times the within-cluster spread.
    pub gap_factor: f64,
    /// Sup-slope threshold for spatial homogeneity.
    pub homogeneity_tol: f64,
    /// Max-slope threshold for the common critical point.
    pub critical_tol: f64,
    /// Minimum members for a fiber to vote in counts.
    pub min_fiber_members: usize,
}

impl Default for OmegaTolerances {
    fn default() -> Self {
        Self {
            hull_tol: 0.05,
            fiber_tol: 1e-3,
            t_min: 10.0,
            gap_factor: 10.0,
            homogeneity_tol: 1e-4,
            critical_tol: 1e-4,
            min_fiber_members: 10,
        }
    }
}

/// One retained snapshot of the sampled attractor.
#[derive(Debug, Clone)]
pub struct OmegaSnapshot {
    pub t: f64,
    pub state: GridFunction,
    pub hull_phase: Vec<f64>,
}

/// Post-transient snapshots of a trajectory, uniformly spaced in time.
#[derive(Debug, Clone)]
pub struct OmegaSample {
    pub snapshots: Vec<OmegaSnapshot>,
    pub t_transient: f64,
    pub config: SolverConfig,
    pub field: ForcingField,
    /// Uniform time spacing between consecutive snapshots.
    pub spacing: f64,
}

/// Retains every `stride`-th post-transient snapshot and checks
/// C1-boundedness. The trajectory must be at least twice as long as the
/// discarded transient.
pub fn sample_omega(traj: &Trajectory, t_transient: f64, stride: usize) -> Result<OmegaSample> {
    assert!(
        traj.duration() > 2.0 * t_transient,
        "trajectory too short for transient {t_transient}"
    );
    let stride = stride.max(1);
    let kept: Vec<OmegaSnapshot> = traj
        .samples
        .iter()
        .filter(|s| s.t > t_transient)
        .step_by(stride)
        .map(|s| OmegaSnapshot {
            t: s.t,
            state: s.state.clone(),
            hull_phase: s.hull_phase.clone(),
        })
        .collect();
    let mut kept = kept;
    // Uniform spacing; a trailing remainder sample is dropped.
    if kept.len() >= 3 {
        let spacing = kept[1].t - kept[0].t;
        let last_gap = kept[kept.len() - 1].t - kept[kept.len() - 2].t;
        if (last_gap - spacing).abs() > 1e-9 * spacing {
            kept.pop();
        }
    }
    let spacing = if kept.len() >= 2 {
        kept[1].t - kept[0].t
    } else {
        0.0
    };
    for w in kept.windows(2) {
        if ((w[1].t - w[0].t) - spacing).abs() > 1e-9 * spacing.max(1.0) {
            return Err(Error::Config(
                "omega sampling requires uniformly spaced snapshots".into(),
            ));
        }
    }
    let bound = traj.config.blowup_threshold;
    for s in &kept {
        let c1 = s.state.c1_norm();
        if !c1.is_finite() || c1 >= bound {
            return Err(Error::UnboundedOmega { norm: c1 });
        }
    }
    Ok(OmegaSample {
        snapshots: kept,
        t_transient,
        config: traj.config,
        field: traj.field.clone(),
        spacing,
    })
}

/// Result of the common-critical-point search.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CriticalPoint {
    /// The sample is homogeneous at tolerance: every point qualifies.
    Everywhere,
    /// A common critical point: `max_i |u_i'(x)|` below tolerance at `x`.
    At { x: f64, max_slope: f64 },
    /// No point qualifies; the best candidate is reported for diagnostics.
    NotFound { best_x: f64, best_slope: f64 },
}

/// Searches the refined grid for a point where every snapshot's derivative
/// vanishes (below `tol`).
pub fn find_common_critical_point(s: &OmegaSample, tol: f64) -> CriticalPoint {
    assert!(!s.snapshots.is_empty(), "empty omega sample");
    let refine = 4;
    let m = s.snapshots[0].state.len() * refine;
    let mut worst = vec![0.0f64; m];
    for snap in &s.snapshots {
        let d = snap.state.refined_deriv_values(refine);
        for (w, &v) in worst.iter_mut().zip(&d) {
            *w = w.max(v.abs());
        }
    }
    let mut best_j = 0;
    let mut best = f64::INFINITY;
    let mut global_max = 0.0f64;
    for (j, &w) in worst.iter().enumerate() {
        if w < best {
            best = w;
            best_j = j;
        }
        global_max = global_max.max(w);
    }
    let x = TAU * best_j as f64 / m as f64;
    if global_max < tol {
        CriticalPoint::Everywhere
    } else if best < tol {
        CriticalPoint::At {
            x,
            max_slope: best,
        }
    } else {
        CriticalPoint::NotFound {
            best_x: x,
            best_slope: best,
        }
    }
}

/// True iff every snapshot's sup-slope is below `tol`.
pub fn homogeneity_test(s: &OmegaSample, tol: f64) -> bool {
    s.snapshots
        .iter()
        .all(|snap| snap.state.deriv().linf() < tol)
}

/// Per-fiber statistics over the hull.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiberStats {
    /// Hull phase of the fiber anchor.
    pub base_phase: Vec<f64>,
    /// Snapshot indices assigned to this fiber.
    pub members: Vec<usize>,
    /// Max pairwise C1 distance among members.
    pub diameter: f64,
    /// `[min, max]` of the section values `u(x0)` over members.
    pub value_range: [f64; 2],
}

/// Outcome of the minimal-set count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimalSetCount {
    /// Maximum cluster count over well-populated fibers.
    pub count: usize,
    pub connecting_detected: bool,
    pub fibers: Vec<FiberStats>,
    /// Indices of snapshots flagged recurrent.
    pub recurrent: Vec<bool>,
    /// Raised when more than two clusters appear: the at-most-two theorem
    /// would be falsified (or a tolerance is wrong); never silently clamped.
    pub falsification: Option<String>,
    /// Value ranges of the detected clusters in the fiber that realized
    /// `count`.
    pub cluster_ranges: Vec<[f64; 2]>,
}

struct FiberAnalysis {
    fibers: Vec<FiberStats>,
    recurrent: Vec<bool>,
    /// Per well-populated fiber: clusters of recurrent section values, each
    /// with member indices.
    fiber_clusters: Vec<Vec<Vec<usize>>>,
    /// Indices of well-populated fibers into `fibers`.
    voting: Vec<usize>,
}

fn section_values(s: &OmegaSample, x0: f64) -> Vec<f64> {
    s.snapshots
        .iter()
        .map(|snap| snap.state.eval_at(x0))
        .collect()
}

fn c1_distance_cached(
    vals: &[Vec<f64>],
    ders: &[Vec<f64>],
    i: usize,
    j: usize,
) -> f64 {
    let mut dv = 0.0f64;
    let mut dd = 0.0f64;
    for k in 0..vals[i].len() {
        dv = dv.max((vals[i][k] - vals[j][k]).abs());
        dd = dd.max((ders[i][k] - ders[j][k]).abs());
    }
    dv + dd
}

/// Largest-gap clustering of sorted `(value, index)` pairs: a split is
/// accepted only when the gap exceeds `factor * max(within_spread, floor)`.
fn gap_clusters(
    sorted: &[(f64, usize)],
    factor: f64,
    floor: f64,
) -> Vec<Vec<(f64, usize)>> {
    if sorted.len() <= 1 {
        return vec![sorted.to_vec()];
    }
    let mut gap = 0.0;
    let mut at = 0;
    for i in 0..sorted.len() - 1 {
        let g = sorted[i + 1].0 - sorted[i].0;
        if g > gap {
            gap = g;
            at = i;
        }
    }
    let left = &sorted[..=at];
    let right = &sorted[at + 1..];
    let spread = |c: &[(f64, usize)]| -> f64 {
        if c.len() <= 1 {
            0.0
        } else {
            c[c.len() - 1].0 - c[0].0
        }
    };
    let within = spread(left).max(spread(right)).max(floor);
    if gap > factor * within {
        let mut out = gap_clusters(left, factor, floor);
        out.extend(gap_clusters(right, factor, floor));
        out
    } else {
        vec![sorted.to_vec()]
    }
}

fn analyze_fibers(s: &OmegaSample, x0: f64, tols: &OmegaTolerances) -> Result<FiberAnalysis> {
    let n = s.snapshots.len();
    if n < 2 || s.spacing <= 0.0 {
        return Err(Error::InsufficientRecurrence {
            members: n,
            required: tols.min_fiber_members,
        });
    }
    // Hull distance depends only on the time offset; precompute per lattice
    // offset.
    let offset_dist: Vec<f64> = (0..n)
        .map(|m| s.field.hull_offset_distance(m as f64 * s.spacing))
        .collect();

    // Cached physical values and derivatives for C1 distances.
    let vals: Vec<Vec<f64>> = s
        .snapshots
        .iter()
        .map(|snap| snap.state.values().to_vec())
        .collect();
    let ders: Vec<Vec<f64>> = s
        .snapshots
        .iter()
        .map(|snap| snap.state.deriv().values().to_vec())
        .collect();

    // Recurrence: hull-close pairs separated by more than t_min with C1-close
    // states.
    let mut recurrent = vec![false; n];
    for m in 1..n {
        if (m as f64 * s.spacing) <= tols.t_min || offset_dist[m] >= tols.hull_tol {
            continue;
        }
        for i in 0..n - m {
            if c1_distance_cached(&vals, &ders, i, i + m) < tols.fiber_tol {
                recurrent[i] = true;
                recurrent[i + m] = true;
            }
        }
    }

    // Fibers: greedy assignment to the first hull-close anchor.
    let mut anchors: Vec<usize> = Vec::new();
    let mut membership: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let mut placed = false;
        for (a, &anchor) in anchors.iter().enumerate() {
            if offset_dist[i - anchor] < tols.hull_tol {
                membership[a].push(i);
                placed = true;
                break;
            }
        }
        if !placed {
            anchors.push(i);
            membership.push(vec![i]);
        }
    }

    let values = section_values(s, x0);
    let mut fibers = Vec::with_capacity(anchors.len());
    for (a, members) in anchors.iter().zip(&membership) {
        let mut diameter = 0.0f64;
        for (ii, &i) in members.iter().enumerate() {
            for &j in &members[ii + 1..] {
                diameter = diameter.max(c1_distance_cached(&vals, &ders, i, j));
            }
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &i in members {
            lo = lo.min(values[i]);
            hi = hi.max(values[i]);
        }
        fibers.push(FiberStats {
            base_phase: s.snapshots[*a].hull_phase.clone(),
            members: members.clone(),
            diameter,
            value_range: [lo, hi],
        });
    }

    let voting: Vec<usize> = (0..fibers.len())
        .filter(|&f| fibers[f].members.len() >= tols.min_fiber_members)
        .collect();
    if voting.is_empty() {
        let best = fibers.iter().map(|f| f.members.len()).max().unwrap_or(0);
        return Err(Error::InsufficientRecurrence {
            members: best,
            required: tols.min_fiber_members,
        });
    }

    // Per voting fiber: largest-gap clusters of recurrent section values.
    let mut fiber_clusters = Vec::with_capacity(voting.len());
    for &f in &voting {
        let mut pts: Vec<(f64, usize)> = fibers[f]
            .members
            .iter()
            .filter(|&&i| recurrent[i])
            .map(|&i| (values[i], i))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let clusters = if pts.is_empty() {
            Vec::new()
        } else {
            gap_clusters(&pts, tols.gap_factor, tols.fiber_tol)
                .into_iter()
                .map(|c| c.into_iter().map(|(_, i)| i).collect::<Vec<usize>>())
                .collect()
        };
        fiber_clusters.push(clusters);
    }

    Ok(FiberAnalysis {
        fibers,
        recurrent,
        fiber_clusters,
        voting,
    })
}

/// Counts minimal-set candidates: clusters of recurrent section values per
/// hull fiber, maximum over well-populated fibers.
///
/// Connecting-orbit evidence is either a non-recurrent snapshot whose section
/// value escapes every cluster band, or a voting fiber whose recurrent values
/// spread over more than ten state-resolutions (a 1-cover fiber would be a
/// point at tolerance).
pub fn count_minimal_sets(
    s: &OmegaSample,
    x0: f64,
    tols: &OmegaTolerances,
) -> Result<MinimalSetCount> {
    let analysis = analyze_fibers(s, x0, tols)?;
    let values = section_values(s, x0);

    let mut count = 0usize;
    let mut best_fiber = None;
    for (vi, clusters) in analysis.fiber_clusters.iter().enumerate() {
        if clusters.is_empty() {
            continue;
        }
        if clusters.len() > count {
            count = clusters.len();
            best_fiber = Some(vi);
        }
    }
    if count == 0 {
        return Err(Error::InsufficientRecurrence {
            members: 0,
            required: 1,
        });
    }

    let cluster_ranges: Vec<[f64; 2]> = best_fiber
        .map(|vi| {
            analysis.fiber_clusters[vi]
                .iter()
                .map(|c| {
                    let lo = c.iter().map(|&i| values[i]).fold(f64::INFINITY, f64::min);
                    let hi = c
                        .iter()
                        .map(|&i| values[i])
                        .fold(f64::NEG_INFINITY, f64::max);
                    [lo, hi]
                })
                .collect()
        })
        .unwrap_or_default();

    // Bands across all voting fibers, inflated by the state resolution.
    let mut bands: Vec<[f64; 2]> = Vec::new();
    for clusters in &analysis.fiber_clusters {
        for c in clusters {
            let lo = c.iter().map(|&i| values[i]).fold(f64::INFINITY, f64::min);
            let hi = c
                .iter()
                .map(|&i| values[i])
                .fold(f64::NEG_INFINITY, f64::max);
            bands.push([lo - tols.fiber_tol, hi + tols.fiber_tol]);
        }
    }
    let outside_bands = |v: f64| bands.iter().all(|b| v < b[0] || v > b[1]);
    let mut connecting = (0..s.snapshots.len())
        .any(|i| !analysis.recurrent[i] && outside_bands(values[i]));
    // Second evidence route: a voting fiber whose recurrent values spread far
    // beyond the state resolution cannot be a 1-cover fiber of a minimal set.
    let spread_tol = tols.gap_factor * tols.fiber_tol;
    for clusters in &analysis.fiber_clusters {
        for c in clusters {
            if c.len() >= 2 {
                let lo = c.iter().map(|&i| values[i]).fold(f64::INFINITY, f64::min);
                let hi = c
                    .iter()
                    .map(|&i| values[i])
                    .fold(f64::NEG_INFINITY, f64::max);
                if hi - lo > spread_tol {
                    connecting = true;
                }
            }
        }
    }

    let falsification = if count > 2 {
        Some(format!(
            "{count} recurrent value clusters in one fiber: more than two minimal sets \
             (check tolerances before doubting the theorem)"
        ))
    } else {
        None
    };

    Ok(MinimalSetCount {
        count,
        connecting_detected: connecting,
        fibers: analysis.fibers,
        recurrent: analysis.recurrent,
        falsification,
        cluster_ranges,
    })
}

/// Estimated fiber cardinality: C1-distance clusters (single linkage at
/// resolution `fiber_tol`) of the dominant recurrent cluster per voting
/// fiber, maximum over fibers. `1` is consistent with a 1-cover.
pub fn cover_test(s: &OmegaSample, x0: f64, tols: &OmegaTolerances) -> Result<usize> {
    let analysis = analyze_fibers(s, x0, tols)?;
    let vals: Vec<Vec<f64>> = s
        .snapshots
        .iter()
        .map(|snap| snap.state.values().to_vec())
        .collect();
    let ders: Vec<Vec<f64>> = s
        .snapshots
        .iter()
        .map(|snap| snap.state.deriv().values().to_vec())
        .collect();

    let mut cardinality = 0usize;
    for clusters in &analysis.fiber_clusters {
        // Dominant cluster: the one holding most members (the minimal set the
        // orbit keeps returning to).
        let Some(dominant) = clusters.iter().max_by_key(|c| c.len()) else {
            continue;
        };
        if dominant.is_empty() {
            continue;
        }
        // Single-linkage components at resolution fiber_tol.
        let k = dominant.len();
        let mut comp: Vec<usize> = (0..k).collect();
        fn find(comp: &mut Vec<usize>, i: usize) -> usize {
            if comp[i] != i {
                let r = find(comp, comp[i]);
                comp[i] = r;
            }
            comp[i]
        }
        for a in 0..k {
            for b in a + 1..k {
                if c1_distance_cached(&vals, &ders, dominant[a], dominant[b]) < tols.fiber_tol {
                    let ra = find(&mut comp, a);
                    let rb = find(&mut comp, b);
                    comp[ra] = rb;
                }
            }
        }
        let mut roots: Vec<usize> = (0..k).map(|i| find(&mut comp, i)).collect();
        roots.sort_unstable();
        roots.dedup();
        cardinality = cardinality.max(roots.len());
    }
    if cardinality == 0 {
        return Err(Error::InsufficientRecurrence {
            members: 0,
            required: 1,
        });
    }
    Ok(cardinality)
}

/// Forward/backward proximality evidence for a trajectory pair.
///
/// The parabolic equation cannot be integrated backward, so "backward" dips
/// are read from the early window of the stored forward history and labeled
/// as such; the verdicts are statements about the sampled forward orbit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProximalScan {
    pub forward_dip: bool,
    pub backward_dip: bool,
    pub two_sided: bool,
    pub min_late: f64,
    pub min_early: f64,
}

pub fn proximal_pair_scan(
    traj_a: &Trajectory,
    traj_b: &Trajectory,
    tol: f64,
) -> Result<ProximalScan> {
    if traj_a.samples.len() != traj_b.samples.len() {
        return Err(Error::MismatchedTrajectories(
            "sample counts differ".into(),
        ));
    }
    let n = traj_a.samples.len();
    let dist: Vec<f64> = traj_a
        .samples
        .iter()
        .zip(&traj_b.samples)
        .map(|(a, b)| a.state.c1_distance(&b.state))
        .collect();
    let max = dist.iter().fold(0.0f64, |m, &d| m.max(d));
    if max <= tol {
        return Err(Error::IndistinctTrajectories(max));
    }
    let third = n / 3;
    let min_early = dist[..third.max(1)]
        .iter()
        .fold(f64::INFINITY, |m, &d| m.min(d));
    let min_late = dist[n - third.max(1)..]
        .iter()
        .fold(f64::INFINITY, |m, &d| m.min(d));
    let forward_dip = min_late < tol;
    let backward_dip = min_early < tol;
    Ok(ProximalScan {
        forward_dip,
        backward_dip,
        two_sided: forward_dip && backward_dip,
        min_late,
        min_early,
    })
}

/// Trichotomy of omega-limit structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrichotomyCase {
    /// (i) the sampled set looks minimal.
    Minimal,
    /// (ii) one minimal set plus connecting orbit evidence.
    OneMinimalPlusConnecting,
    /// (iii) two minimal sets plus connecting orbits.
    TwoMinimalPlusConnecting,
}

/// One classification cross-check derived from the dimension counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoremFlag {
    pub rule: String,
    pub applicable: bool,
    /// `None` when not applicable.
    pub passed: Option<bool>,
    pub detail: String,
}

/// Classification record of a sampled omega-limit set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OmegaReport {
    pub x0: CriticalPoint,
    pub homogeneous: bool,
    pub minimal_set_count: usize,
    pub connecting_detected: bool,
    pub cover_cardinality: usize,
    pub trichotomy: TrichotomyCase,
    pub dim_u: usize,
    pub dim_c: usize,
    /// Max over snapshots of the reflection defect at the critical point,
    /// `||rho_{x0} u - u||_inf`; small values confirm the fixed-point
    /// characterization of the critical point.
    pub reflection_residual: f64,
    /// Fraction of 256 hull probe points visited within `hull_tol`.
    pub fiber_coverage: f64,
    pub flags: Vec<TheoremFlag>,
    pub falsifications: Vec<String>,
    pub tolerances: OmegaTolerances,
}

/// Assembles the full classification: component analyses plus the
/// dimension-count implications, each reported as a pass/fail/not-applicable
/// flag with diagnostics.
pub fn classify(
    s: &OmegaSample,
    spectrum: &SpectrumEstimate,
    tols: &OmegaTolerances,
) -> Result<OmegaReport> {
    let homogeneous = homogeneity_test(s, tols.homogeneity_tol);
    let critical = find_common_critical_point(s, tols.critical_tol);
    let x0 = match critical {
        CriticalPoint::Everywhere => 0.0,
        CriticalPoint::At { x, .. } => x,
        CriticalPoint::NotFound { best_x, .. } => best_x,
    };
    let counts = count_minimal_sets(s, x0, tols)?;
    let cover = cover_test(s, x0, tols)?;

    let mut falsifications = Vec::new();
    if let Some(f) = &counts.falsification {
        falsifications.push(f.clone());
    }
    if !homogeneous {
        if let CriticalPoint::NotFound { best_x, best_slope } = critical {
            falsifications.push(format!(
                "no common critical point for an inhomogeneous symmetric sample: \
                 best max|u_x| = {best_slope:.3e} at x = {best_x:.4}"
            ));
        }
    }

    let reflection_residual = s
        .snapshots
        .iter()
        .map(|snap| snap.state.reflect(x0).sub(&snap.state).linf())
        .fold(0.0f64, f64::max);

    let fiber_coverage = hull_coverage(s, tols.hull_tol);

    let trichotomy = match (counts.count, counts.connecting_detected) {
        (1, false) => TrichotomyCase::Minimal,
        (1, true) => TrichotomyCase::OneMinimalPlusConnecting,
        _ => TrichotomyCase::TwoMinimalPlusConnecting,
    };

    let mut flags = Vec::new();
    let (dim_u, dim_c) = (spectrum.dim_u, spectrum.dim_c);
    if dim_c == 0 {
        let pass = homogeneous && counts.count == 1 && cover == 1;
        flags.push(TheoremFlag {
            rule: "hyperbolic: dim_c = 0 implies a spatially homogeneous 1-cover".into(),
            applicable: true,
            passed: Some(pass),
            detail: format!(
                "homogeneous = {homogeneous}, count = {}, cover = {cover}",
                counts.count
            ),
        });
    } else if dim_c == 1 && dim_u > 0 {
        let pass = !homogeneous && cover == 1;
        flags.push(TheoremFlag {
            rule: "dim_c = 1, dim_u > 0 implies a spatially inhomogeneous 1-cover".into(),
            applicable: true,
            passed: Some(pass),
            detail: format!("homogeneous = {homogeneous}, cover = {cover}"),
        });
    } else if dim_c == 1 && dim_u == 0 {
        flags.push(TheoremFlag {
            rule: "dim_c = 1, dim_u = 0 implies spatial homogeneity".into(),
            applicable: true,
            passed: Some(homogeneous),
            detail: format!("homogeneous = {homogeneous}"),
        });
    } else {
        flags.push(TheoremFlag {
            rule: "center dimension >= 2".into(),
            applicable: false,
            passed: None,
            detail: format!(
                "no applicable implication for dim_c = {dim_c}, dim_u = {dim_u}"
            ),
        });
    }
    for f in &flags {
        if f.passed == Some(false) {
            falsifications.push(format!("classification flag failed: {} ({})", f.rule, f.detail));
        }
    }

    Ok(OmegaReport {
        x0: critical,
        homogeneous,
        minimal_set_count: counts.count.min(2),
        connecting_detected: counts.connecting_detected,
        cover_cardinality: cover,
        trichotomy,
        dim_u,
        dim_c,
        reflection_residual,
        fiber_coverage,
        flags,
        falsifications,
        tolerances: *tols,
    })
}

/// Fraction of deterministic hull probe points visited by the sample within
/// `hull_tol`; a statement of how much of the phase torus the finite run can
/// certify.
fn hull_coverage(s: &OmegaSample, hull_tol: f64) -> f64 {
    let dim = s.field.frequencies().len();
    if dim == 0 {
        return 1.0;
    }
    let probes = 256;
    // Low-discrepancy probe points from a simple linear congruential stream;
    // deterministic so reports reproduce bit-for-bit.
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut hit = 0usize;
    for _ in 0..probes {
        let probe: Vec<f64> = (0..dim).map(|_| TAU * next()).collect();
        let visited = s
            .snapshots
            .iter()
            .any(|snap| s.field.hull_phase_distance(&probe, &snap.hull_phase) < hull_tol);
        if visited {
            hit += 1;
        }
    }
    hit as f64 / probes as f64
}

/// Sign stabilization at fixed probe points: the sign of `u_x(t_i, a)` over
/// the sampled tail is eventually constant (dead band `1e-8`). Returns true
/// when every probe stabilizes over the last half of the sample.
pub fn sign_stabilization(s: &OmegaSample, probes: usize) -> bool {
    let dead = 1e-8;
    let n = s.snapshots.len();
    let tail = &s.snapshots[n / 2..];
    (0..probes).all(|p| {
        let a = TAU * p as f64 / probes as f64;
        let mut sign = 0i8;
        for snap in tail {
            let d = snap.state.deriv_at(a);
            if d.abs() < dead {
                continue;
            }
            let sg = if d > 0.0 { 1 } else { -1 };
            if sign == 0 {
                sign = sg;
            } else if sg != sign {
                return false;
            }
        }
        true
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forcing::{EvenPoly, ForcingField};
    use crate::signal::QuasiPeriodicSum;
    use crate::solver::evolve;

    fn heat_sample() -> OmegaSample {
        let field = ForcingField::scalar_linear(QuasiPeriodicSum::zero(), 0.0);
        let u0 = GridFunction::from_fn(64, |x| 0.5 + 0.3 * x.sin() + 0.1 * (3.0 * x).cos());
        let cfg = SolverConfig::default();
        // Samples every 0.2 from t = 0; transient 6.
        let traj = evolve(&u0, &field, 30.0, &cfg, 200).unwrap();
        sample_omega(&traj, 6.0, 1).unwrap()
    }

    #[test]
    fn heat_flow_settles_to_mean() {
        let s = heat_sample();
        for snap in &s.snapshots {
            assert!((snap.state.mean() - 0.5).abs() < 1e-9);
            assert!(snap.state.sub(&GridFunction::constant(64, 0.5)).linf() < 1e-2);
        }
        assert!(homogeneity_test(&s, 1e-2));
    }

    #[test]
    fn homogeneous_sample_has_critical_point_everywhere() {
        let field = ForcingField::autonomous_even(EvenPoly::bistable());
        let u0 = GridFunction::constant(64, 0.7);
        let cfg = SolverConfig::default();
        let traj = evolve(&u0, &field, 30.0, &cfg, 500).unwrap();
        let s = sample_omega(&traj, 6.0, 1).unwrap();
        assert!(matches!(
            find_common_critical_point(&s, 1e-4),
            CriticalPoint::Everywhere
        ));
    }

    #[test]
    fn sin_profile_critical_point_at_half_pi() {
        // States proportional to sin x share critical points pi/2, 3pi/2.
        let field = ForcingField::scalar_linear(QuasiPeriodicSum::dyadic(1e-12), -1.0);
        let u0 = GridFunction::from_fn(64, |x| x.sin());
        let cfg = SolverConfig::default();
        let traj = evolve(&u0, &field, 40.0, &cfg, 500).unwrap();
        let s = sample_omega(&traj, 8.0, 1).unwrap();
        assert!(!homogeneity_test(&s, 1e-4));
        match find_common_critical_point(&s, 1e-4) {
            CriticalPoint::At { x, .. } => {
                let d1 = (x - std::f64::consts::FRAC_PI_2).abs();
                let d2 = (x - 3.0 * std::f64::consts::FRAC_PI_2).abs();
                let cell = TAU / 64.0;
                assert!(d1 < cell || d2 < cell, "x0 = {x}");
            }
            other => panic!("expected a common critical point, got {other:?}"),
        }
    }

    #[test]
    fn translated_copies_admit_no_common_critical_point() {
        // sigma_a sin for scattered a: cos(x - a) cannot vanish for all a;
        // such a family is not an omega-limit sample of a symmetric field.
        let mut snapshots = Vec::new();
        let base = GridFunction::from_fn(64, |x| x.sin());
        for i in 0..10 {
            let a = 0.37 + 0.55 * i as f64;
            snapshots.push(OmegaSnapshot {
                t: i as f64,
                state: base.translate(a),
                hull_phase: Vec::new(),
            });
        }
        let field = ForcingField::autonomous_even(EvenPoly::bistable());
        let s = OmegaSample {
            snapshots,
            t_transient: 0.0,
            config: SolverConfig::default(),
            field,
            spacing: 1.0,
        };
        assert!(matches!(
            find_common_critical_point(&s, 1e-6),
            CriticalPoint::NotFound { .. }
        ));
    }

    #[test]
    fn bistable_counts_one_minimal_set() {
        let field = ForcingField::autonomous_even(EvenPoly::bistable());
        let u0 = GridFunction::from_fn(64, |x| 0.3 + 0.05 * x.sin());
        let mut cfg = SolverConfig::default();
        cfg.dt = 2e-3;
        // Spacing 1.0, enough samples for 10+ per (trivial) fiber.
        let traj = evolve(&u0, &field, 60.0, &cfg, 500).unwrap();
        let s = sample_omega(&traj, 20.0, 1).unwrap();
        let tols = OmegaTolerances::default();
        let counts = count_minimal_sets(&s, 0.0, &tols).unwrap();
        assert_eq!(counts.count, 1);
        assert!(!counts.connecting_detected);
        assert!(counts.falsification.is_none());
        assert_eq!(cover_test(&s, 0.0, &tols).unwrap(), 1);
    }

    #[test]
    fn proximal_scan_decaying_perturbation() {
        // A perturbation in a strictly stable direction dips forward but not
        // backward.
        let field = ForcingField::scalar_linear(QuasiPeriodicSum::zero(), 0.0);
        let u0 = GridFunction::from_fn(64, |x| 0.4 + 0.2 * x.sin());
        let pert = GridFunction::from_fn(64, |x| 0.5 * (2.0 * x).sin());
        let cfg = SolverConfig::default();
        let ta = evolve(&u0, &field, 12.0, &cfg, 100).unwrap();
        let tb = evolve(&u0.add(&pert), &field, 12.0, &cfg, 100).unwrap();
        let scan = proximal_pair_scan(&ta, &tb, 1e-4).unwrap();
        assert!(scan.forward_dip);
        assert!(!scan.backward_dip);
        assert!(!scan.two_sided);
    }

    #[test]
    fn proximal_scan_rejects_identical() {
        let field = ForcingField::scalar_linear(QuasiPeriodicSum::zero(), 0.0);
        let u0 = GridFunction::from_fn(64, |x| x.sin());
        let cfg = SolverConfig::default();
        let ta = evolve(&u0, &field, 5.0, &cfg, 100).unwrap();
        assert!(matches!(
            proximal_pair_scan(&ta, &ta.clone(), 1e-6),
            Err(Error::IndistinctTrajectories(_))
        ));
    }

    #[test]
    fn sign_stabilization_on_settled_profile() {
        let field = ForcingField::scalar_linear(QuasiPeriodicSum::dyadic(1e-12), -1.0);
        let u0 = GridFunction::from_fn(64, |x| x.sin());
        let cfg = SolverConfig::default();
        let traj = evolve(&u0, &field, 30.0, &cfg, 500).unwrap();
        let s = sample_omega(&traj, 6.0, 1).unwrap();
        assert!(sign_stabilization(&s, 16));
    }
}
