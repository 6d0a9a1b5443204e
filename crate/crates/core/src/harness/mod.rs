//! Run configuration, persistence, and the verification pipeline: the glue
//! between the CLI and the analysis modules.
//!
//! Determinism contract: a [`RunConfig`] (including its seed) fixes every
//! randomized choice, and all floating-point output is rendered in fixed
//! `%.12e` notation, so equal configs produce byte-identical files.

pub mod verify;

use crate::error::Error;
use crate::omega::{classify, sample_omega, OmegaReport, OmegaTolerances};
use crate::scenarios::{self, Scenario};
use crate::solver::{evolve, Trajectory};
use crate::variational::{
    floquet_homogeneous, lyapunov_spectrum_traced, SpectrumEstimate,
};
use crate::Result;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// A named scenario plus overrides: the unit of reproducible execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scenario: String,
    /// Grid size override.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Time step override (simulation runs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Integration length override (simulation and omega runs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    /// Transient override for omega runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_transient: Option<f64>,
    /// Snapshot spacing override for omega runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    /// Lyapunov horizon override.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Tangent frame size override.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Spectral gap tolerance override.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_tol: Option<f64>,
    /// Seed for every randomized choice.
    #[serde(default)]
    pub seed: u64,
    /// Export trajectories as spectral coefficients instead of grid values.
    #[serde(default)]
    pub spectral: bool,
}

impl RunConfig {
    pub fn new(scenario: &str) -> Self {
        Self {
            scenario: scenario.to_string(),
            n: None,
            dt: None,
            t_end: None,
            t_transient: None,
            spacing: None,
            horizon: None,
            m: None,
            gap_tol: None,
            seed: 0,
            spectral: false,
        }
    }

    /// Loads the scenario and applies the overrides.
    pub fn resolve(&self) -> Result<Scenario> {
        let mut sc = scenarios::by_name(&self.scenario)?;
        if let Some(n) = self.n {
            if !n.is_power_of_two() || n < 16 {
                return Err(Error::Config(format!(
                    "grid size {n} must be a power of two >= 16"
                )));
            }
            sc.config.n = n;
        }
        if let Some(dt) = self.dt {
            if dt <= 0.0 {
                return Err(Error::Config("dt must be positive".into()));
            }
            sc.config.dt = dt;
            sc.omega.dt = dt;
        }
        if let Some(t) = self.t_transient {
            sc.omega.t_transient = t;
        }
        if let Some(sp) = self.spacing {
            sc.omega.spacing = sp;
        }
        if let Some(h) = self.horizon {
            sc.spectrum.horizon = h;
        }
        if let Some(m) = self.m {
            sc.spectrum.m = m;
        }
        if let Some(g) = self.gap_tol {
            sc.spectrum.gap_tol = g;
        }
        Ok(sc)
    }
}

/// Formats every float as `%.12e`, the repository-wide convention for
/// reproducible diffs.
pub fn sci(v: f64) -> String {
    format!("{v:.12e}")
}

/// JSON serialization with `%.12e` floats.
pub fn to_json_sci<T: Serialize>(value: &T) -> Result<String> {
    struct SciFormatter;
    impl serde_json::ser::Formatter for SciFormatter {
        fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
        where
            W: ?Sized + std::io::Write,
        {
            write!(writer, "{value:.12e}")
        }
        fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()>
        where
            W: ?Sized + std::io::Write,
        {
            write!(writer, "{value:.12e}")
        }
    }
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFormatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

/// Columnar CSV export of a trajectory: header `t,x_0,...,x_{N-1}` for grid
/// values or `t,re_0,im_0,...` for spectral coefficients.
pub fn trajectory_csv(traj: &Trajectory, spectral: bool) -> String {
    let n = traj.config.n;
    let mut out = String::new();
    if spectral {
        out.push('t');
        for k in 0..n {
            out.push_str(&format!(",re_{k},im_{k}"));
        }
        out.push('\n');
        for s in &traj.samples {
            out.push_str(&sci(s.t));
            for c in s.state.coeffs() {
                out.push(',');
                out.push_str(&sci(c.re));
                out.push(',');
                out.push_str(&sci(c.im));
            }
            out.push('\n');
        }
    } else {
        out.push('t');
        for j in 0..n {
            out.push_str(&format!(",x_{j}"));
        }
        out.push('\n');
        for s in &traj.samples {
            out.push_str(&sci(s.t));
            for &v in s.state.values() {
                out.push(',');
                out.push_str(&sci(v));
            }
            out.push('\n');
        }
    }
    out
}

/// Metadata echoed with every simulation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config: RunConfig,
    pub resolved_scenario: Scenario,
    pub t_end: f64,
    pub sample_count: usize,
}

/// Runs a simulation and writes `trajectory.csv` + `metadata.json` under
/// `out_dir`. Returns the trajectory for further use.
pub fn run_simulate(cfg: &RunConfig, out_dir: &Path) -> Result<Trajectory> {
    let sc = cfg.resolve()?;
    let t_end = cfg.t_end.unwrap_or(sc.omega.t_end.min(64.0));
    let u0 = sc.u0.build(sc.config.n, cfg.seed);
    // Sample roughly 256 rows plus endpoints, deterministically.
    let steps = (t_end / sc.config.dt).round().max(1.0) as usize;
    let stride = (steps / 256).max(1);
    let traj = evolve(&u0, &sc.field, t_end, &sc.config, stride)?;
    let meta = RunMetadata {
        config: cfg.clone(),
        resolved_scenario: sc,
        t_end,
        sample_count: traj.samples.len(),
    };
    write_file(
        &out_dir.join("trajectory.csv"),
        &trajectory_csv(&traj, cfg.spectral),
    )?;
    write_file(&out_dir.join("metadata.json"), &to_json_sci(&meta)?)?;
    Ok(traj)
}

/// Spectrum pipeline output: the estimate in the documented schema plus the
/// cross-check when the orbit is homogeneous.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumRun {
    pub scenario: String,
    pub estimate: SpectrumEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crosscheck: Option<crate::variational::CrosscheckReport>,
    /// True when the estimate matches the scenario's expected fragments (when
    /// any are declared).
    pub within_expected: Option<bool>,
}

/// Runs the Lyapunov pipeline; writes `spectrum.json` and a `convergence.dat`
/// trace under `out_dir` when given.
pub fn run_spectrum(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<SpectrumRun> {
    let sc = cfg.resolve()?;
    let mut solver_cfg = sc.config;
    solver_cfg.dt = sc.spectrum.dt;
    let u0 = sc.u0.build(solver_cfg.n, cfg.seed);
    let horizon = sc.spectrum.horizon;
    let traj = evolve(&u0, &sc.field, horizon, &solver_cfg, usize::MAX)?;
    let (estimate, trace) =
        lyapunov_spectrum_traced(&traj, sc.spectrum.m, horizon, sc.spectrum.gap_tol)?;

    // Cross-check against the explicit modes when the orbit is homogeneous.
    let crosscheck = match floquet_homogeneous(&sc.field, &traj, sc.spectrum.k_max, horizon) {
        Ok(modes) => {
            let mut floq: Vec<f64> = modes.iter().map(|m| m.exponent).collect();
            floq.sort_by(|a, b| b.total_cmp(a));
            let max_discrepancy = floq
                .iter()
                .zip(&estimate.exponents)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            Some(crate::variational::CrosscheckReport {
                floquet: floq,
                frame: estimate.exponents.clone(),
                max_discrepancy,
            })
        }
        Err(Error::InhomogeneousTrajectory { .. }) => None,
        Err(e) => return Err(e),
    };

    let within_expected = sc.expected_spectrum.as_ref().map(|exp| {
        estimate.exponents.len() >= exp.exponents.len()
            && exp
                .exponents
                .iter()
                .zip(&estimate.exponents)
                .all(|(e, a)| (e - a).abs() <= exp.tol)
            && estimate.dim_u == exp.dim_u
            && estimate.dim_c == exp.dim_c
    });

    let run = SpectrumRun {
        scenario: sc.name.clone(),
        estimate,
        crosscheck,
        within_expected,
    };
    if let Some(dir) = out_dir {
        write_file(&dir.join("spectrum.json"), &to_json_sci(&run.estimate)?)?;
        write_file(&dir.join("spectrum_run.json"), &to_json_sci(&run)?)?;
        let mut conv = String::new();
        for (t, row) in &trace {
            conv.push_str(&sci(*t));
            for v in row {
                conv.push(' ');
                conv.push_str(&sci(*v));
            }
            conv.push('\n');
        }
        write_file(&dir.join("convergence.dat"), &conv)?;
    }
    Ok(run)
}

/// Omega pipeline output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OmegaRun {
    pub scenario: String,
    pub report: OmegaReport,
    pub within_expected: Option<bool>,
}

/// Runs the omega-limit pipeline: evolve, sample, classify; writes
/// `omega.json` under `out_dir` when given.
pub fn run_omega(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<OmegaRun> {
    let sc = cfg.resolve()?;
    let mut solver_cfg = sc.config;
    solver_cfg.dt = sc.omega.dt;
    let t_end = cfg.t_end.unwrap_or(sc.omega.t_end);
    let u0 = sc.u0.build(solver_cfg.n, cfg.seed);
    let stride = (sc.omega.spacing / solver_cfg.dt).round() as usize;
    if stride == 0 || (stride as f64 * solver_cfg.dt - sc.omega.spacing).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "snapshot spacing {} is not a multiple of dt {}",
            sc.omega.spacing, solver_cfg.dt
        )));
    }
    let traj = evolve(&u0, &sc.field, t_end, &solver_cfg, stride)?;
    let sample = sample_omega(&traj, sc.omega.t_transient, 1)?;

    let mut spec_cfg = sc.config;
    spec_cfg.dt = sc.spectrum.dt;
    let spec_traj = evolve(
        &u0,
        &sc.field,
        sc.spectrum.horizon,
        &spec_cfg,
        usize::MAX,
    )?;
    let (estimate, _) = lyapunov_spectrum_traced(
        &spec_traj,
        sc.spectrum.m,
        sc.spectrum.horizon,
        sc.spectrum.gap_tol,
    )?;

    let tols = OmegaTolerances::default();
    let report = classify(&sample, &estimate, &tols)?;

    let within_expected = sc.expected_omega.as_ref().map(|exp| {
        let mut ok = true;
        if let Some(h) = exp.homogeneous {
            ok &= report.homogeneous == h;
        }
        if let Some(c) = exp.minimal_set_count {
            ok &= report.minimal_set_count == c;
        }
        if let Some(max) = exp.count_at_most {
            ok &= report.minimal_set_count <= max;
        }
        if let Some(con) = exp.connecting {
            ok &= report.connecting_detected == con;
        }
        if let Some(tri) = exp.trichotomy {
            ok &= report.trichotomy == tri;
        }
        if let Some(cov) = exp.cover {
            ok &= report.cover_cardinality == cov;
        }
        ok
    });

    let run = OmegaRun {
        scenario: sc.name.clone(),
        report,
        within_expected,
    };
    if let Some(dir) = out_dir {
        write_file(&dir.join("omega.json"), &to_json_sci(&run)?)?;
    }
    Ok(run)
}

/// Plot-data kinds for `export-plot`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// `t  u(t, x0)` at the quarter-circle section.
    Section,
    /// `t  certified-count` from a lap report.
    Lap,
    /// `t  x_0 ... x_{N-1}` whitespace-separated field rows.
    Field,
    /// `index  exponent  interval_lo  interval_hi` from a spectrum report.
    Exponents,
}

impl std::str::FromStr for PlotKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "section" => Ok(PlotKind::Section),
            "lap" => Ok(PlotKind::Lap),
            "field" => Ok(PlotKind::Field),
            "exponents" => Ok(PlotKind::Exponents),
            other => Err(Error::Config(format!("unknown plot kind '{other}'"))),
        }
    }
}

/// Converts a previously written artifact (trajectory CSV, lap report JSON,
/// spectrum JSON) into gnuplot-ready columns.
pub fn export_plot(input: &Path, kind: PlotKind) -> Result<String> {
    let text = fs::read_to_string(input)?;
    match kind {
        PlotKind::Section | PlotKind::Field => {
            let mut lines = text.lines();
            let header = lines
                .next()
                .ok_or_else(|| Error::Config("empty trajectory file".into()))?;
            let cols = header.split(',').count();
            if cols < 2 || !header.starts_with('t') {
                return Err(Error::Config("not a trajectory CSV".into()));
            }
            let n = cols - 1;
            let mut out = String::new();
            for line in lines {
                let mut fields = line.split(',');
                let t = fields.next().unwrap_or_default();
                if kind == PlotKind::Field {
                    out.push_str(t);
                    for f in fields {
                        out.push(' ');
                        out.push_str(f);
                    }
                    out.push('\n');
                } else {
                    // Section at x = pi/2: grid index n/4.
                    let target = n / 4;
                    let v = fields.nth(target).unwrap_or_default();
                    out.push_str(t);
                    out.push(' ');
                    out.push_str(v);
                    out.push('\n');
                }
            }
            Ok(out)
        }
        PlotKind::Lap => {
            let report: crate::zero::LapReport = serde_json::from_str(&text)?;
            let mut out = String::new();
            for s in &report.samples {
                if let Some(c) = s.count {
                    out.push_str(&format!("{} {}\n", sci(s.t), c));
                }
            }
            Ok(out)
        }
        PlotKind::Exponents => {
            let est: SpectrumEstimate = serde_json::from_str(&text)?;
            let mut out = String::new();
            for (i, (e, iv)) in est.exponents.iter().zip(&est.intervals).enumerate() {
                out.push_str(&format!(
                    "{i} {} {} {}\n",
                    sci(*e),
                    sci(iv[0]),
                    sci(iv[1])
                ));
            }
            Ok(out)
        }
    }
}

/// Writes plot output next to the input (or to the explicit path).
pub fn export_plot_to(input: &Path, kind: PlotKind, out: Option<&Path>) -> Result<PathBuf> {
    let data = export_plot(input, kind)?;
    let path = match out {
        Some(p) => p.to_path_buf(),
        None => input.with_extension("dat"),
    };
    write_file(&path, &data)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sci_formatting_is_fixed_width_exponential() {
        assert_eq!(sci(1.0), "1.000000000000e0");
        assert_eq!(sci(-0.5), "-5.000000000000e-1");
    }

    #[test]
    fn json_sci_floats() {
        #[derive(Serialize)]
        struct S {
            a: f64,
        }
        let s = to_json_sci(&S { a: 0.25 }).unwrap();
        assert!(s.contains("2.500000000000e-1"), "{s}");
        let parsed: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(parsed["a"].as_f64(), Some(0.25));
    }

    #[test]
    fn simulate_writes_files_and_metadata_echoes_config(){
        let dir = std::env::temp_dir().join("sturmlab-test-sim");
        let _ = fs::remove_dir_all(&dir);
        let mut cfg = RunConfig::new("bistable");
        cfg.t_end = Some(1.0);
        cfg.n = Some(32);
        cfg.dt = Some(2e-3);
        let traj = run_simulate(&cfg, &dir).unwrap();
        assert!(dir.join("trajectory.csv").exists());
        let meta: RunMetadata =
            serde_json::from_str(&fs::read_to_string(dir.join("metadata.json")).unwrap()).unwrap();
        assert_eq!(meta.resolved_scenario.config.n, 32);
        assert_eq!(meta.resolved_scenario.config.dt, 2e-3);
        assert_eq!(meta.sample_count, traj.samples.len());
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn simulate_reruns_are_byte_identical() {
        let d1 = std::env::temp_dir().join("sturmlab-test-det1");
        let d2 = std::env::temp_dir().join("sturmlab-test-det2");
        for d in [&d1, &d2] {
            let _ = fs::remove_dir_all(d);
        }
        let mut cfg = RunConfig::new("ex62");
        cfg.t_end = Some(0.5);
        cfg.seed = 42;
        run_simulate(&cfg, &d1).unwrap();
        run_simulate(&cfg, &d2).unwrap();
        let a = fs::read(d1.join("trajectory.csv")).unwrap();
        let b = fs::read(d2.join("trajectory.csv")).unwrap();
        assert_eq!(a, b);
        for d in [&d1, &d2] {
            let _ = fs::remove_dir_all(d);
        }
    }

    #[test]
    fn plot_kind_parsing() {
        assert!("section".parse::<PlotKind>().is_ok());
        assert!("nope".parse::<PlotKind>().is_err());
    }
}
