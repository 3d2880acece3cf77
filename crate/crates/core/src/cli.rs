//! Command-line front end.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success (for `certify`: nontrivial degree) |
//! | 1 | hypotheses fail |
//! | 2 | no λ-window (no winding, equal winding numbers, empty Φ) |
//! | 3 | simulation failure (blow-up, step too large, trajectory too short) |
//! | 4 | no verified orbit |
//! | 5 | degree error or inconclusive certificate |
//! | 64 | usage or config error |
//! | 73 | output file exists and `--force` was not given |
//! | 74 | I/O error while writing outputs |

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::dde::{self, estimate_period, integrate, perturbed_history, DdeError, Frame, HistoryFunction, IntegrateOptions, Logistic, LvDelay};
use crate::degree::{certify, CertifyConfig, DegreeError, DEFAULT_DEGREE_MODES};
use crate::field::{FourierLoop, GeometryConfig};
use crate::model::{check_hypotheses, HypothesisReport, LVSystem, Mat2, Vec2};
use crate::orbitfinder::{sweep, verify_orbit, BetaMode, CollocationProblem, NewtonOptions, SweepOptions};
use crate::spectrum::{catalog, hopf_window, solve_amplitudes, HopfWindow, OrbitCandidate, SpectrumError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_HYPOTHESES: i32 = 1;
pub const EXIT_NO_WINDOW: i32 = 2;
pub const EXIT_SIMULATION: i32 = 3;
pub const EXIT_NO_ORBIT: i32 = 4;
pub const EXIT_DEGREE: i32 = 5;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_CANT_CREATE: i32 = 73;
pub const EXIT_IO: i32 = 74;

#[derive(Debug, Parser)]
#[command(name = "lvperiodic", version, about = "Periodic solutions of delayed two-species Lotka-Volterra systems")]
pub struct Cli {
    /// TOML config file: `[section]` headers, `key = value` lines, `#` comments.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, created if absent. Overrides `[output] directory`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    pub force: bool,
    /// Scalar mode `u' = αu(1 − u(t−τ))`, e.g. `simulate --logistic alpha=1.7 tau=1`.
    /// Takes every following argument, so put it after the subcommand.
    #[arg(long, global = true, num_args = 0.., value_name = "KEY=VALUE")]
    pub logistic: Option<Vec<String>>,
    /// Keep only catalog entries with this Fourier mode.
    #[arg(long, global = true)]
    pub k: Option<u32>,
    /// Use this element of Φ instead of the smallest.
    #[arg(long, global = true)]
    pub j: Option<u32>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check (A0)-(A2) and write hypotheses.txt.
    Check,
    /// Write the λ-window catalog to catalog.csv.
    Spectrum,
    /// Integrate the delay system and estimate its period.
    Simulate,
    /// Solve for periodic orbits and verify them.
    Find,
    /// Compute the degree certificate.
    Certify,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{0}")]
    Syntax(String),
    #[error("missing key {0}")]
    Missing(String),
    #[error("key {key}: {msg}")]
    Invalid { key: String, msg: String },
    #[error("unknown key {0}")]
    Unknown(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemBlock {
    pub a: [[f64; 2]; 2],
    pub r: [f64; 2],
    pub tau: f64,
}

impl SystemBlock {
    pub fn matrix(&self) -> Mat2 {
        Mat2::new(self.a[0][0], self.a[0][1], self.a[1][0], self.a[1][1])
    }

    pub fn rates(&self) -> Vec2 {
        Vec2::new(self.r[0], self.r[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverBlock {
    /// Fourier modes for the orbit finder.
    pub modes: usize,
    /// Collocation points; `4K+1` when absent.
    pub points: Option<usize>,
    pub newton_tol: f64,
    pub max_iters: usize,
    pub rk4_step: f64,
    pub t_end: f64,
    pub transient_skip: f64,
    /// Amplitude of the history perturbation around the equilibrium; 0 starts at rest.
    pub history_eps: f64,
    pub degree_modes: usize,
}

impl Default for SolverBlock {
    fn default() -> Self {
        Self { modes: 16, points: None, newton_tol: 1e-10, max_iters: 50, rk4_step: 0.01, t_end: 300.0, transient_skip: 100.0, history_eps: 0.1, degree_modes: DEFAULT_DEGREE_MODES }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputBlock {
    pub directory: PathBuf,
    pub formats: Vec<String>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { directory: PathBuf::from("out"), formats: vec!["csv".into()] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: SystemBlock,
    pub solver: SolverBlock,
    pub geometry: GeometryConfig,
    pub output: OutputBlock,
}

/// Flattens `[section] key = value` into `section.key`; nested tables are rejected.
fn parse_sections(text: &str) -> Result<BTreeMap<String, toml::Value>, ConfigError> {
    let doc: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let mut out = BTreeMap::new();
    for (section, body) in doc {
        let toml::Value::Table(body) = body else {
            return Err(ConfigError::Syntax(format!("top-level key {section} must sit inside a [section]")));
        };
        for (k, v) in body {
            if v.is_table() {
                return Err(ConfigError::Syntax(format!("nested table {section}.{k}")));
            }
            out.insert(format!("{section}.{k}"), v);
        }
    }
    Ok(out)
}

struct Table(BTreeMap<String, toml::Value>);

impl Table {
    fn real(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        let x = match self.0.remove(key) {
            None => return Ok(None),
            Some(toml::Value::Float(x)) => x,
            Some(toml::Value::Integer(n)) => n as f64,
            Some(v) => return Err(ConfigError::Invalid { key: key.into(), msg: format!("{v} is not a number") }),
        };
        if !x.is_finite() {
            return Err(ConfigError::Invalid { key: key.into(), msg: "must be finite".into() });
        }
        Ok(Some(x))
    }

    fn required(&mut self, key: &str) -> Result<f64, ConfigError> {
        self.real(key)?.ok_or_else(|| ConfigError::Missing(key.into()))
    }

    fn count(&mut self, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.0.remove(key) {
            None => Ok(None),
            Some(toml::Value::Integer(n)) if n >= 0 => Ok(Some(n as usize)),
            Some(v) => Err(ConfigError::Invalid { key: key.into(), msg: format!("{v} is not a nonnegative integer") }),
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<String>, ConfigError> {
        match self.0.remove(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s)),
            Some(v) => Err(ConfigError::Invalid { key: key.into(), msg: format!("{v} is not a string") }),
        }
    }

    fn strings(&mut self, key: &str) -> Result<Option<Vec<String>>, ConfigError> {
        match self.0.remove(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(vec![s])),
            Some(toml::Value::Array(items)) => items.into_iter().map(|v| v.as_str().map(str::to_string).ok_or_else(|| ConfigError::Invalid { key: key.into(), msg: format!("{v} is not a string") })).collect::<Result<_, _>>().map(Some),
            Some(v) => Err(ConfigError::Invalid { key: key.into(), msg: format!("{v} is not a string list") }),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut t = Table(parse_sections(text)?);
        let system = SystemBlock {
            a: [[t.required("system.a11")?, t.required("system.a12")?], [t.required("system.a21")?, t.required("system.a22")?]],
            r: [t.required("system.r1")?, t.required("system.r2")?],
            tau: t.required("system.tau")?,
        };
        if system.tau < 0.0 {
            return Err(ConfigError::Invalid { key: "system.tau".into(), msg: "must be nonnegative".into() });
        }
        let d = SolverBlock::default();
        let solver = SolverBlock {
            modes: t.count("solver.K")?.unwrap_or(d.modes),
            points: t.count("solver.M")?,
            newton_tol: t.real("solver.newton_tol")?.unwrap_or(d.newton_tol),
            max_iters: t.count("solver.max_iters")?.unwrap_or(d.max_iters),
            rk4_step: t.real("solver.rk4_step")?.unwrap_or(d.rk4_step),
            t_end: t.real("solver.t_end")?.unwrap_or(d.t_end),
            transient_skip: t.real("solver.transient_skip")?.unwrap_or(d.transient_skip),
            history_eps: t.real("solver.history_eps")?.unwrap_or(d.history_eps),
            degree_modes: t.count("solver.degree_K")?.unwrap_or(d.degree_modes),
        };
        if solver.modes < 8 {
            return Err(ConfigError::Invalid { key: "solver.K".into(), msg: format!("must be at least 8, got {}", solver.modes) });
        }
        if let Some(m) = solver.points {
            if m < 4 * solver.modes + 1 {
                return Err(ConfigError::Invalid { key: "solver.M".into(), msg: format!("must be at least 4K+1 = {}", 4 * solver.modes + 1) });
            }
        }
        for (key, v) in [("solver.newton_tol", solver.newton_tol), ("solver.rk4_step", solver.rk4_step), ("solver.t_end", solver.t_end)] {
            if !(v > 0.0) {
                return Err(ConfigError::Invalid { key: key.into(), msg: "must be positive".into() });
            }
        }
        let g = GeometryConfig::default();
        let geometry = GeometryConfig {
            alpha0: t.real("geometry.alpha0")?.or(g.alpha0),
            radius_r: t.real("geometry.radius_r")?.unwrap_or(g.radius_r),
            radius_big: t.real("geometry.radius_R")?.unwrap_or(g.radius_big),
            m1_override: t.real("geometry.m1_override")?.or(g.m1_override),
        };
        let o = OutputBlock::default();
        let output = OutputBlock {
            directory: t.string("output.directory")?.map(PathBuf::from).unwrap_or(o.directory),
            formats: t.strings("output.formats")?.unwrap_or(o.formats),
        };
        if let Some(f) = output.formats.iter().find(|f| f.as_str() != "csv") {
            return Err(ConfigError::Invalid { key: "output.formats".into(), msg: format!("unsupported format {f:?}") });
        }
        if let Some(key) = t.0.keys().next() {
            return Err(ConfigError::Unknown(key.clone()));
        }
        Ok(Self { system, solver, geometry, output })
    }
}

/// Parameters of the scalar logistic mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticArgs {
    pub alpha: f64,
    pub tau: f64,
}

pub fn parse_logistic(args: &[String]) -> Result<LogisticArgs, ConfigError> {
    let mut out = LogisticArgs { alpha: 1.7, tau: 1.0 };
    for a in args {
        let (k, v) = a.split_once('=').ok_or_else(|| ConfigError::Invalid { key: "--logistic".into(), msg: format!("expected key=value, got {a:?}") })?;
        let x: f64 = v.parse().map_err(|_| ConfigError::Invalid { key: k.into(), msg: format!("{v:?} is not a number") })?;
        match k {
            "alpha" => out.alpha = x,
            "tau" => out.tau = x,
            _ => return Err(ConfigError::Unknown(k.into())),
        }
    }
    if !(out.tau > 0.0) || !out.alpha.is_finite() {
        return Err(ConfigError::Invalid { key: "--logistic".into(), msg: "need finite alpha and tau > 0".into() });
    }
    Ok(out)
}

/// Result of a command: exit code plus the lines destined for stdout and stderr.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outcome {
    pub code: i32,
    pub stdout: Vec<String>,
    pub stderr: Vec<String>,
}

impl Outcome {
    fn fail(code: i32, msg: impl Into<String>) -> Self {
        Self { code, stdout: Vec::new(), stderr: vec![msg.into()] }
    }
}

/// Output directory guard enforcing the `--force` rule.
pub struct Writer {
    dir: PathBuf,
    force: bool,
}

pub enum WriteFail {
    Exists(PathBuf),
    Io(String),
}

impl Writer {
    pub fn new(dir: &Path, force: bool) -> Result<Self, WriteFail> {
        fs::create_dir_all(dir).map_err(|e| WriteFail::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), force })
    }

    /// Fails before anything is written when one of `names` already exists.
    fn preflight(&self, names: &[&str]) -> Result<(), WriteFail> {
        if self.force {
            return Ok(());
        }
        match names.iter().map(|n| self.dir.join(n)).find(|p| p.exists()) {
            Some(p) => Err(WriteFail::Exists(p)),
            None => Ok(()),
        }
    }

    fn write(&self, name: &str, body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<PathBuf, WriteFail> {
        let path = self.dir.join(name);
        let mut buf = Vec::new();
        body(&mut buf).map_err(|e| WriteFail::Io(e.to_string()))?;
        fs::write(&path, buf).map_err(|e| WriteFail::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

impl From<WriteFail> for Outcome {
    fn from(w: WriteFail) -> Self {
        match w {
            WriteFail::Exists(p) => Outcome::fail(EXIT_CANT_CREATE, format!("{} exists; pass --force to overwrite", p.display())),
            WriteFail::Io(m) => Outcome::fail(EXIT_IO, m),
        }
    }
}

pub fn render_hypotheses(rep: &HypothesisReport) -> String {
    let mut s = String::new();
    s.push_str(&format!("a0={}\na1={}\na2={}\n", rep.a0_pass, rep.a1_pass, rep.a2_pass));
    s.push_str(&format!("min_sym_eig={}\n", dde::fmt17(rep.min_sym_eig)));
    s.push_str(&format!("mu_distinct={}\n", rep.mu_distinct));
    match rep.equilibrium {
        Some(b) => s.push_str(&format!("b1={}\nb2={}\n", dde::fmt17(b[0]), dde::fmt17(b[1]))),
        None => s.push_str("b=none\n"),
    }
    match rep.mu {
        Some(m) => s.push_str(&format!("mu1={}\nmu2={}\n", dde::fmt17(m[0]), dde::fmt17(m[1]))),
        None => s.push_str("mu=none\n"),
    }
    s.push_str(&format!("verdict={}\n", if rep.all_pass() { "PASS" } else { "FAIL" }));
    for m in &rep.messages {
        s.push_str(&format!("# {m}\n"));
    }
    s
}

pub fn write_catalog_csv<W: Write>(mut w: W, cat: &[OrbitCandidate]) -> std::io::Result<()> {
    writeln!(w, "branch,k,n,lambda,period,beta_level,amplitude")?;
    for c in cat {
        writeln!(w, "{},{},{},{},{},{},{}", c.branch, c.k, c.n, dde::fmt17(c.lambda), dde::fmt17(c.period), dde::fmt17(c.beta_level), dde::fmt17(c.amplitude.unwrap_or(f64::NAN)))?;
    }
    Ok(())
}

fn window_diagnostic(e: &SpectrumError) -> String {
    match e {
        SpectrumError::EqualWinding { n } => format!("no window: n1 = n2 = {n}"),
        other => format!("no window: {other}"),
    }
}

/// Hypotheses, then μ-distinctness, then the window.
fn prepare(cfg: &RunConfig, j: Option<u32>) -> Result<(LVSystem, HopfWindow), Outcome> {
    let (a, r) = (cfg.system.matrix(), cfg.system.rates());
    let rep = check_hypotheses(&a, &r);
    if rep.mu.is_some() && !rep.mu_distinct {
        return Err(Outcome::fail(EXIT_NO_WINDOW, "no window: mu1 = mu2, so n1 = n2 for every tau"));
    }
    if !rep.all_pass() {
        return Err(Outcome::fail(EXIT_HYPOTHESES, rep.messages.join("; ")));
    }
    let sys = LVSystem::new(a, r, cfg.system.tau).map_err(|e| Outcome::fail(EXIT_HYPOTHESES, e.to_string()))?;
    let win = hopf_window(&sys, j).map_err(|e| Outcome::fail(EXIT_NO_WINDOW, window_diagnostic(&e)))?;
    Ok((sys, win))
}

fn full_catalog(cfg: &RunConfig, sys: &LVSystem, win: &HopfWindow, k: Option<u32>) -> Result<Vec<OrbitCandidate>, Outcome> {
    let mut cat = catalog(sys, win);
    if let Some(k) = k {
        cat.retain(|c| c.k == k);
    }
    let profile = cfg.geometry.profile(sys).map_err(|e| Outcome::fail(EXIT_USAGE, e.to_string()))?;
    solve_amplitudes(&mut cat, &profile).map_err(|e| Outcome::fail(EXIT_DEGREE, e.to_string()))?;
    Ok(cat)
}

pub fn cmd_check(cfg: &RunConfig, out: &Writer) -> Outcome {
    if let Err(e) = out.preflight(&["hypotheses.txt"]) {
        return e.into();
    }
    let rep = check_hypotheses(&cfg.system.matrix(), &cfg.system.rates());
    let text = render_hypotheses(&rep);
    if let Err(e) = out.write("hypotheses.txt", |w| w.write_all(text.as_bytes())) {
        return e.into();
    }
    let code = if rep.all_pass() { EXIT_OK } else { EXIT_HYPOTHESES };
    Outcome { code, stdout: vec![format!("hypotheses {}", if code == 0 { "pass" } else { "fail" })], stderr: rep.messages.clone() }
}

pub fn cmd_spectrum(cfg: &RunConfig, out: &Writer, j: Option<u32>, k: Option<u32>) -> Outcome {
    if let Err(e) = out.preflight(&["catalog.csv"]) {
        return e.into();
    }
    let (sys, win) = match prepare(cfg, j) {
        Ok(v) => v,
        Err(o) => return o,
    };
    let cat = match full_catalog(cfg, &sys, &win, k) {
        Ok(c) => c,
        Err(o) => return o,
    };
    if let Err(e) = out.write("catalog.csv", |w| write_catalog_csv(w, &cat)) {
        return e.into();
    }
    Outcome {
        code: EXIT_OK,
        stdout: vec![format!("n1={} n2={} j={} k0={} lambda_window=({}, {}) candidates={}", win.n1, win.n2, win.j, win.k0, dde::fmt17(win.lambda_lo), dde::fmt17(win.lambda_hi), cat.len())],
        stderr: Vec::new(),
    }
}

fn simulation_outcome(res: Result<(f64, f64), DdeError>) -> String {
    match res {
        Ok((p, c)) => format!("period={} confidence={}", dde::fmt17(p), dde::fmt17(c)),
        Err(DdeError::Aperiodic { .. }) => "period=nan confidence=0".into(),
        Err(e) => format!("period=nan confidence=0 # {e}"),
    }
}

pub fn cmd_simulate(cfg: Option<&RunConfig>, out: &Writer, logistic: Option<LogisticArgs>) -> Outcome {
    if let Err(e) = out.preflight(&["trajectory.csv"]) {
        return e.into();
    }
    let solver = cfg.map(|c| c.solver.clone()).unwrap_or_default();
    let opts = IntegrateOptions::default();
    let traj = match logistic {
        Some(l) => {
            let sys = Logistic { alpha: l.alpha, tau: l.tau };
            let eps = solver.history_eps;
            let hist = HistoryFunction::from_fn(l.tau, 64, |s| (vec![1.0 + eps * (s / l.tau * std::f64::consts::PI).cos()], vec![-eps * std::f64::consts::PI / l.tau * (s / l.tau * std::f64::consts::PI).sin()]));
            integrate(&sys, &hist, solver.t_end, dde::aligned_step(solver.rk4_step, l.tau), &opts)
        }
        None => {
            let Some(cfg) = cfg else {
                return Outcome::fail(EXIT_USAGE, "simulate needs --config or --logistic");
            };
            let sys = match LVSystem::new(cfg.system.matrix(), cfg.system.rates(), cfg.system.tau) {
                Ok(s) => s,
                Err(e) => return Outcome::fail(EXIT_HYPOTHESES, e.to_string()),
            };
            if !(sys.tau > 0.0) {
                return Outcome::fail(EXIT_USAGE, "simulate needs tau > 0");
            }
            let hist = perturbed_history([sys.b[0], sys.b[1]], solver.history_eps, sys.tau);
            integrate(&LvDelay::new(&sys, Frame::Original), &hist, solver.t_end, dde::aligned_step(solver.rk4_step, sys.tau), &opts)
        }
    };
    let traj = match traj {
        Ok(t) => t,
        Err(e) => return Outcome::fail(EXIT_SIMULATION, format!("simulation failed: {e}")),
    };
    if let Err(e) = out.write("trajectory.csv", |w| traj.write_csv(w)) {
        return e.into();
    }
    match estimate_period(&traj, solver.transient_skip) {
        Err(e @ DdeError::TooShort { .. }) => Outcome::fail(EXIT_SIMULATION, e.to_string()),
        res => Outcome { code: EXIT_OK, stdout: vec![simulation_outcome(res)], stderr: Vec::new() },
    }
}

pub fn cmd_find(cfg: &RunConfig, out: &Writer, seed: u64, jobs: usize, j: Option<u32>, k: Option<u32>) -> Outcome {
    if let Err(e) = out.preflight(&["orbit.csv", "orbit.meta", "verification.txt"]) {
        return e.into();
    }
    let (sys, win) = match prepare(cfg, j) {
        Ok(v) => v,
        Err(o) => return o,
    };
    let cat = match full_catalog(cfg, &sys, &win, k) {
        Ok(c) => c,
        Err(o) => return o,
    };
    if cat.is_empty() {
        return Outcome::fail(EXIT_NO_ORBIT, "catalog is empty");
    }
    let modes = cfg.solver.modes;
    let points = cfg.solver.points.unwrap_or(4 * modes + 1);
    let prob = CollocationProblem::with_grid(&sys, modes, points, BetaMode::One, FourierLoop::zeros(modes));
    let opts = SweepOptions { newton: NewtonOptions { tol: cfg.solver.newton_tol, max_iters: cfg.solver.max_iters, ..NewtonOptions::default() }, seed, jobs, ..SweepOptions::default() };
    let sols = sweep(&prob, &win, &cat, &opts);
    let mut reports: Vec<_> = sols.iter().map(|s| (s, verify_orbit(s, &sys, Some(&win)))).collect();
    let mut text = format!("orbits_found={}\n", reports.len());
    for (q, (s, r)) in reports.iter().enumerate() {
        text.push_str(&format!("\n[orbit {q}]\nlambda={}\nperiod={}\nisotropy={}\n", dde::fmt17(s.lambda), dde::fmt17(s.period), s.isotropy));
        text.push_str(&r.render());
    }
    let verified = reports.iter().position(|(_, r)| r.all_ok());
    let res = out.write("verification.txt", |w| w.write_all(text.as_bytes()));
    if let Err(e) = res {
        return e.into();
    }
    let Some(q) = verified else {
        return Outcome { code: EXIT_NO_ORBIT, stdout: Vec::new(), stderr: vec![format!("no verified orbit among {} converged", reports.len())] };
    };
    let (best, _) = reports.swap_remove(q);
    if let Err(e) = out.write("orbit.csv", |w| best.write_csv(w, 4 * modes + 1)).and_then(|_| out.write("orbit.meta", |w| best.write_meta(w))) {
        return e.into();
    }
    Outcome { code: EXIT_OK, stdout: vec![format!("lambda={} period={} residual={}", dde::fmt17(best.lambda), dde::fmt17(best.period), dde::fmt17(best.residual))], stderr: Vec::new() }
}

pub fn cmd_certify(cfg: &RunConfig, out: &Writer, j: Option<u32>, k: Option<u32>) -> Outcome {
    if let Err(e) = out.preflight(&["certificate.txt", "certificate.kv"]) {
        return e.into();
    }
    let cc = CertifyConfig { geometry: cfg.geometry.clone(), modes: cfg.solver.degree_modes, j, k_filter: k };
    let (code, text, kv) = match certify(&cfg.system.matrix(), &cfg.system.rates(), cfg.system.tau, &cc) {
        Ok(cert) => (if cert.nontrivial { EXIT_OK } else { EXIT_DEGREE }, cert.render_text(), cert.render_kv()),
        Err(e) => {
            let code = match e {
                DegreeError::HypothesisFailed(_) | DegreeError::Model(_) => EXIT_HYPOTHESES,
                DegreeError::NoWindow(_) => EXIT_NO_WINDOW,
                DegreeError::DegenerateOrbit { .. } | DegreeError::SignUnstable { .. } => EXIT_DEGREE,
            };
            let mut text = format!("[verdict]\nNO CERTIFICATE: {e}\n");
            if cfg.system.tau == 0.0 {
                text.push_str("# without delay the Lyapunov function argument applies: the undelayed system has no non-stationary periodic solution\n");
            }
            (code, text, format!("verdict=NO CERTIFICATE: {e}\n"))
        }
    };
    for (name, body) in [("certificate.txt", &text), ("certificate.kv", &kv)] {
        if let Err(e) = out.write(name, |w| w.write_all(body.as_bytes())) {
            return e.into();
        }
    }
    let verdict = text.lines().skip_while(|l| *l != "[verdict]").nth(1).unwrap_or("").to_string();
    let mut o = Outcome { code, stdout: vec![verdict], stderr: Vec::new() };
    if code == EXIT_NO_WINDOW && cfg.system.tau == 0.0 {
        o.stderr.push("tau = 0: the undelayed system has no non-stationary periodic solution".into());
    }
    o
}

/// Dispatches a parsed command line.
pub fn run(cli: &Cli) -> Outcome {
    let logistic = match &cli.logistic {
        Some(v) => match parse_logistic(v) {
            Ok(l) => Some(l),
            Err(e) => return Outcome::fail(EXIT_USAGE, format!("config error: {e}")),
        },
        None => None,
    };
    let cfg = match &cli.config {
        Some(p) => match fs::read_to_string(p) {
            Ok(text) => match RunConfig::parse(&text) {
                Ok(c) => Some(c),
                Err(e) => return Outcome::fail(EXIT_USAGE, format!("config error: {e}")),
            },
            Err(e) => return Outcome::fail(EXIT_USAGE, format!("{}: {e}", p.display())),
        },
        None => None,
    };
    if logistic.is_some() && cli.command != Command::Simulate {
        return Outcome::fail(EXIT_USAGE, "--logistic only applies to simulate");
    }
    let dir = cli.out.clone().or_else(|| cfg.as_ref().map(|c| c.output.directory.clone())).unwrap_or_else(|| OutputBlock::default().directory);
    let out = match Writer::new(&dir, cli.force) {
        Ok(w) => w,
        Err(e) => return e.into(),
    };
    if cli.command == Command::Simulate {
        return cmd_simulate(cfg.as_ref(), &out, logistic);
    }
    let Some(cfg) = cfg else {
        return Outcome::fail(EXIT_USAGE, "--config is required");
    };
    match cli.command {
        Command::Check => cmd_check(&cfg, &out),
        Command::Spectrum => cmd_spectrum(&cfg, &out, cli.j, cli.k),
        Command::Find => cmd_find(&cfg, &out, cli.seed, cli.jobs, cli.j, cli.k),
        Command::Certify => cmd_certify(&cfg, &out, cli.j, cli.k),
        Command::Simulate => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RUNNING: &str = "[system]\na11 = 2\na12 = 1\na21 = 1\na22 = 2\nr1 = 3\nr2 = 3\ntau = 3 # delay\n";

    #[test]
    fn parses_running_config() {
        let c = RunConfig::parse(RUNNING).unwrap();
        assert_eq!(c.system.a, [[2.0, 1.0], [1.0, 2.0]]);
        assert_eq!(c.system.tau, 3.0);
        assert_eq!(c.solver, SolverBlock::default());
    }

    #[test]
    fn config_errors() {
        assert_eq!(RunConfig::parse(&RUNNING.replace("tau = 3 # delay\n", "")), Err(ConfigError::Missing("system.tau".into())));
        assert!(matches!(RunConfig::parse(&format!("{RUNNING}[solver]\nK = 4\n")), Err(ConfigError::Invalid { .. })));
        assert!(matches!(RunConfig::parse(&format!("{RUNNING}[solver]\nbogus = 1\n")), Err(ConfigError::Unknown(_))));
        assert!(matches!(RunConfig::parse(&RUNNING.replace("tau = 3", "tau = -1")), Err(ConfigError::Invalid { .. })));
        assert!(matches!(RunConfig::parse(&RUNNING.replace("tau = 3", "tau = inf")), Err(ConfigError::Invalid { .. })));
        assert!(matches!(RunConfig::parse("[system\n"), Err(ConfigError::Syntax(_))));
        assert!(matches!(RunConfig::parse("a11 2\n"), Err(ConfigError::Syntax(_))));
        assert!(matches!(RunConfig::parse("a11 = 2\n"), Err(ConfigError::Syntax(_))));
        assert!(matches!(RunConfig::parse(&RUNNING.replace("tau = 3", "tau = \"x\"")), Err(ConfigError::Invalid { .. })));
        let c = RunConfig::parse(&format!("{RUNNING}[output]\ndirectory = \"res\"\nformats = [\"csv\"]\n")).unwrap();
        assert_eq!(c.output.directory, PathBuf::from("res"));
    }

    #[test]
    fn logistic_args() {
        let l = parse_logistic(&["alpha=1.42".into(), "tau=1".into()]).unwrap();
        assert_eq!((l.alpha, l.tau), (1.42, 1.0));
        assert!(parse_logistic(&["beta=1".into()]).is_err());
        assert!(parse_logistic(&["tau=0".into()]).is_err());
    }

    #[test]
    fn catalog_csv_format() {
        let sys = LVSystem::from_entries(2.0, 1.0, 1.0, 2.0, 3.0, 3.0, 3.0).unwrap();
        let w = hopf_window(&sys, None).unwrap();
        let cat = catalog(&sys, &w);
        let mut buf = Vec::new();
        write_catalog_csv(&mut buf, &cat).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "branch,k,n,lambda,period,beta_level,amplitude");
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("2,1,1,3.8197186342054"));
    }
}
