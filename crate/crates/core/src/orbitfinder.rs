//! Fourier collocation for 2π-periodic solutions of the rescaled system
//! `ẋ = −λβ(A x(t−τ/λ))∘(b+θx)`, solved by damped Newton in the Fourier
//! coefficients and `λ` with an integral phase condition.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dde::{self, Frame, HistoryFunction, IntegrateOptions, LvDelay};
use crate::field::{c_constants, BetaChoice, BetaVariant, FourierLoop, SpectralGrid, ThetaGeometry};
use crate::model::LVSystem;
use crate::spectrum::{HopfWindow, OrbitCandidate};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OrbitError {
    #[error("Newton did not converge: {reason}")]
    NoConvergence { reason: String, iters: usize, residual: f64 },
    #[error("Newton converged to the stationary solution (norm {norm:.3e})")]
    ConvergedToZero { norm: f64 },
    #[error("solution leaves the positive region: min(b_i + x_i) = {min:.3e}")]
    OutOfTheta { min: f64 },
    #[error("invalid problem: {0}")]
    Invalid(String),
}

/// The cutoff multiplying the nonlinearity during a solve.
#[derive(Debug, Clone, PartialEq)]
pub enum BetaMode {
    One,
    Constant(f64),
    Radial(ThetaGeometry),
    Distance(ThetaGeometry),
}

impl BetaMode {
    fn choice(&self) -> BetaChoice<'_> {
        match self {
            BetaMode::One => BetaChoice::One,
            BetaMode::Constant(c) => BetaChoice::Constant(*c),
            BetaMode::Radial(g) => BetaChoice::Field(g, BetaVariant::Radial),
            BetaMode::Distance(g) => BetaChoice::Field(g, BetaVariant::Distance),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CollocationProblem {
    pub system: LVSystem,
    pub modes: usize,
    pub theta: f64,
    pub beta_mode: BetaMode,
    pub phase_ref: FourierLoop,
    grid: SpectralGrid,
}

impl CollocationProblem {
    pub fn new(system: &LVSystem, modes: usize, beta_mode: BetaMode, phase_ref: FourierLoop) -> Self {
        Self::with_grid(system, modes, 4 * modes + 1, beta_mode, phase_ref)
    }

    /// `points ≥ 4K+1` keeps the quadratic products alias-free.
    pub fn with_grid(system: &LVSystem, modes: usize, points: usize, beta_mode: BetaMode, phase_ref: FourierLoop) -> Self {
        assert!(points >= 4 * modes + 1, "grid must have at least 4K+1 points");
        Self { system: system.clone(), modes, theta: 1.0, beta_mode, phase_ref: phase_ref.resized(modes), grid: SpectralGrid::new(modes, points) }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn unknowns(&self) -> usize {
        4 * self.modes + 1
    }

    fn beta(&self, x: &FourierLoop) -> f64 {
        self.beta_mode.choice().value(x)
    }

    fn phase_scale(&self) -> f64 {
        let n = self.phase_ref.derivative().l2_inner(&self.phase_ref.derivative()).sqrt();
        if n > 0.0 {
            n
        } else {
            1.0
        }
    }
}

/// Grid values of `ẋ + λβ(A x_δ)∘(b+θx)`.
pub fn residual(x: &FourierLoop, lambda: f64, prob: &CollocationProblem) -> [Vec<f64>; 2] {
    let x = x.resized(prob.modes);
    let g = &prob.grid;
    let sys = &prob.system;
    let delayed = g.synth(&x.delayed(sys.tau / lambda));
    let now = g.synth(&x);
    let dot = g.synth(&x.derivative());
    let beta = prob.beta(&x);
    let mut out = [vec![0.0; g.points()], vec![0.0; g.points()]];
    for j in 0..g.points() {
        for i in 0..2 {
            let lin = sys.a[(i, 0)] * delayed[0][j] + sys.a[(i, 1)] * delayed[1][j];
            out[i][j] = dot[i][j] + lambda * beta * lin * (sys.b[i] + prob.theta * now[i][j]);
        }
    }
    out
}

pub fn sup_norm(v: &[Vec<f64>; 2]) -> f64 {
    v.iter().flatten().fold(0.0_f64, |m, a| m.max(a.abs()))
}

/// Projected residual (modes `1..=K` of both components) followed by the phase condition.
pub fn equations(x: &FourierLoop, lambda: f64, prob: &CollocationProblem) -> DVector<f64> {
    let r = residual(x, lambda, prob);
    let (_, proj) = prob.grid.project(&r);
    let mut v = proj.to_vec();
    let x = x.resized(prob.modes);
    let dref = prob.phase_ref.derivative();
    v.push(x.sub(&prob.phase_ref).l2_inner(&dref) / prob.phase_scale());
    DVector::from_vec(v)
}

/// Analytic Jacobian of [`equations`] with respect to the coefficients and λ.
pub fn jacobian(x: &FourierLoop, lambda: f64, prob: &CollocationProblem) -> DMatrix<f64> {
    let x = x.resized(prob.modes);
    let kk = prob.modes;
    let n = prob.unknowns();
    let g = &prob.grid;
    let m = g.points();
    let sys = &prob.system;
    let delta = sys.tau / lambda;
    let beta = prob.beta(&x);
    let xd = x.delayed(delta);
    let delayed = g.synth(&xd);
    let now = g.synth(&x);
    let delayed_dot = g.synth(&xd.derivative());
    // g_i = (A x_δ)_i, h_i = b_i + θ x_i
    let mut gv = [vec![0.0; m], vec![0.0; m]];
    let mut hv = [vec![0.0; m], vec![0.0; m]];
    let mut gdot = [vec![0.0; m], vec![0.0; m]];
    for j in 0..m {
        for i in 0..2 {
            gv[i][j] = sys.a[(i, 0)] * delayed[0][j] + sys.a[(i, 1)] * delayed[1][j];
            gdot[i][j] = sys.a[(i, 0)] * delayed_dot[0][j] + sys.a[(i, 1)] * delayed_dot[1][j];
            hv[i][j] = sys.b[i] + prob.theta * now[i][j];
        }
    }
    let grad_beta = beta_gradient(&x, prob);
    let gh: [Vec<f64>; 2] = [(0..m).map(|j| gv[0][j] * hv[0][j]).collect(), (0..m).map(|j| gv[1][j] * hv[1][j]).collect()];
    let (_, gh_proj) = g.project(&gh);
    let gh_vec = gh_proj.to_vec();

    let mut jac = DMatrix::<f64>::zeros(n, n);
    let columns: Vec<Vec<f64>> = (0..4 * kk)
        .into_par_iter()
        .map(|col| {
            let comp = col / (2 * kk);
            let mode = (col % (2 * kk)) / 2 + 1;
            let is_sin = col % 2 == 1;
            let (c, s) = if is_sin { (0.0, 1.0) } else { (1.0, 0.0) };
            let e = FourierLoop::single_mode(kk, comp, mode, c, s);
            let phi = g.synth_component(&e, comp);
            let phi_d = g.synth_component(&e.delayed(delta), comp);
            let mut vals = [vec![0.0; m], vec![0.0; m]];
            for j in 0..m {
                for i in 0..2 {
                    let mut v = sys.a[(i, comp)] * phi_d[j] * hv[i][j];
                    if i == comp {
                        v += prob.theta * gv[i][j] * phi[j];
                    }
                    vals[i][j] = lambda * beta * v;
                }
            }
            let (_, p) = g.project(&vals);
            let mut column = p.to_vec();
            // derivative part: d/dt of the basis function
            let de = e.derivative();
            let base = FourierLoop::index(kk, comp, mode);
            column[base] += de.cos(comp, mode);
            column[base + 1] += de.sin(comp, mode);
            if grad_beta[col] != 0.0 {
                for (r, v) in column.iter_mut().zip(&gh_vec) {
                    *r += lambda * grad_beta[col] * v;
                }
            }
            column
        })
        .collect();
    for (col, column) in columns.iter().enumerate() {
        for (row, v) in column.iter().enumerate() {
            jac[(row, col)] = *v;
        }
    }
    // λ column: β g h + λβ (τ/λ²)(A ẋ_δ) h
    let mut lam = [vec![0.0; m], vec![0.0; m]];
    for j in 0..m {
        for i in 0..2 {
            lam[i][j] = beta * gv[i][j] * hv[i][j] + lambda * beta * (sys.tau / (lambda * lambda)) * gdot[i][j] * hv[i][j];
        }
    }
    let (_, lp) = g.project(&lam);
    for (row, v) in lp.to_vec().iter().enumerate() {
        jac[(row, n - 1)] = *v;
    }
    // phase row
    let dref = prob.phase_ref.derivative();
    let scale = prob.phase_scale();
    for (col, v) in dref.to_vec().iter().enumerate() {
        jac[(n - 1, col)] = PI * v / scale;
    }
    jac
}

fn beta_gradient(x: &FourierLoop, prob: &CollocationProblem) -> Vec<f64> {
    let kk = prob.modes;
    match &prob.beta_mode {
        BetaMode::One | BetaMode::Constant(_) => vec![0.0; 4 * kk],
        BetaMode::Radial(g) => {
            let d = g.profile.derivative(x.norm_sq());
            let v = x.to_vec();
            (0..4 * kk)
                .map(|col| {
                    let mode = (col % (2 * kk)) / 2 + 1;
                    d * 2.0 * PI * (1.0 + (mode * mode) as f64) * v[col]
                })
                .collect()
        }
        BetaMode::Distance(_) => {
            let v = x.to_vec();
            (0..4 * kk)
                .map(|col| {
                    let h = 1e-7 * v[col].abs().max(1e-3);
                    let mut p = v.clone();
                    p[col] += h;
                    let mut q = v.clone();
                    q[col] -= h;
                    (prob.beta(&FourierLoop::from_slice(kk, &p)) - prob.beta(&FourierLoop::from_slice(kk, &q))) / (2.0 * h)
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Solutions with Ê norm below this are reported as stationary.
    pub zero_norm: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iters: 50, zero_norm: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSolution {
    pub loop_: FourierLoop,
    pub lambda: f64,
    pub period: f64,
    pub residual: f64,
    pub newton_iters: usize,
    pub in_window: bool,
    pub in_theta: bool,
    pub isotropy: usize,
}

impl OrbitSolution {
    pub fn norm(&self) -> f64 {
        self.loop_.norm()
    }

    /// Minimum over the grid of `b_i + x_i(t)` per component.
    pub fn min_population(&self, system: &LVSystem, points: usize) -> [f64; 2] {
        let g = SpectralGrid::new(self.loop_.modes(), points.max(2 * self.loop_.modes() + 1));
        let v = g.synth(&self.loop_);
        [0, 1].map(|i| v[i].iter().map(|x| system.b[i] + x).fold(f64::INFINITY, f64::min))
    }

    /// CSV `t,x1,x2` on `points` samples of `[0, 2π)`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W, points: usize) -> std::io::Result<()> {
        writeln!(w, "t,x1,x2")?;
        for q in 0..points {
            let t = 2.0 * PI * q as f64 / points as f64;
            let v = self.loop_.eval(t);
            writeln!(w, "{},{},{}", dde::fmt17(t), dde::fmt17(v[0]), dde::fmt17(v[1]))?;
        }
        Ok(())
    }

    /// Sidecar `key=value` block describing the solution.
    pub fn write_meta<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "lambda={}", dde::fmt17(self.lambda))?;
        writeln!(w, "period={}", dde::fmt17(self.period))?;
        writeln!(w, "residual={}", dde::fmt17(self.residual))?;
        writeln!(w, "K={}", self.loop_.modes())?;
        writeln!(w, "isotropy={}", self.isotropy)?;
        writeln!(w, "newton_iters={}", self.newton_iters)
    }
}

/// Damped Newton from `(guess, lambda_guess)`.
pub fn newton_solve(guess: &FourierLoop, lambda_guess: f64, prob: &CollocationProblem, opts: &NewtonOptions) -> Result<OrbitSolution, OrbitError> {
    if !(lambda_guess > 0.0) {
        return Err(OrbitError::Invalid(format!("lambda guess must be positive, got {lambda_guess}")));
    }
    let kk = prob.modes;
    let mut x = guess.resized(kk);
    let mut lambda = lambda_guess;
    let mut f = equations(&x, lambda, prob);
    let mut sup = sup_norm(&residual(&x, lambda, prob));
    let mut iters = 0;
    while !(sup < opts.tol && f[4 * kk].abs() < opts.tol) {
        if iters >= opts.max_iters {
            return Err(OrbitError::NoConvergence { reason: format!("{iters} iterations exhausted"), iters, residual: sup });
        }
        iters += 1;
        let jac = jacobian(&x, lambda, prob);
        let step = match jac.lu().solve(&(-&f)) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => return Err(OrbitError::NoConvergence { reason: "singular Jacobian".into(), iters, residual: sup }),
        };
        let f0 = f.norm();
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<f64> = x.to_vec().iter().zip(step.iter()).map(|(a, d)| a + alpha * d).collect();
            let lam = lambda + alpha * step[4 * kk];
            if lam > 0.0 {
                let xc = FourierLoop::from_slice(kk, &cand);
                let fc = equations(&xc, lam, prob);
                if fc.norm() <= (1.0 - 1e-4 * alpha) * f0 || fc.norm() < opts.tol {
                    x = xc;
                    lambda = lam;
                    f = fc;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(OrbitError::NoConvergence { reason: "line search failed".into(), iters, residual: sup });
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(OrbitError::NoConvergence { reason: format!("lambda left (0, inf): {lambda}"), iters, residual: sup });
        }
        sup = sup_norm(&residual(&x, lambda, prob));
    }
    let norm = x.norm();
    if norm < opts.zero_norm {
        return Err(OrbitError::ConvergedToZero { norm });
    }
    x.lambda_tag = Some(lambda);
    let sol = OrbitSolution { isotropy: x.isotropy(1e-8), loop_: x, lambda, period: 2.0 * PI * lambda, residual: sup, newton_iters: iters, in_window: false, in_theta: true };
    let mins = sol.min_population(&prob.system, 4 * kk + 1);
    let min = mins[0].min(mins[1]);
    if min <= 0.0 {
        return Err(OrbitError::OutOfTheta { min });
    }
    Ok(sol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub c1: [f64; 2],
    pub c1_ok: bool,
    pub mean: [f64; 2],
    pub mean_ok: bool,
    pub min_population: [f64; 2],
    pub in_theta: bool,
    /// Sup over one period of `|dde − orbit|`, relative to the orbit's sup norm.
    pub roundtrip_mismatch: f64,
    pub roundtrip_ok: bool,
    pub roundtrip_note: Option<String>,
    pub in_window: bool,
    pub non_stationary: bool,
    pub residual: f64,
}

impl VerificationReport {
    pub fn all_ok(&self) -> bool {
        self.c1_ok && self.mean_ok && self.in_theta && self.roundtrip_ok && self.in_window && self.non_stationary
    }

    pub fn render(&self) -> String {
        let flag = |b: bool| if b { "ok" } else { "FAIL" };
        let mut s = String::new();
        s.push_str(&format!("residual_sup = {:.3e}\n", self.residual));
        s.push_str(&format!("c1 = ({:.3e}, {:.3e}) [{}]\n", self.c1[0], self.c1[1], flag(self.c1_ok)));
        s.push_str(&format!("mean = ({:.3e}, {:.3e}) [{}]\n", self.mean[0], self.mean[1], flag(self.mean_ok)));
        s.push_str(&format!("min b_i + x_i = ({:.6}, {:.6}) [{}]\n", self.min_population[0], self.min_population[1], flag(self.in_theta)));
        s.push_str(&format!("roundtrip_mismatch = {:.3e} [{}]\n", self.roundtrip_mismatch, flag(self.roundtrip_ok)));
        if let Some(n) = &self.roundtrip_note {
            s.push_str(&format!("roundtrip_note = {n}\n"));
        }
        s.push_str(&format!("in_window = {}\n", self.in_window));
        s.push_str(&format!("non_stationary = {}\n", self.non_stationary));
        s.push_str(&format!("verdict = {}\n", if self.all_ok() { "VERIFIED" } else { "NOT VERIFIED" }));
        s
    }
}

/// Independent checks of a converged orbit, including a round trip through the DDE integrator.
pub fn verify_orbit(sol: &OrbitSolution, system: &LVSystem, window: Option<&HopfWindow>) -> VerificationReport {
    let x = &sol.loop_;
    let (c1, _) = c_constants(x, sol.lambda.max(f64::MIN_POSITIVE), 1.0, system, &BetaChoice::One);
    let g = SpectralGrid::for_modes(x.modes());
    let (mean, _) = g.project(&g.synth(x));
    let min_population = sol.min_population(system, 8 * x.modes() + 1);
    let sup = g.synth(x).iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    let non_stationary = x.norm() >= 1e-8;
    let (roundtrip_mismatch, roundtrip_note) = if non_stationary && sol.lambda > 0.0 { roundtrip(sol, system, sup) } else { (0.0, None) };
    VerificationReport {
        c1,
        c1_ok: c1[0].abs() < 1e-8 && c1[1].abs() < 1e-8,
        mean,
        mean_ok: mean[0].abs() < 1e-8 && mean[1].abs() < 1e-8,
        min_population,
        in_theta: min_population[0] > 0.0 && min_population[1] > 0.0,
        roundtrip_mismatch,
        roundtrip_ok: roundtrip_mismatch < 1e-6,
        roundtrip_note,
        in_window: window.map(|w| w.contains(sol.lambda)).unwrap_or(true),
        non_stationary,
        residual: sol.residual,
    }
}

fn roundtrip(sol: &OrbitSolution, system: &LVSystem, sup: f64) -> (f64, Option<String>) {
    let lambda = sol.lambda;
    let period = 2.0 * PI * lambda;
    let x = sol.loop_.clone();
    let dx = x.derivative();
    let tau = system.tau;
    let h = dde::aligned_step(period / 4000.0, tau);
    let hist_nodes = if tau > 0.0 { ((tau / h).round() as usize).max(1) } else { 1 };
    let history = HistoryFunction::from_fn(tau, hist_nodes, |s| {
        let v = x.eval(s / lambda);
        let d = dx.eval(s / lambda);
        (v.to_vec(), vec![d[0] / lambda, d[1] / lambda])
    });
    let opts = IntegrateOptions { check_error: false, ..Default::default() };
    match dde::integrate(&LvDelay::new(system, Frame::Shifted), &history, period, h, &opts) {
        Ok(tr) => {
            let mut worst = 0.0_f64;
            let mut buf = [0.0; 2];
            for q in 0..=400 {
                let s = period * q as f64 / 400.0;
                tr.eval(s, &mut buf);
                let v = x.eval(s / lambda);
                worst = worst.max((buf[0] - v[0]).abs()).max((buf[1] - v[1]).abs());
            }
            (worst / sup.max(f64::MIN_POSITIVE), None)
        }
        Err(e) => (f64::INFINITY, Some(e.to_string())),
    }
}

/// Seeds tried for one candidate: the catalog amplitude first, then a ladder of
/// multiples of `0.1·min(b)`, all along the candidate's eigendirection.
pub fn seed_amplitudes(cand: &OrbitCandidate, system: &LVSystem) -> Vec<f64> {
    let base = 0.1 * system.b[0].min(system.b[1]);
    let mut v = Vec::new();
    if let Some(a) = cand.amplitude {
        v.push(a);
    }
    v.extend([1.0, 2.0, 4.0, 8.0, 10.0, 12.0, 16.0].iter().map(|m| m * base));
    v
}

/// Physical seed `P⁻¹(c cos kt · e_branch)`.
pub fn seed_loop(cand: &OrbitCandidate, system: &LVSystem, modes: usize, amplitude: f64) -> FourierLoop {
    let mut y = FourierLoop::single_mode(modes, cand.system_index, cand.k as usize, amplitude, 0.0);
    y.lambda_tag = Some(cand.lambda);
    y.transformed(&system.p_inv)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub newton: NewtonOptions,
    pub seed: u64,
    /// Random restarts per candidate after the deterministic ladder fails.
    pub restarts: usize,
    pub jobs: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { newton: NewtonOptions::default(), seed: 0, restarts: 8, jobs: 1 }
    }
}

/// Tries the seed ladder, then seeded random restarts, for a single candidate.
pub fn solve_candidate(cand: &OrbitCandidate, prob: &CollocationProblem, window: Option<&HopfWindow>, opts: &SweepOptions) -> Result<OrbitSolution, OrbitError> {
    let sys = &prob.system;
    let mut last = OrbitError::NoConvergence { reason: "no seeds tried".into(), iters: 0, residual: f64::NAN };
    let mut attempt = |seed: FourierLoop, lam: f64| -> Option<OrbitSolution> {
        let mut p = prob.clone();
        p.phase_ref = seed.resized(p.modes);
        match newton_solve(&seed, lam, &p, &opts.newton) {
            Ok(mut s) => {
                s.in_window = window.map(|w| w.contains(s.lambda)).unwrap_or(true);
                if s.in_window {
                    return Some(s);
                }
                last = OrbitError::NoConvergence { reason: format!("converged outside the window (lambda={})", s.lambda), iters: s.newton_iters, residual: s.residual };
                None
            }
            Err(e) => {
                last = e;
                None
            }
        }
    };
    for amp in seed_amplitudes(cand, sys) {
        if let Some(s) = attempt(seed_loop(cand, sys, prob.modes, amp), cand.lambda) {
            return Ok(s);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ ((cand.k as u64) << 32) ^ ((cand.n as u64) << 16) ^ cand.branch as u64);
    let base = 0.1 * sys.b[0].min(sys.b[1]);
    for _ in 0..opts.restarts {
        let amp = base * rng.gen_range(1.0..16.0);
        let mut seed = seed_loop(cand, sys, prob.modes, amp);
        for k in 1..=prob.modes.min(4 * cand.k as usize) {
            for i in 0..2 {
                let (c, s) = (seed.cos(i, k), seed.sin(i, k));
                seed.set(i, k, c + 0.1 * amp * rng.gen_range(-1.0..1.0), s + 0.1 * amp * rng.gen_range(-1.0..1.0));
            }
        }
        let lam = cand.lambda * rng.gen_range(0.9..1.1);
        if let Some(s) = attempt(seed, lam) {
            return Ok(s);
        }
    }
    Err(last)
}

/// True when `a` and `b` lie on the same circle orbit.
pub fn same_orbit(a: &OrbitSolution, b: &OrbitSolution) -> bool {
    if a.isotropy != b.isotropy || (a.lambda - b.lambda).abs() > 1e-8 * a.lambda.max(1.0) {
        return false;
    }
    if (a.norm() - b.norm()).abs() > 1e-8 * a.norm().max(1.0) {
        return false;
    }
    let k = a.isotropy.max(1);
    let m = a.loop_.modes().min(b.loop_.modes());
    let pa = a.loop_.resized(m).phase_normalized(k);
    let pb = b.loop_.resized(m).phase_normalized(k);
    pa.sub(&pb).max_abs_coeff() < 1e-6 * pa.max_abs_coeff().max(1e-12)
}

/// Keeps the first representative of every circle orbit, preserving order.
pub fn dedup(solutions: Vec<OrbitSolution>) -> Vec<OrbitSolution> {
    let mut out: Vec<OrbitSolution> = Vec::new();
    for s in solutions {
        if !out.iter().any(|o| same_orbit(o, &s)) {
            out.push(s);
        }
    }
    out
}

/// Runs [`solve_candidate`] for every catalog entry, in parallel up to `opts.jobs`,
/// and merges results in catalog order.
pub fn sweep(prob: &CollocationProblem, window: &HopfWindow, catalog: &[OrbitCandidate], opts: &SweepOptions) -> Vec<OrbitSolution> {
    let run = || -> Vec<Option<OrbitSolution>> { catalog.par_iter().map(|c| solve_candidate(c, prob, Some(window), opts).ok()).collect() };
    let results = match rayon::ThreadPoolBuilder::new().num_threads(opts.jobs.max(1)).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    };
    dedup(results.into_iter().flatten().collect())
}
