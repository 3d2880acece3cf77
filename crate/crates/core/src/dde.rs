//! Method-of-steps integration of constant-delay systems.
//!
//! Classical RK4 with the step aligned to the delay, so every delayed lookup
//! falls on the already completed part of the solution, where it is read by
//! cubic Hermite interpolation between stored nodes.

use std::f64::consts::PI;
use std::io::{self, Write};

use crate::model::LVSystem;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DdeError {
    #[error("step too large: local error {rate:.3e} per unit time at t={t:.6} exceeds {tol:.1e}")]
    StepTooLarge { t: f64, rate: f64, tol: f64 },
    #[error("solution blew up at t={t:.6} (|state| = {value:.3e})")]
    BlowUp { t: f64, value: f64 },
    #[error("no crossing of the level after t={t_start}")]
    NoCrossing { t_start: f64 },
    #[error("trajectory is not periodic (confidence {confidence:.3})")]
    Aperiodic { confidence: f64 },
    #[error("trajectory too short: need {needed:.3} time units, have {have:.3}")]
    TooShort { needed: f64, have: f64 },
    #[error("invalid integration request: {0}")]
    Invalid(String),
}

/// Right-hand side `ẋ(t) = f(t, x(t), x(t − delay))`.
pub trait DelaySystem {
    fn dim(&self) -> usize;
    fn delay(&self) -> f64;
    fn rhs(&self, t: f64, x: &[f64], xd: &[f64], out: &mut [f64]);
    fn frame(&self) -> Frame;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Frame {
    /// Populations `u`.
    Original,
    /// Deviations `x = u − b`.
    Shifted,
    /// Deviations on the rescaled time `t/λ`, period 2π.
    Rescaled { lambda: f64 },
    Scalar,
}

/// The Lotka–Volterra system in one of its three frames.
#[derive(Debug, Clone)]
pub struct LvDelay<'a> {
    pub system: &'a LVSystem,
    pub frame: Frame,
}

impl<'a> LvDelay<'a> {
    pub fn new(system: &'a LVSystem, frame: Frame) -> Self {
        assert!(!matches!(frame, Frame::Scalar), "scalar frame belongs to the logistic equation");
        Self { system, frame }
    }
}

impl DelaySystem for LvDelay<'_> {
    fn dim(&self) -> usize {
        2
    }

    fn delay(&self) -> f64 {
        match self.frame {
            Frame::Rescaled { lambda } => self.system.tau / lambda,
            _ => self.system.tau,
        }
    }

    fn rhs(&self, _t: f64, x: &[f64], xd: &[f64], out: &mut [f64]) {
        let a = &self.system.a;
        for i in 0..2 {
            let lin = a[(i, 0)] * xd[0] + a[(i, 1)] * xd[1];
            out[i] = match self.frame {
                Frame::Original => x[i] * (self.system.r[i] - lin),
                Frame::Shifted => -lin * (self.system.b[i] + x[i]),
                Frame::Rescaled { lambda } => -lambda * lin * (self.system.b[i] + x[i]),
                Frame::Scalar => unreachable!(),
            };
        }
    }

    fn frame(&self) -> Frame {
        self.frame
    }
}

/// `u̇ = αu(1 − u(t−τ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Logistic {
    pub alpha: f64,
    pub tau: f64,
}

impl DelaySystem for Logistic {
    fn dim(&self) -> usize {
        1
    }

    fn delay(&self) -> f64 {
        self.tau
    }

    fn rhs(&self, _t: f64, x: &[f64], xd: &[f64], out: &mut [f64]) {
        out[0] = self.alpha * x[0] * (1.0 - xd[0]);
    }

    fn frame(&self) -> Frame {
        Frame::Scalar
    }
}

/// Initial function on `[−delay, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub enum HistoryFunction {
    Constant(Vec<f64>),
    /// Hermite nodes, times ascending and covering `[−delay, 0]`.
    Sampled { t: Vec<f64>, x: Vec<Vec<f64>>, dx: Vec<Vec<f64>> },
}

impl HistoryFunction {
    /// Samples `f(t) = (value, derivative)` at `nodes + 1` equispaced times on `[−delay, 0]`.
    pub fn from_fn(delay: f64, nodes: usize, f: impl Fn(f64) -> (Vec<f64>, Vec<f64>)) -> Self {
        let nodes = nodes.max(1);
        let mut t = Vec::with_capacity(nodes + 1);
        let mut x = Vec::with_capacity(nodes + 1);
        let mut dx = Vec::with_capacity(nodes + 1);
        for q in 0..=nodes {
            let s = -delay + delay * q as f64 / nodes as f64;
            let (v, d) = f(s);
            t.push(s);
            x.push(v);
            dx.push(d);
        }
        HistoryFunction::Sampled { t, x, dx }
    }

    pub fn dim(&self) -> usize {
        match self {
            HistoryFunction::Constant(v) => v.len(),
            HistoryFunction::Sampled { x, .. } => x[0].len(),
        }
    }

    pub fn eval(&self, s: f64, out: &mut [f64]) {
        match self {
            HistoryFunction::Constant(v) => out.copy_from_slice(v),
            HistoryFunction::Sampled { t, x, dx } => {
                if t.len() == 1 {
                    out.copy_from_slice(&x[0]);
                    return;
                }
                let q = match t.binary_search_by(|v| v.partial_cmp(&s).unwrap()) {
                    Ok(q) => q.min(t.len() - 2),
                    Err(0) => 0,
                    Err(q) => (q - 1).min(t.len() - 2),
                };
                for i in 0..out.len() {
                    out[i] = hermite(t[q], t[q + 1], x[q][i], x[q + 1][i], dx[q][i], dx[q + 1][i], s).0;
                }
            }
        }
    }
}

/// Cubic Hermite value and derivative on `[t0, t1]`.
fn hermite(t0: f64, t1: f64, x0: f64, x1: f64, d0: f64, d1: f64, s: f64) -> (f64, f64) {
    let h = t1 - t0;
    let u = (s - t0) / h;
    let (u2, u3) = (u * u, u * u * u);
    let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
    let h10 = u3 - 2.0 * u2 + u;
    let h01 = -2.0 * u3 + 3.0 * u2;
    let h11 = u3 - u2;
    let v = h00 * x0 + h10 * h * d0 + h01 * x1 + h11 * h * d1;
    let dv = ((6.0 * u2 - 6.0 * u) * x0 + (3.0 * u2 - 4.0 * u + 1.0) * h * d0 + (-6.0 * u2 + 6.0 * u) * x1 + (3.0 * u2 - 2.0 * u) * h * d1) / h;
    (v, dv)
}

/// Dense solution: nodes at `t0 + q·h` with states and right-hand sides.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub t0: f64,
    pub t1: f64,
    pub h: f64,
    pub dim: usize,
    pub frame: Frame,
    pub delay: f64,
    times: Vec<f64>,
    states: Vec<f64>,
    derivs: Vec<f64>,
    history: Option<HistoryFunction>,
}

impl Trajectory {
    /// Builds a trajectory from externally computed nodes on a uniform grid.
    pub fn from_samples(times: Vec<f64>, states: Vec<Vec<f64>>, derivs: Vec<Vec<f64>>, frame: Frame) -> Self {
        assert!(times.len() >= 2 && times.len() == states.len() && states.len() == derivs.len());
        let dim = states[0].len();
        let h = times[1] - times[0];
        Self {
            t0: times[0],
            t1: *times.last().unwrap(),
            h,
            dim,
            frame,
            delay: 0.0,
            times,
            states: states.concat(),
            derivs: derivs.concat(),
            history: None,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, q: usize) -> &[f64] {
        &self.states[q * self.dim..(q + 1) * self.dim]
    }

    pub fn deriv(&self, q: usize) -> &[f64] {
        &self.derivs[q * self.dim..(q + 1) * self.dim]
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    fn segment(&self, s: f64) -> usize {
        let q = ((s - self.t0) / self.h).floor();
        (q.max(0.0) as usize).min(self.len() - 2)
    }

    /// Hermite value and derivative of component `i` at `s`.
    pub fn eval_component(&self, i: usize, s: f64) -> (f64, f64) {
        let q = self.segment(s);
        let (a, b) = (q * self.dim + i, (q + 1) * self.dim + i);
        hermite(self.times[q], self.times[q + 1], self.states[a], self.states[b], self.derivs[a], self.derivs[b], s)
    }

    /// Value at any `s ≥ t0 − delay`, falling back to the history before `t0`.
    pub fn eval(&self, s: f64, out: &mut [f64]) {
        if s < self.t0 {
            if let Some(h) = &self.history {
                h.eval(s - self.t0, out);
                return;
            }
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.eval_component(i, s).0;
        }
    }

    /// Adds `offset` to every state, e.g. `u = b + x`.
    pub fn shifted(&self, offset: &[f64], frame: Frame) -> Self {
        let mut out = self.clone();
        for q in 0..self.len() {
            for i in 0..self.dim {
                out.states[q * self.dim + i] += offset[i];
            }
        }
        out.history = self.history.as_ref().map(|h| match h {
            HistoryFunction::Constant(v) => HistoryFunction::Constant(v.iter().zip(offset).map(|(a, b)| a + b).collect()),
            HistoryFunction::Sampled { t, x, dx } => HistoryFunction::Sampled {
                t: t.clone(),
                x: x.iter().map(|v| v.iter().zip(offset).map(|(a, b)| a + b).collect()).collect(),
                dx: dx.clone(),
            },
        });
        out.frame = frame;
        out
    }

    pub fn min_component(&self, i: usize) -> f64 {
        (0..self.len()).map(|q| self.states[q * self.dim + i]).fold(f64::INFINITY, f64::min)
    }

    /// CSV with header `t,u1,…,du1,…`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|i| format!("u{i}")));
        header.extend((1..=self.dim).map(|i| format!("du{i}")));
        writeln!(w, "{}", header.join(","))?;
        for q in 0..self.len() {
            let mut row = vec![fmt17(self.times[q])];
            row.extend(self.state(q).iter().map(|v| fmt17(*v)));
            row.extend(self.deriv(q).iter().map(|v| fmt17(*v)));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Scientific notation with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    /// Local error target per unit time, from step doubling.
    pub err_tol: f64,
    pub blowup: f64,
    /// Skip the step-doubling estimate (three times cheaper).
    pub check_error: bool,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self { err_tol: 1e-6, blowup: 1e12, check_error: true }
    }
}

/// Largest step `≤ h` that divides `delay` exactly.
pub fn aligned_step(h: f64, delay: f64) -> f64 {
    if delay <= 0.0 {
        return h;
    }
    let n = (delay / h * (1.0 - 1e-12)).ceil().max(1.0);
    delay / n
}

struct Stepper<'a, S: DelaySystem> {
    sys: &'a S,
    history: &'a HistoryFunction,
    delay: f64,
    times: Vec<f64>,
    states: Vec<f64>,
    derivs: Vec<f64>,
    h: f64,
}

impl<S: DelaySystem> Stepper<'_, S> {
    fn dim(&self) -> usize {
        self.sys.dim()
    }

    /// Delayed value at time `s ≤` last node, or the history before 0.
    fn past(&self, s: f64, out: &mut [f64]) {
        if s < 0.0 {
            self.history.eval(s, out);
            return;
        }
        let d = self.dim();
        let n = self.times.len();
        if n == 1 {
            out.copy_from_slice(&self.states[..d]);
            return;
        }
        let q = ((s / self.h).floor().max(0.0) as usize).min(n - 2);
        for i in 0..d {
            let (a, b) = (q * d + i, (q + 1) * d + i);
            out[i] = hermite(self.times[q], self.times[q + 1], self.states[a], self.states[b], self.derivs[a], self.derivs[b], s).0;
        }
    }

    fn f(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let mut xd = vec![0.0; self.dim()];
        if self.delay > 0.0 {
            self.past(t - self.delay, &mut xd);
        } else {
            xd.copy_from_slice(x);
        }
        self.sys.rhs(t, x, &xd, out);
    }

    fn rk4(&self, t: f64, x: &[f64], h: f64) -> Vec<f64> {
        let d = self.dim();
        let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
        let mut y = vec![0.0; d];
        self.f(t, x, &mut k1);
        for i in 0..d {
            y[i] = x[i] + 0.5 * h * k1[i];
        }
        self.f(t + 0.5 * h, &y, &mut k2);
        for i in 0..d {
            y[i] = x[i] + 0.5 * h * k2[i];
        }
        self.f(t + 0.5 * h, &y, &mut k3);
        for i in 0..d {
            y[i] = x[i] + h * k3[i];
        }
        self.f(t + h, &y, &mut k4);
        (0..d).map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
    }
}

/// Integrates from `t = 0` to `t_end` with the step `h` shrunk to divide the delay.
pub fn integrate<S: DelaySystem>(sys: &S, history: &HistoryFunction, t_end: f64, h: f64, opts: &IntegrateOptions) -> Result<Trajectory, DdeError> {
    if !(h > 0.0 && t_end > 0.0 && t_end.is_finite()) {
        return Err(DdeError::Invalid(format!("need h > 0 and t_end > 0, got h={h}, t_end={t_end}")));
    }
    if history.dim() != sys.dim() {
        return Err(DdeError::Invalid(format!("history has {} components, system has {}", history.dim(), sys.dim())));
    }
    let delay = sys.delay();
    if !(delay >= 0.0 && delay.is_finite()) {
        return Err(DdeError::Invalid(format!("delay must be finite and nonnegative, got {delay}")));
    }
    let h = aligned_step(h, delay);
    let steps = (t_end / h * (1.0 - 1e-12)).ceil() as usize;
    let d = sys.dim();
    let mut st = Stepper { sys, history, delay, times: Vec::with_capacity(steps + 1), states: Vec::with_capacity(d * (steps + 1)), derivs: Vec::new(), h };
    let mut x0 = vec![0.0; d];
    history.eval(0.0, &mut x0);
    let mut dx0 = vec![0.0; d];
    st.f(0.0, &x0, &mut dx0);
    st.times.push(0.0);
    st.states.extend_from_slice(&x0);
    st.derivs.extend_from_slice(&dx0);
    let mut x = x0;
    for q in 0..steps {
        let t = q as f64 * h;
        let full = st.rk4(t, &x, h);
        if opts.check_error {
            let mid = st.rk4(t, &x, 0.5 * h);
            let two = st.rk4(t + 0.5 * h, &mid, 0.5 * h);
            let err = full.iter().zip(&two).map(|(a, b)| (a - b).abs() / a.abs().max(1.0)).fold(0.0, f64::max) / 15.0;
            let rate = err / h;
            if !(rate <= opts.err_tol) {
                return Err(DdeError::StepTooLarge { t, rate, tol: opts.err_tol });
            }
        }
        let big = full.iter().fold(0.0_f64, |m, v| if v.is_finite() { m.max(v.abs()) } else { f64::INFINITY });
        if big > opts.blowup {
            return Err(DdeError::BlowUp { t: t + h, value: big });
        }
        let tn = (q + 1) as f64 * h;
        let mut dxn = vec![0.0; d];
        // the node must be visible to its own delayed lookup when delay == h
        st.times.push(tn);
        st.states.extend_from_slice(&full);
        st.derivs.extend_from_slice(&vec![0.0; d]);
        st.f(tn, &full, &mut dxn);
        let n = st.derivs.len();
        st.derivs[n - d..].copy_from_slice(&dxn);
        x = full;
    }
    let t1 = *st.times.last().unwrap();
    Ok(Trajectory { t0: 0.0, t1, h, dim: d, frame: sys.frame(), delay, times: st.times, states: st.states, derivs: st.derivs, history: Some(history.clone()) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
}

/// Times after `t_start` where `component` crosses `level` in `direction`,
/// refined on the Hermite interpolant.
pub fn return_time(traj: &Trajectory, component: usize, level: f64, direction: Direction, t_start: f64) -> Result<Vec<f64>, DdeError> {
    let mut out = Vec::new();
    let d = traj.dim;
    for q in 0..traj.len().saturating_sub(1) {
        let (ta, tb) = (traj.times[q], traj.times[q + 1]);
        if tb < t_start {
            continue;
        }
        let fa = traj.states[q * d + component] - level;
        let fb = traj.states[(q + 1) * d + component] - level;
        let hit = match direction {
            Direction::Up => fa < 0.0 && fb >= 0.0,
            Direction::Down => fa > 0.0 && fb <= 0.0,
        };
        if !hit {
            continue;
        }
        let (mut lo, mut hi) = (ta, tb);
        let mut flo = fa;
        while hi - lo > 1e-12 * hi.abs().max(1.0) {
            let mid = 0.5 * (lo + hi);
            let fm = traj.eval_component(component, mid).0 - level;
            if (fm < 0.0) == (flo < 0.0) && fm != 0.0 {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        let tc = 0.5 * (lo + hi);
        if tc >= t_start {
            out.push(tc);
        }
    }
    if out.is_empty() {
        Err(DdeError::NoCrossing { t_start })
    } else {
        Ok(out)
    }
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Median spacing of upward crossings of component 1 through its mean after
/// `transient_skip`, with confidence `1 − IQR/median`. Oscillations whose
/// cycle amplitude decays or is negligible count as aperiodic.
pub fn estimate_period(traj: &Trajectory, transient_skip: f64) -> Result<(f64, f64), DdeError> {
    let needed = transient_skip + 10.0 * traj.delay;
    if traj.t1 - traj.t0 < needed {
        return Err(DdeError::TooShort { needed, have: traj.t1 - traj.t0 });
    }
    let start = traj.t0 + transient_skip;
    let idx: Vec<usize> = (0..traj.len()).filter(|&q| traj.times[q] >= start).collect();
    if idx.len() < 2 {
        return Err(DdeError::Aperiodic { confidence: 0.0 });
    }
    let mut area = 0.0;
    for w in idx.windows(2) {
        let (a, b) = (w[0], w[1]);
        area += 0.5 * (traj.states[a * traj.dim] + traj.states[b * traj.dim]) * (traj.times[b] - traj.times[a]);
    }
    let mean = area / (traj.times[*idx.last().unwrap()] - traj.times[idx[0]]);
    let crossings = match return_time(traj, 0, mean, Direction::Up, start) {
        Ok(c) => c,
        Err(_) => return Err(DdeError::Aperiodic { confidence: 0.0 }),
    };
    if crossings.len() < 3 {
        return Err(DdeError::Aperiodic { confidence: 0.0 });
    }
    let swing = |t0: f64, t1: f64| {
        let seg = (0..traj.len()).filter(|&q| traj.times[q] >= t0 && traj.times[q] <= t1).map(|q| traj.states[q * traj.dim]);
        let (lo, hi) = seg.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        hi - lo
    };
    let nc = crossings.len();
    let first = swing(crossings[0], crossings[1]);
    let last = swing(crossings[nc - 2], crossings[nc - 1]);
    if last < 1e-6 * mean.abs().max(1.0) || last < 0.8 * first {
        return Err(DdeError::Aperiodic { confidence: 0.0 });
    }
    let mut gaps: Vec<f64> = crossings.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = quantile(&gaps, 0.5);
    let iqr = quantile(&gaps, 0.75) - quantile(&gaps, 0.25);
    let confidence = 1.0 - iqr / median;
    if confidence < 0.9 {
        return Err(DdeError::Aperiodic { confidence });
    }
    Ok((median, confidence))
}

/// Synthetic sampled trajectory of `t ↦ f(t)` with derivative `df`, for tests and plumbing.
pub fn sampled_trajectory(t_end: f64, h: f64, f: impl Fn(f64) -> Vec<f64>, df: impl Fn(f64) -> Vec<f64>) -> Trajectory {
    let n = (t_end / h).round() as usize;
    let times: Vec<f64> = (0..=n).map(|q| q as f64 * h).collect();
    let states = times.iter().map(|&t| f(t)).collect();
    let derivs = times.iter().map(|&t| df(t)).collect();
    Trajectory::from_samples(times, states, derivs, Frame::Shifted)
}

/// History `b + ε(cos(2πs/ω), sin(2πs/ω))` style perturbation used by the CLI and tests.
pub fn perturbed_history(base: [f64; 2], eps: f64, delay: f64) -> HistoryFunction {
    let w = 2.0 * PI / delay.max(1e-12);
    HistoryFunction::from_fn(delay, 64, |s| {
        (vec![base[0] + eps * (w * s).cos(), base[1] + eps * 0.5 * (w * s).sin()], vec![-eps * w * (w * s).sin(), eps * 0.5 * w * (w * s).cos()])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn running() -> LVSystem {
        LVSystem::from_entries(2.0, 1.0, 1.0, 2.0, 3.0, 3.0, 3.0).unwrap()
    }

    #[test]
    fn equilibrium_stays_put() {
        let sys = running();
        let hist = HistoryFunction::Constant(vec![sys.b[0], sys.b[1]]);
        let tr = integrate(&LvDelay::new(&sys, Frame::Original), &hist, 100.0, 0.01, &IntegrateOptions::default()).unwrap();
        for q in 0..tr.len() {
            assert!((tr.state(q)[0] - 1.0).abs() < 1e-12 && (tr.state(q)[1] - 1.0).abs() < 1e-12);
        }
        assert!(matches!(return_time(&tr, 0, 0.5, Direction::Up, 0.0), Err(DdeError::NoCrossing { .. })));
        assert!(matches!(estimate_period(&tr, 50.0), Err(DdeError::Aperiodic { .. })));
    }

    #[test]
    fn step_is_aligned_with_delay() {
        let h = aligned_step(0.007, 3.0);
        let n = 3.0 / h;
        assert!((n - n.round()).abs() < 1e-9 && h <= 0.007);
        assert_eq!(aligned_step(0.5, 1.0), 0.5);
    }

    #[test]
    fn node_derivatives_equal_rhs() {
        let lg = Logistic { alpha: 1.4, tau: 1.0 };
        let hist = HistoryFunction::Constant(vec![0.5]);
        let tr = integrate(&lg, &hist, 20.0, 0.01, &IntegrateOptions::default()).unwrap();
        for q in 1..tr.len() {
            let t = tr.times()[q];
            let mut xd = [0.0];
            tr.eval(t - 1.0, &mut xd);
            let mut f = [0.0];
            lg.rhs(t, tr.state(q), &xd, &mut f);
            assert!((f[0] - tr.deriv(q)[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn logistic_below_bifurcation_settles() {
        let lg = Logistic { alpha: 1.4, tau: 1.0 };
        let tr = integrate(&lg, &HistoryFunction::Constant(vec![0.5]), 200.0, 0.01, &IntegrateOptions::default()).unwrap();
        assert!((tr.last_state()[0] - 1.0).abs() < 1e-3);
        assert!(tr.min_component(0) > 0.0);
        assert!(matches!(estimate_period(&tr, 50.0), Err(DdeError::Aperiodic { .. })));
    }

    #[test]
    fn logistic_above_bifurcation_period_near_four() {
        let lg = Logistic { alpha: 1.7, tau: 1.0 };
        let tr = integrate(&lg, &HistoryFunction::Constant(vec![0.5]), 300.0, 0.01, &IntegrateOptions::default()).unwrap();
        let ups = return_time(&tr, 0, 1.0, Direction::Up, 100.0).unwrap();
        let last = ups[ups.len() - 1] - ups[ups.len() - 2];
        assert!((last - 4.0).abs() < 0.3, "spacing {last}");
        let (p, c) = estimate_period(&tr, 50.0).unwrap();
        assert!((p - 4.0).abs() < 0.3 && c > 0.9);
    }

    #[test]
    fn synthetic_crossings_and_period() {
        let tr = sampled_trajectory(40.0, 0.01, |t| vec![t.cos(), 0.0], |t| vec![-t.sin(), 0.0]);
        let c = return_time(&tr, 0, 0.0, Direction::Up, 0.0).unwrap();
        for (m, t) in c.iter().enumerate() {
            assert!((t - (1.5 * PI + 2.0 * PI * m as f64)).abs() < 1e-10);
        }
        let tr = sampled_trajectory(80.0, 0.01, |t| vec![(2.0 * t).cos(), 0.0], |t| vec![-2.0 * (2.0 * t).sin(), 0.0]);
        let (p, conf) = estimate_period(&tr, 5.0).unwrap();
        assert!((p - PI).abs() < 1e-8 && conf > 0.999);
    }

    #[test]
    fn frames_agree() {
        let sys = running();
        let eps = 1e-3;
        let hu = perturbed_history([1.0, 1.0], eps, sys.tau);
        let hx = perturbed_history([0.0, 0.0], eps, sys.tau);
        let o = IntegrateOptions::default();
        let tu = integrate(&LvDelay::new(&sys, Frame::Original), &hu, 30.0, 0.005, &o).unwrap();
        let tx = integrate(&LvDelay::new(&sys, Frame::Shifted), &hx, 30.0, 0.005, &o).unwrap();
        let back = tx.shifted(&[1.0, 1.0], Frame::Original);
        for q in 0..tu.len() {
            for i in 0..2 {
                assert!((tu.state(q)[i] - back.state(q)[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rk4_order_on_logistic() {
        let lg = Logistic { alpha: 1.2, tau: 1.0 };
        // smooth history that matches the equation's derivative at 0
        let hist = HistoryFunction::from_fn(1.0, 200, |s| (vec![0.5 + 0.1 * s], vec![0.1]));
        let o = IntegrateOptions { check_error: false, ..Default::default() };
        let end = |h: f64| integrate(&lg, &hist, 5.0, h, &o).unwrap().last_state()[0];
        let h = 0.05;
        let reference = end(h / 8.0);
        let ratio = (end(h) - reference).abs() / (end(h / 2.0) - reference).abs();
        assert!((ratio - 16.0).abs() < 0.2 * 16.0, "ratio {ratio}");
    }

    #[test]
    fn running_example_destabilizes() {
        // the equilibrium is unstable (μτ = 9 > π/2); small perturbations grow
        // until the fixed step can no longer resolve the spikes
        let sys = running();
        let hist = perturbed_history([1.0, 1.0], 1e-3, sys.tau);
        let r = integrate(&LvDelay::new(&sys, Frame::Original), &hist, 300.0, 0.01, &IntegrateOptions::default());
        match r {
            Err(DdeError::StepTooLarge { t, .. }) | Err(DdeError::BlowUp { t, .. }) => assert!(t > 3.0),
            Ok(tr) => panic!("expected a step failure, solution stayed bounded up to {}", tr.t1),
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn csv_header_and_digits() {
        let tr = sampled_trajectory(0.02, 0.01, |t| vec![t, 1.0 / 3.0], |_| vec![1.0, 0.0]);
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("t,u1,u2,du1,du2"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[2], "3.3333333333333331e-1");
        assert_eq!(row[2].parse::<f64>().unwrap(), 1.0 / 3.0);
    }
}
