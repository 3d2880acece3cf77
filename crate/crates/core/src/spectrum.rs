//! Winding numbers, the λ-window and the catalog of characteristic values.

use std::f64::consts::PI;

use crate::field::{CutoffProfile, FourierLoop};
use crate::model::LVSystem;

/// Guard band around the endpoints `π/2 + 2mπ`.
pub const BOUNDARY_TOL: f64 = 1e-9;
pub const DEFAULT_J_MAX: u32 = 1000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectrumError {
    #[error("mu*tau = {product} does not exceed pi/2, so no winding number exists")]
    NoWinding { product: f64 },
    #[error("mu*tau = {product} sits on the endpoint pi/2 + 2*{m}*pi")]
    Boundary { product: f64, m: u32 },
    #[error("Phi({n1},{n2}) is empty: requires n1 < n2")]
    EmptyPhi { n1: u32, n2: u32 },
    #[error("both branches have winding number {n}; n1 = n2 leaves no window")]
    EqualWinding { n: u32 },
    #[error("j = {j} is not in Phi({n1},{n2})")]
    InvalidJ { j: u32, n1: u32, n2: u32 },
    #[error("beta level {level} is outside ({alpha0}, 1)")]
    LevelOutOfRange { level: f64, alpha0: f64 },
}

/// `n` with `π/2 + 2nπ < μτ < π/2 + 2(n+1)π`.
pub fn winding_number(mu: f64, tau: f64) -> Result<u32, SpectrumError> {
    let x = mu * tau;
    let m = ((x - PI / 2.0) / (2.0 * PI)).round();
    if m >= 0.0 && (x - (PI / 2.0 + 2.0 * m * PI)).abs() <= BOUNDARY_TOL {
        return Err(SpectrumError::Boundary { product: x, m: m as u32 });
    }
    if !(x > PI / 2.0) {
        return Err(SpectrumError::NoWinding { product: x });
    }
    let n = ((x - PI / 2.0) / (2.0 * PI)).floor();
    debug_assert!(PI / 2.0 + 2.0 * n * PI < x && x < PI / 2.0 + 2.0 * (n + 1.0) * PI);
    Ok(n as u32)
}

/// `Φ(n1,n2) = { j ≤ j_max : ⌊n1/j⌋ < ⌊n2/j⌋ = n2/j }`, ascending.
pub fn phi_set(n1: u32, n2: u32, j_max: u32) -> Result<Vec<u32>, SpectrumError> {
    if n1 >= n2 {
        return Err(SpectrumError::EmptyPhi { n1, n2 });
    }
    Ok((1..=j_max.min(n2)).filter(|&j| n2 % j == 0 && n1 / j < n2 / j).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopfWindow {
    pub n1: u32,
    pub n2: u32,
    pub j: u32,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub k0: u32,
    /// Eigenvalue of each relabeled branch.
    pub mu: [f64; 2],
    /// `system_index[b]` is the eigenvalue slot of the system carrying branch `b+1`.
    pub system_index: [usize; 2],
    pub phi: Vec<u32>,
}

impl HopfWindow {
    pub fn contains(&self, lambda: f64) -> bool {
        lambda > self.lambda_lo && lambda < self.lambda_hi
    }

    pub fn period_lo(&self) -> f64 {
        2.0 * PI * self.lambda_lo
    }

    pub fn period_hi(&self) -> f64 {
        2.0 * PI * self.lambda_hi
    }
}

/// Window `(τ/(2(j+1)π), τ/(2jπ))` for a given `j ∈ Φ(n1,n2)`.
pub fn window(tau: f64, j: u32, n1: u32, n2: u32) -> Result<HopfWindow, SpectrumError> {
    let phi = phi_set(n1, n2, DEFAULT_J_MAX)?;
    if !phi.contains(&j) {
        return Err(SpectrumError::InvalidJ { j, n1, n2 });
    }
    let jf = j as f64;
    Ok(HopfWindow {
        n1,
        n2,
        j,
        lambda_lo: tau / (2.0 * (jf + 1.0) * PI),
        lambda_hi: tau / (2.0 * jf * PI),
        k0: n2 / j,
        mu: [f64::NAN; 2],
        system_index: [0, 1],
        phi,
    })
}

/// Winding numbers of both branches, relabeled so that `n1 < n2`, and the
/// window for `j` (default: the smallest element of `Φ`).
pub fn hopf_window(system: &LVSystem, j_override: Option<u32>) -> Result<HopfWindow, SpectrumError> {
    let n = [winding_number(system.mu[0], system.tau)?, winding_number(system.mu[1], system.tau)?];
    if n[0] == n[1] {
        return Err(SpectrumError::EqualWinding { n: n[0] });
    }
    let order = if n[0] < n[1] { [0, 1] } else { [1, 0] };
    let (n1, n2) = (n[order[0]], n[order[1]]);
    let phi = phi_set(n1, n2, DEFAULT_J_MAX)?;
    let j = match j_override {
        Some(j) => j,
        None => phi[0],
    };
    let mut w = window(system.tau, j, n1, n2)?;
    w.system_index = order;
    w.mu = [system.mu[order[0]], system.mu[order[1]]];
    Ok(w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitCandidate {
    /// 1 or 2, after relabeling.
    pub branch: usize,
    pub system_index: usize,
    pub mu: f64,
    pub k: u32,
    pub n: u32,
    pub lambda: f64,
    pub period: f64,
    pub beta_level: f64,
    pub amplitude: Option<f64>,
}

impl OrbitCandidate {
    /// The β-modified orbit `c cos kt` on its branch, in diagonal coordinates.
    pub fn diagonal_loop(&self, modes: usize) -> Option<FourierLoop> {
        let c = self.amplitude?;
        let mut y = FourierLoop::single_mode(modes, self.system_index, self.k as usize, c, 0.0);
        y.lambda_tag = Some(self.lambda);
        Some(y)
    }

    /// The same orbit mapped back to the coordinates of the shifted system.
    pub fn physical_loop(&self, modes: usize, system: &LVSystem) -> Option<FourierLoop> {
        Some(self.diagonal_loop(modes)?.transformed(&system.p_inv))
    }

    /// Squared Ê norm `π c²(1+k²)` of the diagonal orbit.
    pub fn norm_sq(&self) -> Option<f64> {
        let k = self.k as f64;
        self.amplitude.map(|c| PI * c * c * (1.0 + k * k))
    }
}

/// `λ_{k,n} = kτ/(π/2 + 2nπ)`.
pub fn lambda_kn(k: u32, n: u32, tau: f64) -> f64 {
    k as f64 * tau / (PI / 2.0 + 2.0 * n as f64 * PI)
}

/// All `(k,n)` per branch with `1 ≤ k ≤ ⌊n_i/j⌋`, `n ≤ n_i`, `kj ≤ n < k(j+1)`,
/// sorted by `k` then branch. May be empty.
pub fn catalog(system: &LVSystem, win: &HopfWindow) -> Vec<OrbitCandidate> {
    let j = win.j;
    let mut out = Vec::new();
    for (b, &ni) in [win.n1, win.n2].iter().enumerate() {
        let idx = win.system_index[b];
        let mu = system.mu[idx];
        for k in 1..=ni / j {
            for n in k * j..=(k * (j + 1) - 1).min(ni) {
                let lambda = lambda_kn(k, n, system.tau);
                out.push(OrbitCandidate {
                    branch: b + 1,
                    system_index: idx,
                    mu,
                    k,
                    n,
                    lambda,
                    period: 2.0 * PI * lambda,
                    beta_level: k as f64 / (lambda * mu),
                    amplitude: None,
                });
            }
        }
    }
    out.sort_by(|a, b| (a.k, a.branch, a.n).cmp(&(b.k, b.branch, b.n)));
    out
}

/// `c > 0` with `ξ̃(π c²(1+k²)) = beta_level`.
pub fn amplitude_solve(cand: &OrbitCandidate, profile: &CutoffProfile) -> Result<f64, SpectrumError> {
    let t = profile
        .inverse(cand.beta_level)
        .ok_or(SpectrumError::LevelOutOfRange { level: cand.beta_level, alpha0: profile.alpha0 })?;
    let k = cand.k as f64;
    Ok((t / (PI * (1.0 + k * k))).sqrt())
}

/// Fills in every amplitude; fails on the first candidate outside the band.
pub fn solve_amplitudes(cands: &mut [OrbitCandidate], profile: &CutoffProfile) -> Result<(), SpectrumError> {
    for c in cands.iter_mut() {
        c.amplitude = Some(amplitude_solve(c, profile)?);
    }
    Ok(())
}
