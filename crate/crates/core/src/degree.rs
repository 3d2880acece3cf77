//! Γ-valued degree data on the λ-window.
//!
//! Each catalog orbit of the radially cut-off diagonal system is an isolated
//! circle orbit; its `Z_k` index is the sign of the determinant of the
//! bordered linearization restricted to the `Z_k`-fixed modes. Summing the
//! indices gives the window degree, and a nonzero `k₀` component certifies a
//! non-stationary periodic solution.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::field::{eval_f, BetaChoice, BetaVariant, CutoffProfile, FourierLoop, GeometryConfig, ThetaGeometry};
use crate::model::{check_hypotheses, HypothesisReport, LVSystem, Mat2, ModelError, Vec2};
use crate::spectrum::{amplitude_solve, catalog, hopf_window, HopfWindow, OrbitCandidate, SpectrumError};

/// Reciprocal condition number below which an orbit counts as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;
pub const DEFAULT_DEGREE_MODES: usize = 64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DegreeError {
    #[error("hypotheses fail: {}", .0.join("; "))]
    HypothesisFailed(Vec<String>),
    #[error("no window: {0}")]
    NoWindow(String),
    #[error("orbit (branch {branch}, k={k}, n={n}) is degenerate: {reason}")]
    DegenerateOrbit { branch: usize, k: u32, n: u32, reason: String },
    #[error("orbit (branch {branch}, k={k}, n={n}) has sign {sign_k} at K={modes} but {sign_2k} at 2K")]
    SignUnstable { branch: usize, k: u32, n: u32, modes: usize, sign_k: i32, sign_2k: i32 },
    #[error("model error: {0}")]
    Model(#[from] ModelError),
}

/// `Γ = Z₂ ⊕ (free abelian group on ℕ)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GammaElement {
    /// The `Z₂` slot. Never computed here, carried as 0.
    pub gamma0: u8,
    pub components: BTreeMap<u32, i64>,
}

impl GammaElement {
    /// The zero of Γ.
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn unit(k: u32, value: i64) -> Self {
        let mut g = Self::zero();
        g.set(k, value);
        g
    }

    pub fn get(&self, k: u32) -> i64 {
        self.components.get(&k).copied().unwrap_or(0)
    }

    pub fn set(&mut self, k: u32, value: i64) {
        if value == 0 {
            self.components.remove(&k);
        } else {
            self.components.insert(k, value);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.gamma0 = (self.gamma0 + other.gamma0) % 2;
        for (&k, &v) in &other.components {
            out.set(k, out.get(k) + v);
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.gamma0 == 0 && self.components.is_empty()
    }
}

impl fmt::Display for GammaElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.components.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.components.iter().map(|(k, v)| format!("{v:+}·Z{k}")).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// Increasing C¹ map of the window fixing its endpoints and every catalog λ
/// with zero slope there: a cubic Hermite smoothstep between consecutive nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaMap {
    nodes: Vec<f64>,
}

impl SigmaMap {
    pub fn new(lambda_lo: f64, lambda_hi: f64, fixed: &[f64]) -> Self {
        let mut nodes = vec![lambda_lo, lambda_hi];
        nodes.extend(fixed.iter().copied().filter(|l| *l > lambda_lo && *l < lambda_hi));
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs());
        Self { nodes }
    }

    pub fn for_window(win: &HopfWindow, cat: &[OrbitCandidate]) -> Self {
        Self::new(win.lambda_lo, win.lambda_hi, &cat.iter().map(|c| c.lambda).collect::<Vec<_>>())
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `(σ(λ), σ′(λ))`; the identity outside the window.
    pub fn eval(&self, lambda: f64) -> (f64, f64) {
        let n = &self.nodes;
        if lambda <= n[0] || lambda >= n[n.len() - 1] {
            return (lambda, if lambda == n[0] || lambda == n[n.len() - 1] { 0.0 } else { 1.0 });
        }
        let q = n.partition_point(|v| *v <= lambda) - 1;
        let (a, b) = (n[q], n[q + 1]);
        let s = (lambda - a) / (b - a);
        (a + (b - a) * s * s * (3.0 - 2.0 * s), 6.0 * s * (1.0 - s))
    }

    pub fn value(&self, lambda: f64) -> f64 {
        self.eval(lambda).0
    }
}

/// The map `f(y,λ) = −σ(λ) ξ̃(‖y‖²) ∫ μ∘y(·−τ/λ)` in diagonal coordinates,
/// zero-mean antiderivative.
pub fn diagonal_map(y: &FourierLoop, lambda: f64, system: &LVSystem, profile: &CutoffProfile, sigma: &SigmaMap) -> FourierLoop {
    let beta = profile.value(y.norm_sq());
    y.delayed(system.tau / lambda).scaled_components(system.mu).antiderivative().scaled(-sigma.value(lambda) * beta)
}

/// Truncated `Ã = (Q − Df, ξ)` on the `Z_k`-fixed modes `k, 2k, …, K`.
#[derive(Debug, Clone, PartialEq)]
pub struct BorderedOperator {
    pub k: u32,
    pub modes: usize,
    /// `N × (N+1)`: the linearization with its λ column.
    pub base: DMatrix<f64>,
    /// Length `N+1`; `ξ(w) = ⟨w_x, ȧ₀⟩/‖ȧ₀‖²` in the Ê inner product.
    pub functional_row: DVector<f64>,
    pub kernel_vector: DVector<f64>,
    /// `‖D_x f(ȧ₀) − ȧ₀‖ / ‖ȧ₀‖`.
    pub tangent_residual: f64,
    /// The linearization `D_x f` alone, `N × N`.
    pub dxf: DMatrix<f64>,
}

impl BorderedOperator {
    pub fn bordered(&self) -> DMatrix<f64> {
        let n = self.base.nrows();
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n, n + 1)).copy_from(&self.base);
        m.row_mut(n).copy_from(&self.functional_row.transpose());
        m
    }

    pub fn kernel_residual(&self) -> f64 {
        (&self.base * &self.kernel_vector).norm() / self.kernel_vector.norm()
    }

    pub fn functional_on_kernel(&self) -> f64 {
        self.functional_row.dot(&self.kernel_vector)
    }

    /// Determinant and the reciprocal condition number `σ_min/σ_max`.
    pub fn determinant(&self) -> (f64, f64) {
        let m = self.bordered();
        let det = m.clone().lu().determinant();
        let sv = m.singular_values();
        (det, sv.min() / sv.max())
    }
}

/// Number of retained `Z_k` modes and the flat index of `(p, component, sin?)`.
fn zk_dim(k: usize, modes: usize) -> usize {
    4 * (modes / k)
}

fn zk_index(p: usize, comp: usize, sin: bool) -> usize {
    4 * (p - 1) + 2 * comp + sin as usize
}

fn to_zk(x: &FourierLoop, k: usize) -> Vec<f64> {
    let pmax = x.modes() / k;
    let mut v = vec![0.0; 4 * pmax];
    for p in 1..=pmax {
        for c in 0..2 {
            v[zk_index(p, c, false)] = x.cos(c, p * k);
            v[zk_index(p, c, true)] = x.sin(c, p * k);
        }
    }
    v
}

fn from_zk(v: &[f64], k: usize, modes: usize) -> FourierLoop {
    let mut x = FourierLoop::zeros(modes);
    for p in 1..=modes / k {
        for c in 0..2 {
            x.set(c, p * k, v[zk_index(p, c, false)], v[zk_index(p, c, true)]);
        }
    }
    x
}

/// Rounds `modes` up to a multiple of `k`.
pub fn aligned_modes(modes: usize, k: u32) -> usize {
    let k = k as usize;
    modes.div_ceil(k) * k
}

fn degenerate(c: &OrbitCandidate, reason: String) -> DegreeError {
    DegreeError::DegenerateOrbit { branch: c.branch, k: c.k, n: c.n, reason }
}

/// Linearization at `(a₀, λ_{k,n})` with `a₀ = c cos kt` on the candidate's branch.
pub fn linearize_at(cand: &OrbitCandidate, system: &LVSystem, profile: &CutoffProfile, sigma: &SigmaMap, modes: usize) -> Result<BorderedOperator, DegreeError> {
    let k = cand.k as usize;
    if modes % k != 0 || modes < k {
        return Err(degenerate(cand, format!("truncation {modes} is not a positive multiple of k")));
    }
    let amp = match cand.amplitude {
        Some(a) => a,
        None => amplitude_solve(cand, profile).map_err(|e| degenerate(cand, e.to_string()))?,
    };
    let a0 = FourierLoop::single_mode(modes, cand.system_index, k, amp, 0.0);
    let t = a0.norm_sq();
    let dxi = profile.derivative(t);
    if !(dxi < 0.0) {
        return Err(degenerate(cand, format!("amplitude {amp} lies outside the cutoff transition band")));
    }
    let lambda = cand.lambda;
    let (sig, dsig) = sigma.eval(lambda);
    let beta = profile.value(t);
    let delta = system.tau / lambda;
    let mu = system.mu;
    let anti = |v: &FourierLoop| v.delayed(delta).scaled_components(mu).antiderivative();
    let a0_term = anti(&a0);
    let dxf = |v: &FourierLoop| -> FourierLoop {
        let rank_one = 2.0 * dxi * a0.inner(v);
        anti(v).scaled(-sig * beta).add(&a0_term.scaled(-sig * rank_one))
    };
    let n = zk_dim(k, modes);
    let mut base = DMatrix::zeros(n, n + 1);
    let mut dmat = DMatrix::zeros(n, n);
    for col in 0..n {
        let mut e = vec![0.0; n];
        e[col] = 1.0;
        let ev = from_zk(&e, k, modes);
        let d = to_zk(&dxf(&ev), k);
        for row in 0..n {
            dmat[(row, col)] = d[row];
            base[(row, col)] = e[row] - d[row];
        }
    }
    // −D_λ f = β[σ′ ∫μ a_δ + σ (τ/λ²) ∫μ ȧ_δ]
    let dlam = a0_term.scaled(beta * dsig).add(&anti(&a0.derivative()).scaled(beta * sig * system.tau / (lambda * lambda)));
    let dl = to_zk(&dlam, k);
    for row in 0..n {
        base[(row, n)] = dl[row];
    }
    let tangent = a0.derivative();
    let tn2 = tangent.norm_sq();
    let mut functional_row = DVector::zeros(n + 1);
    let mut kernel_vector = DVector::zeros(n + 1);
    for col in 0..n {
        let mut e = vec![0.0; n];
        e[col] = 1.0;
        functional_row[col] = from_zk(&e, k, modes).inner(&tangent) / tn2;
    }
    for (i, v) in to_zk(&tangent, k).into_iter().enumerate() {
        kernel_vector[i] = v;
    }
    let tangent_residual = dxf(&tangent).sub(&tangent).norm() / tangent.norm();
    Ok(BorderedOperator { k: cand.k, modes, base, functional_row, kernel_vector, tangent_residual, dxf: dmat })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitIndex {
    pub gamma: GammaElement,
    pub sign: i32,
    pub modes: usize,
    pub det: f64,
    pub det_2k: f64,
    pub conditioning: f64,
    pub kernel_residual: f64,
    pub functional_on_kernel: f64,
    pub tangent_residual: f64,
    pub amplitude: f64,
}

/// `Z_k` index of one candidate: sign of the bordered determinant, required
/// to agree between truncations `K` and `2K`.
pub fn orbit_index(cand: &OrbitCandidate, system: &LVSystem, profile: &CutoffProfile, sigma: &SigmaMap, modes: usize) -> Result<OrbitIndex, DegreeError> {
    let m = aligned_modes(modes, cand.k);
    let op = linearize_at(cand, system, profile, sigma, m)?;
    let op2 = linearize_at(cand, system, profile, sigma, 2 * m)?;
    let (det, norm) = op.determinant();
    let (det2, norm2) = op2.determinant();
    if !(norm >= DEGENERACY_TOL) || !(norm2 >= DEGENERACY_TOL) {
        return Err(degenerate(cand, format!("bordered operator conditioning {:.3e} below {DEGENERACY_TOL:.0e}", norm.min(norm2))));
    }
    let (s1, s2) = (det.signum() as i32, det2.signum() as i32);
    if s1 != s2 {
        return Err(DegreeError::SignUnstable { branch: cand.branch, k: cand.k, n: cand.n, modes: m, sign_k: s1, sign_2k: s2 });
    }
    Ok(OrbitIndex {
        gamma: GammaElement::unit(cand.k, s1 as i64),
        sign: s1,
        modes: m,
        det,
        det_2k: det2,
        conditioning: norm,
        kernel_residual: op.kernel_residual(),
        functional_on_kernel: op.functional_on_kernel(),
        tangent_residual: op.tangent_residual,
        amplitude: cand.amplitude.unwrap_or(f64::NAN),
    })
}

/// Componentwise sum of per-orbit indices.
pub fn sum_indices<'a>(indices: impl IntoIterator<Item = &'a GammaElement>) -> GammaElement {
    indices.into_iter().fold(GammaElement::zero(), |acc, g| acc.add(g))
}

pub fn window_degree(cat: &[OrbitCandidate], system: &LVSystem, profile: &CutoffProfile, sigma: &SigmaMap, modes: usize) -> Result<GammaElement, DegreeError> {
    let idx: Result<Vec<OrbitIndex>, DegreeError> = cat.par_iter().map(|c| orbit_index(c, system, profile, sigma, modes)).collect();
    Ok(sum_indices(idx?.iter().map(|i| &i.gamma)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyConfig {
    pub geometry: GeometryConfig,
    pub modes: usize,
    pub j: Option<u32>,
    /// Restrict the catalog to one Fourier mode.
    pub k_filter: Option<u32>,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self { geometry: GeometryConfig::default(), modes: DEFAULT_DEGREE_MODES, j: None, k_filter: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub hypotheses: HypothesisReport,
    pub window: HopfWindow,
    pub catalog: Vec<OrbitCandidate>,
    pub indices: Vec<(OrbitCandidate, OrbitIndex)>,
    pub total: GammaElement,
    pub nontrivial: bool,
    pub geometry: Option<ThetaGeometry>,
    pub geometry_note: Option<String>,
    pub narrative: Vec<String>,
}

fn spectrum_to_window(e: SpectrumError) -> DegreeError {
    match e {
        SpectrumError::NoWinding { product } => DegreeError::NoWindow(format!("mu*tau = {product:.6} <= pi/2 on some branch, no winding number")),
        SpectrumError::EqualWinding { n } => DegreeError::NoWindow(format!("n1 = n2 = {n}")),
        other => DegreeError::NoWindow(other.to_string()),
    }
}

/// Full pipeline from raw parameters to the certificate.
pub fn certify(a: &Mat2, r: &Vec2, tau: f64, cfg: &CertifyConfig) -> Result<Certificate, DegreeError> {
    let hyp = check_hypotheses(a, r);
    if hyp.mu.is_some() && !hyp.mu_distinct {
        return Err(DegreeError::NoWindow("mu1 = mu2, so n1 = n2 for every tau".into()));
    }
    if !hyp.all_pass() {
        return Err(DegreeError::HypothesisFailed(hyp.messages.clone()));
    }
    let system = LVSystem::new(*a, *r, tau)?;
    let window = hopf_window(&system, cfg.j).map_err(spectrum_to_window)?;
    let profile = cfg.geometry.profile(&system).map_err(|e| DegreeError::NoWindow(e.to_string()))?;
    let mut cat = catalog(&system, &window);
    if let Some(k) = cfg.k_filter {
        cat.retain(|c| c.k == k);
    }
    for c in cat.iter_mut() {
        c.amplitude = Some(amplitude_solve(c, &profile).map_err(|e| degenerate(c, e.to_string()))?);
    }
    let norms: Vec<f64> = cat.iter().filter_map(|c| c.norm_sq()).map(f64::sqrt).collect();
    let (geometry, geometry_note) = match ThetaGeometry::build(&system, window.lambda_hi, &cfg.geometry, &norms) {
        Ok(g) => (Some(g), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let sigma = SigmaMap::for_window(&window, &cat);
    let results: Result<Vec<OrbitIndex>, DegreeError> = cat.par_iter().map(|c| orbit_index(c, &system, &profile, &sigma, cfg.modes)).collect();
    let results = results?;
    let total = sum_indices(results.iter().map(|i| &i.gamma));
    let nontrivial = total.get(window.k0) != 0;
    let indices: Vec<(OrbitCandidate, OrbitIndex)> = cat.iter().cloned().zip(results).collect();
    let narrative = narrative(&hyp, &window, &indices, &total, nontrivial, &profile);
    Ok(Certificate { hypotheses: hyp, window, catalog: cat, indices, total, nontrivial, geometry, geometry_note, narrative })
}

fn narrative(hyp: &HypothesisReport, w: &HopfWindow, indices: &[(OrbitCandidate, OrbitIndex)], total: &GammaElement, nontrivial: bool, profile: &CutoffProfile) -> Vec<String> {
    let mut v = Vec::new();
    v.push(format!("hypotheses (A0)-(A2) hold; smallest eigenvalue of the symmetric part {:.6}", hyp.min_sym_eig));
    v.push(format!("winding numbers n1={} < n2={} place mu_i*tau strictly between consecutive pi/2 + 2n*pi", w.n1, w.n2));
    v.push(format!("Phi(n1,n2) = {:?}; using j={} gives the window lambda in ({:.12}, {:.12})", w.phi, w.j, w.lambda_lo, w.lambda_hi));
    v.push(format!("radial cutoff: alpha0={}, thresholds ({}, {}) on the squared norm", profile.alpha0, profile.t_lo, profile.t_hi));
    for (c, i) in indices {
        v.push(format!(
            "orbit branch={} k={} n={} lambda={:.12} amplitude={:.12}: isolated Z_{} orbit, bordered sign {:+} (stable K={} vs 2K), index {}",
            c.branch, c.k, c.n, c.lambda, i.amplitude, c.k, i.sign, i.modes, i.gamma
        ));
    }
    v.push(format!("k0 = floor(n2/j) = {}: only n = n2 on branch 2 has k = k0, branch 1 stops at floor(n1/j) < k0", w.k0));
    v.push(format!("additivity over the isolated orbits gives the window degree {total}"));
    v.push("cutoff and sigma homotopies keep the degree unchanged, so the degree of the original operator equals this sum".into());
    if nontrivial {
        v.push(format!("component at k0={} is nonzero, so a non-stationary periodic solution exists in the window", w.k0));
    } else {
        v.push(format!("component at k0={} vanishes; no conclusion", w.k0));
    }
    v
}

impl Certificate {
    pub fn verdict(&self) -> String {
        if self.nontrivial {
            format!("EXISTS: non-stationary periodic solution, k0={}", self.window.k0)
        } else {
            format!("INCONCLUSIVE: degree component at k0={} is zero", self.window.k0)
        }
    }

    pub fn render_text(&self) -> String {
        let w = &self.window;
        let mut s = String::new();
        s.push_str("[hypotheses]\n");
        s.push_str(&format!("a0={} a1={} a2={} min_sym_eig={:.6} mu_distinct={}\n", self.hypotheses.a0_pass, self.hypotheses.a1_pass, self.hypotheses.a2_pass, self.hypotheses.min_sym_eig, self.hypotheses.mu_distinct));
        s.push_str("\n[windows]\n");
        s.push_str(&format!("n1={} n2={} j={} phi={:?}\n", w.n1, w.n2, w.j, w.phi));
        s.push_str(&format!("lambda_lo={:.16e} lambda_hi={:.16e}\n", w.lambda_lo, w.lambda_hi));
        s.push_str(&format!("period_window=({:.12}, {:.12})\n", w.period_lo(), w.period_hi()));
        s.push_str("\n[catalog]\n");
        for c in &self.catalog {
            s.push_str(&format!("branch={} mu={:.12} k={} n={} lambda={:.16e} period={:.16e} beta_level={:.16e} amplitude={:.16e}\n", c.branch, c.mu, c.k, c.n, c.lambda, c.period, c.beta_level, c.amplitude.unwrap_or(f64::NAN)));
        }
        s.push_str("\n[indices]\n");
        for (c, i) in &self.indices {
            s.push_str(&format!("branch={} k={} n={} sign={:+} det_K={:.6e} det_2K={:.6e} conditioning={:.6e} K={} kernel_residual={:.3e} tangent_residual={:.3e} index={}\n", c.branch, c.k, c.n, i.sign, i.det, i.det_2k, i.conditioning, i.modes, i.kernel_residual, i.tangent_residual, i.gamma));
        }
        s.push_str("\n[total]\n");
        s.push_str(&format!("{}\n", self.total));
        if let Some(g) = &self.geometry {
            s.push_str("\n[geometry]\n");
            s.push_str(&format!("d={:?} m0={:.6e} m1={:.6e} alpha0={} delta0={:.3e}\n", g.bounds.d, g.bounds.m0, g.m1, g.alpha0, g.delta0));
        } else if let Some(n) = &self.geometry_note {
            s.push_str(&format!("\n[geometry]\nunavailable: {n}\n"));
        }
        s.push_str("\n[narrative]\n");
        for line in &self.narrative {
            s.push_str(&format!("- {line}\n"));
        }
        s.push_str("\n[verdict]\n");
        s.push_str(&format!("{}\n", self.verdict()));
        s
    }

    pub fn render_kv(&self) -> String {
        let w = &self.window;
        let mut s = String::new();
        s.push_str(&format!("verdict={}\n", self.verdict()));
        s.push_str(&format!("k0={}\n", w.k0));
        s.push_str(&format!("lambda_lo={:.16e}\n", w.lambda_lo));
        s.push_str(&format!("lambda_hi={:.16e}\n", w.lambda_hi));
        s.push_str(&format!("n1={}\nn2={}\nj={}\n", w.n1, w.n2, w.j));
        let mut ks: Vec<u32> = self.catalog.iter().map(|c| c.k).collect();
        ks.dedup();
        for k in ks {
            s.push_str(&format!("total_gamma_{k}={}\n", self.total.get(k)));
        }
        s
    }
}

/// One sample of the θ-homotopy along a fixed loop.
#[derive(Debug, Clone, PartialEq)]
pub struct HomotopySample {
    pub theta: f64,
    pub residual: f64,
    pub margin: f64,
}

/// `‖F(x,λ,θ) − x‖` and the outer boundary margin of `x` for `θ` on a uniform grid.
pub fn homotopy_scan(x: &FourierLoop, lambda: f64, system: &LVSystem, geom: &ThetaGeometry, samples: usize) -> Vec<HomotopySample> {
    let beta = BetaChoice::Field(geom, BetaVariant::Distance);
    let margin = geom.outer_margin(x);
    (0..=samples)
        .map(|q| {
            let theta = q as f64 / samples as f64;
            let residual = eval_f(x, lambda, theta, system, &beta).sub(x).norm();
            HomotopySample { theta, residual, margin }
        })
        .collect()
}

/// Ê norm of `(Q − f)(y,λ)` for the diagonal map, used to check candidates are zeros.
pub fn diagonal_residual(y: &FourierLoop, lambda: f64, system: &LVSystem, profile: &CutoffProfile, sigma: &SigmaMap) -> f64 {
    y.sub(&diagonal_map(y, lambda, system, profile, sigma)).norm()
}

/// `2π`-periodic tangent direction to the orbit at `a₀`.
pub fn tangent_of(cand: &OrbitCandidate, modes: usize) -> Option<FourierLoop> {
    Some(cand.diagonal_loop(modes)?.derivative())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::eval_g;
    use crate::spectrum::solve_amplitudes;

    fn setup(tau: f64) -> (LVSystem, HopfWindow, Vec<OrbitCandidate>, CutoffProfile, SigmaMap) {
        let sys = LVSystem::from_entries(2.0, 1.0, 1.0, 2.0, 3.0, 3.0, tau).unwrap();
        let w = hopf_window(&sys, None).unwrap();
        let mut cat = catalog(&sys, &w);
        let profile = GeometryConfig::default().profile(&sys).unwrap();
        solve_amplitudes(&mut cat, &profile).unwrap();
        let sigma = SigmaMap::for_window(&w, &cat);
        (sys, w, cat, profile, sigma)
    }

    #[test]
    fn gamma_arithmetic() {
        let a = GammaElement::unit(1, 1);
        let b = GammaElement::unit(2, -1);
        let s = a.add(&b);
        assert_eq!((s.get(1), s.get(2), s.get(3)), (1, -1, 0));
        assert!(a.add(&GammaElement::unit(1, -1)).is_zero());
        assert_eq!(sum_indices([].iter()), GammaElement::zero());
    }

    #[test]
    fn sigma_map_properties() {
        let (_, w, cat, _, sigma) = setup(3.0);
        assert_eq!(sigma.value(w.lambda_lo), w.lambda_lo);
        assert_eq!(sigma.value(w.lambda_hi), w.lambda_hi);
        let (v, d) = sigma.eval(cat[0].lambda);
        assert!((v - cat[0].lambda).abs() < 1e-15);
        assert_eq!(d, 0.0);
        let mut prev = w.lambda_lo;
        for q in 0..=1000 {
            let l = w.lambda_lo + (w.lambda_hi - w.lambda_lo) * q as f64 / 1000.0;
            let (v, d) = sigma.eval(l);
            assert!(d >= 0.0 && v >= prev - 1e-15);
            prev = v;
        }
        let l = 0.3;
        let h = 1e-7;
        let fd = (sigma.value(l + h) - sigma.value(l - h)) / (2.0 * h);
        assert!((fd - sigma.eval(l).1).abs() < 1e-6);
    }

    #[test]
    fn catalog_orbit_is_zero_of_diagonal_map() {
        let (sys, _, cat, profile, sigma) = setup(3.0);
        let y = cat[0].diagonal_loop(16).unwrap();
        assert!(diagonal_residual(&y, cat[0].lambda, &sys, &profile, &sigma) < 1e-13);
    }

    #[test]
    fn diagonal_map_matches_g_under_p() {
        // P·G(P⁻¹y, λ, 1)·with constant β equals the diagonal map with the same β
        let (sys, w, cat, _, sigma) = setup(3.0);
        let beta0 = 0.6;
        let flat = CutoffProfile::new(1e9, 2e9, 0.5).unwrap();
        let y = FourierLoop::from_slice(3, &[0.3, 0.1, 0.0, 0.2, -0.1, 0.05, 0.2, 0.0, 0.1, 0.1, -0.3, 0.02]);
        let lam = 0.5 * (w.lambda_lo + w.lambda_hi);
        let sig = |l: f64| sigma.value(l);
        let g = eval_g(&y.transformed(&sys.p_inv), lam, 1.0, &sys, &BetaChoice::Constant(beta0), &sig).transformed(&sys.p);
        let f = diagonal_map(&y, lam, &sys, &flat, &sigma).scaled(beta0);
        assert!(g.sub(&f).max_abs_coeff() < 1e-13);
        let _ = cat;
    }

    #[test]
    fn running_example_index_and_operator() {
        let (sys, _, cat, profile, sigma) = setup(3.0);
        let op = linearize_at(&cat[0], &sys, &profile, &sigma, 32).unwrap();
        assert!(op.tangent_residual < 1e-8);
        assert!(op.kernel_residual() < 1e-8);
        assert!((op.functional_on_kernel() - 1.0).abs() < 1e-10);
        let idx = orbit_index(&cat[0], &sys, &profile, &sigma, 32).unwrap();
        assert_eq!(idx.gamma.get(1).abs(), 1);
        assert_eq!(idx.gamma.get(2), 0);
        assert!(idx.gamma.components.keys().all(|&k| k == 1));
        let idx64 = orbit_index(&cat[0], &sys, &profile, &sigma, 64).unwrap();
        assert_eq!(idx.sign, idx64.sign);
    }

    #[test]
    fn analytic_linearization_matches_finite_differences() {
        let (sys, _, cat, profile, sigma) = setup(3.0);
        let modes = 8;
        let op = linearize_at(&cat[0], &sys, &profile, &sigma, modes).unwrap();
        let a0 = cat[0].diagonal_loop(modes).unwrap();
        let lam = cat[0].lambda;
        let n = op.dxf.nrows();
        let h = 1e-6;
        for col in 0..n {
            let mut e = vec![0.0; n];
            e[col] = h;
            let v = from_zk(&e, 1, modes);
            let fp = diagonal_map(&a0.add(&v), lam, &sys, &profile, &sigma);
            let fm = diagonal_map(&a0.sub(&v), lam, &sys, &profile, &sigma);
            let fd = to_zk(&fp.sub(&fm).scaled(0.5 / h), 1);
            for row in 0..n {
                assert!((fd[row] - op.dxf[(row, col)]).abs() < 1e-6, "({row},{col})");
            }
        }
        // σ″ jumps at the node, so the central difference is only O(h) there
        let h = 1e-8;
        let fp = diagonal_map(&a0, lam + h, &sys, &profile, &sigma);
        let fm = diagonal_map(&a0, lam - h, &sys, &profile, &sigma);
        let fd = to_zk(&fp.sub(&fm).scaled(0.5 / h), 1);
        for row in 0..n {
            assert!((fd[row] + op.base[(row, n)]).abs() < 1e-6, "{row}: {} vs {}", fd[row], -op.base[(row, n)]);
        }
    }

    #[test]
    fn rank_one_term_vanishes_off_a0() {
        let (sys, _, cat, profile, sigma) = setup(3.0);
        let modes = 6;
        let op = linearize_at(&cat[0], &sys, &profile, &sigma, modes).unwrap();
        // mode 3 sine of the other component is Ê-orthogonal to a0 = c cos t on branch 2
        let mut e = vec![0.0; op.dxf.nrows()];
        e[zk_index(3, 0, true)] = 1.0;
        let v = from_zk(&e, 1, modes);
        let got = &op.dxf * DVector::from_vec(e);
        let lam = cat[0].lambda;
        let pure = v.delayed(sys.tau / lam).scaled_components(sys.mu).antiderivative().scaled(-sigma.value(lam) * cat[0].beta_level);
        let want = to_zk(&pure, 1);
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() < 1e-14);
        }
    }

    #[test]
    fn two_orbit_window_keeps_both_components() {
        // tau = 5 puts n2 = 2 on the mu = 3 branch: candidates k=1 (n=1) and k=2 (n=2)
        let (sys, w, cat, profile, sigma) = setup(5.0);
        assert_eq!((w.n1, w.n2, w.k0), (0, 2, 2));
        let ks: Vec<u32> = cat.iter().map(|c| c.k).collect();
        assert_eq!(ks, vec![1, 2]);
        let i1 = orbit_index(&cat[0], &sys, &profile, &sigma, 32).unwrap();
        let i2 = orbit_index(&cat[1], &sys, &profile, &sigma, 32).unwrap();
        assert_eq!(i1.gamma.get(2), 0);
        let total = window_degree(&cat, &sys, &profile, &sigma, 32).unwrap();
        assert_eq!(total.get(2), i2.gamma.get(2));
        assert_eq!(total.get(1), i1.gamma.get(1));
        assert_eq!(total, i1.gamma.add(&i2.gamma));
        assert!(window_degree(&[], &sys, &profile, &sigma, 32).unwrap().is_zero());
    }

    #[test]
    fn certify_running_example_and_failures() {
        let a = Mat2::new(2.0, 1.0, 1.0, 2.0);
        let r = Vec2::new(3.0, 3.0);
        let cert = certify(&a, &r, 3.0, &CertifyConfig::default()).unwrap();
        assert!(cert.nontrivial);
        assert_eq!(cert.window.k0, 1);
        assert_eq!(cert.verdict(), "EXISTS: non-stationary periodic solution, k0=1");
        assert!(cert.render_kv().contains("total_gamma_1="));
        assert!(matches!(certify(&a, &r, 0.1, &CertifyConfig::default()), Err(DegreeError::NoWindow(_))));
        assert!(matches!(certify(&Mat2::identity(), &Vec2::new(1.0, 1.0), 3.0, &CertifyConfig::default()), Err(DegreeError::NoWindow(m)) if m.contains("n1 = n2")));
        assert!(matches!(certify(&Mat2::new(1.0, 3.0, 3.0, 1.0), &Vec2::new(4.0, 4.0), 3.0, &CertifyConfig::default()), Err(DegreeError::HypothesisFailed(_))));
    }

    #[test]
    fn resonant_ratio_is_degenerate() {
        // mu = {1, 5}: the mode-5 block on the other branch has a zero factor
        let a = Mat2::new(3.0, 2.0, 2.0, 3.0);
        let r = Vec2::new(5.0, 5.0);
        match certify(&a, &r, 8.0, &CertifyConfig::default()) {
            Err(DegreeError::DegenerateOrbit { .. }) => {}
            other => panic!("expected a degenerate orbit, got {other:?}"),
        }
    }
}
