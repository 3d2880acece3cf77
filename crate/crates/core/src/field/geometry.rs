//! A priori bounds, the annular set Θ and the cutoff functions built on it.

use std::f64::consts::PI;

use super::loop_space::FourierLoop;
use super::FieldError;
use crate::model::LVSystem;

/// Largest exponent accepted before the bounds are declared overflowing.
pub const MAX_EXPONENT: f64 = 700.0;

/// Sup-norm embedding constant: `|x|_∞ ≤ C·‖x‖` on zero-mean loops.
pub fn sup_embedding_constant() -> f64 {
    // Σ_{k≥1} 1/(1+k²) = (π coth π − 1)/2
    let tail = (PI / PI.tanh() - 1.0) / 2.0;
    (tail / PI).sqrt()
}

fn smoothstep(s: f64) -> (f64, f64) {
    let s = s.clamp(0.0, 1.0);
    (s * s * (3.0 - 2.0 * s), 6.0 * s * (1.0 - s))
}

/// Decreasing cutoff `ξ̃`: 1 below `t_lo`, `alpha0` above `t_hi`, cubic
/// Hermite ramp with zero end slopes in between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffProfile {
    pub t_lo: f64,
    pub t_hi: f64,
    pub alpha0: f64,
}

impl CutoffProfile {
    pub fn new(t_lo: f64, t_hi: f64, alpha0: f64) -> Result<Self, FieldError> {
        if !(t_lo >= 0.0 && t_lo < t_hi && t_hi.is_finite()) {
            return Err(FieldError::InvalidGeometry(format!("cutoff thresholds must satisfy 0 <= t_lo < t_hi, got {t_lo}, {t_hi}")));
        }
        if !(alpha0 > 0.0 && alpha0 < 1.0) {
            return Err(FieldError::InvalidGeometry(format!("alpha0 must lie in (0,1), got {alpha0}")));
        }
        Ok(Self { t_lo, t_hi, alpha0 })
    }

    /// Thresholds `(√r, √R)` applied to the squared norm.
    pub fn from_radii(radius_r: f64, radius_big: f64, alpha0: f64) -> Result<Self, FieldError> {
        if !(radius_r > 0.0 && radius_r < radius_big) {
            return Err(FieldError::InvalidGeometry(format!("radii must satisfy 0 < r < R, got {radius_r}, {radius_big}")));
        }
        Self::new(radius_r.sqrt(), radius_big.sqrt(), alpha0)
    }

    pub fn value(&self, t: f64) -> f64 {
        if t <= self.t_lo {
            return 1.0;
        }
        if t >= self.t_hi {
            return self.alpha0;
        }
        let (h, _) = smoothstep((t - self.t_lo) / (self.t_hi - self.t_lo));
        1.0 - (1.0 - self.alpha0) * h
    }

    pub fn derivative(&self, t: f64) -> f64 {
        if t <= self.t_lo || t >= self.t_hi {
            return 0.0;
        }
        let w = self.t_hi - self.t_lo;
        let (_, dh) = smoothstep((t - self.t_lo) / w);
        -(1.0 - self.alpha0) * dh / w
    }

    /// True when `level` lies strictly between `alpha0` and 1.
    pub fn in_band(&self, level: f64) -> bool {
        level > self.alpha0 && level < 1.0
    }

    /// Unique `t` in the transition band with `ξ̃(t) = level`.
    pub fn inverse(&self, level: f64) -> Option<f64> {
        if !self.in_band(level) {
            return None;
        }
        let (mut lo, mut hi) = (self.t_lo, self.t_hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.value(mid) > level {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi.max(1.0) {
                break;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

/// Increasing cutoff `ξ` on the squared distance to `∂Θ`: `alpha0` at 0, 1 from `delta0` on.
pub fn distance_cutoff(d2: f64, delta0: f64, alpha0: f64) -> f64 {
    if d2 <= 0.0 {
        return alpha0;
    }
    let (h, _) = smoothstep(d2 / delta0);
    alpha0 + (1.0 - alpha0) * h
}

/// Box bounds `d₁…d₄` and the derivative bound `m₀` for periodic solutions.
#[derive(Debug, Clone, PartialEq)]
pub struct AprioriBounds {
    pub d: [f64; 4],
    pub m0: f64,
    pub lambda_hi: f64,
    /// `b_i − d_i = b_i e^{−E_i}`, kept exactly because `d_i` often rounds to `b_i`.
    pub lower_margin: [f64; 2],
    /// `ln(b_i − d_i)`, finite even when the margin underflows.
    pub lower_log_margin: [f64; 2],
    /// Whether `d_{i+2}` had to be raised to exceed `(b_i+d_i)/2`.
    pub upper_enlarged: [bool; 2],
}

pub fn apriori_bounds(system: &LVSystem, lambda_hi: f64) -> Result<AprioriBounds, FieldError> {
    if !(lambda_hi > 0.0 && lambda_hi.is_finite()) {
        return Err(FieldError::InvalidGeometry(format!("lambda_hi must be positive, got {lambda_hi}")));
    }
    let a = &system.a;
    let b = system.b;
    let s = 2.0 * PI * lambda_hi;
    let mut d = [0.0; 4];
    for i in 0..2 {
        let e = s * (a[(i, 0)] * b[0] + a[(i, 1)] * b[1]);
        if e > MAX_EXPONENT {
            return Err(FieldError::BoundOverflow { exponent: e });
        }
        d[i + 2] = b[i] * e.exp_m1();
    }
    let mut lower_margin = [0.0; 2];
    let mut lower_log_margin = [0.0; 2];
    for i in 0..2 {
        let e = s * (a[(i, 0)] * d[2] + a[(i, 1)] * d[3]);
        d[i] = -b[i] * (-e).exp_m1();
        lower_margin[i] = b[i] * (-e).exp();
        lower_log_margin[i] = b[i].ln() - e;
    }
    let mut upper_enlarged = [false; 2];
    for i in 0..2 {
        let floor = (b[i] + d[i]) / 2.0;
        if d[i + 2] <= floor {
            d[i + 2] = 1.01 * floor;
            upper_enlarged[i] = true;
        }
    }
    let m0 = 1.1
        * (0..2)
            .map(|i| lambda_hi * (a[(i, 0)] * d[2] + a[(i, 1)] * d[3]) * (b[i] + d[i + 2]))
            .fold(0.0, f64::max);
    Ok(AprioriBounds { d, m0, lambda_hi, lower_margin, lower_log_margin, upper_enlarged })
}

/// Cutoff floor used when none is configured: small enough that the
/// `β ≡ alpha0` system has no characteristic value at any mode.
pub fn default_alpha0(system: &LVSystem) -> f64 {
    let mu_max = system.mu[0].max(system.mu[1]);
    if system.tau > 0.0 {
        (0.05f64).min(PI / (4.0 * mu_max * system.tau))
    } else {
        0.05
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    pub alpha0: Option<f64>,
    pub radius_r: f64,
    pub radius_big: f64,
    pub m1_override: Option<f64>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { alpha0: None, radius_r: 1e-4, radius_big: 1e2, m1_override: None }
    }
}

impl GeometryConfig {
    pub fn profile(&self, system: &LVSystem) -> Result<CutoffProfile, FieldError> {
        let alpha0 = self.alpha0.unwrap_or_else(|| default_alpha0(system));
        CutoffProfile::from_radii(self.radius_r, self.radius_big, alpha0)
    }
}

/// Which scalar cutoff multiplies the nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaVariant {
    /// `ξ(dist²(x, ∂Θ))` with the distance replaced by constraint margins.
    Distance,
    /// `ξ̃(‖x‖²)`.
    Radial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaGeometry {
    pub b: [f64; 2],
    pub bounds: AprioriBounds,
    pub m1: f64,
    pub alpha0: f64,
    pub delta0: f64,
    pub radius_r: f64,
    pub radius_big: f64,
    pub profile: CutoffProfile,
}

impl ThetaGeometry {
    /// `candidate_norms` are Ê norms of the predicted orbits; half the smallest
    /// becomes `m₁` unless overridden. `m₁` is then shrunk so that `Θ_{m₁}`
    /// stays inside the inner box and inside `Θ₁`.
    pub fn build(system: &LVSystem, lambda_hi: f64, cfg: &GeometryConfig, candidate_norms: &[f64]) -> Result<Self, FieldError> {
        let profile = cfg.profile(system)?;
        let bounds = apriori_bounds(system, lambda_hi)?;
        let d = bounds.d;
        let inner = (0..2).map(|i| d[i].min(d[i + 2])).fold(f64::INFINITY, f64::min);
        let box_cap = inner / sup_embedding_constant();
        let energy_cap = 2.0 * (2.0 * PI).sqrt() * bounds.m0;
        let cap = box_cap.min(energy_cap);
        let m1 = match cfg.m1_override {
            Some(m) if m > 0.0 => m,
            Some(m) => return Err(FieldError::InvalidGeometry(format!("m1 override must be positive, got {m}"))),
            None => {
                let smallest = candidate_norms.iter().cloned().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
                let base = if smallest.is_finite() { 0.5 * smallest } else { 0.5 * cap };
                base.min(0.5 * cap)
            }
        };
        if m1 <= 0.0 || !m1.is_finite() {
            return Err(FieldError::InvalidGeometry(format!("isolation radius m1 is not positive: {m1}")));
        }
        let delta0 = (0..2)
            .map(|i| (0.5 * b_minus_d(&bounds, i)).powi(2).min(d[i + 2].powi(2)))
            .fold(f64::INFINITY, f64::min)
            .max(f64::MIN_POSITIVE);
        Ok(Self {
            b: system.b.into(),
            bounds,
            m1,
            alpha0: profile.alpha0,
            delta0,
            radius_r: cfg.radius_r,
            radius_big: cfg.radius_big,
            profile,
        })
    }

    pub fn d(&self, i: usize) -> f64 {
        self.bounds.d[i - 1]
    }

    /// Margin of `x` to the outer constraints of `Θ_M ∩ Θ₁`, negative outside:
    /// the smallest of the box gaps in sup norm and the Θ₁ energy gap.
    pub fn outer_margin(&self, x: &FourierLoop) -> f64 {
        let d = self.bounds.d;
        let mut margin = f64::INFINITY;
        for i in 0..2 {
            let (lo, hi) = x.extrema(i);
            let energy = (2.0 * PI).sqrt() * self.bounds.m0 - x.derivative_energy(i).sqrt();
            margin = margin.min(lo + (self.b[i] + d[i]) / 2.0).min(2.0 * d[i + 2] - hi).min(energy);
        }
        margin
    }

    pub fn in_theta_m1(&self, x: &FourierLoop) -> bool {
        (0..2).all(|i| x.component_norm_sq(i).sqrt() <= self.m1 / 2.0)
    }

    /// Membership in `Θ = (Θ_M ∩ Θ₁) \ Θ_{m₁}`.
    pub fn in_theta(&self, x: &FourierLoop) -> bool {
        self.outer_margin(x) > 0.0 && !self.in_theta_m1(x)
    }

    pub fn beta(&self, x: &FourierLoop, variant: BetaVariant) -> f64 {
        match variant {
            BetaVariant::Radial => self.profile.value(x.norm_sq()),
            BetaVariant::Distance => {
                let m = self.outer_margin(x);
                if m <= 0.0 {
                    self.alpha0
                } else {
                    distance_cutoff(m * m, self.delta0, self.alpha0)
                }
            }
        }
    }
}

// b_i − d_i cancels catastrophically; the stored margin is exact
fn b_minus_d(bounds: &AprioriBounds, i: usize) -> f64 {
    bounds.lower_margin[i]
}

/// Scalar cutoff applied to a loop.
#[derive(Debug, Clone, Copy)]
pub enum BetaChoice<'a> {
    One,
    Constant(f64),
    Field(&'a ThetaGeometry, BetaVariant),
}

impl BetaChoice<'_> {
    pub fn value(&self, x: &FourierLoop) -> f64 {
        match self {
            BetaChoice::One => 1.0,
            BetaChoice::Constant(c) => *c,
            BetaChoice::Field(g, v) => g.beta(x, *v),
        }
    }
}
