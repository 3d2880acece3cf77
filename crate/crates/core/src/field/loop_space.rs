//! Truncated Fourier representation of the zero-mean loop space `E = Ê × Ê`.
//!
//! A loop is stored as cosine/sine coefficients for modes `1..=K` of each of
//! the two components. The mean is absent by construction, so endpoint match
//! and zero mean hold exactly.

use std::f64::consts::PI;

use crate::model::Mat2;

/// Zero-mean 2π-periodic pair `x(t) = Σ_k c_k cos kt + s_k sin kt`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierLoop {
    modes: usize,
    cos: [Vec<f64>; 2],
    sin: [Vec<f64>; 2],
    pub lambda_tag: Option<f64>,
}

impl FourierLoop {
    pub fn zeros(modes: usize) -> Self {
        assert!(modes >= 1, "truncation must keep at least one mode");
        Self { modes, cos: [vec![0.0; modes], vec![0.0; modes]], sin: [vec![0.0; modes], vec![0.0; modes]], lambda_tag: None }
    }

    /// Single harmonic `c cos kt + s sin kt` in one component.
    pub fn single_mode(modes: usize, component: usize, k: usize, c: f64, s: f64) -> Self {
        let mut x = Self::zeros(modes);
        x.set(component, k, c, s);
        x
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cos(&self, component: usize, k: usize) -> f64 {
        self.cos[component][k - 1]
    }

    pub fn sin(&self, component: usize, k: usize) -> f64 {
        self.sin[component][k - 1]
    }

    pub fn set(&mut self, component: usize, k: usize, c: f64, s: f64) {
        self.cos[component][k - 1] = c;
        self.sin[component][k - 1] = s;
    }

    pub fn cos_slice(&self, component: usize) -> &[f64] {
        &self.cos[component]
    }

    pub fn sin_slice(&self, component: usize) -> &[f64] {
        &self.sin[component]
    }

    /// Number of real unknowns, `4K`.
    pub fn dof(&self) -> usize {
        4 * self.modes
    }

    /// Flat layout `[c_1, s_1, c_2, s_2, …]` for component 0, then component 1.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dof());
        for i in 0..2 {
            for k in 0..self.modes {
                v.push(self.cos[i][k]);
                v.push(self.sin[i][k]);
            }
        }
        v
    }

    pub fn from_slice(modes: usize, v: &[f64]) -> Self {
        assert_eq!(v.len(), 4 * modes);
        let mut x = Self::zeros(modes);
        for i in 0..2 {
            for k in 0..modes {
                x.cos[i][k] = v[2 * (i * modes + k)];
                x.sin[i][k] = v[2 * (i * modes + k) + 1];
            }
        }
        x
    }

    /// Flat index of the cosine coefficient of mode `k` in component `i`.
    pub fn index(modes: usize, component: usize, k: usize) -> usize {
        2 * (component * modes + k - 1)
    }

    /// Zero-pads or truncates to `modes` harmonics.
    pub fn resized(&self, modes: usize) -> Self {
        let mut x = Self::zeros(modes);
        for i in 0..2 {
            for k in 0..modes.min(self.modes) {
                x.cos[i][k] = self.cos[i][k];
                x.sin[i][k] = self.sin[i][k];
            }
        }
        x.lambda_tag = self.lambda_tag;
        x
    }

    fn map_modes(&self, f: impl Fn(usize, f64, f64) -> (f64, f64)) -> Self {
        let mut out = Self::zeros(self.modes);
        for i in 0..2 {
            for k in 0..self.modes {
                let (c, s) = f(k + 1, self.cos[i][k], self.sin[i][k]);
                out.cos[i][k] = c;
                out.sin[i][k] = s;
            }
        }
        out.lambda_tag = self.lambda_tag;
        out
    }

    /// `t ↦ x(t − delta)`, exact per-mode rotation.
    pub fn delayed(&self, delta: f64) -> Self {
        self.map_modes(|k, c, s| {
            let (sn, cs) = (k as f64 * delta).sin_cos();
            (c * cs - s * sn, c * sn + s * cs)
        })
    }

    /// The circle action `t ↦ x(t + phi)`.
    pub fn act(&self, phi: f64) -> Self {
        self.map_modes(|k, c, s| {
            let (sn, cs) = (k as f64 * phi).sin_cos();
            (c * cs + s * sn, -c * sn + s * cs)
        })
    }

    pub fn derivative(&self) -> Self {
        self.map_modes(|k, c, s| {
            let k = k as f64;
            (k * s, -k * c)
        })
    }

    /// Zero-mean antiderivative.
    pub fn antiderivative(&self) -> Self {
        self.map_modes(|k, c, s| {
            let k = k as f64;
            (-s / k, c / k)
        })
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map_modes(|_, c, s| (a * c, a * s))
    }

    /// Componentwise scaling `x_i ↦ w_i·x_i`.
    pub fn scaled_components(&self, w: [f64; 2]) -> Self {
        let mut out = self.clone();
        for i in 0..2 {
            out.cos[i].iter_mut().for_each(|v| *v *= w[i]);
            out.sin[i].iter_mut().for_each(|v| *v *= w[i]);
        }
        out
    }

    /// Pointwise linear map `x ↦ M·x` on the component pair.
    pub fn transformed(&self, m: &Mat2) -> Self {
        let mut out = Self::zeros(self.modes);
        for k in 0..self.modes {
            for i in 0..2 {
                out.cos[i][k] = m[(i, 0)] * self.cos[0][k] + m[(i, 1)] * self.cos[1][k];
                out.sin[i][k] = m[(i, 0)] * self.sin[0][k] + m[(i, 1)] * self.sin[1][k];
            }
        }
        out.lambda_tag = self.lambda_tag;
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.modes, other.modes);
        let mut out = self.clone();
        for i in 0..2 {
            for k in 0..self.modes {
                out.cos[i][k] += other.cos[i][k];
                out.sin[i][k] += other.sin[i][k];
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(-1.0))
    }

    /// Ê inner product `∫ ẋẏ + xy` of one component.
    pub fn component_inner(&self, other: &Self, component: usize) -> f64 {
        (0..self.modes.min(other.modes))
            .map(|k| {
                let w = PI * (1.0 + ((k + 1) * (k + 1)) as f64);
                w * (self.cos[component][k] * other.cos[component][k] + self.sin[component][k] * other.sin[component][k])
            })
            .sum()
    }

    /// Ê inner product on the product space.
    pub fn inner(&self, other: &Self) -> f64 {
        self.component_inner(other, 0) + self.component_inner(other, 1)
    }

    pub fn component_norm_sq(&self, component: usize) -> f64 {
        self.component_inner(self, component)
    }

    /// Squared Ê norm `Σ_k π(1+k²)(c_k²+s_k²)` over both components.
    pub fn norm_sq(&self) -> f64 {
        self.inner(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `∫₀^{2π} ẋ_i² dt`.
    pub fn derivative_energy(&self, component: usize) -> f64 {
        (0..self.modes)
            .map(|k| {
                let kk = ((k + 1) * (k + 1)) as f64;
                PI * kk * (self.cos[component][k].powi(2) + self.sin[component][k].powi(2))
            })
            .sum()
    }

    /// L² inner product `∫ x·y` summed over components.
    pub fn l2_inner(&self, other: &Self) -> f64 {
        let mut acc = 0.0;
        for i in 0..2 {
            for k in 0..self.modes.min(other.modes) {
                acc += PI * (self.cos[i][k] * other.cos[i][k] + self.sin[i][k] * other.sin[i][k]);
            }
        }
        acc
    }

    pub fn eval(&self, t: f64) -> [f64; 2] {
        let mut out = [0.0; 2];
        for k in 0..self.modes {
            let (sn, cs) = ((k + 1) as f64 * t).sin_cos();
            for i in 0..2 {
                out[i] += self.cos[i][k] * cs + self.sin[i][k] * sn;
            }
        }
        out
    }

    pub fn eval_derivative(&self, t: f64) -> [f64; 2] {
        self.derivative().eval(t)
    }

    /// `(min, max)` of one component over the circle: dense sampling followed
    /// by Newton polishing of the best samples on `ẋ = 0`. Accurate to rounding
    /// and therefore invariant under the circle action.
    pub fn extrema(&self, component: usize) -> (f64, f64) {
        let grid = SpectralGrid::new(self.modes, 8 * self.modes + 1);
        let vals = grid.synth_component(self, component);
        let d1 = self.derivative();
        let d2 = d1.derivative();
        let polish = |mut t: f64| -> f64 {
            for _ in 0..8 {
                let f1 = d1.eval(t)[component];
                let f2 = d2.eval(t)[component];
                if f2 == 0.0 {
                    break;
                }
                let step = f1 / f2;
                t -= step.clamp(-0.1, 0.1);
                if step.abs() < 1e-15 {
                    break;
                }
            }
            self.eval(t)[component]
        };
        let mut order: Vec<usize> = (0..vals.len()).collect();
        order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
        let lo_seed = order.iter().take(3).map(|&j| grid.times()[j]);
        let hi_seed = order.iter().rev().take(3).map(|&j| grid.times()[j]);
        let min = lo_seed.map(polish).chain(std::iter::once(vals[order[0]])).fold(f64::INFINITY, f64::min);
        let max = hi_seed.map(polish).chain(std::iter::once(vals[*order.last().unwrap()])).fold(f64::NEG_INFINITY, f64::max);
        (min, max)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.to_vec().iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    /// Amplitude `sqrt(c_k² + s_k²)` summed over components.
    pub fn mode_amplitude(&self, k: usize) -> f64 {
        (0..2).map(|i| self.cos[i][k - 1].hypot(self.sin[i][k - 1])).sum()
    }

    /// Order of the isotropy group: gcd of the modes carrying energy above
    /// `rel_tol` times the largest mode amplitude. Zero loops report 0.
    pub fn isotropy(&self, rel_tol: f64) -> usize {
        let amps: Vec<f64> = (1..=self.modes).map(|k| self.mode_amplitude(k)).collect();
        let peak = amps.iter().cloned().fold(0.0, f64::max);
        if peak == 0.0 {
            return 0;
        }
        amps.iter()
            .enumerate()
            .filter(|(_, &a)| a > rel_tol * peak)
            .fold(0usize, |g, (k, _)| gcd(g, k + 1))
    }

    /// Rotates by the circle action so that mode `k` of the dominant
    /// component becomes a positive pure cosine. Loops with isotropy `Z_k`
    /// have a unique representative under this normalization.
    pub fn phase_normalized(&self, k: usize) -> Self {
        let i = if self.cos[0][k - 1].hypot(self.sin[0][k - 1]) >= self.cos[1][k - 1].hypot(self.sin[1][k - 1]) { 0 } else { 1 };
        let angle = self.sin[i][k - 1].atan2(self.cos[i][k - 1]);
        // mode k of act(x, phi) has angle (theta - k phi)
        self.act(angle / k as f64)
    }
}

pub(crate) fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Uniform collocation grid on `[0, 2π)` with cached trigonometric tables.
#[derive(Debug, Clone)]
pub struct SpectralGrid {
    modes: usize,
    points: usize,
    t: Vec<f64>,
    /// `cos[j * modes + (k-1)] = cos(k t_j)`
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl SpectralGrid {
    /// Grid with `4K+1` points, enough to project quadratic products of
    /// degree-`K` loops onto modes `≤ K` without aliasing.
    pub fn for_modes(modes: usize) -> Self {
        Self::new(modes, 4 * modes + 1)
    }

    pub fn new(modes: usize, points: usize) -> Self {
        assert!(points > 2 * modes, "grid must resolve every retained mode");
        let t: Vec<f64> = (0..points).map(|j| 2.0 * PI * j as f64 / points as f64).collect();
        let mut cos = Vec::with_capacity(points * modes);
        let mut sin = Vec::with_capacity(points * modes);
        for &tj in &t {
            for k in 1..=modes {
                let (s, c) = (k as f64 * tj).sin_cos();
                cos.push(c);
                sin.push(s);
            }
        }
        Self { modes, points, t, cos, sin }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn cos_at(&self, j: usize, k: usize) -> f64 {
        self.cos[j * self.modes + k - 1]
    }

    pub fn sin_at(&self, j: usize, k: usize) -> f64 {
        self.sin[j * self.modes + k - 1]
    }

    /// Grid values of one component. Modes above the grid truncation are ignored.
    pub fn synth_component(&self, x: &FourierLoop, component: usize) -> Vec<f64> {
        let kmax = self.modes.min(x.modes());
        let c = x.cos_slice(component);
        let s = x.sin_slice(component);
        (0..self.points)
            .map(|j| {
                let row = j * self.modes;
                (0..kmax).map(|k| c[k] * self.cos[row + k] + s[k] * self.sin[row + k]).sum()
            })
            .collect()
    }

    pub fn synth(&self, x: &FourierLoop) -> [Vec<f64>; 2] {
        [self.synth_component(x, 0), self.synth_component(x, 1)]
    }

    /// Discrete projection of grid values onto `(mean, cos_k, sin_k)`.
    pub fn project_component(&self, values: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        assert_eq!(values.len(), self.points);
        let m = self.points as f64;
        let mean = values.iter().sum::<f64>() / m;
        let mut c = vec![0.0; self.modes];
        let mut s = vec![0.0; self.modes];
        for (j, &v) in values.iter().enumerate() {
            let row = j * self.modes;
            for k in 0..self.modes {
                c[k] += v * self.cos[row + k];
                s[k] += v * self.sin[row + k];
            }
        }
        c.iter_mut().chain(s.iter_mut()).for_each(|v| *v *= 2.0 / m);
        (mean, c, s)
    }

    /// Projects both components; returns the means and the zero-mean loop.
    pub fn project(&self, values: &[Vec<f64>; 2]) -> ([f64; 2], FourierLoop) {
        let mut x = FourierLoop::zeros(self.modes);
        let mut means = [0.0; 2];
        for i in 0..2 {
            let (mean, c, s) = self.project_component(&values[i]);
            means[i] = mean;
            for k in 0..self.modes {
                x.set(i, k + 1, c[k], s[k]);
            }
        }
        (means, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_loop(modes: usize) -> impl Strategy<Value = FourierLoop> {
        proptest::collection::vec(-1.0f64..1.0, 4 * modes).prop_map(move |v| FourierLoop::from_slice(modes, &v))
    }

    #[test]
    fn act_identity_and_half_turn() {
        let x = FourierLoop::single_mode(4, 0, 1, 1.0, 0.0);
        assert_eq!(x.act(0.0), x);
        let y = x.act(PI);
        assert!((y.cos(0, 1) + 1.0).abs() < 1e-15 && y.sin(0, 1).abs() < 1e-15);
    }

    #[test]
    fn act_matches_time_shift() {
        let x = FourierLoop::from_slice(3, &[0.3, -0.2, 0.1, 0.5, 0.0, 0.2, -0.4, 0.1, 0.3, 0.0, 0.0, -0.7]);
        let phi = 0.83;
        let y = x.act(phi);
        for &t in &[0.0, 0.4, 2.1, 5.9] {
            let a = y.eval(t);
            let b = x.eval(t + phi);
            assert!((a[0] - b[0]).abs() < 1e-14 && (a[1] - b[1]).abs() < 1e-14);
        }
        let d = x.delayed(phi);
        let a = d.eval(1.0);
        let b = x.eval(1.0 - phi);
        assert!((a[0] - b[0]).abs() < 1e-14);
    }

    #[test]
    fn antiderivative_inverts_derivative() {
        let x = FourierLoop::from_slice(2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let y = x.derivative().antiderivative();
        assert!(x.sub(&y).max_abs_coeff() < 1e-14);
    }

    #[test]
    fn norm_of_cosine() {
        // ‖c cos kt‖² = π c² (1+k²)
        let x = FourierLoop::single_mode(5, 1, 3, 2.0, 0.0);
        assert!((x.norm_sq() - PI * 4.0 * 10.0).abs() < 1e-12);
    }

    #[test]
    fn grid_round_trip_and_product_projection() {
        let k = 6;
        let g = SpectralGrid::for_modes(k);
        let x = FourierLoop::from_slice(k, &(0..4 * k).map(|i| ((i * 7 % 11) as f64 - 5.0) / 10.0).collect::<Vec<_>>());
        let vals = g.synth(&x);
        let (means, y) = g.project(&vals);
        assert!(means[0].abs() < 1e-14 && means[1].abs() < 1e-14);
        assert!(x.sub(&y).max_abs_coeff() < 1e-13);
        // cos(t)·cos(t) = 1/2 + cos(2t)/2
        let c = FourierLoop::single_mode(k, 0, 1, 1.0, 0.0);
        let v = g.synth_component(&c, 0);
        let prod: Vec<f64> = v.iter().map(|a| a * a).collect();
        let (mean, cc, _) = g.project_component(&prod);
        assert!((mean - 0.5).abs() < 1e-14 && (cc[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn extrema_are_exact_and_shift_invariant() {
        let x = FourierLoop::from_slice(2, &[1.0, 0.0, 0.3, 0.1, 0.0, 0.5, 0.0, 0.0]);
        // oracle: very dense brute-force sampling
        let n = 2_000_000;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for q in 0..n {
            let v = x.eval(2.0 * PI * q as f64 / n as f64)[0];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let (a, b) = x.extrema(0);
        assert!((a - lo).abs() < 1e-10 && (b - hi).abs() < 1e-10);
        let (c, d) = x.act(0.777).extrema(0);
        assert!((a - c).abs() < 1e-14 && (b - d).abs() < 1e-14);
    }

    #[test]
    fn isotropy_and_phase_normalization() {
        let mut x = FourierLoop::zeros(8);
        x.set(0, 2, 0.3, 0.4);
        x.set(1, 6, 0.1, -0.1);
        assert_eq!(x.isotropy(1e-12), 2);
        let n = x.phase_normalized(2);
        assert!(n.sin(0, 2).abs() < 1e-14 && n.cos(0, 2) > 0.0);
        let m = x.act(1.234).phase_normalized(2);
        assert!(n.sub(&m).max_abs_coeff() < 1e-13);
        assert_eq!(FourierLoop::zeros(3).isotropy(1e-12), 0);
    }

    proptest! {
        #[test]
        fn act_is_isometry(x in arb_loop(6), phi in -10.0f64..10.0) {
            let y = x.act(phi);
            prop_assert!((y.norm() - x.norm()).abs() <= 1e-14 * x.norm().max(1.0));
        }
    }
}
