//! System parameters, equilibrium, hypothesis checks and diagonalization of
//! the scaled interaction matrix `diag(b)·A`.

use nalgebra::{Matrix2, Vector2};
use thiserror::Error;

pub type Mat2 = Matrix2<f64>;
pub type Vec2 = Vector2<f64>;

/// Relative tolerance under which two eigenvalues of `diag(b)·A` count as equal.
pub const MU_DISTINCT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("interaction matrix is singular (det = {det:e})")]
    SingularMatrix { det: f64 },
    #[error("diag(b)·A has repeated eigenvalue mu = {mu}; no winding-number split is possible")]
    DegenerateEigenvalues { mu: f64 },
    #[error("diag(b)·A has complex eigenvalues (discriminant {discriminant:e})")]
    ComplexEigenvalues { discriminant: f64 },
    #[error("delay must be finite and nonnegative, got {0}")]
    InvalidDelay(f64),
    #[error("non-finite parameter in system definition")]
    NonFinite,
}

/// Solves `A·b = r` for the coexistence equilibrium.
pub fn equilibrium(a: &Mat2, r: &Vec2) -> Result<Vec2, ModelError> {
    let det = a.determinant();
    let scale = a.norm_squared();
    if !(det.abs() > 1e-14 * scale) {
        return Err(ModelError::SingularMatrix { det });
    }
    let inv = Mat2::new(a[(1, 1)], -a[(0, 1)], -a[(1, 0)], a[(0, 0)]) / det;
    let mut b = inv * r;
    // one step of iterative refinement keeps the residual at rounding level
    let resid = r - a * b;
    b += inv * resid;
    Ok(b)
}

/// Real eigenvalues of a 2×2 matrix from its trace and determinant.
///
/// Returns `None` when the discriminant is negative beyond `-1e-12·trace²`;
/// slightly negative values inside that band are clamped to a double root.
fn real_eigenvalues(m: &Mat2) -> Option<(f64, f64, f64)> {
    let tr = m.trace();
    let det = m.determinant();
    let disc = tr * tr - 4.0 * det;
    if disc < -1e-12 * tr * tr {
        return None;
    }
    let sq = disc.max(0.0).sqrt();
    // avoid cancellation in the smaller root
    let big = if tr >= 0.0 { 0.5 * (tr + sq) } else { 0.5 * (tr - sq) };
    let small = if big != 0.0 { det / big } else { 0.5 * (tr - sq) };
    let (lo, hi) = if big < small { (big, small) } else { (small, big) };
    Some((lo, hi, disc))
}

fn scaled_matrix(a: &Mat2, b: &Vec2) -> Mat2 {
    Mat2::from_diagonal(b) * a
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub a0_pass: bool,
    pub a1_pass: bool,
    pub a2_pass: bool,
    /// Smallest eigenvalue of the symmetric part `(A+Aᵀ)/2`.
    pub min_sym_eig: f64,
    pub mu_distinct: bool,
    pub equilibrium: Option<Vec2>,
    /// Eigenvalues of `diag(b)·A` in ascending order when they are real.
    pub mu: Option<[f64; 2]>,
    pub messages: Vec<String>,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.a0_pass && self.a1_pass && self.a2_pass
    }
}

/// Evaluates (A0), (A1) and (A2) independently.
pub fn check_hypotheses(a: &Mat2, r: &Vec2) -> HypothesisReport {
    let mut messages = Vec::new();

    let sym = (a + a.transpose()) * 0.5;
    let min_sym_eig = real_eigenvalues(&sym).map(|(lo, _, _)| lo).unwrap_or(f64::NAN);
    let a1_pass = min_sym_eig > 0.0;
    if !a1_pass {
        messages.push(format!(
            "(A1) fails: <Ax,x> is not positive definite, smallest eigenvalue of (A+A^T)/2 is {min_sym_eig}"
        ));
    }

    let (a0_pass, b) = match equilibrium(a, r) {
        Ok(b) => {
            let entries_ok = a.iter().all(|&v| v > 0.0);
            let b_ok = b.iter().all(|&v| v > 0.0);
            if !entries_ok {
                messages.push("(A0) fails: some interaction rate a_ij is not positive".to_string());
            }
            if !b_ok {
                messages.push(format!(
                    "(A0) fails: equilibrium b = ({}, {}) is not positive",
                    b[0], b[1]
                ));
            }
            (entries_ok && b_ok, Some(b))
        }
        Err(e) => {
            messages.push(format!("(A0) fails: {e}"));
            (false, None)
        }
    };

    let mut a2_pass = false;
    let mut mu = None;
    let mut mu_distinct = false;
    if let Some(b) = b {
        let m = scaled_matrix(a, &b);
        match real_eigenvalues(&m) {
            Some((lo, hi, disc)) => {
                mu = Some([lo, hi]);
                a2_pass = lo > 0.0;
                if !a2_pass {
                    messages.push(format!("(A2) fails: eigenvalue {lo} of diag(b)A is not positive"));
                }
                if disc < 0.0 {
                    messages.push(format!(
                        "(A2): discriminant {disc:e} is negative within tolerance; treated as a repeated root"
                    ));
                }
                mu_distinct = (hi - lo).abs() > MU_DISTINCT_TOL * hi.abs().max(lo.abs());
                if !mu_distinct {
                    messages.push(
                        "mu_1 = mu_2: winding numbers always coincide, the existence criterion cannot apply"
                            .to_string(),
                    );
                }
            }
            None => {
                messages.push("(A2) fails: diag(b)A has complex eigenvalues".to_string());
            }
        }
    } else {
        messages.push("(A2) not evaluated: no equilibrium".to_string());
    }

    HypothesisReport { a0_pass, a1_pass, a2_pass, min_sym_eig, mu_distinct, equilibrium: b, mu, messages }
}

/// Left-eigenvector row of `m` for eigenvalue `mu`, unit length, first
/// significant component positive.
fn left_eigenvector(m: &Mat2, mu: f64) -> Vec2 {
    let c1 = Vec2::new(m[(1, 0)], mu - m[(0, 0)]);
    let c2 = Vec2::new(mu - m[(1, 1)], m[(0, 1)]);
    let mut v = if c1.norm() >= c2.norm() { c1 } else { c2 };
    v /= v.norm();
    let lead = if v[0].abs() > 1e-12 { v[0] } else { v[1] };
    if lead < 0.0 {
        v = -v;
    }
    v
}

/// Returns `(mu, P)` with `P·diag(b)·A·P⁻¹ = diag(mu)`, `mu` ascending and the
/// rows of `P` normalized.
pub fn diagonalize(a: &Mat2, b: &Vec2) -> Result<([f64; 2], Mat2), ModelError> {
    let m = scaled_matrix(a, b);
    let (lo, hi, disc) =
        real_eigenvalues(&m).ok_or(ModelError::ComplexEigenvalues { discriminant: m.trace().powi(2) - 4.0 * m.determinant() })?;
    let _ = disc;
    if (hi - lo).abs() <= MU_DISTINCT_TOL * hi.abs().max(lo.abs()) {
        return Err(ModelError::DegenerateEigenvalues { mu: 0.5 * (lo + hi) });
    }
    let r1 = left_eigenvector(&m, lo);
    let r2 = left_eigenvector(&m, hi);
    let p = Mat2::new(r1[0], r1[1], r2[0], r2[1]);
    Ok(([lo, hi], p))
}

/// Delayed Lotka–Volterra system with its derived spectral data.
#[derive(Debug, Clone, PartialEq)]
pub struct LVSystem {
    pub a: Mat2,
    pub r: Vec2,
    pub tau: f64,
    pub b: Vec2,
    pub p: Mat2,
    pub p_inv: Mat2,
    /// Eigenvalues of `diag(b)·A`, ascending; `mu[i]` belongs to row `i` of `p`.
    pub mu: [f64; 2],
}

impl LVSystem {
    pub fn new(a: Mat2, r: Vec2, tau: f64) -> Result<Self, ModelError> {
        if a.iter().chain(r.iter()).any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(ModelError::InvalidDelay(tau));
        }
        let b = equilibrium(&a, &r)?;
        let (mu, p) = diagonalize(&a, &b)?;
        let p_inv = p.try_inverse().ok_or(ModelError::DegenerateEigenvalues { mu: mu[0] })?;
        Ok(Self { a, r, tau, b, p, p_inv, mu })
    }

    /// Convenience constructor from row-major entries.
    pub fn from_entries(a11: f64, a12: f64, a21: f64, a22: f64, r1: f64, r2: f64, tau: f64) -> Result<Self, ModelError> {
        Self::new(Mat2::new(a11, a12, a21, a22), Vec2::new(r1, r2), tau)
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self, ModelError> {
        Self::new(self.a, self.r, tau)
    }

    pub fn hypotheses(&self) -> HypothesisReport {
        check_hypotheses(&self.a, &self.r)
    }

    pub fn scaled_matrix(&self) -> Mat2 {
        scaled_matrix(&self.a, &self.b)
    }

    /// `‖P·diag(b)·A·P⁻¹ − diag(mu)‖∞`.
    pub fn diagonalization_residual(&self) -> f64 {
        let d = self.p * self.scaled_matrix() * self.p_inv - Mat2::from_diagonal(&Vec2::new(self.mu[0], self.mu[1]));
        d.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// Column `i` of `P⁻¹`: the physical direction of diagonal mode `i`.
    pub fn eigendirection(&self, i: usize) -> Vec2 {
        self.p_inv.column(i).into_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn equilibrium_examples() {
        let b = equilibrium(&Mat2::identity(), &Vec2::new(1.0, 1.0)).unwrap();
        assert_eq!(b, Vec2::new(1.0, 1.0));
        let b = equilibrium(&Mat2::new(2.0, 1.0, 1.0, 2.0), &Vec2::new(3.0, 3.0)).unwrap();
        assert!((b - Vec2::new(1.0, 1.0)).amax() < 1e-15);
        let b = equilibrium(&Mat2::new(1.0, 2.0, 2.0, 1.0), &Vec2::new(3.0, 3.0)).unwrap();
        assert!((b - Vec2::new(1.0, 1.0)).amax() < 1e-15);
    }

    #[test]
    fn singular_matrix_rejected() {
        let err = equilibrium(&Mat2::new(1.0, 2.0, 2.0, 4.0), &Vec2::new(1.0, 1.0)).unwrap_err();
        assert!(matches!(err, ModelError::SingularMatrix { .. }));
        let rep = check_hypotheses(&Mat2::new(1.0, 2.0, 2.0, 4.0), &Vec2::new(1.0, 1.0));
        assert!(!rep.a0_pass && !rep.a2_pass);
        assert!(rep.messages.iter().any(|m| m.contains("(A0)")));
    }

    #[test]
    fn hypotheses_running_example() {
        let rep = check_hypotheses(&Mat2::new(2.0, 1.0, 1.0, 2.0), &Vec2::new(3.0, 3.0));
        assert!(rep.all_pass());
        assert!((rep.min_sym_eig - 1.0).abs() < 1e-14);
        let mu = rep.mu.unwrap();
        assert!((mu[0] - 1.0).abs() < 1e-14 && (mu[1] - 3.0).abs() < 1e-14);
        assert!(rep.mu_distinct);
    }

    #[test]
    fn hypotheses_a1_violation() {
        let rep = check_hypotheses(&Mat2::new(1.0, 3.0, 3.0, 1.0), &Vec2::new(4.0, 4.0));
        assert!(!rep.a1_pass);
        assert!((rep.min_sym_eig + 2.0).abs() < 1e-14);
        assert!(rep.messages.iter().any(|m| m.contains("(A1)")));
    }

    #[test]
    fn hypotheses_identity_not_distinct() {
        // zero off-diagonal rates violate the strict positivity in (A0)
        let rep = check_hypotheses(&Mat2::identity(), &Vec2::new(1.0, 1.0));
        assert!(!rep.a0_pass && rep.a1_pass && rep.a2_pass);
        assert!(!rep.mu_distinct);
        assert_eq!(rep.mu, Some([1.0, 1.0]));
    }

    #[test]
    fn diagonalize_examples() {
        let err = diagonalize(&Mat2::identity(), &Vec2::new(1.0, 1.0)).unwrap_err();
        assert!(matches!(err, ModelError::DegenerateEigenvalues { .. }));

        let (mu, p) = diagonalize(&Mat2::new(2.0, 1.0, 1.0, 2.0), &Vec2::new(1.0, 1.0)).unwrap();
        assert!((mu[0] - 1.0).abs() < 1e-14 && (mu[1] - 3.0).abs() < 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // row for mu=1 is (1,-1)/sqrt2, row for mu=3 is (1,1)/sqrt2
        assert!((p[(0, 0)] - s).abs() < 1e-14 && (p[(0, 1)] + s).abs() < 1e-14);
        assert!((p[(1, 0)] - s).abs() < 1e-14 && (p[(1, 1)] - s).abs() < 1e-14);

        let a = Mat2::new(2.0, 1.0, 4.0, 5.0);
        let b = Vec2::new(1.0, 1.0);
        let (mu, p) = diagonalize(&a, &b).unwrap();
        assert!((mu[0] - 1.0).abs() < 1e-13 && (mu[1] - 6.0).abs() < 1e-13);
        let d = p * a * p.try_inverse().unwrap();
        assert!(d[(0, 1)].abs() < 1e-12 && d[(1, 0)].abs() < 1e-12);
    }

    #[test]
    fn complex_eigenvalues_rejected() {
        // diag(b)A = [[1,-2],[2,1]]·... use a rotation-like matrix with b=(1,1)
        let a = Mat2::new(1.0, -2.0, 2.0, 1.0);
        let err = diagonalize(&a, &Vec2::new(1.0, 1.0)).unwrap_err();
        assert!(matches!(err, ModelError::ComplexEigenvalues { .. }));
    }

    #[test]
    fn system_construction_running_example() {
        let sys = LVSystem::from_entries(2.0, 1.0, 1.0, 2.0, 3.0, 3.0, 3.0).unwrap();
        assert!(sys.diagonalization_residual() < 1e-12);
        assert!((sys.a * sys.b - sys.r).amax() < 1e-12);
        let d = sys.eigendirection(1);
        assert!((d[0] - d[1]).abs() < 1e-14);
    }

    fn pd_matrix() -> impl Strategy<Value = (Mat2, Vec2)> {
        (0.1f64..3.0, 0.1f64..3.0, 0.05f64..2.0, 0.05f64..2.0, 0.1f64..3.0, 0.1f64..3.0).prop_map(
            |(d1, d2, o1, o2, r1, r2)| (Mat2::new(d1 + o1, o1, o2, d2 + o2), Vec2::new(r1, r2)),
        )
    }

    proptest! {
        #[test]
        fn a1_agrees_with_quadratic_form((a, r) in pd_matrix(), seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let rep = check_hypotheses(&a, &r);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut all_positive = true;
            for _ in 0..1000 {
                let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let x = Vec2::new(th.cos(), th.sin());
                if x.dot(&(a * x)) <= 0.0 { all_positive = false; }
            }
            // sampling can only miss a negative direction, never invent one
            if all_positive { prop_assert!(rep.a1_pass || rep.min_sym_eig.abs() < 1e-3); }
            else { prop_assert!(!rep.a1_pass); }
        }

        #[test]
        fn equilibrium_residual_small(a11 in -3.0f64..3.0, a12 in -3.0f64..3.0, a21 in -3.0f64..3.0, a22 in -3.0f64..3.0,
                                      r1 in -5.0f64..5.0, r2 in -5.0f64..5.0) {
            let a = Mat2::new(a11, a12, a21, a22);
            let r = Vec2::new(r1, r2);
            prop_assume!(a.determinant().abs() > 1e-3);
            let b = equilibrium(&a, &r).unwrap();
            prop_assert!((a * b - r).amax() <= 1e-12 * r.amax().max(1e-300) + 1e-300);
        }

        #[test]
        fn diagonalize_residual_small((a, r) in pd_matrix()) {
            if let Ok(sys) = LVSystem::new(a, r, 1.0) {
                prop_assert!(sys.diagonalization_residual() < 1e-10);
            }
        }
    }
}
