//! Closed-form ground truth for scoring learners: the optimal gain, the
//! value of an arbitrary Gaussian feedback policy, and the Riccati-type
//! coefficient functions of the optimal value.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{Model, ModelParams};

/// `|a|` below which the `a = 0` closed forms of `f`, `g` and `k1` are used.
pub const ZERO_RATE_BRANCH: f64 = 1e-8;

/// Number of trapezoid nodes used for `k3`.
pub const K3_NODES: usize = 1000;

/// Optimal feedback gain `-(Σ D_j D_jᵀ)⁻¹ (B + Σ C_j D_j)`.
pub fn phi_star(model: &Model) -> DVector<f64> {
    -(&model.derived.ddt_inv * (&model.params.b + &model.derived.cd))
}

/// Second-moment growth rate of the closed-loop state under gain `phi`:
/// `2A + 2Bᵀφ + Σ_j (C_j² + 2 C_j D_jᵀφ + D_jᵀφφᵀD_j)`.
pub fn a_of_phi(phi: &DVector<f64>, p: &ModelParams) -> f64 {
    let mut a = 2.0 * p.a + 2.0 * p.b.dot(phi);
    for (cj, dj) in p.c.iter().zip(&p.d) {
        let dphi = dj.dot(phi);
        a += cj * cj + 2.0 * cj * dphi + dphi * dphi;
    }
    a
}

/// `∫_0^T s^k e^{a s} ds` for `k = 0, 1, 2`.
fn exp_moment(a: f64, horizon: f64, k: u32) -> f64 {
    let at = a * horizon;
    if at.abs() <= 1.0 {
        // Power series in aT; 30 terms reach machine precision for |aT| <= 1.
        let mut term = horizon.powi(k as i32 + 1); // (aT)^n T^{k+1} / n!
        let mut sum = 0.0;
        for n in 0..30u32 {
            sum += term / f64::from(n + k + 1);
            term *= at / f64::from(n + 1);
        }
        return sum;
    }
    let e = at.exp();
    let m0 = at.exp_m1() / a;
    if k == 0 {
        return m0;
    }
    let m1 = horizon * e / a - m0 / a;
    if k == 1 {
        return m1;
    }
    horizon * horizon * e / a - 2.0 * m1 / a
}

/// Terminal-plus-running cost of a deterministic quadratic evolution,
/// `F(a) = Q ∫_0^T e^{as} ds + H e^{aT}`, so that `f(a) = -½ x0² F(a)`.
fn cost_growth(a: f64, p: &ModelParams) -> f64 {
    p.q * exp_moment(a, p.horizon, 0) + p.h * (a * p.horizon).exp()
}

/// Value of the zero-exploration policy as a function of the growth rate `a`.
pub fn f_of_a(a: f64, p: &ModelParams) -> f64 {
    if a.abs() < ZERO_RATE_BRANCH {
        return p.x0 * p.x0 * (-p.h - p.q * p.horizon) / 2.0;
    }
    // (1/2a)(Q - e^{aT}Q - H e^{aT} a) x0², arranged without cancellation.
    -0.5 * p.x0 * p.x0 * (p.q * (a * p.horizon).exp_m1() / a + p.h * (a * p.horizon).exp())
}

/// Sensitivity of the policy value to the injected exploration variance.
pub fn g_of_a(a: f64, p: &ModelParams) -> f64 {
    let t = p.horizon;
    if a.abs() < ZERO_RATE_BRANCH {
        return t * (-2.0 * p.h - p.q * t) / 4.0;
    }
    // (1/2a²)(QTa + Q + Ha - e^{aT}Q - He^{aT}a)
    //   = -(Q ∫_0^T (e^{as} - 1) ds + H (e^{aT} - 1)/a) / (2a)
    let e1 = (a * t).exp_m1();
    let running = if (a * t).abs() <= 1.0 {
        // ∫_0^T (e^{as} - 1) ds = Σ_{n>=1} a^n T^{n+1} / (n+1)!
        let mut term = t * (a * t) / 2.0;
        let mut sum = 0.0;
        for n in 1..30u32 {
            sum += term;
            term *= a * t / f64::from(n + 2);
        }
        sum / a
    } else {
        (e1 - a * t) / (a * a)
    };
    -(p.q * running + p.h * e1 / a) / 2.0
}

/// `Σ_j D_jᵀ Γ D_j`.
pub fn exploration_load(cov: &DMatrix<f64>, p: &ModelParams) -> f64 {
    p.d.iter().map(|dj| (dj.transpose() * cov * dj)[(0, 0)]).sum()
}

/// Expected (unregularized) reward of `N(φx, Γ)`: `f(a(φ)) + (Σ D_jᵀΓD_j) g(a(φ))`.
pub fn jbar(phi: &DVector<f64>, cov: &DMatrix<f64>, model: &Model) -> f64 {
    let p = &model.params;
    let a = a_of_phi(phi, p);
    let load = exploration_load(cov, p);
    if load == 0.0 {
        return f_of_a(a, p);
    }
    f_of_a(a, p) + load * g_of_a(a, p)
}

/// `f(a*) - f(a* + δ)` for `δ >= 0`, accurate when `δ` is tiny.
fn f_gap(a_star: f64, delta: f64, p: &ModelParams) -> f64 {
    let scale = 0.5 * p.x0 * p.x0;
    if delta * p.horizon <= 1e-4 {
        let t = p.horizon;
        let e = (a_star * t).exp();
        let d1 = p.q * exp_moment(a_star, t, 1) + p.h * t * e;
        let d2 = p.q * exp_moment(a_star, t, 2) + p.h * t * t * e;
        return scale * (d1 * delta + 0.5 * d2 * delta * delta);
    }
    let gap = scale * (cost_growth(a_star + delta, p) - cost_growth(a_star, p));
    gap.max(0.0)
}

/// `J̄(φ*, 0) - J̄(φ, Γ)`; non-negative for every gain and every PSD covariance.
pub fn instant_regret(phi: &DVector<f64>, cov: &DMatrix<f64>, model: &Model) -> f64 {
    let p = &model.params;
    let star = phi_star(model);
    let a_star = a_of_phi(&star, p);
    let diff = phi - &star;
    // a(φ) - a(φ*) = (φ - φ*)ᵀ ΣDDᵀ (φ - φ*) exactly.
    let delta = (diff.transpose() * &model.derived.ddt * &diff)[(0, 0)].max(0.0);
    let exploration = exploration_load(cov, p) * -g_of_a(a_star + delta, p);
    f_gap(a_star, delta, p) + exploration
}

/// Solution of `k1' = -a k1 - Q`, `k1(T) = H`, with `a = a(φ_ref)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct K1Solution {
    pub rate: f64,
    q: f64,
    h: f64,
    horizon: f64,
}

impl K1Solution {
    pub fn value(&self, t: f64) -> f64 {
        let s = self.horizon - t;
        if self.rate.abs() < ZERO_RATE_BRANCH {
            return self.h + self.q * s;
        }
        self.h * (self.rate * s).exp() + self.q * (self.rate * s).exp_m1() / self.rate
    }

    /// Time derivative of the closed form (not read off the ODE).
    pub fn derivative(&self, t: f64) -> f64 {
        let s = self.horizon - t;
        if self.rate.abs() < ZERO_RATE_BRANCH {
            return -self.q;
        }
        -(self.rate * self.h + self.q) * (self.rate * s).exp()
    }

    /// `∫_0^T k1(t) dt`.
    pub fn integral(&self) -> f64 {
        if self.rate.abs() < ZERO_RATE_BRANCH {
            return self.h * self.horizon + 0.5 * self.q * self.horizon * self.horizon;
        }
        let m0 = exp_moment(self.rate, self.horizon, 0);
        self.h * m0 + self.q * (m0 - self.horizon) / self.rate
    }
}

pub fn solve_k1(model: &Model, phi_ref: &DVector<f64>) -> K1Solution {
    let p = &model.params;
    K1Solution {
        rate: a_of_phi(phi_ref, p),
        q: p.q,
        h: p.h,
        horizon: p.horizon,
    }
}

/// `k3` tabulated on a uniform grid, linearly interpolated in between.
#[derive(Debug, Clone, PartialEq)]
pub struct K3Solution {
    horizon: f64,
    values: Vec<f64>,
}

impl K3Solution {
    pub fn value(&self, t: f64) -> f64 {
        let n = self.values.len() - 1;
        let pos = (t / self.horizon).clamp(0.0, 1.0) * n as f64;
        let i = (pos.floor() as usize).min(n - 1);
        let w = pos - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    pub fn nodes(&self) -> &[f64] {
        &self.values
    }
}

/// Integrates the `k3` equation backward from `k3(T) = 0` with the optimal
/// covariance `Σ(t) = (γ / k1(t)) (Σ D_j D_jᵀ)⁻¹`. Zero temperature gives `k3 ≡ 0`.
pub fn solve_k3(model: &Model, gamma: f64) -> K3Solution {
    let p = &model.params;
    let values = vec![0.0; K3_NODES + 1];
    if gamma <= 0.0 {
        return K3Solution {
            horizon: p.horizon,
            values,
        };
    }
    let k1 = solve_k1(model, &phi_star(model));
    let l = model.control_dim() as f64;
    let log_det_ddt = model.derived.ddt.determinant().ln();
    let log_2pi_e = (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
    // Σ_j D_jᵀ Σ D_j = γ l / k1, so the first term of k3' is the constant γ l / 2.
    let slope = |t: f64| {
        let log_det_sigma = l * (gamma / k1.value(t)).ln() - log_det_ddt;
        0.5 * gamma * l - 0.5 * gamma * (l * log_2pi_e + log_det_sigma)
    };
    let h = p.horizon / K3_NODES as f64;
    let mut values = values;
    for i in (0..K3_NODES).rev() {
        let (t0, t1) = (i as f64 * h, (i + 1) as f64 * h);
        values[i] = values[i + 1] - 0.5 * h * (slope(t0) + slope(t1));
    }
    K3Solution {
        horizon: p.horizon,
        values,
    }
}

/// The covariance `(c_γ / b_n)(Σ D_j D_jᵀ)⁻¹` that the adaptive variance tracks.
pub fn gamma_star_n(b_n: f64, c_gamma: f64, model: &Model) -> Result<DMatrix<f64>> {
    if !(c_gamma > model.derived.lambda_max_ddt) {
        return Err(Error::BadCGamma {
            c_gamma,
            lambda_max: model.derived.lambda_max_ddt,
        });
    }
    if !(b_n >= 1.0) {
        return Err(Error::Config(format!("b_n must be at least 1, got {b_n}")));
    }
    Ok(&model.derived.ddt_inv * (c_gamma / b_n))
}

/// Ground truth bundle for one model.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub phi_star: DVector<f64>,
    pub k1: K1Solution,
    pub a_star: f64,
    pub jbar_opt: f64,
}

impl OracleSolution {
    pub fn new(model: &Model) -> Self {
        let phi_star = phi_star(model);
        let l = model.control_dim();
        OracleSolution {
            k1: solve_k1(model, &phi_star),
            a_star: a_of_phi(&phi_star, &model.params),
            jbar_opt: jbar(&phi_star, &DMatrix::zeros(l, l), model),
            phi_star,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    fn m(x: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, x)
    }

    #[test]
    fn phi_star_examples() {
        assert_eq!(phi_star(&Model::unit())[0], -2.0);
        let zero = Model::new(ModelParams::scalar(1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(phi_star(&zero)[0], 0.0);
        let other = Model::new(ModelParams::scalar(1.0, 3.0, 1.0, 2.0, 1.0, 1.0, 1.0, 1.0)).unwrap();
        assert!((phi_star(&other)[0] + 1.25).abs() < 1e-15);
    }

    #[test]
    fn a_of_phi_examples() {
        let p = ModelParams::unit();
        assert_eq!(a_of_phi(&v(-2.0), &p), -1.0);
        assert_eq!(a_of_phi(&v(0.0), &p), 3.0);
        let q = ModelParams::scalar(0.7, 2.0, -1.5, 3.0, 1.0, 1.0, 1.0, 1.0);
        assert!((a_of_phi(&v(0.0), &q) - (1.4 + 2.25)).abs() < 1e-15);
    }

    #[test]
    fn f_and_g_examples() {
        let p = ModelParams::unit();
        assert_eq!(f_of_a(0.0, &p), -1.0);
        assert_eq!(g_of_a(0.0, &p), -0.75);
        assert!((f_of_a(-1.0, &p) + 0.5).abs() < 1e-15);
        assert!((g_of_a(-1.0, &p) + 0.5).abs() < 1e-15);
        let zero = ModelParams { q: 0.0, h: 0.0, ..ModelParams::unit() };
        for a in [-3.0, -1e-9, 0.0, 0.5, 4.0] {
            assert_eq!(f_of_a(a, &zero), 0.0);
            assert_eq!(g_of_a(a, &zero), 0.0);
        }
    }

    /// The literal piecewise expressions, used only as a cross-check away from a = 0.
    fn f_literal(a: f64, p: &ModelParams) -> f64 {
        let e = (a * p.horizon).exp();
        (p.q - e * p.q - p.h * e * a) * p.x0 * p.x0 / (2.0 * a)
    }

    fn g_literal(a: f64, p: &ModelParams) -> f64 {
        let e = (a * p.horizon).exp();
        let t = p.horizon;
        (p.q * t * a + p.q + p.h * a - e * p.q - p.h * e * a) / (2.0 * a * a)
    }

    #[test]
    fn stable_forms_match_literal_expressions() {
        let p = ModelParams::scalar(0.3, 1.0, 0.4, 1.2, 0.8, 1.7, -1.3, 2.0);
        for &a in &[-7.0, -2.0, -0.6, -0.1, 0.05, 0.3, 0.9, 3.0] {
            let (f, g) = (f_of_a(a, &p), g_of_a(a, &p));
            assert!((f - f_literal(a, &p)).abs() < 1e-12 * f.abs().max(1.0), "f at {a}");
            assert!((g - g_literal(a, &p)).abs() < 1e-10 * g.abs().max(1.0), "g at {a}");
        }
    }

    #[test]
    fn branch_continuity() {
        let p = ModelParams::unit();
        for eps in [1e-8, -1e-8, 1.0001e-8, -1.0001e-8] {
            assert!((f_of_a(eps, &p) - f_of_a(0.0, &p)).abs() < 1e-6);
            assert!((g_of_a(eps, &p) - g_of_a(0.0, &p)).abs() < 1e-6);
        }
    }

    #[test]
    fn f_and_g_non_increasing() {
        let p = ModelParams::scalar(1.0, 1.0, 1.0, 1.0, 0.6, 1.4, 0.9, 1.3);
        let grid: Vec<f64> = (0..=2000).map(|i| -5.0 + i as f64 * 0.005).collect();
        for w in grid.windows(2) {
            let df = (f_of_a(w[1], &p) - f_of_a(w[0], &p)) / (w[1] - w[0]);
            let dg = (g_of_a(w[1], &p) - g_of_a(w[0], &p)) / (w[1] - w[0]);
            assert!(df <= 1e-10, "f slope {df} at {}", w[0]);
            assert!(dg <= 1e-10, "g slope {dg} at {}", w[0]);
        }
    }

    #[test]
    fn jbar_and_regret_examples() {
        let model = Model::unit();
        assert!((jbar(&v(-2.0), &m(0.0), &model) + 0.5).abs() < 1e-15);
        assert!((jbar(&v(-2.0), &m(0.1), &model) + 0.55).abs() < 1e-15);
        assert_eq!(instant_regret(&v(-2.0), &m(0.0), &model), 0.0);
        assert!((instant_regret(&v(-2.0), &m(0.1), &model) - 0.05).abs() < 1e-15);
        let zero = Model::new(ModelParams { q: 0.0, h: 0.0, ..ModelParams::unit() }).unwrap();
        assert_eq!(jbar(&v(0.7), &m(0.0), &zero), 0.0);
    }

    #[test]
    fn regret_gap_matches_direct_difference_away_from_optimum() {
        let model = Model::unit();
        for phi in [-2.3, -2.05, -1.9, -1.1, 0.0] {
            let direct = jbar(&v(-2.0), &m(0.0), &model) - jbar(&v(phi), &m(0.2), &model);
            let r = instant_regret(&v(phi), &m(0.2), &model);
            assert!((r - direct).abs() < 1e-12, "{phi}: {r} vs {direct}");
        }
    }

    #[test]
    fn regret_is_positive_just_off_optimum() {
        let model = Model::unit();
        for eps in [2e-8, -2e-8, 1e-6, 1e-3] {
            assert!(instant_regret(&v(-2.0 + eps), &m(0.0), &model) > 0.0);
        }
    }

    #[test]
    fn k1_examples_and_residual() {
        let model = Model::unit();
        let k1 = solve_k1(&model, &v(-2.0));
        for i in 0..1000 {
            let t = i as f64 / 999.0;
            assert!((k1.value(t) - 1.0).abs() < 1e-14);
            let residual = k1.derivative(t) + k1.rate * k1.value(t) + 1.0;
            assert!(residual.abs() < 1e-8);
        }
        // a = 0: A = C = 0 with zero gain.
        let flat = Model::new(ModelParams::scalar(0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0)).unwrap();
        let k1 = solve_k1(&flat, &v(0.0));
        assert_eq!(k1.rate, 0.0);
        assert_eq!(k1.value(0.0), 2.0);
        // Q = 0: homogeneous solution.
        let hom = Model::new(ModelParams { q: 0.0, ..ModelParams::unit() }).unwrap();
        let k1 = solve_k1(&hom, &v(0.0));
        assert!((k1.value(0.25) - (3.0f64 * 0.75).exp()).abs() < 1e-12);
    }

    #[test]
    fn k1_residual_by_finite_differences() {
        let model = Model::new(ModelParams::scalar(0.4, -1.0, 0.5, 1.5, 2.0, 0.3, 1.0, 1.5)).unwrap();
        let phi = v(-0.8);
        let k1 = solve_k1(&model, &phi);
        let h = 1e-5;
        for i in 1..100 {
            let t = 1.5 * i as f64 / 100.0;
            let fd = (k1.value(t + h) - k1.value(t - h)) / (2.0 * h);
            assert!((fd + k1.rate * k1.value(t) + 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn k1_integral_matches_quadrature() {
        let model = Model::new(ModelParams::scalar(0.4, -1.0, 0.5, 1.5, 2.0, 0.3, 1.0, 1.5)).unwrap();
        for phi in [-3.0, -0.8, 0.0, 1.0] {
            let k1 = solve_k1(&model, &v(phi));
            let n = 200_000;
            let h = 1.5 / n as f64;
            let quad: f64 = (0..n)
                .map(|i| 0.5 * h * (k1.value(i as f64 * h) + k1.value((i + 1) as f64 * h)))
                .sum();
            assert!((quad - k1.integral()).abs() < 1e-7 * k1.integral().abs().max(1.0));
        }
    }

    #[test]
    fn k3_boundary_and_zero_temperature() {
        let model = Model::unit();
        let k3 = solve_k3(&model, 0.0);
        assert!(k3.nodes().iter().all(|&x| x == 0.0));
        let k3 = solve_k3(&model, 1.0);
        assert_eq!(k3.value(1.0), 0.0);
        // k1 ≡ 1 makes k3' constant: γ/2 - (γ/2) log(2πe).
        let slope = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert!((k3.value(0.0) + slope).abs() < 1e-12);
        assert!((k3.value(0.4) + 0.6 * slope).abs() < 1e-12);
    }

    #[test]
    fn gamma_star_examples() {
        let model = Model::unit();
        assert_eq!(gamma_star_n(4.0, 2.0, &model).unwrap()[(0, 0)], 0.5);
        assert!(gamma_star_n(1e12, 2.0, &model).unwrap()[(0, 0)] < 1e-11);
        assert!(matches!(gamma_star_n(4.0, 0.5, &model), Err(Error::BadCGamma { .. })));
        let g = gamma_star_n(3.0, 2.0, &model).unwrap();
        assert!(g[(0, 0)] - 1.0 / 3.0 > 0.0);
    }

    #[test]
    fn oracle_bundle() {
        let o = OracleSolution::new(&Model::unit());
        assert_eq!(o.phi_star[0], -2.0);
        assert_eq!(o.a_star, -1.0);
        assert!((o.jbar_opt + 0.5).abs() < 1e-15);
        assert!((o.k1.value(0.5) - 1.0).abs() < 1e-15);
    }
}
