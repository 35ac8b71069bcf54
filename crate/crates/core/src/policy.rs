//! Gaussian actor, parameterized critic, and the projection sets used by the
//! stochastic-approximation updates.

use std::f64::consts::{E, PI};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{CriticState, PolicyParams};

/// Smallest eigenvalue kept by covariance projections so sampling stays defined.
pub const GAMMA_FLOOR: f64 = 1e-6;

/// Functional form of the critic `J(t, x) = -½ k1(t; θ) x² + k3(t; θ, γ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticKind {
    /// `k1 ≡ 1`, `k3 ≡ 0`; nothing to learn.
    ConstantOracleFree,
    /// `k1 = clamp(exp θ₁, 1/c2, c2)`, `k3 = θ₂`.
    LearnedConstant,
}

/// Critic form together with its bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticParameterization {
    pub kind: CriticKind,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Radius of the ball holding `θ`; infinite means unconstrained.
    pub c_theta: f64,
    /// Bound on `|γ|`; infinite means unconstrained.
    pub c_gamma_cap: f64,
}

impl Default for CriticParameterization {
    fn default() -> Self {
        CriticParameterization {
            kind: CriticKind::ConstantOracleFree,
            c1: 1.0,
            c2: 10.0,
            c3: 1.0,
            c_theta: f64::INFINITY,
            c_gamma_cap: f64::INFINITY,
        }
    }
}

impl CriticParameterization {
    pub fn constant() -> Self {
        Self::default()
    }

    pub fn learned(c2: f64) -> Self {
        CriticParameterization {
            kind: CriticKind::LearnedConstant,
            c2,
            ..Self::default()
        }
    }

    /// Length of `θ` for this form.
    pub fn theta_dim(&self) -> usize {
        match self.kind {
            CriticKind::ConstantOracleFree => 0,
            CriticKind::LearnedConstant => 2,
        }
    }

    pub fn initial_theta(&self) -> DVector<f64> {
        DVector::zeros(self.theta_dim())
    }

    pub fn k1(&self, _t: f64, theta: &DVector<f64>) -> f64 {
        match self.kind {
            CriticKind::ConstantOracleFree => 1.0,
            CriticKind::LearnedConstant => theta[0].exp().clamp(1.0 / self.c2, self.c2),
        }
    }

    pub fn k3(&self, _t: f64, theta: &DVector<f64>, _gamma: f64) -> f64 {
        match self.kind {
            CriticKind::ConstantOracleFree => 0.0,
            CriticKind::LearnedConstant => theta[1],
        }
    }

    pub fn value(&self, t: f64, x: f64, cs: &CriticState) -> f64 {
        -0.5 * self.k1(t, &cs.theta) * x * x + self.k3(t, &cs.theta, cs.temperature)
    }

    /// `∂J/∂θ` at `(t, x)`, written into `out` (length [`Self::theta_dim`]).
    pub fn grad_theta_into(&self, _t: f64, x: f64, theta: &DVector<f64>, out: &mut [f64]) {
        match self.kind {
            CriticKind::ConstantOracleFree => {}
            CriticKind::LearnedConstant => {
                let raw = theta[0].exp();
                let inside = raw > 1.0 / self.c2 && raw < self.c2;
                out[0] = if inside { -0.5 * raw * x * x } else { 0.0 };
                out[1] = 1.0;
            }
        }
    }

    pub fn grad_theta(&self, t: f64, x: f64, theta: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.theta_dim());
        self.grad_theta_into(t, x, theta, out.as_mut_slice());
        out
    }
}

/// `J(t, x; θ, γ)`.
pub fn value(t: f64, x: f64, cs: &CriticState, par: &CriticParameterization) -> f64 {
    par.value(t, x, cs)
}

fn cholesky(cov: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let chol = cov.clone().cholesky().ok_or(Error::CholeskyFail)?;
    if chol.l_dirty().iter().any(|v| !v.is_finite()) {
        return Err(Error::CholeskyFail);
    }
    Ok(chol)
}

fn log_det(chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>) -> f64 {
    let l = chol.l_dirty();
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

/// Differential entropy `½ log((2πe)^l det Γ)`.
pub fn entropy(cov: &DMatrix<f64>) -> Result<f64> {
    let chol = cholesky(cov)?;
    let l = cov.nrows() as f64;
    Ok(0.5 * (l * (2.0 * PI * E).ln() + log_det(&chol)))
}

/// `log π(u | x)` under `N(φx, Γ)`.
pub fn log_density(u: &DVector<f64>, x: f64, pol: &PolicyParams) -> Result<f64> {
    let chol = cholesky(&pol.cov)?;
    let z = u - &pol.phi * x;
    let w = chol.solve(&z);
    let l = pol.control_dim() as f64;
    Ok(-0.5 * (l * (2.0 * PI).ln() + log_det(&chol) + z.dot(&w)))
}

/// `∂ log π / ∂φ = Γ⁻¹(u - φx) x`.
pub fn score_phi(u: &DVector<f64>, x: f64, pol: &PolicyParams) -> Result<DVector<f64>> {
    let chol = cholesky(&pol.cov)?;
    let z = u - &pol.phi * x;
    Ok(chol.solve(&z) * x)
}

/// `∂ log π / ∂Γ⁻¹ = ½Γ - ½(u - φx)(u - φx)ᵀ`.
pub fn score_gamma_inv(u: &DVector<f64>, x: f64, pol: &PolicyParams) -> DMatrix<f64> {
    let z = u - &pol.phi * x;
    (&pol.cov - &z * z.transpose()) * 0.5
}

/// `∂p / ∂Γ⁻¹ = -½Γ` for the Gaussian entropy `p`.
pub fn entropy_grad_gamma_inv(cov: &DMatrix<f64>) -> DMatrix<f64> {
    cov * -0.5
}

/// Euclidean projection onto the closed ball of the given radius.
pub fn project_ball(v: &DVector<f64>, radius: f64) -> DVector<f64> {
    let norm = v.norm();
    if norm <= radius {
        v.clone()
    } else {
        v * (radius / norm)
    }
}

/// Coordinate-wise projection onto a box.
pub fn project_box(v: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        v.len(),
        v.iter().zip(lo.iter().zip(hi.iter())).map(|(x, (l, h))| x.clamp(*l, *h)),
    )
}

/// Projection of a symmetric matrix onto an eigenvalue band.
///
/// Without `interval` the eigenvalues are raised to at least `lower` and then
/// capped so that the Frobenius norm does not exceed `cap`. With `interval =
/// (lo, hi)` they are clamped to `[max(lo, GAMMA_FLOOR), hi]` and `lower`, `cap`
/// are ignored.
pub fn project_gamma(g: &DMatrix<f64>, lower: f64, cap: f64, interval: Option<(f64, f64)>) -> DMatrix<f64> {
    let sym = (g + g.transpose()) * 0.5;
    let l = sym.nrows();
    if l == 1 {
        let v = sym[(0, 0)];
        return DMatrix::from_element(1, 1, clamp_spectrum(&[v], lower, cap, interval)[0]);
    }
    let eig = sym.symmetric_eigen();
    let clamped = clamp_spectrum(eig.eigenvalues.as_slice(), lower, cap, interval);
    let q = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&DVector::from_vec(clamped));
    let out = q * d * q.transpose();
    (&out + out.transpose()) * 0.5
}

fn clamp_spectrum(vals: &[f64], lower: f64, cap: f64, interval: Option<(f64, f64)>) -> Vec<f64> {
    if let Some((lo, hi)) = interval {
        let lo = lo.max(GAMMA_FLOOR);
        return vals.iter().map(|v| v.clamp(lo, hi.max(lo))).collect();
    }
    let lower = lower.max(GAMMA_FLOOR);
    let raised: Vec<f64> = vals.iter().map(|v| v.max(lower)).collect();
    let norm = raised.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= cap || !cap.is_finite() {
        return raised;
    }
    if (raised.len() as f64).sqrt() * lower >= cap {
        return vec![lower; raised.len()];
    }
    // Cap the top of the spectrum at the level where the norm equals `cap`.
    let capped_norm = |tau: f64| raised.iter().map(|v| v.min(tau).powi(2)).sum::<f64>().sqrt();
    let (mut lo, mut hi) = (lower, raised.iter().cloned().fold(lower, f64::max));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if capped_norm(mid) > cap {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    raised.iter().map(|v| v.min(lo)).collect()
}

/// A policy with `Γ` factored and inverted once, for repeated score evaluation.
#[derive(Debug, Clone)]
pub struct PreparedPolicy {
    pub params: PolicyParams,
    pub cov_inv: DMatrix<f64>,
    pub entropy: f64,
}

impl PreparedPolicy {
    pub fn new(params: PolicyParams) -> Result<Self> {
        let chol = cholesky(&params.cov)?;
        let l = params.control_dim() as f64;
        let entropy = 0.5 * (l * (2.0 * PI * E).ln() + log_det(&chol));
        let cov_inv = chol.inverse();
        Ok(PreparedPolicy {
            params,
            cov_inv,
            entropy,
        })
    }
}
