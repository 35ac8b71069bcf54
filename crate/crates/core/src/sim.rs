//! Euler–Maruyama episodes of the controlled state under a sampled Gaussian
//! policy, one action per grid point held over the step.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{Model, ModelParams, PolicyParams};

/// Seeded random source for one run. Identical seeds give identical draws.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
    draws: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            draws: 0,
        }
    }

    /// A stream for auxiliary draws (initial conditions and the like) that never
    /// overlaps the episode-noise stream of the same seed.
    pub fn auxiliary(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2);
        RngStream { seed, rng, draws: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of variates handed out so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.draws += 1;
        self.rng.sample(StandardNormal)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.draws += 1;
        self.rng.random_range(lo..hi)
    }
}

/// One simulated episode. Actions are stored row-major, `l` entries per step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    actions: Vec<f64>,
    control_dim: usize,
}

impl Trajectory {
    pub fn with_capacity(control_dim: usize, steps: usize) -> Self {
        Trajectory {
            dt: 0.0,
            times: Vec::with_capacity(steps + 1),
            states: Vec::with_capacity(steps + 1),
            actions: Vec::with_capacity(steps * control_dim),
            control_dim,
        }
    }

    /// Builds a trajectory from recorded data, e.g. for estimator tests.
    pub fn from_parts(dt: f64, states: Vec<f64>, actions: Vec<f64>, control_dim: usize) -> Result<Self> {
        let steps = states.len().saturating_sub(1);
        if states.is_empty() || actions.len() != steps * control_dim {
            return Err(Error::DimensionMismatch(format!(
                "{} states and {} action entries for control dimension {control_dim}",
                states.len(),
                actions.len()
            )));
        }
        Ok(Trajectory {
            dt,
            times: (0..=steps).map(|k| k as f64 * dt).collect(),
            states,
            actions,
            control_dim,
        })
    }

    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn control_dim(&self) -> usize {
        self.control_dim
    }

    /// Action applied on `[t_k, t_{k+1})`.
    pub fn action(&self, k: usize) -> &[f64] {
        &self.actions[k * self.control_dim..(k + 1) * self.control_dim]
    }

    pub fn actions_flat(&self) -> &[f64] {
        &self.actions
    }

    fn clear(&mut self, dt: f64, control_dim: usize) {
        self.dt = dt;
        self.control_dim = control_dim;
        self.times.clear();
        self.states.clear();
        self.actions.clear();
    }
}

/// Number of Euler steps covering `[0, T]` with step `dt`: `⌊T/dt⌋`, at least one.
pub fn grid_steps(horizon: f64, dt: f64) -> usize {
    // The relative nudge absorbs representation error, e.g. 1/0.01.
    (((horizon / dt) * (1.0 + 1e-12)).floor() as usize).max(1)
}

/// A policy with its covariance factored once for repeated sampling.
#[derive(Debug, Clone)]
pub(crate) struct PolicySampler {
    pub phi: Vec<f64>,
    /// Lower Cholesky factor of `Γ`, row-major.
    pub chol: Vec<f64>,
    pub l: usize,
}

impl PolicySampler {
    pub fn new(pol: &PolicyParams) -> Result<Self> {
        let l = pol.control_dim();
        let chol = pol.cov.clone().cholesky().ok_or(Error::CholeskyFail)?.unpack();
        if chol.iter().any(|v| !v.is_finite()) {
            return Err(Error::CholeskyFail);
        }
        let mut flat = vec![0.0; l * l];
        for i in 0..l {
            for j in 0..=i {
                flat[i * l + j] = chol[(i, j)];
            }
        }
        Ok(PolicySampler {
            phi: pol.phi.iter().copied().collect(),
            chol: flat,
            l,
        })
    }

    /// Writes `φx + Lξ` into `out`, `ξ` standard normal, consuming `l` draws.
    #[inline]
    pub fn sample_into(&self, x: f64, rng: &mut RngStream, noise: &mut [f64], out: &mut [f64]) {
        for n in noise.iter_mut() {
            *n = rng.normal();
        }
        for i in 0..self.l {
            let mut u = self.phi[i] * x;
            for j in 0..=i {
                u += self.chol[i * self.l + j] * noise[j];
            }
            out[i] = u;
        }
    }
}

/// Draws `u ~ N(φx, Γ)`.
pub fn sample_action(x: f64, pol: &PolicyParams, rng: &mut RngStream) -> Result<DVector<f64>> {
    let sampler = PolicySampler::new(pol)?;
    let mut noise = vec![0.0; sampler.l];
    let mut out = vec![0.0; sampler.l];
    sampler.sample_into(x, rng, &mut noise, &mut out);
    Ok(DVector::from_vec(out))
}

/// One Euler–Maruyama step; `dw` holds the Brownian increments (already scaled by `√dt`).
#[inline]
pub fn euler_step(x: f64, u: &[f64], dt: f64, dw: &[f64], p: &ModelParams) -> f64 {
    let bu: f64 = p.b.iter().zip(u).map(|(b, u)| b * u).sum();
    let mut next = x + (p.a * x + bu) * dt;
    for ((cj, dj), w) in p.c.iter().zip(&p.d).zip(dw) {
        let du: f64 = dj.iter().zip(u).map(|(d, u)| d * u).sum();
        next += (cj * x + du) * w;
    }
    next
}

/// Simulates one episode from `x0` over `⌊T/dt⌋` steps.
pub fn rollout(pol: &PolicyParams, dt: f64, model: &Model, rng: &mut RngStream) -> Result<Trajectory> {
    let mut traj = Trajectory::with_capacity(pol.control_dim(), grid_steps(model.params.horizon, dt));
    rollout_into(&mut traj, pol, dt, model, rng)?;
    Ok(traj)
}

/// [`rollout`] reusing the buffers of `traj`.
///
/// On a non-finite state the partial episode is left in `traj` and
/// [`Error::NonFinite`] is returned; the random stream has then consumed
/// exactly the draws of the steps taken.
pub fn rollout_into(
    traj: &mut Trajectory,
    pol: &PolicyParams,
    dt: f64,
    model: &Model,
    rng: &mut RngStream,
) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let p = &model.params;
    let sampler = PolicySampler::new(pol)?;
    let (l, m) = (sampler.l, p.noise_dim());
    let steps = grid_steps(p.horizon, dt);
    let sqrt_dt = dt.sqrt();
    traj.clear(dt, l);
    traj.times.extend((0..=steps).map(|k| k as f64 * dt));
    traj.states.push(p.x0);

    if l == 1 && m == 1 {
        let (phi, sd) = (sampler.phi[0], sampler.chol[0]);
        let (a, b, c, d) = (p.a, p.b[0], p.c[0], p.d[0][0]);
        let mut x = p.x0;
        for k in 0..steps {
            let u = phi * x + sd * rng.normal();
            let w = sqrt_dt * rng.normal();
            x = x + (a * x + b * u) * dt + (c * x + d * u) * w;
            traj.actions.push(u);
            traj.states.push(x);
            if !x.is_finite() {
                traj.times.truncate(k + 2);
                return Err(Error::NonFinite { step: k });
            }
        }
        return Ok(());
    }

    let mut noise = vec![0.0; l];
    let mut u = vec![0.0; l];
    let mut dw = vec![0.0; m];
    let mut x = p.x0;
    for k in 0..steps {
        sampler.sample_into(x, rng, &mut noise, &mut u);
        for w in dw.iter_mut() {
            *w = sqrt_dt * rng.normal();
        }
        x = euler_step(x, &u, dt, &dw, p);
        traj.actions.extend_from_slice(&u);
        traj.states.push(x);
        if !x.is_finite() {
            traj.times.truncate(k + 2);
            return Err(Error::NonFinite { step: k });
        }
    }
    Ok(())
}

/// Drift and per-noise volatilities of the state under the randomized policy:
/// `b̃ = Ax + Bᵀφx` and `σ̃_j = sqrt((C_j x + D_jᵀφx)² + D_jᵀΓD_j)`.
pub fn exploratory_coefficients(x: f64, pol: &PolicyParams, p: &ModelParams) -> (f64, Vec<f64>) {
    let drift = p.a * x + p.b.dot(&pol.phi) * x;
    let sigmas = p
        .c
        .iter()
        .zip(&p.d)
        .map(|(cj, dj)| {
            let mean = cj * x + dj.dot(&pol.phi) * x;
            let spread = (dj.transpose() * &pol.cov * dj)[(0, 0)];
            (mean * mean + spread).sqrt()
        })
        .collect();
    (drift, sigmas)
}

/// Terminal state of an Euler scheme on the exploratory (relaxed) dynamics,
/// which uses the averaged coefficients instead of sampled actions.
pub fn simulate_exploratory_terminal(
    pol: &PolicyParams,
    dt: f64,
    model: &Model,
    rng: &mut RngStream,
) -> Result<f64> {
    let p = &model.params;
    let steps = grid_steps(p.horizon, dt);
    let sqrt_dt = dt.sqrt();
    let mut x = p.x0;
    for k in 0..steps {
        let (drift, sigmas) = exploratory_coefficients(x, pol, p);
        let mut next = x + drift * dt;
        for s in sigmas {
            next += s * sqrt_dt * rng.normal();
        }
        x = next;
        if !x.is_finite() {
            return Err(Error::NonFinite { step: k });
        }
    }
    Ok(x)
}

/// `Γ` for which sampling is still well defined; used by tests and fixtures.
pub fn is_sampleable(cov: &DMatrix<f64>) -> bool {
    cov.clone().cholesky().is_some()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        assert_eq!(grid_steps(1.0, 0.01), 100);
        assert_eq!(grid_steps(1.0, 0.005), 200);
        assert_eq!(grid_steps(1.0, 1.0), 1);
        assert_eq!(grid_steps(1.0, 0.3), 3);
    }

    #[test]
    fn unit_rollout_shape() {
        let model = Model::unit();
        let mut rng = RngStream::new(3);
        let traj = rollout(&PolicyParams::scalar(-2.0, 0.5), 0.01, &model, &mut rng).unwrap();
        assert_eq!(traj.steps(), 100);
        assert_eq!(traj.states.len(), 101);
        assert_eq!(traj.times.len(), 101);
        assert_eq!(traj.actions_flat().len(), 100);
        assert_eq!(traj.times[0], 0.0);
        assert_eq!(traj.states[0], 1.0);
        assert!((traj.times[100] - 1.0).abs() < 0.01);
        for k in 0..100 {
            assert_eq!(traj.times[k], k as f64 * 0.01);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let model = Model::unit();
        let pol = PolicyParams::scalar(-1.3, 0.7);
        let a = rollout(&pol, 0.01, &model, &mut RngStream::new(11)).unwrap();
        let b = rollout(&pol, 0.01, &model, &mut RngStream::new(11)).unwrap();
        assert_eq!(a, b);
        let c = rollout(&pol, 0.01, &model, &mut RngStream::new(12)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn deterministic_drift_step() {
        let p = ModelParams::scalar(1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        assert!((euler_step(1.0, &[0.0], 0.01, &[0.0], &p) - 1.01).abs() < 1e-15);
        let still = ModelParams::scalar(0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        assert_eq!(euler_step(0.4, &[0.0], 0.01, &[0.3], &still), 0.4);
    }

    #[test]
    fn equilibrium_gain_keeps_state_fixed() {
        // C = 0 and D tiny (validation needs D ≠ 0); A + Bφ = 0 and Γ tiny.
        let model = Model::new(ModelParams::scalar(1.0, 1.0, 0.0, 1e-7, 1.0, 1.0, 1.0, 1.0)).unwrap();
        let pol = PolicyParams::scalar(-1.0, 1e-18);
        let traj = rollout(&pol, 0.01, &model, &mut RngStream::new(5)).unwrap();
        assert!(traj.states.iter().all(|&x| (x - 1.0).abs() < 1e-5));
    }

    #[test]
    fn degenerate_covariance_gives_mean_action() {
        let pol = PolicyParams::scalar(-2.0, 1e-18);
        let mut rng = RngStream::new(1);
        for x in [-1.0, 0.5, 3.0] {
            let u = sample_action(x, &pol, &mut rng).unwrap();
            assert!((u[0] + 2.0 * x).abs() < 1e-6);
        }
    }

    #[test]
    fn non_pd_covariance_fails() {
        let pol = PolicyParams {
            phi: DVector::from_element(1, 0.0),
            cov: DMatrix::from_element(1, 1, -1.0),
        };
        assert!(matches!(
            sample_action(1.0, &pol, &mut RngStream::new(0)),
            Err(Error::CholeskyFail)
        ));
    }

    #[test]
    fn divergent_policy_flags_non_finite() {
        let model = Model::new(ModelParams::scalar(400.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0)).unwrap();
        let pol = PolicyParams::scalar(1e6, 1.0);
        let err = rollout(&pol, 0.01, &model, &mut RngStream::new(0)).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn exploratory_coefficient_edge_cases() {
        let p = ModelParams::scalar(0.5, 2.0, 1.0, -3.0, 1.0, 1.0, 1.0, 1.0);
        let (drift, s) = exploratory_coefficients(1.5, &PolicyParams::scalar(0.4, 0.0), &p);
        assert!((drift - (0.75 + 2.0 * 0.4 * 1.5)).abs() < 1e-15);
        assert!((s[0] - (1.5 - 3.0 * 0.4 * 1.5f64).abs()).abs() < 1e-15);
        let (_, s) = exploratory_coefficients(0.0, &PolicyParams::scalar(0.4, 1.0), &p);
        assert!((s[0] - 3.0).abs() < 1e-15);
    }
}
