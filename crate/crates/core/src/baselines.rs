//! Comparison learners: the model-free learner with a fixed exploration
//! schedule, and a certainty-equivalence learner that estimates the model by
//! least squares and plugs the estimates into the optimal-gain formula.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2};

use crate::error::{Error, Result};
use crate::learner::{self, Exploration, IterationRecord, LearnerConfig, RunLog, Status, Thinning, TrainState};
use crate::model::{CriticState, Model, PolicyParams};
use crate::oracle::instant_regret;
use crate::sim::{rollout_into, RngStream, Trajectory};

/// Floor applied to the estimated `D²` before it is inverted.
pub const DDT_RIDGE_FLOOR: f64 = 1e-6;
/// Relative ridge added to the normal equations, scaled by the mean diagonal.
pub const REGRESSION_RIDGE: f64 = 1e-8;

/// Model-free learner with `γ_n = γ_0` and `Γ_n = Γ_0 / (n + 1)`.
pub fn run_fixed(
    model: &Model,
    cfg: &LearnerConfig,
    init: &TrainState,
    n_iters: usize,
    seed: u64,
    thinning: Thinning,
) -> Result<RunLog> {
    learner::train_with(model, cfg, init, n_iters, seed, Exploration::Fixed, thinning)
}

/// Estimated coefficients of a scalar model.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamEstimates {
    pub a_hat: f64,
    pub b_hat: DVector<f64>,
    pub c_hat: Vec<f64>,
    pub d_hat: Vec<DVector<f64>>,
}

impl ParamEstimates {
    /// All four coefficients set to `value`.
    pub fn prior(value: f64) -> Self {
        ParamEstimates {
            a_hat: value,
            b_hat: DVector::from_element(1, value),
            c_hat: vec![value],
            d_hat: vec![DVector::from_element(1, value)],
        }
    }

    /// `-(Σ D̂D̂ᵀ + εI)⁻¹ (B̂ + Σ ĈD̂)` with `ε` only when needed to reach the floor.
    pub fn plug_in_gain(&self) -> DVector<f64> {
        let l = self.b_hat.len();
        let mut ddt = DMatrix::zeros(l, l);
        let mut rhs = self.b_hat.clone();
        for (c, d) in self.c_hat.iter().zip(&self.d_hat) {
            ddt += d * d.transpose();
            rhs += d * *c;
        }
        let min_eig = ddt.clone().symmetric_eigen().eigenvalues.min();
        if min_eig < DDT_RIDGE_FLOOR {
            ddt += DMatrix::identity(l, l) * (DDT_RIDGE_FLOOR - min_eig);
        }
        let inv = ddt.try_inverse().expect("ridge keeps the diffusion sum invertible");
        -(inv * rhs)
    }
}

/// Sufficient statistics of the drift and squared-residual regressions
/// accumulated over every step of every episode seen so far (`l = m = 1`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegressionAccumulator {
    steps: usize,
    /// `Σ (x, u)(x, u)ᵀ`.
    drift_gram: Matrix2<f64>,
    /// `Σ (x, u) Δx/Δt`.
    drift_rhs: Vector2<f64>,
    /// `Σ f fᵀ` with `f = (x², 2xu, u²)`.
    diff_gram: Matrix3<f64>,
    /// `Σ f gᵀ` with `g = (Δx²/Δt, Δx x, Δx u, x²Δt, xuΔt, u²Δt)`, so the
    /// residual regression can be formed for any drift estimate.
    diff_cross: [[f64; 6]; 3],
}

impl RegressionAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn add(&mut self, traj: &Trajectory) -> Result<()> {
        if traj.control_dim() != 1 {
            return Err(Error::DimensionMismatch(
                "least-squares estimation supports a scalar control only".into(),
            ));
        }
        let dt = traj.dt;
        for k in 0..traj.steps() {
            let x = traj.states[k];
            let u = traj.action(k)[0];
            let dx = traj.states[k + 1] - x;
            self.drift_gram += Matrix2::new(x * x, x * u, x * u, u * u);
            self.drift_rhs += Vector2::new(x, u) * (dx / dt);
            let f = [x * x, 2.0 * x * u, u * u];
            let g = [dx * dx / dt, dx * x, dx * u, x * x * dt, x * u * dt, u * u * dt];
            for i in 0..3 {
                for j in 0..3 {
                    self.diff_gram[(i, j)] += f[i] * f[j];
                }
                for j in 0..6 {
                    self.diff_cross[i][j] += f[i] * g[j];
                }
            }
        }
        self.steps += traj.steps();
        Ok(())
    }

    /// Least-squares estimates from everything accumulated so far.
    pub fn estimate(&self) -> Result<ParamEstimates> {
        if self.steps == 0 {
            return Err(Error::SingularRegression);
        }
        let drift = solve_ridge(DMatrix::from_column_slice(2, 2, self.drift_gram.as_slice()), self.drift_rhs.as_slice())?;
        let (a, b) = (drift[0], drift[1]);
        let w = [1.0, -2.0 * a, -2.0 * b, a * a, 2.0 * a * b, b * b];
        let rhs: Vec<f64> = (0..3)
            .map(|i| (0..6).map(|j| w[j] * self.diff_cross[i][j]).sum())
            .collect();
        let diff = solve_ridge(DMatrix::from_column_slice(3, 3, self.diff_gram.as_slice()), &rhs)?;
        let (cd, dd) = (diff[1], diff[2]);
        let d = dd.max(DDT_RIDGE_FLOOR).sqrt();
        Ok(ParamEstimates {
            a_hat: a,
            b_hat: DVector::from_element(1, b),
            c_hat: vec![cd / d],
            d_hat: vec![DVector::from_element(1, d)],
        })
    }
}

fn solve_ridge(mut gram: DMatrix<f64>, rhs: &[f64]) -> Result<DVector<f64>> {
    let p = gram.nrows();
    let scale = gram.trace() / p as f64;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::SingularRegression);
    }
    let eig = gram.clone().symmetric_eigen().eigenvalues;
    if eig.min() <= 1e-12 * eig.max() {
        return Err(Error::SingularRegression);
    }
    for i in 0..p {
        gram[(i, i)] += REGRESSION_RIDGE * scale;
    }
    let chol = gram.cholesky().ok_or(Error::SingularRegression)?;
    let sol = chol.solve(&DVector::from_column_slice(rhs));
    if sol.iter().all(|v| v.is_finite()) {
        Ok(sol)
    } else {
        Err(Error::SingularRegression)
    }
}

/// Drift regression of `Δx/Δt` on `(x, u)` and squared-residual regression of
/// `(Δx - (Âx + B̂u)Δt)²/Δt` on `(x², 2xu, u²)`, pooled over all trajectories.
pub fn estimate_params(trajectories: &[Trajectory]) -> Result<ParamEstimates> {
    let mut acc = RegressionAccumulator::new();
    for t in trajectories {
        acc.add(t)?;
    }
    acc.estimate()
}

/// Settings of the plug-in learner.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBasedConfig {
    /// Value of every coefficient estimate before any data arrives.
    pub prior_estimate: f64,
    /// `Γ_0` of the schedule `Γ_n = Γ_0 / (n + 1)`.
    pub cov0: f64,
    pub phi_lo: f64,
    pub phi_hi: f64,
    pub dt: f64,
}

impl Default for ModelBasedConfig {
    fn default() -> Self {
        ModelBasedConfig {
            prior_estimate: 10.0,
            cov0: 0.5,
            phi_lo: -2.25,
            phi_hi: -1.1,
            dt: 0.01,
        }
    }
}

/// Certainty-equivalence learner: explore around the plug-in gain with a
/// decaying covariance, then refit on all data collected so far.
pub fn run_model_based(
    model: &Model,
    cfg: &ModelBasedConfig,
    n_iters: usize,
    seed: u64,
    thinning: Thinning,
) -> Result<RunLog> {
    if model.control_dim() != 1 || model.noise_dim() != 1 {
        return Err(Error::DimensionMismatch(
            "the model-based learner supports l = m = 1 only".into(),
        ));
    }
    let mut rng = RngStream::new(seed);
    let mut traj = Trajectory::with_capacity(1, 0);
    let mut acc = RegressionAccumulator::new();
    let mut est = ParamEstimates::prior(cfg.prior_estimate);
    let mut records = Vec::new();
    let (mut cum, mut diverged) = (0.0, 0);
    let mut policy = PolicyParams::scalar(0.0, cfg.cov0);

    for n in 0..n_iters {
        let gain = est.plug_in_gain()[0].clamp(cfg.phi_lo, cfg.phi_hi);
        policy = PolicyParams::scalar(gain, cfg.cov0 / (n + 1) as f64);
        let regret = instant_regret(&policy.phi, &policy.cov, model);
        cum += regret;
        let status = match rollout_into(&mut traj, &policy, cfg.dt, model, &mut rng) {
            Ok(()) => {
                acc.add(&traj)?;
                match acc.estimate() {
                    Ok(e) => est = e,
                    Err(Error::SingularRegression) => {}
                    Err(e) => return Err(e),
                }
                Status::Ok
            }
            Err(Error::NonFinite { .. }) => {
                diverged += 1;
                Status::Diverged
            }
            Err(e) => return Err(e),
        };
        if thinning.keep(n, n_iters) {
            records.push(IterationRecord {
                n,
                phi: policy.phi.clone(),
                cov: policy.cov.clone(),
                gamma: 0.0,
                theta: DVector::zeros(0),
                instant_regret: regret,
                cum_regret: cum,
                status,
            });
        }
    }
    Ok(RunLog {
        records,
        final_state: TrainState {
            policy,
            critic: CriticState::constant(0.0),
        },
        diverged,
    })
}
