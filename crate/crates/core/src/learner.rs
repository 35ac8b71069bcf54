//! The adaptive actor–critic loop: per episode, one policy-evaluation step for
//! the critic, one policy-gradient step for the gain, a closed-form temperature
//! refresh and one policy-gradient step for the action covariance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{CriticState, Model, PolicyParams};
use crate::oracle::instant_regret;
use crate::policy::{project_ball, project_box, project_gamma, CriticParameterization, PreparedPolicy, GAMMA_FLOOR};
use crate::sim::{rollout_into, RngStream, Trajectory};

/// A deterministic scalar sequence indexed by the iteration `n ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    /// `max(floor, scale · (n + shift)^exponent)`.
    Power { scale: f64, shift: f64, exponent: f64, floor: f64 },
    Constant(f64),
    /// `max(1, (ln ln n)^{1/6})`.
    LogLogRoot,
    /// `max(1, ln n)`.
    Log,
}

impl Schedule {
    pub fn power(scale: f64, shift: f64, exponent: f64) -> Self {
        Schedule::Power { scale, shift, exponent, floor: 0.0 }
    }

    pub fn at(&self, n: usize) -> f64 {
        let nf = n as f64;
        match *self {
            Schedule::Power { scale, shift, exponent, floor } => (scale * (nf + shift).powf(exponent)).max(floor),
            Schedule::Constant(v) => v,
            Schedule::LogLogRoot => {
                let ll = nf.ln().ln();
                if ll.is_finite() && ll > 1.0 {
                    ll.powf(1.0 / 6.0)
                } else {
                    1.0
                }
            }
            Schedule::Log => {
                if nf > 1.0 {
                    nf.ln().max(1.0)
                } else {
                    1.0
                }
            }
        }
    }
}

/// Time step used for the episode of iteration `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtMode {
    /// `Δt_n = T (n + 1)^{-5/8}`.
    Theorem,
    Fixed(f64),
}

impl DtMode {
    pub fn at(&self, n: usize, horizon: f64) -> f64 {
        match *self {
            DtMode::Theorem => horizon * ((n + 1) as f64).powf(-5.0 / 8.0),
            DtMode::Fixed(dt) => dt,
        }
    }
}

/// Learning rates, exploration scale, projection radii, time step and `c_γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleSet {
    pub a_phi: Schedule,
    pub a_cov: Schedule,
    pub a_theta: Schedule,
    pub b: Schedule,
    pub c_phi: Schedule,
    pub c_cov: Schedule,
    pub dt_mode: DtMode,
    pub c_gamma: f64,
}

impl ScheduleSet {
    /// Rates `α^{3/4}(n+β)^{-3/4}`, `b_n = max(1, (n+β)^{1/4} / α^{1/4})`, radii
    /// `max(1, (ln ln n)^{1/6})` and `max(1, ln n)`, `Δt_n = T(n+1)^{-5/8}`.
    pub fn theorem(alpha: f64, beta: f64, c_gamma: f64) -> Self {
        let rate = Schedule::power(alpha.powf(0.75), beta, -0.75);
        ScheduleSet {
            a_phi: rate.clone(),
            a_cov: rate.clone(),
            a_theta: rate,
            b: Schedule::Power { scale: alpha.powf(-0.25), shift: beta, exponent: 0.25, floor: 1.0 },
            c_phi: Schedule::LogLogRoot,
            c_cov: Schedule::Log,
            dt_mode: DtMode::Theorem,
            c_gamma,
        }
    }

    /// The tuned experiment settings: `a^φ_n = s_φ (n+1)^{-3/4}`, `a^Γ_n = s_Γ (n+1)^{-3/4}`,
    /// `b_n = s_b max(1, (n+1)^{1/4})` and a fixed time step.
    pub fn experiment(a_phi_scale: f64, a_cov_scale: f64, b_scale: f64, dt: f64, c_gamma: f64) -> Self {
        ScheduleSet {
            a_phi: Schedule::power(a_phi_scale, 1.0, -0.75),
            a_cov: Schedule::power(a_cov_scale, 1.0, -0.75),
            a_theta: Schedule::power(a_cov_scale, 1.0, -0.75),
            b: Schedule::Power { scale: b_scale, shift: 1.0, exponent: 0.25, floor: b_scale },
            c_phi: Schedule::Constant(f64::INFINITY),
            c_cov: Schedule::Constant(f64::INFINITY),
            dt_mode: DtMode::Fixed(dt),
            c_gamma,
        }
    }
}

/// Constraint set for the gain `φ` at iteration `n`.
#[derive(Debug, Clone, PartialEq)]
pub enum PhiSet {
    /// Ball of radius `c^φ_n` from the schedule set.
    Ball,
    Box { lo: DVector<f64>, hi: DVector<f64> },
}

/// Constraint set for the covariance `Γ` at iteration `n`.
#[derive(Debug, Clone, PartialEq)]
pub enum CovSet {
    /// Eigenvalues at least `1/b_n`, Frobenius norm at most `c^Γ_n`.
    Band,
    /// Eigenvalues in `[max(lo, GAMMA_FLOOR), hi]`.
    Interval { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub schedules: ScheduleSet,
    pub phi_set: PhiSet,
    pub cov_set: CovSet,
    pub critic: CriticParameterization,
}

impl LearnerConfig {
    pub fn project_phi(&self, phi: &DVector<f64>, n: usize) -> DVector<f64> {
        match &self.phi_set {
            PhiSet::Ball => project_ball(phi, self.schedules.c_phi.at(n)),
            PhiSet::Box { lo, hi } => project_box(phi, lo, hi),
        }
    }

    pub fn project_cov(&self, cov: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
        match self.cov_set {
            CovSet::Band => project_gamma(cov, 1.0 / self.schedules.b.at(n), self.schedules.c_cov.at(n), None),
            CovSet::Interval { lo, hi } => project_gamma(cov, 0.0, f64::INFINITY, Some((lo, hi))),
        }
    }

    pub fn project_temperature(&self, gamma: f64) -> f64 {
        let cap = self.critic.c_gamma_cap;
        gamma.clamp(-cap, cap)
    }

    pub fn project_theta(&self, theta: &DVector<f64>) -> DVector<f64> {
        project_ball(theta, self.critic.c_theta)
    }

    fn phi_in_set(&self, phi: &DVector<f64>, n: usize) -> bool {
        let tol = 1e-12;
        match &self.phi_set {
            PhiSet::Ball => phi.norm() <= self.schedules.c_phi.at(n) * (1.0 + tol),
            PhiSet::Box { lo, hi } => phi
                .iter()
                .zip(lo.iter().zip(hi.iter()))
                .all(|(p, (l, h))| *p >= *l - tol && *p <= *h + tol),
        }
    }

    fn cov_in_set(&self, cov: &DMatrix<f64>, n: usize) -> bool {
        let eig = cov.clone().symmetric_eigen().eigenvalues;
        let tol = 1e-9;
        match self.cov_set {
            CovSet::Band => {
                eig.min() >= 1.0 / self.schedules.b.at(n) - tol && cov.norm() <= self.schedules.c_cov.at(n) * (1.0 + tol)
            }
            CovSet::Interval { lo, hi } => eig.min() >= lo.max(GAMMA_FLOOR) * (1.0 - tol) && eig.max() <= hi * (1.0 + tol),
        }
    }
}

/// Learnable quantities at the start of an iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub policy: PolicyParams,
    pub critic: CriticState,
}

/// How the two exploration parameters evolve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exploration {
    /// Temperature from the critic rule, covariance by policy gradient.
    Adaptive,
    /// Temperature held at its initial value and `Γ_n = Γ_0 / (n + 1)`.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Diverged,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Diverged => "diverged",
        }
    }
}

/// Parameters in force during iteration `n` and the regret they incur.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub n: usize,
    pub phi: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub gamma: f64,
    pub theta: DVector<f64>,
    pub instant_regret: f64,
    /// Sum of instant regrets over iterations `0..=n`.
    pub cum_regret: f64,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub records: Vec<IterationRecord>,
    pub final_state: TrainState,
    pub diverged: usize,
}

/// Sums over one episode that drive all four updates.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    /// `Σ_k ∂J/∂θ(t_k, x_k) · δ_k`, with `δ_k` the temporal-difference increment.
    pub pe_direction: DVector<f64>,
    pub y_hat: DVector<f64>,
    pub z_hat: DMatrix<f64>,
    /// `Σ_k k1(t_k; θ) Δt`.
    pub k1_sum: f64,
}

/// One pass over the episode computing the critic direction and the
/// discretized policy-gradient estimates for `φ` and `Γ⁻¹`.
pub fn episode_stats(
    traj: &Trajectory,
    cs: &CriticState,
    pol: &PreparedPolicy,
    par: &CriticParameterization,
    q: f64,
) -> Result<EpisodeStats> {
    let l = pol.params.control_dim();
    let d = par.theta_dim();
    let dt = traj.dt;
    let steps = traj.steps();
    let gamma = cs.temperature;
    let entropy_rate = gamma * pol.entropy * dt;
    let phi = pol.params.phi.as_slice();

    let mut pe = vec![0.0; d];
    let mut grad = vec![0.0; d];
    let mut s_phi = vec![0.0; l];
    let mut m = vec![0.0; l * l];
    let mut z = vec![0.0; l];
    let mut w_sum = 0.0;
    let mut k1_sum = 0.0;

    let mut j_now = par.value(traj.times[0], traj.states[0], cs);
    for k in 0..steps {
        let (t, x) = (traj.times[k], traj.states[k]);
        let j_next = par.value(traj.times[k + 1], traj.states[k + 1], cs);
        let td = j_next - j_now - 0.5 * q * x * x * dt + entropy_rate;
        if d > 0 {
            par.grad_theta_into(t, x, &cs.theta, &mut grad);
            for (p, g) in pe.iter_mut().zip(&grad) {
                *p += g * td;
            }
        }
        // `td` is `Δt` times the bracket of the policy-gradient integrands.
        let u = traj.action(k);
        for i in 0..l {
            z[i] = u[i] - phi[i] * x;
            s_phi[i] += z[i] * x * td;
        }
        for i in 0..l {
            for j in 0..l {
                m[i * l + j] += z[i] * z[j] * td;
            }
        }
        w_sum += td;
        k1_sum += par.k1(t, &cs.theta) * dt;
        j_now = j_next;
    }

    let y_hat = &pol.cov_inv * DVector::from_vec(s_phi);
    let span = steps as f64 * dt;
    let cov = &pol.params.cov;
    let z_hat = cov * (0.5 * w_sum) - DMatrix::from_row_slice(l, l, &m) * 0.5 - cov * (0.5 * gamma * span);
    let stats = EpisodeStats {
        pe_direction: DVector::from_vec(pe),
        y_hat,
        z_hat,
        k1_sum,
    };
    let finite = stats.pe_direction.iter().all(|v| v.is_finite())
        && stats.y_hat.iter().all(|v| v.is_finite())
        && stats.z_hat.iter().all(|v| v.is_finite())
        && stats.k1_sum.is_finite();
    if !finite {
        return Err(Error::NonFinite { step: steps });
    }
    Ok(stats)
}

/// `Ŷ_n`: discretized policy gradient for the gain.
pub fn compute_y_hat(
    traj: &Trajectory,
    cs: &CriticState,
    pol: &PolicyParams,
    par: &CriticParameterization,
    q: f64,
) -> Result<DVector<f64>> {
    let prepared = PreparedPolicy::new(pol.clone())?;
    Ok(episode_stats(traj, cs, &prepared, par, q)?.y_hat)
}

/// `Ẑ_n`: discretized policy gradient with respect to `Γ⁻¹`.
pub fn compute_z_hat(
    traj: &Trajectory,
    cs: &CriticState,
    pol: &PolicyParams,
    par: &CriticParameterization,
    q: f64,
) -> Result<DMatrix<f64>> {
    let prepared = PreparedPolicy::new(pol.clone())?;
    Ok(episode_stats(traj, cs, &prepared, par, q)?.z_hat)
}

/// Critic step `θ' = Π(θ + a_θ Σ_k ∂J/∂θ · δ_k)`.
pub fn pe_update(
    traj: &Trajectory,
    cs: &CriticState,
    pol: &PolicyParams,
    a_theta: f64,
    par: &CriticParameterization,
    q: f64,
) -> Result<CriticState> {
    if par.theta_dim() == 0 || a_theta == 0.0 {
        return Ok(cs.clone());
    }
    let prepared = PreparedPolicy::new(pol.clone())?;
    let stats = episode_stats(traj, cs, &prepared, par, q)?;
    let theta = project_ball(&(&cs.theta + stats.pe_direction * a_theta), par.c_theta);
    Ok(CriticState::new(theta, cs.temperature))
}

/// Temperature refresh `γ' = Π(c_γ / (b_n T) · Σ_k k1(t_k; θ) Δt)` on the grid of step `dt`.
pub fn gamma_update(cs: &CriticState, sch: &ScheduleSet, n: usize, par: &CriticParameterization, horizon: f64, dt: f64) -> f64 {
    let steps = crate::sim::grid_steps(horizon, dt);
    let k1_sum: f64 = (0..steps).map(|k| par.k1(k as f64 * dt, &cs.theta) * dt).sum();
    temperature_from(k1_sum, sch, n, horizon).clamp(-par.c_gamma_cap, par.c_gamma_cap)
}

fn temperature_from(k1_sum: f64, sch: &ScheduleSet, n: usize, horizon: f64) -> f64 {
    sch.c_gamma * k1_sum / (sch.b.at(n) * horizon)
}

/// `φ' = Π_{K_{n+1}}(φ + a^φ_n Ŷ)`.
pub fn phi_update(phi: &DVector<f64>, y_hat: &DVector<f64>, cfg: &LearnerConfig, n: usize) -> DVector<f64> {
    cfg.project_phi(&(phi + y_hat * cfg.schedules.a_phi.at(n)), n + 1)
}

/// `Γ' = Π_{K_{n+1}}(Γ - a^Γ_n Ẑ)`.
pub fn cov_update(cov: &DMatrix<f64>, z_hat: &DMatrix<f64>, cfg: &LearnerConfig, n: usize) -> DMatrix<f64> {
    cfg.project_cov(&(cov - z_hat * cfg.schedules.a_cov.at(n)), n + 1)
}

/// Which iterations a run keeps in its log. Cumulative regret is always
/// accumulated over every iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Thinning {
    All,
    /// Every iteration up to 10³, every 10th up to 10⁴, every 100th beyond,
    /// plus the final iteration.
    LogSpaced,
}

impl Thinning {
    pub fn keep(&self, n: usize, n_iters: usize) -> bool {
        match self {
            Thinning::All => true,
            Thinning::LogSpaced => {
                n + 1 == n_iters || n <= 1_000 || (n <= 10_000 && n % 10 == 0) || n % 100 == 0
            }
        }
    }
}

/// Runs Algorithm-style training for `n_iters` episodes with adaptive exploration.
pub fn train(model: &Model, cfg: &LearnerConfig, init: &TrainState, n_iters: usize, seed: u64) -> Result<RunLog> {
    train_with(model, cfg, init, n_iters, seed, Exploration::Adaptive, Thinning::All)
}

/// [`train`] with a choice of exploration rule and log thinning.
pub fn train_with(
    model: &Model,
    cfg: &LearnerConfig,
    init: &TrainState,
    n_iters: usize,
    seed: u64,
    exploration: Exploration,
    thinning: Thinning,
) -> Result<RunLog> {
    let l = model.control_dim();
    if init.policy.control_dim() != l {
        return Err(Error::DimensionMismatch(format!(
            "initial gain has length {}, model has l = {l}",
            init.policy.control_dim()
        )));
    }
    if init.critic.theta.len() != cfg.critic.theta_dim() {
        return Err(Error::DimensionMismatch(format!(
            "critic expects {} parameters, got {}",
            cfg.critic.theta_dim(),
            init.critic.theta.len()
        )));
    }
    if init.policy.cov.clone().cholesky().is_none() {
        return Err(Error::CholeskyFail);
    }
    if cfg.schedules.c_gamma <= model.derived.lambda_max_ddt {
        return Err(Error::BadCGamma {
            c_gamma: cfg.schedules.c_gamma,
            lambda_max: model.derived.lambda_max_ddt,
        });
    }

    let p = &model.params;
    let mut rng = RngStream::new(seed);
    let mut traj = Trajectory::with_capacity(l, 0);
    let mut state = init.clone();
    let cov0 = init.policy.cov.clone();
    let mut records = Vec::new();
    let mut cum = 0.0;
    let mut diverged = 0;

    for n in 0..n_iters {
        let regret = instant_regret(&state.policy.phi, &state.policy.cov, model);
        cum += regret;
        let dt = cfg.schedules.dt_mode.at(n, p.horizon);
        let sch = &cfg.schedules;

        let outcome = rollout_into(&mut traj, &state.policy, dt, model, &mut rng).and_then(|_| {
            let prepared = PreparedPolicy::new(state.policy.clone())?;
            episode_stats(&traj, &state.critic, &prepared, &cfg.critic, p.q)
        });
        let status = match outcome {
            Ok(_) => Status::Ok,
            Err(Error::NonFinite { .. }) => Status::Diverged,
            Err(e) => return Err(e),
        };

        if thinning.keep(n, n_iters) {
            records.push(IterationRecord {
                n,
                phi: state.policy.phi.clone(),
                cov: state.policy.cov.clone(),
                gamma: state.critic.temperature,
                theta: state.critic.theta.clone(),
                instant_regret: regret,
                cum_regret: cum,
                status,
            });
        }

        let next = match outcome {
            Ok(stats) => {
                let theta = cfg.project_theta(&(&state.critic.theta + &stats.pe_direction * sch.a_theta.at(n)));
                let phi = phi_update(&state.policy.phi, &stats.y_hat, cfg, n);
                let (gamma, cov) = match exploration {
                    Exploration::Adaptive => (
                        cfg.project_temperature(temperature_from(stats.k1_sum, sch, n, p.horizon)),
                        cov_update(&state.policy.cov, &stats.z_hat, cfg, n),
                    ),
                    Exploration::Fixed => (init.critic.temperature, &cov0 / (n + 2) as f64),
                };
                TrainState {
                    policy: PolicyParams { phi, cov },
                    critic: CriticState::new(theta, gamma),
                }
            }
            Err(_) => {
                diverged += 1;
                let steps = crate::sim::grid_steps(p.horizon, dt);
                let k1_sum: f64 = (0..steps)
                    .map(|k| cfg.critic.k1(k as f64 * dt, &state.critic.theta) * dt)
                    .sum();
                let (gamma, cov) = match exploration {
                    Exploration::Adaptive => (
                        cfg.project_temperature(temperature_from(k1_sum, sch, n, p.horizon)),
                        cfg.project_cov(&state.policy.cov, n + 1),
                    ),
                    Exploration::Fixed => (init.critic.temperature, &cov0 / (n + 2) as f64),
                };
                TrainState {
                    policy: PolicyParams {
                        phi: cfg.project_phi(&state.policy.phi, n + 1),
                        cov,
                    },
                    critic: CriticState::new(state.critic.theta.clone(), gamma),
                }
            }
        };
        debug_assert!(cfg.phi_in_set(&next.policy.phi, n + 1), "gain left its constraint set at n = {n}");
        debug_assert!(
            exploration == Exploration::Fixed || cfg.cov_in_set(&next.policy.cov, n + 1),
            "covariance left its constraint set at n = {n}"
        );
        state = next;
    }

    Ok(RunLog {
        records,
        final_state: state,
        diverged,
    })
}

/// Outcome of one schedule condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleReport {
    pub checks: Vec<ConditionCheck>,
}

impl ScheduleReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Options for [`validate_schedules`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationOptions {
    /// Weight `W` in the recursion `â_n ≤ â_{n+1}(1 + W â_{n+1})`.
    pub w: f64,
    /// Exponents `q1..q4` and constant `c` of the summability condition.
    pub q: [f64; 4],
    pub c: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            w: 2.0,
            q: [4.0, 4.0, 4.0, 4.0],
            c: 1.0,
        }
    }
}

/// Tail exponent `p` of a non-negative series with terms `~ n^{-p}`, read off
/// the log-log slope of the terms between two far-out indices. Schedules are
/// closed-form, so the tail is evaluated directly rather than summed.
fn tail_exponent(term: impl Fn(usize) -> f64) -> f64 {
    let (n1, n2) = (TAIL_LO, TAIL_HI);
    let (t1, t2) = (term(n1), term(n2));
    if t1 == 0.0 && t2 == 0.0 {
        return f64::INFINITY;
    }
    -(t2.ln() - t1.ln()) / ((n2 as f64).ln() - (n1 as f64).ln())
}

const TAIL_LO: usize = 1_000_000_000_000;
const TAIL_HI: usize = 10_000_000_000_000;
/// Series with tail exponent at most `1 + SUMMABILITY_MARGIN` count as divergent.
const SUMMABILITY_MARGIN: f64 = 0.01;

/// Numerical proxies for the step-size, exploration and radius conditions.
/// Positivity, monotonicity and the recursions are checked for every
/// `n ≤ horizon_n`; summability is judged from the tail exponent of each series.
pub fn validate_schedules(sch: &ScheduleSet, horizon_n: usize, opts: ValidationOptions) -> ScheduleReport {
    let horizon_n = horizon_n.max(1000);
    let (mut a_in_range, mut b_ge_1, mut b_monotone, mut cphi_monotone, mut ccov_monotone) = (true, true, true, true, true);
    let (mut rec_a, mut rec_hat) = (true, true);
    let [q1, q2, q3, q4] = opts.q;

    let mut prev = (sch.a_cov.at(0), sch.b.at(0), sch.c_phi.at(0), sch.c_cov.at(0));
    for n in 0..=horizon_n {
        let (a, b, cphi, ccov) = (sch.a_cov.at(n), sch.b.at(n), sch.c_phi.at(n), sch.c_cov.at(n));
        a_in_range &= a > 0.0 && a <= 1.0;
        b_ge_1 &= b >= 1.0;
        if n > 0 {
            b_monotone &= b >= prev.1;
            cphi_monotone &= cphi >= prev.2;
            ccov_monotone &= ccov >= prev.3;
            let (a_prev, b_prev) = (prev.0, prev.1);
            rec_a &= a_prev <= a * (1.0 + opts.w * a) * (1.0 + 1e-12);
            let (h_prev, h) = (sch.a_phi.at(n - 1) / b_prev, sch.a_phi.at(n) / b);
            rec_hat &= h_prev <= h * (1.0 + opts.w * h) * (1.0 + 1e-12);
        }
        prev = (a, b, cphi, ccov);
    }

    let p_a = tail_exponent(|n| sch.a_cov.at(n));
    let p_sq = tail_exponent(|n| {
        let (a, b, cphi, ccov) = (sch.a_cov.at(n), sch.b.at(n), sch.c_phi.at(n), sch.c_cov.at(n));
        a * a * ccov.powf(q1) * cphi.powf(q2) * b.ln().max(0.0).powf(q3) * (opts.c * cphi.powf(q4)).exp()
    });
    let p_ab = tail_exponent(|n| sch.a_phi.at(n) / sch.b.at(n));
    let p_db = tail_exponent(|n| (1.0 / sch.b.at(n) - 1.0 / sch.b.at(n + 1)).abs());
    let converges = |p: f64| p > 1.0 + SUMMABILITY_MARGIN;

    let grows = |s: &Schedule| s.at(TAIL_HI) > s.at(horizon_n) * (1.0 + 1e-6);
    let mut checks = Vec::new();
    let mut push = |name: &'static str, passed: bool, detail: String| checks.push(ConditionCheck { name, passed, detail });

    push("a_in_unit_interval", a_in_range, "0 < a_n <= 1".into());
    push("sum_a_diverges", !converges(p_a), format!("tail exponent {p_a:.4}"));
    push(
        "radii_increase",
        cphi_monotone && ccov_monotone && grows(&sch.c_phi) && grows(&sch.c_cov),
        format!("c_phi({horizon_n}) = {:.4}, c_Gamma({horizon_n}) = {:.4}", sch.c_phi.at(horizon_n), sch.c_cov.at(horizon_n)),
    );
    push("sum_a_squared_weighted_converges", converges(p_sq), format!("tail exponent {p_sq:.4}"));
    push("b_at_least_one", b_ge_1, format!("b_0 = {}", sch.b.at(0)));
    push(
        "b_increases_to_infinity",
        b_monotone && grows(&sch.b),
        format!("b({horizon_n}) = {:.4}", sch.b.at(horizon_n)),
    );
    push("sum_a_over_b_diverges", !converges(p_ab), format!("tail exponent {p_ab:.4}"));
    push("sum_inverse_b_increments_converges", converges(p_db), format!("tail exponent {p_db:.4}"));
    push("a_recursion", rec_a, format!("W = {}", opts.w));
    push("a_over_b_recursion", rec_hat, format!("W = {}", opts.w));
    ScheduleReport { checks }
}
