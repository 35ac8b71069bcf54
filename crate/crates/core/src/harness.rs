//! Seeded multi-run experiments: run farming, aggregation across runs,
//! log-log slope fits and CSV output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::baselines::{run_fixed, run_model_based, ModelBasedConfig};
use crate::error::{Error, Result};
use crate::learner::{
    train_with, CovSet, DtMode, Exploration, LearnerConfig, PhiSet, RunLog, Schedule, ScheduleSet, Status, Thinning, TrainState,
};
use crate::model::{sample_random_model, CriticState, Model, ModelParams, PolicyParams};
use crate::oracle::phi_star;
use crate::policy::CriticParameterization;
use crate::sim::RngStream;

/// Fit window of the convergence-rate and regret slopes.
pub const FIT_WINDOW: (f64, f64) = (5_000.0, 100_000.0);
/// Largest number of points entering a slope fit.
pub const MAX_FIT_POINTS: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Excessive,
    Insufficient,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Excessive => "excessive",
            Scenario::Insufficient => "insufficient",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    /// Adaptive learner on the unit model: convergence rates and regret.
    Exp1Validate,
    /// Model-based plug-in learner on the unit model.
    Exp2ModelBased,
    /// Adaptive against fixed exploration from a mis-tuned start.
    Exp3Scenario(Scenario),
    /// Adaptive against fixed exploration on random models.
    Exp4Random,
}

impl Experiment {
    pub fn label(&self) -> String {
        match self {
            Experiment::Exp1Validate => "exp1".into(),
            Experiment::Exp2ModelBased => "exp2".into(),
            Experiment::Exp3Scenario(s) => format!("exp3_{}", s.name()),
            Experiment::Exp4Random => "exp4".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// 20 runs and at most 2·10⁴ iterations.
    Small,
    /// Run counts and lengths of the published experiments.
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    /// Tuned rates, box and interval constraint sets, fixed time step.
    Experiment,
    /// Rates and radii of the convergence theorem.
    Theorem,
}

/// Flat learner settings; every field maps to one configuration key.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerSettings {
    pub phi0: f64,
    pub cov0: f64,
    pub gamma0: f64,
    pub schedule: ScheduleKind,
    pub alpha: f64,
    pub beta: f64,
    /// `None` selects `2 λ_max(Σ D_jD_jᵀ)`.
    pub c_gamma: Option<f64>,
    pub dt_mode: DtMode,
    pub phi_box: (f64, f64),
    pub cov_interval: (f64, f64),
    /// Replaces the box and interval by the ball `|φ| ≤ c` and the band
    /// `1/b_n ≤ Γ`, `|Γ| ≤ c` with constant radius `c`.
    pub radius: Option<f64>,
    pub b_scale: f64,
    pub a_phi_scale: f64,
    pub a_cov_scale: f64,
    pub prior_estimate: f64,
}

impl Default for LearnerSettings {
    fn default() -> Self {
        LearnerSettings {
            phi0: -1.1,
            cov0: 0.5,
            gamma0: 2.0,
            schedule: ScheduleKind::Experiment,
            alpha: 1.0,
            beta: 4.0,
            c_gamma: Some(40.0),
            dt_mode: DtMode::Fixed(0.01),
            phi_box: (-2.25, -1.1),
            cov_interval: (0.0, 1.0),
            radius: None,
            b_scale: 20.0,
            a_phi_scale: 0.05,
            a_cov_scale: 1.0,
            prior_estimate: 10.0,
        }
    }
}

impl LearnerSettings {
    pub fn learner_config(&self, model: &Model) -> LearnerConfig {
        let c_gamma = self.c_gamma.unwrap_or_else(|| model.default_c_gamma());
        let l = model.control_dim();
        match self.schedule {
            ScheduleKind::Experiment => {
                let dt = match self.dt_mode {
                    DtMode::Fixed(dt) => dt,
                    DtMode::Theorem => 0.0,
                };
                let mut schedules = ScheduleSet::experiment(self.a_phi_scale, self.a_cov_scale, self.b_scale, dt, c_gamma);
                schedules.dt_mode = self.dt_mode;
                if let Some(c) = self.radius {
                    schedules.c_phi = Schedule::Constant(c);
                    schedules.c_cov = Schedule::Constant(c);
                    return LearnerConfig {
                        schedules,
                        phi_set: PhiSet::Ball,
                        cov_set: CovSet::Band,
                        critic: CriticParameterization::constant(),
                    };
                }
                LearnerConfig {
                    schedules,
                    phi_set: PhiSet::Box {
                        lo: DVector::from_element(l, self.phi_box.0),
                        hi: DVector::from_element(l, self.phi_box.1),
                    },
                    cov_set: CovSet::Interval {
                        lo: self.cov_interval.0,
                        hi: self.cov_interval.1,
                    },
                    critic: CriticParameterization::constant(),
                }
            }
            ScheduleKind::Theorem => {
                let mut schedules = ScheduleSet::theorem(self.alpha, self.beta, c_gamma);
                schedules.dt_mode = self.dt_mode;
                LearnerConfig {
                    schedules,
                    phi_set: PhiSet::Ball,
                    cov_set: CovSet::Band,
                    critic: CriticParameterization::constant(),
                }
            }
        }
    }

    pub fn init_state(&self, model: &Model) -> TrainState {
        let l = model.control_dim();
        TrainState {
            policy: PolicyParams {
                phi: DVector::from_element(l, self.phi0),
                cov: DMatrix::identity(l, l) * self.cov0,
            },
            critic: CriticState::constant(self.gamma0),
        }
    }

    pub fn model_based_config(&self) -> ModelBasedConfig {
        ModelBasedConfig {
            prior_estimate: self.prior_estimate,
            cov0: self.cov0,
            phi_lo: self.phi_box.0,
            phi_hi: self.phi_box.1,
            dt: match self.dt_mode {
                DtMode::Fixed(dt) => dt,
                DtMode::Theorem => 0.01,
            },
        }
    }
}

/// A fully specified experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n_runs: usize,
    pub n_iters: usize,
    pub base_seed: u64,
    pub output_dir: Option<PathBuf>,
    /// Write one CSV per run in addition to the aggregates.
    pub write_runs: bool,
    /// Environment for the fixed-model experiments (ignored by the random one).
    pub model: ModelParams,
    pub learner: LearnerSettings,
}

impl ExperimentConfig {
    /// Preset for `experiment` at the given scale.
    pub fn preset(experiment: Experiment, scale: Scale) -> Self {
        let mut learner = LearnerSettings::default();
        let (runs, iters) = match experiment {
            Experiment::Exp1Validate | Experiment::Exp2ModelBased => (100, 100_000),
            Experiment::Exp3Scenario(s) => {
                learner.phi_box = (-20.0, 20.0);
                learner.cov_interval = (0.0, 20.0);
                learner.radius = Some(20.0);
                let (phi0, level) = match s {
                    Scenario::Excessive => (-1.8, 20.0),
                    Scenario::Insufficient => (0.0, 0.02),
                };
                learner.phi0 = phi0;
                learner.cov0 = level;
                learner.gamma0 = level;
                (1_000, 10_000)
            }
            Experiment::Exp4Random => {
                learner.phi0 = 0.0;
                learner.phi_box = (-100.0, 100.0);
                learner.cov_interval = (0.0, 100.0);
                learner.radius = Some(100.0);
                (10_000, 10_000)
            }
        };
        let (n_runs, n_iters) = match scale {
            Scale::Paper => (runs, iters),
            Scale::Small => (20, iters.min(20_000)),
        };
        ExperimentConfig {
            experiment,
            n_runs,
            n_iters,
            base_seed: 1,
            output_dir: None,
            write_runs: true,
            model: ModelParams::unit(),
            learner,
        }
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.n_runs as u64).map(move |i| self.base_seed + i)
    }
}

/// Per-seed environment and initial state of one run.
#[derive(Debug, Clone)]
pub struct RunSetup {
    pub seed: u64,
    pub model: Model,
    pub settings: LearnerSettings,
}

/// Builds the environment of run `seed`. The random experiment draws the model
/// from the seed and the initial exploration levels `γ_0, Γ_0 ~ U(0, 5)` from
/// an auxiliary stream of the same seed.
pub fn run_setup(cfg: &ExperimentConfig, seed: u64) -> Result<RunSetup> {
    let mut settings = cfg.learner.clone();
    let model = match cfg.experiment {
        Experiment::Exp4Random => {
            let mut aux = RngStream::auxiliary(seed);
            settings.gamma0 = aux.uniform(0.0, 5.0);
            settings.cov0 = aux.uniform(0.0, 5.0);
            Model::new(sample_random_model(seed))?
        }
        _ => Model::new(cfg.model.clone())?,
    };
    Ok(RunSetup { seed, model, settings })
}

/// The learners compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Adaptive,
    Fixed,
    ModelBased,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Adaptive => "adaptive",
            Algorithm::Fixed => "fixed",
            Algorithm::ModelBased => "model_based",
        }
    }
}

/// Trains one learner on one run.
pub fn run_single(setup: &RunSetup, algorithm: Algorithm, n_iters: usize, thinning: Thinning) -> Result<RunLog> {
    let s = &setup.settings;
    let model = &setup.model;
    match algorithm {
        Algorithm::Adaptive => train_with(
            model,
            &s.learner_config(model),
            &s.init_state(model),
            n_iters,
            setup.seed,
            Exploration::Adaptive,
            thinning,
        ),
        Algorithm::Fixed => run_fixed(model, &s.learner_config(model), &s.init_state(model), n_iters, setup.seed, thinning),
        Algorithm::ModelBased => run_model_based(model, &s.model_based_config(), n_iters, setup.seed, thinning),
    }
}

/// Compact per-run series used for aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSeries {
    pub seed: u64,
    pub n: Vec<usize>,
    pub cov_sq: Vec<f64>,
    pub phi_err_sq: Vec<f64>,
    pub cum_regret: Vec<f64>,
    pub ok: Vec<bool>,
}

impl RunSeries {
    pub fn from_log(seed: u64, log: &RunLog, phi_opt: &DVector<f64>) -> Self {
        let r = &log.records;
        RunSeries {
            seed,
            n: r.iter().map(|x| x.n).collect(),
            cov_sq: r.iter().map(|x| x.cov.norm_squared()).collect(),
            phi_err_sq: r.iter().map(|x| (&x.phi - phi_opt).norm_squared()).collect(),
            cum_regret: r.iter().map(|x| x.cum_regret).collect(),
            ok: r.iter().map(|x| x.status == Status::Ok).collect(),
        }
    }
}

/// Across-run curves on the common record grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateSeries {
    pub n: Vec<usize>,
    /// Mean over runs of `|Γ_n|²`.
    pub mse_cov: Vec<f64>,
    /// Mean over runs of `|φ_n - φ*|²`.
    pub mse_phi: Vec<f64>,
    /// Median over runs of the cumulative regret.
    pub median_cum_regret: Vec<f64>,
    pub runs_ok: Vec<usize>,
    /// Runs that entered the aggregate.
    pub runs: usize,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

/// Streaming fold of per-run series in run order: sums for the means, one
/// column of cumulative regrets per record for the median.
#[derive(Debug, Clone, Default)]
pub struct Aggregator {
    n: Vec<usize>,
    sum_cov: Vec<f64>,
    sum_phi: Vec<f64>,
    runs_ok: Vec<usize>,
    regrets: Vec<Vec<f64>>,
    runs: usize,
}

impl Aggregator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, run: &RunSeries) -> Result<()> {
        if self.runs == 0 {
            let k = run.n.len();
            self.n = run.n.clone();
            self.sum_cov = vec![0.0; k];
            self.sum_phi = vec![0.0; k];
            self.runs_ok = vec![0; k];
            self.regrets = vec![Vec::new(); k];
        } else if run.n != self.n {
            return Err(Error::DimensionMismatch("runs recorded different iteration grids".into()));
        }
        for i in 0..self.n.len() {
            self.sum_cov[i] += run.cov_sq[i];
            self.sum_phi[i] += run.phi_err_sq[i];
            self.runs_ok[i] += usize::from(run.ok[i]);
            self.regrets[i].push(run.cum_regret[i]);
        }
        self.runs += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<AggregateSeries> {
        if self.runs == 0 {
            return Err(Error::AllRunsFailed(0));
        }
        let m = self.runs as f64;
        Ok(AggregateSeries {
            mse_cov: self.sum_cov.iter().map(|v| v / m).collect(),
            mse_phi: self.sum_phi.iter().map(|v| v / m).collect(),
            median_cum_regret: self.regrets.iter_mut().map(|c| median(c)).collect(),
            n: self.n,
            runs_ok: self.runs_ok,
            runs: self.runs,
        })
    }
}

/// Means of the squared errors and median of the cumulative regret across
/// runs. All runs must share the record grid.
pub fn aggregate(runs: &[RunSeries]) -> Result<AggregateSeries> {
    let mut acc = Aggregator::new();
    for r in runs {
        acc.push(r)?;
    }
    acc.finish()
}

/// Ordinary least squares of `log₁₀ v` on `log₁₀ n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

/// Fits a power law to the points of `series` with `n` in `window`. More than
/// [`MAX_FIT_POINTS`] candidates are thinned to the points nearest an evenly
/// log-spaced grid so that dense late iterations do not dominate.
pub fn loglog_slope(series: &[(f64, f64)], window: (f64, f64)) -> Result<LogLogFit> {
    let mut pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(n, v)| *n >= window.0 && *n <= window.1 && *n > 0.0 && *v > 0.0 && v.is_finite())
        .map(|(n, v)| (n.log10(), v.log10()))
        .collect();
    if pts.is_empty() {
        return Err(Error::DegenerateFit("no positive points in the fit window"));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.len() > MAX_FIT_POINTS {
        pts = thin_log_spaced(&pts, MAX_FIT_POINTS);
    }
    if pts.len() < 2 {
        return Err(Error::DegenerateFit("fewer than two points in the fit window"));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFit("all points share one iteration index"));
    }
    let flat = pts.iter().all(|p| p.1 == pts[0].1);
    let slope = if flat { 0.0 } else { sxy / sxx };
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    Ok(LogLogFit {
        slope,
        intercept,
        r2,
        points: pts.len(),
    })
}

fn thin_log_spaced(pts: &[(f64, f64)], target: usize) -> Vec<(f64, f64)> {
    let (lo, hi) = (pts[0].0, pts[pts.len() - 1].0);
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(target);
    let mut last: Option<usize> = None;
    let mut j = 0;
    for i in 0..target {
        let g = lo + (hi - lo) * i as f64 / (target - 1) as f64;
        while j + 1 < pts.len() && (pts[j + 1].0 - g).abs() <= (pts[j].0 - g).abs() {
            j += 1;
        }
        if last != Some(j) {
            out.push(pts[j]);
            last = Some(j);
        }
    }
    out
}

/// Slopes of the three aggregate curves over [`FIT_WINDOW`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeSummary {
    pub mse_cov: Option<LogLogFit>,
    pub mse_phi: Option<LogLogFit>,
    pub regret: Option<LogLogFit>,
}

impl AggregateSeries {
    pub fn slopes(&self, window: (f64, f64)) -> SlopeSummary {
        let fit = |v: &[f64]| {
            let pts: Vec<(f64, f64)> = self.n.iter().zip(v).map(|(n, v)| (*n as f64, *v)).collect();
            loglog_slope(&pts, window).ok()
        };
        SlopeSummary {
            mse_cov: fit(&self.mse_cov),
            mse_phi: fit(&self.mse_phi),
            regret: fit(&self.median_cum_regret),
        }
    }

    /// Position of the record for iteration `n`, if it was kept.
    pub fn index_of(&self, n: usize) -> Option<usize> {
        self.n.binary_search(&n).ok()
    }
}

/// Results for one learner within an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmResult {
    pub algorithm: Algorithm,
    pub aggregate: AggregateSeries,
    pub failed_runs: usize,
    /// Per-run series of the first runs, for trajectory inspection.
    pub runs: Vec<RunSeries>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub label: String,
    pub results: Vec<AlgorithmResult>,
}

impl ExperimentOutcome {
    pub fn result(&self, algorithm: Algorithm) -> Option<&AlgorithmResult> {
        self.results.iter().find(|r| r.algorithm == algorithm)
    }
}

/// Formats a float as the shortest decimal that reads back to the same value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn fmt_vec(v: &DVector<f64>) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";")
}

fn fmt_mat(m: &DMatrix<f64>) -> String {
    if m.len() == 1 {
        return fmt_f64(m[(0, 0)]);
    }
    m.transpose().iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";")
}

pub const RUN_CSV_HEADER: &str = "n,phi,Gamma,gamma,instant_regret,cum_regret,status";
pub const AGGREGATE_CSV_HEADER: &str = "n,mse_Gamma,mse_phi,median_cum_regret,runs_ok";

/// One row per kept iteration; vector and matrix entries are `;`-separated.
pub fn run_csv(log: &RunLog) -> String {
    let mut s = String::with_capacity(64 * (log.records.len() + 1));
    s.push_str(RUN_CSV_HEADER);
    s.push('\n');
    for r in &log.records {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.n,
            fmt_vec(&r.phi),
            fmt_mat(&r.cov),
            fmt_f64(r.gamma),
            fmt_f64(r.instant_regret),
            fmt_f64(r.cum_regret),
            r.status.as_str()
        ));
    }
    s
}

pub fn aggregate_csv(agg: &AggregateSeries) -> String {
    let mut s = String::with_capacity(64 * (agg.n.len() + 1));
    s.push_str(AGGREGATE_CSV_HEADER);
    s.push('\n');
    for i in 0..agg.n.len() {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            agg.n[i],
            fmt_f64(agg.mse_cov[i]),
            fmt_f64(agg.mse_phi[i]),
            fmt_f64(agg.median_cum_regret[i]),
            agg.runs_ok[i]
        ));
    }
    s
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Runs kept in memory for trajectory plots and per-run inspection.
const KEEP_RUN_SERIES: usize = 1_000;
/// Runs simulated concurrently before their results are folded.
const CHUNK: usize = 256;

fn algorithms_for(experiment: Experiment) -> &'static [Algorithm] {
    match experiment {
        Experiment::Exp1Validate => &[Algorithm::Adaptive],
        Experiment::Exp2ModelBased => &[Algorithm::ModelBased],
        Experiment::Exp3Scenario(_) | Experiment::Exp4Random => &[Algorithm::Adaptive, Algorithm::Fixed],
    }
}

/// Runs every seed of `cfg` for each learner the experiment compares,
/// aggregates across runs, and writes CSVs when an output directory is set.
///
/// Files: `<out>/<label>/<algorithm>_aggregate.csv` and, with `write_runs`,
/// `<out>/<label>/runs/<algorithm>_seed<S>.csv`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    if cfg.n_runs == 0 {
        return Err(Error::Config("n_runs must be at least 1".into()));
    }
    let label = cfg.experiment.label();
    let thinning = Thinning::LogSpaced;
    let seeds: Vec<u64> = cfg.seeds().collect();
    let dir = cfg.output_dir.as_ref().map(|d| d.join(&label));
    let mut results = Vec::new();

    for &algorithm in algorithms_for(cfg.experiment) {
        let mut acc = Aggregator::new();
        let mut series = Vec::new();
        let mut failed = 0;
        let mut first_error = None;
        for chunk in seeds.chunks(CHUNK) {
            let outcomes: Vec<Result<(RunSeries, Option<String>)>> = chunk
                .par_iter()
                .map(|&seed| {
                    let setup = run_setup(cfg, seed)?;
                    let log = run_single(&setup, algorithm, cfg.n_iters, thinning)?;
                    let csv = (dir.is_some() && cfg.write_runs).then(|| run_csv(&log));
                    Ok((RunSeries::from_log(seed, &log, &phi_star(&setup.model)), csv))
                })
                .collect();
            for (seed, outcome) in chunk.iter().zip(outcomes) {
                match outcome {
                    Ok((s, csv)) => {
                        if let (Some(d), Some(csv)) = (&dir, csv) {
                            write_file(&d.join("runs").join(format!("{}_seed{seed}.csv", algorithm.name())), &csv)?;
                        }
                        acc.push(&s)?;
                        if series.len() < KEEP_RUN_SERIES {
                            series.push(s);
                        }
                    }
                    Err(e) => {
                        failed += 1;
                        first_error.get_or_insert(e);
                    }
                }
            }
        }
        if acc.runs == 0 {
            return Err(match first_error {
                Some(e @ Error::Config(_)) => e,
                _ => Error::AllRunsFailed(cfg.n_runs),
            });
        }
        let agg = acc.finish()?;
        if let Some(d) = &dir {
            write_file(&d.join(format!("{}_aggregate.csv", algorithm.name())), &aggregate_csv(&agg))?;
        }
        results.push(AlgorithmResult {
            algorithm,
            aggregate: agg,
            failed_runs: failed,
            runs: series,
        });
    }
    Ok(ExperimentOutcome { label, results })
}
