use lq_explore::baselines::estimate_params;
use lq_explore::config::ConfigFile;
use lq_explore::harness::{loglog_slope, run_setup, run_single, Algorithm, Experiment, ExperimentConfig, RunSeries, Scale, Scenario};
use lq_explore::learner::{train, CovSet, LearnerConfig, PhiSet, ScheduleSet, Thinning, TrainState};
use lq_explore::model::{validate_model, CriticState, Model, ModelParams, PolicyParams};
use lq_explore::oracle::{a_of_phi, f_of_a, g_of_a, jbar, phi_star, ZERO_RATE_BRANCH};
use lq_explore::policy::{project_ball, project_gamma, CriticParameterization};
use lq_explore::sim::{rollout, RngStream};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn coef() -> impl Strategy<Value = f64> {
    -5.0..5.0f64
}

fn scalar_model() -> impl Strategy<Value = ModelParams> {
    (coef(), coef(), coef(), coef().prop_filter("D bounded away from 0", |d| d.abs() > 0.05))
        .prop_map(|(a, b, c, d)| ModelParams::scalar(a, b, c, d, 1.0, 1.0, 1.0, 1.0))
}

fn two_control_model() -> impl Strategy<Value = ModelParams> {
    (coef(), coef(), coef(), coef(), coef(), coef(), coef(), coef()).prop_map(|(a, b1, b2, c1, c2, d11, d12, d22)| {
        ModelParams {
            a,
            b: DVector::from_vec(vec![b1, b2]),
            c: vec![c1, c2],
            d: vec![DVector::from_vec(vec![d11 + 6.0, d12]), DVector::from_vec(vec![0.0, d22 + 6.0])],
            q: 1.0,
            h: 1.0,
            x0: 1.0,
            horizon: 1.0,
        }
    })
}

fn symmetric2() -> impl Strategy<Value = DMatrix<f64>> {
    (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64).prop_map(|(a, b, c)| DMatrix::from_row_slice(2, 2, &[a, b, b, c]))
}

fn eig2(m: &DMatrix<f64>) -> (f64, f64) {
    let (a, b, c) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
    let mid = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    (mid - rad, mid + rad)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn validation_is_idempotent(p in two_control_model()) {
        let once = validate_model(&p).unwrap();
        let twice = validate_model(&p).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn lambda_max_matches_closed_form(p in two_control_model()) {
        let dm = validate_model(&p).unwrap();
        let (lo, hi) = eig2(&dm.ddt);
        prop_assert!((dm.lambda_max_ddt - hi).abs() <= 1e-9 * hi.abs().max(1.0));
        prop_assert!((dm.lambda_min_ddt - lo).abs() <= 1e-9 * hi.abs().max(1.0));
    }

    #[test]
    fn optimal_gain_maximizes_value(p in scalar_model(), phi in -20.0..20.0f64) {
        let model = Model::new(p).unwrap();
        let zero = DMatrix::zeros(1, 1);
        let best = jbar(&phi_star(&model), &zero, &model);
        let other = jbar(&DVector::from_element(1, phi), &zero, &model);
        prop_assert!(best >= other - 1e-12 * best.abs().max(1.0), "{best} < {other}");
    }

    #[test]
    fn value_is_affine_in_covariance(p in scalar_model(), phi in -5.0..5.0f64, g1 in 0.0..5.0f64, g2 in 0.0..5.0f64, t in 0.0..1.0f64) {
        let model = Model::new(p).unwrap();
        let phi = DVector::from_element(1, phi);
        let at = |g: f64| jbar(&phi, &DMatrix::from_element(1, 1, g), &model);
        let mixed = at(t * g1 + (1.0 - t) * g2);
        let combo = t * at(g1) + (1.0 - t) * at(g2);
        prop_assert!((mixed - combo).abs() <= 1e-12 * mixed.abs().max(1.0));
    }

    #[test]
    fn f_and_g_are_non_increasing(a in -30.0..30.0f64, step in 1e-6..1.0f64) {
        let p = ModelParams::unit();
        prop_assert!(f_of_a(a + step, &p) <= f_of_a(a, &p) + 1e-12 * f_of_a(a, &p).abs());
        prop_assert!(g_of_a(a + step, &p) <= g_of_a(a, &p) + 1e-12 * g_of_a(a, &p).abs());
    }

    #[test]
    fn zero_rate_branch_is_continuous(q in 0.0..3.0f64, h in 0.0..3.0f64, t in 0.1..3.0f64) {
        let p = ModelParams::scalar(0.0, 1.0, 0.0, 1.0, q, h, 1.0, t);
        for a in [ZERO_RATE_BRANCH * 0.5, ZERO_RATE_BRANCH * 2.0, -ZERO_RATE_BRANCH * 2.0] {
            prop_assert!((f_of_a(a, &p) - f_of_a(0.0, &p)).abs() <= 1e-6);
            prop_assert!((g_of_a(a, &p) - g_of_a(0.0, &p)).abs() <= 1e-6);
        }
    }

    #[test]
    fn growth_rate_gap_is_quadratic_form(p in scalar_model(), phi in -5.0..5.0f64) {
        let model = Model::new(p).unwrap();
        let star = phi_star(&model);
        let d2 = model.derived.ddt[(0, 0)];
        let gap = a_of_phi(&DVector::from_element(1, phi), &model.params) - a_of_phi(&star, &model.params);
        let expect = d2 * (phi - star[0]).powi(2);
        prop_assert!((gap - expect).abs() <= 1e-9 * (1.0 + expect.abs() + a_of_phi(&star, &model.params).abs()));
    }

    #[test]
    fn band_projection_lands_in_band(m in symmetric2(), lower in 1e-3..1.0f64, cap in 2.0..20.0f64) {
        let out = project_gamma(&m, lower, cap, None);
        prop_assert!((&out - out.transpose()).amax() <= 1e-12);
        let (lo, _) = eig2(&out);
        prop_assert!(lo >= lower * (1.0 - 1e-9));
        prop_assert!(out.norm() <= cap * (1.0 + 1e-9));
    }

    #[test]
    fn interval_projection_lands_in_interval(m in symmetric2(), lo in 1e-3..1.0f64, width in 0.0..5.0f64) {
        let hi = lo + width;
        let out = project_gamma(&m, 0.0, f64::INFINITY, Some((lo, hi)));
        let (e0, e1) = eig2(&out);
        prop_assert!(e0 >= lo - 1e-9 && e1 <= hi + 1e-9);
    }

    #[test]
    fn interval_projection_is_non_expansive(m1 in symmetric2(), m2 in symmetric2(), lo in 1e-3..1.0f64, width in 0.0..5.0f64) {
        let iv = Some((lo, lo + width));
        let d_out = (project_gamma(&m1, 0.0, f64::INFINITY, iv) - project_gamma(&m2, 0.0, f64::INFINITY, iv)).norm();
        prop_assert!(d_out <= (&m1 - &m2).norm() * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn ball_projection_is_non_expansive(v in prop::collection::vec(-50.0..50.0f64, 3), w in prop::collection::vec(-50.0..50.0f64, 3), r in 0.1..30.0f64) {
        let (v, w) = (DVector::from_vec(v), DVector::from_vec(w));
        let (pv, pw) = (project_ball(&v, r), project_ball(&w, r));
        prop_assert!(pv.norm() <= r * (1.0 + 1e-12));
        prop_assert!((&pv - &pw).norm() <= (&v - &w).norm() * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn plug_in_gain_at_truth_is_optimal(p in scalar_model()) {
        let model = Model::new(p.clone()).unwrap();
        let est = lq_explore::baselines::ParamEstimates {
            a_hat: p.a,
            b_hat: p.b.clone(),
            c_hat: p.c.clone(),
            d_hat: p.d.clone(),
        };
        let gain = est.plug_in_gain();
        let star = phi_star(&model);
        prop_assert!((gain[0] - star[0]).abs() <= 1e-9 * star[0].abs().max(1.0));
    }

    #[test]
    fn config_round_trips(a in -5.0..5.0f64, d in 0.5..5.0f64, phi0 in -3.0..3.0f64, iters in 1usize..100_000) {
        let text = format!("A = {a}\nD = {d}\nphi0 = {phi0}\nn_iters = {iters}\n");
        let file = ConfigFile::parse(&text).unwrap();
        let mut cfg = ExperimentConfig::preset(Experiment::Exp1Validate, Scale::Small);
        file.apply(&mut cfg).unwrap();
        prop_assert_eq!(cfg.model.a, a);
        prop_assert_eq!(cfg.model.d[0][0], d);
        prop_assert_eq!(cfg.learner.phi0, phi0);
        prop_assert_eq!(cfg.n_iters, iters);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn grid_spacing_is_exact(k in 1usize..400, seed in any::<u64>()) {
        let dt = 1.0 / k as f64;
        let traj = rollout(&PolicyParams::scalar(-2.0, 0.5), dt, &Model::unit(), &mut RngStream::new(seed)).unwrap();
        prop_assert_eq!(traj.steps(), k);
        for (i, t) in traj.times.iter().enumerate() {
            prop_assert_eq!(*t, i as f64 * dt);
        }
    }

    #[test]
    fn rollouts_are_deterministic(p in two_control_model(), seed in any::<u64>()) {
        let model = Model::new(p).unwrap();
        let pol = PolicyParams::new(DVector::from_vec(vec![-0.1, 0.2]), DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.3])).unwrap();
        let a = rollout(&pol, 0.01, &model, &mut RngStream::new(seed));
        let b = rollout(&pol, 0.01, &model, &mut RngStream::new(seed));
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "outcomes differ"),
        }
    }

    #[test]
    fn duplicated_data_gives_same_estimates(seed in any::<u64>()) {
        let model = Model::unit();
        let mut rng = RngStream::new(seed);
        let trajs: Vec<_> = (0..20).map(|_| rollout(&PolicyParams::scalar(-1.5, 0.5), 0.01, &model, &mut rng).unwrap()).collect();
        let once = estimate_params(&trajs).unwrap();
        let doubled: Vec<_> = trajs.iter().chain(trajs.iter()).cloned().collect();
        let twice = estimate_params(&doubled).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-8 * x.abs().max(1.0);
        prop_assert!(close(once.a_hat, twice.a_hat));
        prop_assert!(close(once.b_hat[0], twice.b_hat[0]));
        prop_assert!(close(once.c_hat[0], twice.c_hat[0]));
        prop_assert!(close(once.d_hat[0][0], twice.d_hat[0][0]));
    }
}

fn theorem_config(model: &Model) -> LearnerConfig {
    LearnerConfig {
        schedules: ScheduleSet::theorem(1.0, 4.0, model.default_c_gamma()),
        phi_set: PhiSet::Ball,
        cov_set: CovSet::Band,
        critic: CriticParameterization::constant(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn learner_respects_its_sets(seed in any::<u64>(), phi0 in -1.0..1.0f64, cov0 in 0.1..1.0f64) {
        let model = Model::unit();
        let cfg = theorem_config(&model);
        let init = TrainState { policy: PolicyParams::scalar(phi0, cov0), critic: CriticState::constant(1.0) };
        let log = train(&model, &cfg, &init, 300, seed).unwrap();
        let c2 = 1.0;
        for r in log.records.iter().skip(1) {
            let n = r.n;
            prop_assert!(r.phi.norm() <= cfg.schedules.c_phi.at(n) * (1.0 + 1e-12));
            let g = r.cov[(0, 0)];
            prop_assert!(g >= (1.0 / cfg.schedules.b.at(n)) * (1.0 - 1e-12));
            prop_assert!(g <= cfg.schedules.c_cov.at(n) * (1.0 + 1e-12));
            // The temperature used at episode n is set from b at the previous step.
            prop_assert!(r.gamma <= cfg.schedules.c_gamma * c2 / cfg.schedules.b.at(n - 1) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn cumulative_regret_never_decreases(seed in 0u64..1_000_000) {
        let mut cfg = ExperimentConfig::preset(Experiment::Exp3Scenario(Scenario::Excessive), Scale::Small);
        cfg.n_iters = 400;
        let setup = run_setup(&cfg, seed).unwrap();
        let star = phi_star(&setup.model);
        for alg in [Algorithm::Adaptive, Algorithm::Fixed] {
            let log = run_single(&setup, alg, cfg.n_iters, Thinning::All).unwrap();
            let series = RunSeries::from_log(seed, &log, &star);
            for w in series.cum_regret.windows(2) {
                prop_assert!(w[1] >= w[0] || (w[0].is_infinite() && w[1].is_infinite()));
            }
        }
    }

    #[test]
    fn noisy_power_law_slope_is_recovered(seed in any::<u64>()) {
        let mut rng = RngStream::new(seed);
        let pts: Vec<(f64, f64)> = (1..=100_000)
            .map(|n| {
                let n = n as f64;
                (n, n.powf(0.73) * (1.0 + 0.01 * rng.normal()))
            })
            .collect();
        let fit = loglog_slope(&pts, (5_000.0, 100_000.0)).unwrap();
        prop_assert!((fit.slope - 0.73).abs() <= 0.01, "slope {}", fit.slope);
    }
}

#[test]
fn one_infinite_run_leaves_median_finite() {
    let runs: Vec<RunSeries> = (0..101)
        .map(|i| RunSeries {
            seed: i,
            n: vec![0, 1],
            cov_sq: vec![1.0, 1.0],
            phi_err_sq: vec![1.0, 1.0],
            cum_regret: if i == 0 { vec![1.0, f64::INFINITY] } else { vec![1.0, 2.0 + i as f64 * 1e-3] },
            ok: vec![true, i != 0],
        })
        .collect();
    let agg = lq_explore::harness::aggregate(&runs).unwrap();
    assert!(agg.median_cum_regret[1].is_finite());
    assert!((agg.median_cum_regret[1] - 2.051).abs() < 1e-9, "{}", agg.median_cum_regret[1]);
}
