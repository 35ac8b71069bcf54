//! Fixed-schedule and model-based learners next to the adaptive one.

use lq_explore::baselines::{estimate_params, run_fixed, run_model_based, ModelBasedConfig};
use lq_explore::harness::LearnerSettings;
use lq_explore::learner::{train_with, Exploration, RunLog, Thinning};
use lq_explore::model::PolicyParams;
use lq_explore::sim::{rollout, RngStream};
use lq_explore::Model;

fn summary(name: &str, log: &RunLog) {
    let r = log.records.last().unwrap();
    println!("{name:12} phi {:8.4} Gamma {:10.3e} cum regret {:10.3}", r.phi[0], r.cov[(0, 0)], r.cum_regret);
}

fn main() -> lq_explore::Result<()> {
    let model = Model::unit();
    let mut rng = RngStream::new(3);
    let data: Vec<_> = (0..2_000)
        .map(|_| rollout(&PolicyParams::scalar(-1.5, 0.5), 0.01, &model, &mut rng))
        .collect::<Result<_, _>>()?;
    let est = estimate_params(&data)?;
    println!(
        "least squares on 2000 episodes: A {:.3} B {:.3} C {:.3} D {:.3}, plug-in gain {:.3}\n",
        est.a_hat,
        est.b_hat[0],
        est.c_hat[0],
        est.d_hat[0][0],
        est.plug_in_gain()[0]
    );

    let iters = 5_000;
    let s = LearnerSettings::default();
    let (cfg, init) = (s.learner_config(&model), s.init_state(&model));
    summary("adaptive", &train_with(&model, &cfg, &init, iters, 1, Exploration::Adaptive, Thinning::LogSpaced)?);
    summary("fixed", &run_fixed(&model, &cfg, &init, iters, 1, Thinning::LogSpaced)?);
    summary("model-based", &run_model_based(&model, &ModelBasedConfig::default(), iters, 1, Thinning::LogSpaced)?);
    Ok(())
}
