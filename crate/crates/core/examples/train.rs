//! Adaptive actor-critic training on the unit model with the tuned settings.

use lq_explore::harness::LearnerSettings;
use lq_explore::learner::train;
use lq_explore::oracle::phi_star;
use lq_explore::Model;

fn main() -> lq_explore::Result<()> {
    let iters: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let model = Model::unit();
    let settings = LearnerSettings::default();
    let log = train(&model, &settings.learner_config(&model), &settings.init_state(&model), iters, 7)?;
    println!("phi* = {}", phi_star(&model)[0]);
    println!("       n        phi      Gamma      gamma   cum regret");
    let mut n = 1;
    while n <= iters {
        let r = &log.records[n - 1];
        println!("{:8} {:10.5} {:10.5} {:10.5} {:12.3}", r.n, r.phi[0], r.cov[(0, 0)], r.gamma, r.cum_regret);
        n *= 10;
    }
    let s = &log.final_state;
    println!("final: phi {:.5} Gamma {:.5} gamma {:.5}, diverged episodes {}", s.policy.phi[0], s.policy.cov[(0, 0)], s.critic.temperature, log.diverged);
    Ok(())
}
