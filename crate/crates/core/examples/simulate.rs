//! Euler–Maruyama episodes under a Gaussian policy.

use lq_explore::model::PolicyParams;
use lq_explore::sim::{rollout, RngStream};
use lq_explore::Model;

fn main() -> lq_explore::Result<()> {
    let model = Model::unit();
    let mut rng = RngStream::new(42);
    for (phi, cov) in [(-2.0, 1e-9), (-2.0, 0.5), (0.0, 0.5)] {
        let traj = rollout(&PolicyParams::scalar(phi, cov), 0.01, &model, &mut rng)?;
        let steps = traj.steps();
        print!("phi {phi:5.1} Gamma {cov:7.1e}:");
        for k in (0..=steps).step_by(steps / 5) {
            print!("  x({:.1}) = {:8.4}", traj.times[k], traj.states[k]);
        }
        println!();
    }
    println!("normal draws consumed: {}", rng.draws());
    Ok(())
}
