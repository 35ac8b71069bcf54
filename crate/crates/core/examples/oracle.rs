//! Closed-form optimal gain, value and regret for the unit model.

use lq_explore::oracle::{instant_regret, jbar, solve_k3, OracleSolution};
use lq_explore::{Model, ModelParams};
use nalgebra::{DMatrix, DVector};

fn main() -> lq_explore::Result<()> {
    let model = Model::unit();
    let sol = OracleSolution::new(&model);
    println!("phi* = {}", sol.phi_star[0]);
    println!("a(phi*) = {}, optimal value = {}", sol.a_star, sol.jbar_opt);
    println!("k1(0) = {}, k3(0) at gamma = 1: {}", sol.k1.value(0.0), solve_k3(&model, 1.0).value(0.0));

    println!("\n   phi    Gamma      Jbar        regret");
    for phi in [-3.0, -2.5, -2.0, -1.5, -1.1] {
        for cov in [0.0, 0.1] {
            let (p, g) = (DVector::from_element(1, phi), DMatrix::from_element(1, 1, cov));
            println!("{phi:6.2} {cov:6.2} {:11.6} {:11.3e}", jbar(&p, &g, &model), instant_regret(&p, &g, &model));
        }
    }

    let other = Model::new(ModelParams::scalar(0.3, 2.0, -0.5, 1.5, 1.0, 0.5, 1.0, 2.0))?;
    println!("\nanother model: phi* = {}", OracleSolution::new(&other).phi_star[0]);
    Ok(())
}
