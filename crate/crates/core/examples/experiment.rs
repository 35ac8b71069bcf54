//! A small seeded multi-run experiment with CSV output.

use lq_explore::harness::{run_experiment, Experiment, ExperimentConfig, Scale, Scenario, FIT_WINDOW};

fn main() -> lq_explore::Result<()> {
    let out = std::env::temp_dir().join("lq-explore-example");
    let mut cfg = ExperimentConfig::preset(Experiment::Exp3Scenario(Scenario::Excessive), Scale::Small);
    cfg.n_runs = 8;
    cfg.n_iters = 2_000;
    cfg.output_dir = Some(out.clone());
    let outcome = run_experiment(&cfg)?;
    for r in &outcome.results {
        let agg = &r.aggregate;
        let last = agg.n.len() - 1;
        println!(
            "{:10} runs ok {} median cumulative regret {:.4e} mse Gamma {:.4e}",
            r.algorithm.name(),
            agg.runs_ok[last],
            agg.median_cum_regret[last],
            agg.mse_cov[last]
        );
        let slopes = agg.slopes((100.0, FIT_WINDOW.1));
        if let Some(fit) = slopes.regret {
            println!("           regret slope over n >= 100: {:.3}", fit.slope);
        }
    }
    println!("CSV files under {}", out.join(&outcome.label).display());
    Ok(())
}
