use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use lq_explore::config::ConfigFile;
use lq_explore::harness::{run_experiment, Experiment, ExperimentConfig, Scale, Scenario, FIT_WINDOW};
use lq_explore::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Which {
    Exp1,
    Exp2,
    Exp3,
    Exp4,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Excessive,
    Insufficient,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScaleArg {
    Small,
    Paper,
}

/// Run the exploration experiments and write aggregate and per-run CSVs.
#[derive(Debug, Parser)]
#[command(name = "lq-explore", version)]
struct Cli {
    experiment: Which,
    /// Exploration scenario for exp3.
    #[arg(long, value_enum)]
    scenario: Option<ScenarioArg>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    /// Seed of the first run; run i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "paper")]
    scale: ScaleArg,
    #[arg(long)]
    out: Option<PathBuf>,
    /// key = value overrides applied before the command-line flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Skip the per-run CSV files.
    #[arg(long)]
    no_run_files: bool,
}

fn build(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let experiment = match (cli.experiment, cli.scenario) {
        (Which::Exp1, None) => Experiment::Exp1Validate,
        (Which::Exp2, None) => Experiment::Exp2ModelBased,
        (Which::Exp3, Some(ScenarioArg::Excessive)) => Experiment::Exp3Scenario(Scenario::Excessive),
        (Which::Exp3, Some(ScenarioArg::Insufficient)) => Experiment::Exp3Scenario(Scenario::Insufficient),
        (Which::Exp3, None) => return Err(Error::Config("exp3 requires --scenario".into())),
        (Which::Exp4, None) => Experiment::Exp4Random,
        (_, Some(_)) => return Err(Error::Config("--scenario applies to exp3 only".into())),
    };
    let scale = match cli.scale {
        ScaleArg::Small => Scale::Small,
        ScaleArg::Paper => Scale::Paper,
    };
    let mut cfg = ExperimentConfig::preset(experiment, scale);
    if let Some(path) = &cli.config {
        let file = ConfigFile::load(path).map_err(|e| match e {
            Error::Io { .. } => Error::Config(e.to_string()),
            e => e,
        })?;
        file.apply(&mut cfg)?;
    }
    if let Some(r) = cli.runs {
        cfg.n_runs = r;
    }
    if let Some(n) = cli.iters {
        cfg.n_iters = n;
    }
    if let Some(s) = cli.seed {
        cfg.base_seed = s;
    }
    if cfg.n_runs == 0 || cfg.n_iters == 0 {
        return Err(Error::Config("--runs and --iters must be at least 1".into()));
    }
    cfg.output_dir = cli.out.clone();
    cfg.write_runs = !cli.no_run_files;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match build(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let outcome = match run_experiment(&cfg) {
        Ok(o) => o,
        Err(e @ Error::AllRunsFailed(_)) => {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let window = (FIT_WINDOW.0.min(cfg.n_iters as f64 / 20.0), FIT_WINDOW.1);
    println!("{}: {} runs x {} iterations", outcome.label, cfg.n_runs, cfg.n_iters);
    for r in &outcome.results {
        let agg = &r.aggregate;
        let last = agg.n.len() - 1;
        let s = agg.slopes(window);
        let fmt = |f: &Option<lq_explore::harness::LogLogFit>| f.as_ref().map_or("n/a".to_string(), |f| format!("{:.3}", f.slope));
        println!(
            "  {:<12} failed {:>5}  final mse_Gamma {:.4e}  mse_phi {:.4e}  median regret {:.4e}  slopes Gamma {} phi {} regret {}",
            r.algorithm.name(),
            r.failed_runs,
            agg.mse_cov[last],
            agg.mse_phi[last],
            agg.median_cum_regret[last],
            fmt(&s.mse_cov),
            fmt(&s.mse_phi),
            fmt(&s.regret),
        );
    }
    ExitCode::SUCCESS
}
