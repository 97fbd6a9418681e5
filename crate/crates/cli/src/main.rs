use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rpo_core::bounds::{generalization_lower_bound, rademacher_bound};
use rpo_core::experiment::{
    derive_seed, evaluate_policy, fit_method, policy_thresholds, run_experiment, simulate_sample, write_csv,
    ExperimentConfig, Method, SeedRole, STAGES_HEADER, StageRow,
};
use rpo_core::io::{read_weight_file, write_trajectories, write_weight_file, PolicyWeights};
use rpo_core::{BasisSpec, BoundInputs, NormType};

/// Learn and evaluate optimal-stopping policies for knock-out max-call
/// options.
#[derive(Parser)]
#[command(name = "rpo", version)]
struct Cli {
    /// Seed; for experiments it replaces `sample.base_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate price paths and cache them in a binary file.
    Simulate(SampleArgs),
    /// Fit one method on a training sample and write its weights.
    Fit(FitArgs),
    /// Score stored weights on a fresh sample.
    Evaluate(EvaluateArgs),
    /// Run a replicated benchmark from a config file.
    Experiment(ExperimentArgs),
    /// Print per-period payoff thresholds of (one, payoff) weights.
    Thresholds(ThresholdArgs),
    /// Print Rademacher bounds and generalization lower bounds.
    Bounds(BoundArgs),
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    config: PathBuf,
    /// Defaults to the first configured initial price.
    #[arg(long)]
    initial_price: Option<f64>,
    #[arg(long)]
    n_paths: Option<usize>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    sample: SampleArgs,
    #[arg(long)]
    method: Method,
    #[arg(long)]
    basis: String,
    #[arg(long)]
    standardize: bool,
    /// Also write per-stage diagnostics.
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    sample: SampleArgs,
    #[arg(long)]
    weights: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    n_reps: Option<usize>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    verbose: bool,
    #[arg(long)]
    emit_thresholds: bool,
    #[arg(long)]
    emit_bounds: bool,
    /// Write 0 instead of measured fit times.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct ThresholdArgs {
    #[arg(long)]
    weights: PathBuf,
    /// Per-period discount factor used by LSM weights.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long, default_value = "L2")]
    norm: NormType,
    #[arg(long)]
    radius_b: f64,
    #[arg(long)]
    q: f64,
    #[arg(long)]
    g: f64,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    t: usize,
    #[arg(long)]
    n_paths: usize,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Sample reward plugged into the lower bounds.
    #[arg(long, default_value_t = 0.0)]
    j_hat: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Simulate(args) => {
            let cfg = ExperimentConfig::load(&args.config)?;
            let seed = cli.seed.unwrap_or_else(|| derive_seed(cfg.sample.base_seed, 0, SeedRole::Train));
            let (price, n) = sample_params(&cfg, &args, cfg.sample.n_train);
            let sample = simulate_sample(&cfg.instance, price, n, seed)?;
            std::fs::create_dir_all(&cli.out_dir)?;
            let path = cli.out_dir.join("trajectories.bin");
            write_trajectories(&path, &sample.trajectories)?;
            println!("{}", path.display());
        }
        Command::Fit(args) => {
            let cfg = ExperimentConfig::load(&args.sample.config)?;
            let seed = cli.seed.unwrap_or_else(|| derive_seed(cfg.sample.base_seed, 0, SeedRole::Train));
            let (price, n) = sample_params(&cfg, &args.sample, cfg.sample.n_train);
            let train = simulate_sample(&cfg.instance, price, n, seed)?;
            let basis = BasisSpec::parse(&args.basis)?;
            let standardize = args.standardize || cfg.flags.standardize;
            let fitted = fit_method(args.method, &basis, &train, &cfg.adam, standardize)?;
            std::fs::create_dir_all(&cli.out_dir)?;
            let path = cli.out_dir.join(format!("weights_{}.csv", args.method.to_string().to_lowercase()));
            write_weight_file(&path, &fitted.file)?;
            if args.verbose || cfg.flags.verbose {
                let rows: Vec<StageRow> = fitted
                    .stages
                    .iter()
                    .map(|s| StageRow {
                        method: args.method,
                        basis: args.basis.clone(),
                        initial_price: price,
                        rep: 0,
                        t: s.t,
                        iterations: s.iterations,
                        objective_init: s.objective_init,
                        objective_best: s.objective_best,
                    })
                    .collect();
                write_csv(&cli.out_dir.join("stages.csv"), STAGES_HEADER, &rows)?;
            }
            println!("{}", path.display());
        }
        Command::Evaluate(args) => {
            let cfg = ExperimentConfig::load(&args.sample.config)?;
            let seed = cli.seed.unwrap_or_else(|| derive_seed(cfg.sample.base_seed, 0, SeedRole::Test));
            let (price, n) = sample_params(&cfg, &args.sample, cfg.sample.n_test);
            let test = simulate_sample(&cfg.instance, price, n, seed)?;
            let file = read_weight_file(&args.weights)?;
            let e = evaluate_policy(&file, &test)?;
            println!("initial_price,n_paths,deterministic,randomized");
            let randomized = e.randomized.map(|r| r.to_string()).unwrap_or_default();
            println!("{price},{n},{},{randomized}", e.deterministic);
        }
        Command::Experiment(args) => return experiment(&cli.out_dir, cli.seed, args),
        Command::Thresholds(args) => {
            let file = read_weight_file(&args.weights)?;
            let method = match file.weights {
                PolicyWeights::Linear(_) => Method::Rpo,
                PolicyWeights::Lsm(_) => Method::Lsm,
            };
            println!("method,t,threshold,defined");
            for (t, value) in policy_thresholds(&file, args.beta)? {
                match value {
                    Some(v) => println!("{method},{t},{v},1"),
                    None => println!("{method},{t},,0"),
                }
            }
        }
        Command::Bounds(args) => {
            let inputs = |norm_type| BoundInputs {
                norm_type,
                radius_b: args.radius_b,
                feature_bound_q: args.q,
                reward_bound_g: args.g,
                k: args.k,
                t: args.t,
                n_paths: args.n_paths,
                delta: args.delta,
            };
            let r: Vec<String> = NormType::ALL
                .iter()
                .map(|&nt| rademacher_bound(&inputs(nt)).map(|v| v.to_string()))
                .collect::<Result<_, _>>()?;
            let chosen = inputs(args.norm);
            println!("rademacher_L1,rademacher_L2,rademacher_LINF,norm_type,j_hat,lower_bound,lower_bound_empirical");
            println!(
                "{},{},{},{},{},{},{}",
                r[0],
                r[1],
                r[2],
                args.norm,
                args.j_hat,
                generalization_lower_bound(args.j_hat, &chosen, false)?,
                generalization_lower_bound(args.j_hat, &chosen, true)?
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn sample_params(cfg: &ExperimentConfig, args: &SampleArgs, default_paths: usize) -> (f64, usize) {
    (
        args.initial_price.unwrap_or(cfg.instance.initial_prices[0]),
        args.n_paths.unwrap_or(default_paths),
    )
}

fn experiment(out_dir: &Path, seed: Option<u64>, args: ExperimentArgs) -> Result<ExitCode> {
    let mut cfg = ExperimentConfig::load(&args.config).with_context(|| format!("loading {}", args.config.display()))?;
    if let Some(s) = seed {
        cfg.sample.base_seed = s;
    }
    if let Some(n) = args.n_reps {
        cfg.sample.n_reps = n;
    }
    if let Some(n) = args.n_train {
        cfg.sample.n_train = n;
    }
    if let Some(n) = args.n_test {
        cfg.sample.n_test = n;
    }
    let flags = &mut cfg.flags;
    flags.standardize |= args.standardize;
    flags.verbose |= args.verbose;
    flags.emit_thresholds |= args.emit_thresholds;
    flags.emit_bounds |= args.emit_bounds;
    if args.no_timing {
        flags.record_timing = false;
    }
    cfg.validate()?;

    let out = run_experiment(&cfg)?;
    out.write(out_dir, &cfg.flags)?;
    for note in &out.notes {
        eprintln!("note: {note}");
    }
    println!("method,basis,initial_price,mean,se,n_reps");
    for s in &out.summary {
        println!("{},\"{}\",{},{:.4},{:.4},{}", s.method, s.basis, s.initial_price, s.mean, s.se, s.n_reps);
    }
    if out.stage_regressions() > 0 {
        bail!("{} RPO stages returned an objective below their warm start", out.stage_regressions());
    }
    if !out.failures.is_empty() {
        for f in &out.failures {
            eprintln!("failed: {} ({}) p0={} rep={}: {}", f.method, f.basis, f.initial_price, f.rep, f.error);
        }
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}
