use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use momlim::harness::{
    self, audit_bounds, fit_rate, parse_config, reproduce_table1, reproduce_table2,
    run_trajectory, stability, trajectory_csv, ExperimentConfig, Table1Params,
};
use momlim::{Algorithm, Error, StepSchedule};

const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;

#[derive(Parser)]
#[command(name = "momlim", version, about = "Heavy-ball momentum under cyclic client participation")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// `key = value` experiment config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for audit sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads, 0 = one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long, global = true)]
    mu: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    eta: Option<f64>,
    /// Polynomial decay exponent (selects eta / t^alpha).
    #[arg(long, global = true, conflicts_with = "gamma")]
    alpha: Option<f64>,
    /// Exponential decay factor (selects eta * gamma^t).
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long = "G", global = true)]
    g: Option<f64>,
    #[arg(long, global = true)]
    theta0: Option<f64>,
    #[arg(long = "T", global = true)]
    horizon: Option<String>,
    #[arg(long = "J", global = true)]
    local_steps: Option<u32>,
    #[arg(long, global = true)]
    eta_local: Option<f64>,
    #[arg(long, global = true)]
    algo: Option<Algorithm>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one configuration and print its trajectory CSV.
    Run,
    /// Terminal theta for every schedule, heterogeneity level and start point.
    Table1,
    /// Critical polynomial decay with the two step-size choices.
    Table2 {
        #[arg(long, default_value_t = 1e-2)]
        epsilon: f64,
    },
    /// Fit the decay exponent of the |theta| envelope.
    Fit {
        #[arg(long, default_value_t = 10_000)]
        from: u64,
        #[arg(long, default_value_t = 1_000_000)]
        to: u64,
    },
    /// Audit the auxiliary product and series bounds on random samples.
    Audit {
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Jury window, spectral radius and limit-cycle amplitude.
    Stability,
}

enum Failure {
    Config(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            parse_config(&text).map_err(|errs| {
                let lines: Vec<String> = errs.iter().map(|e| e.to_string()).collect();
                Failure::Config(format!("{}: {}", path.display(), lines.join("; ")))
            })?
        }
        None => ExperimentConfig::default(),
    };
    let o = &cli.overrides;
    if let Some(v) = o.mu {
        cfg.mu = v;
    }
    if let Some(v) = o.beta {
        cfg.algo.beta = v;
    }
    if let Some(v) = o.g {
        cfg.g = v;
    }
    if let Some(v) = o.theta0 {
        cfg.theta0 = v;
    }
    if let Some(v) = &o.horizon {
        cfg.horizon = harness::parse_horizon(v).map_err(Failure::Config)?;
    }
    if let Some(v) = o.local_steps {
        cfg.algo.local_steps = v;
    }
    if let Some(v) = o.eta_local {
        cfg.algo.eta_local = v;
    }
    if let Some(v) = o.algo {
        cfg.algo.algorithm = v;
    }
    let eta = o.eta.unwrap_or(cfg.algo.schedule.base());
    cfg.algo.schedule = match (o.alpha, o.gamma) {
        (Some(alpha), _) => StepSchedule::Polynomial { eta, alpha },
        (_, Some(gamma)) => StepSchedule::Exponential { eta, gamma },
        _ => cfg.algo.schedule.with_base(eta),
    };
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(cfg)
}

fn emit(path: Option<&PathBuf>, data: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, data).map_err(|e| Failure::Config(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(data.as_bytes())
                .map_err(|e| Failure::Config(format!("stdout: {e}")))
        }
    }
}

fn execute(cli: &Cli) -> Result<u8, Failure> {
    let cfg = load_config(cli)?;
    let out = cfg.out.as_ref();
    match &cli.command {
        Command::Run => {
            let traj = run_trajectory(&cfg)?;
            emit(out, &trajectory_csv(&traj, &cfg.algo.schedule))?;
        }
        Command::Table1 => {
            let params = Table1Params {
                mu: cfg.mu,
                eta: cfg.algo.schedule.base(),
                beta: cfg.algo.beta,
                eta_local: cfg.algo.eta_local,
                horizon: cfg.horizon,
            };
            let table = reproduce_table1(&params).map_err(|e| match e {
                Error::Unstable(msg) => Failure::Config(format!("refusing unstable parameters: {msg}")),
                other => Failure::Run(other),
            })?;
            emit(out, &table.to_csv())?;
        }
        Command::Table2 { epsilon } => {
            let table = reproduce_table2(cfg.mu, cfg.algo.beta, *epsilon, cfg.horizon)?;
            emit(out, &table.to_csv())?;
        }
        Command::Fit { from, to } => {
            let traj = run_trajectory(&cfg)?;
            let fit = fit_rate(&traj, (*from, *to))?;
            let prediction = momlim::bounds::predict_rate(&cfg.algo, cfg.mu, cfg.g);
            log::info!(
                "predicted regime {} (envelope exponent {:?})",
                prediction.regime,
                prediction.envelope_exponent
            );
            emit(out, &fit.to_csv())?;
        }
        Command::Audit { samples } => {
            let report = audit_bounds(cfg.seed, *samples)?;
            emit(out, &report.to_csv())?;
            return Ok(report.exit_code() as u8);
        }
        Command::Stability => {
            let report = stability(cfg.mu, cfg.algo.beta, cfg.algo.schedule.base())?;
            emit(out, &report.to_csv())?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MOMLIM_LOG", "off")).init();
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            log::warn!("could not size thread pool: {e}");
        }
    }
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(msg)) => {
            eprintln!("momlim: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Run(e)) => {
            eprintln!("momlim: {e}");
            match e {
                Error::Divergence { .. } => ExitCode::from(EXIT_DIVERGENCE),
                _ => ExitCode::from(EXIT_CONFIG),
            }
        }
    }
}
