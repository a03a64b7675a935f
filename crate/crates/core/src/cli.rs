//! Command-line front end. Exit codes: 0 success, 1 malformed config or
//! arguments, 2 I/O failure, 3 solver non-convergence under `--strict`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::harness::{
    evaluate_files, generate_trial, records_csv, run_experiment, solve_files, summarize, write_report,
    write_summary, write_trial, ExperimentConfig, SamplingSpec, Variant, META_FILE, OBS_FILE, PI_FILE,
};
use crate::matrix::{IndexSet, NormKind};
use crate::sampling::SamplingDistribution;
use crate::synth::{CorruptionKind, ObservationSet};
use crate::tuning::{diagnose_scaling, expected_sigma_r_norms};

#[derive(Parser, Debug)]
#[command(name = "rmc", version, about = "Robust matrix completion toolkit")]
pub struct Cli {
    /// Experiment config (JSON)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the config seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Exit with code 3 if any solve fails to converge
    #[arg(long, global = true)]
    pub strict: bool,
    /// Worker threads (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum VariantArg {
    Robust,
    NuclearOnly,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Robust => Variant::Robust,
            VariantArg::NuclearOnly => Variant::NuclearOnly,
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write one instance and its observations
    Generate {
        /// Grid value of the swept axis (default: first grid entry)
        #[arg(long)]
        axis_value: Option<usize>,
        #[arg(long, default_value_t = 0)]
        replication: usize,
    },
    /// Fit L̂ and Ŝ from a generated directory (corruption flags are ignored)
    Solve {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "robust")]
        variant: VariantArg,
        #[arg(long, requires = "lambda2")]
        lambda1: Option<f64>,
        #[arg(long, requires = "lambda1")]
        lambda2: Option<f64>,
    },
    /// Error report of an estimate against the generated truth
    Evaluate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        estimate: PathBuf,
    },
    /// Monte-Carlo norms of the stochastic terms over a grid of N
    Diagnose {
        /// Comma-separated N values (default: the config n_grid)
        #[arg(long, value_delimiter = ',')]
        n_grid: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        replications: usize,
    },
    /// Run the configured sweep
    Experiment {
        /// Record wall time in the CSV (otherwise written as 0)
        #[arg(long)]
        timing: bool,
    },
    /// λ's, n*, Ψ terms and minimax rates for the configured problem
    Predict {
        /// Generated directory; enables Monte-Carlo stochastic-term estimates
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        n_tilde: Option<usize>,
        #[arg(long, default_value_t = 100)]
        mc_draws: usize,
    },
}

enum Failure {
    Config(String),
    Io(String),
    NotConverged(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io { .. } | Error::Csv(_) | Error::Parse(_) => Failure::Io(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

/// Parses `argv` and runs the command, returning the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let outcome = if cli.threads > 0 {
        match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(Failure::Config(e.to_string())),
        }
    } else {
        dispatch(&cli)
    };
    match outcome {
        Ok(()) => 0,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            1
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(Failure::NotConverged(m)) => {
            eprintln!("error: {m}");
            3
        }
    }
}

fn load_config(cli: &Cli) -> std::result::Result<ExperimentConfig, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config("--config is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let mut cfg: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn dispatch(cli: &Cli) -> std::result::Result<(), Failure> {
    match &cli.command {
        Command::Generate { axis_value, replication } => {
            let cfg = load_config(cli)?;
            let value = axis_value.unwrap_or(cfg.axis_grid()[0]);
            let trial = generate_trial(&cfg, value, *replication)?;
            write_trial(&cli.out, &trial, &cfg, value, *replication)?;
        }
        Command::Solve {
            input,
            variant,
            lambda1,
            lambda2,
        } => {
            let cfg = load_config(cli)?;
            let lambdas = lambda1.zip(*lambda2);
            let (_, summary) = solve_files(&cfg, input, &cli.out, (*variant).into(), lambdas)?;
            if cli.strict && !summary.converged {
                return Err(Failure::NotConverged(format!(
                    "solver stopped after {} iterations without converging",
                    summary.iterations
                )));
            }
        }
        Command::Evaluate { input, estimate } => {
            let report = evaluate_files(input, estimate)?;
            create_out(&cli.out)?;
            write_report(&cli.out.join("report.json"), &report)?;
        }
        Command::Diagnose { n_grid, replications } => {
            let cfg = load_config(cli)?;
            let grid = if n_grid.is_empty() { cfg.n_grid.clone() } else { n_grid.clone() };
            let (m1, m2) = cfg.dims;
            let full = IndexSet::full(m1, m2);
            let pi = match cfg.sampling {
                SamplingSpec::Uniform => SamplingDistribution::uniform_on(&full)?,
                SamplingSpec::Tilt { beta } => SamplingDistribution::tilt(&full, beta)?,
            };
            let table = diagnose_scaling(&pi, cfg.sigma, &grid, *replications, cfg.seed)?;
            create_out(&cli.out)?;
            table.write_csv(&cli.out.join("diagnostics.csv"))?;
        }
        Command::Experiment { timing } => {
            let cfg = load_config(cli)?;
            let records = run_experiment(&cfg)?;
            create_out(&cli.out)?;
            for &variant in &cfg.estimator_variants {
                let path = cli.out.join(format!("records_{}.csv", variant.name()));
                std::fs::write(&path, records_csv(&records, variant, *timing)?).map_err(|e| Error::io(&path, e))?;
            }
            write_summary(&cli.out.join("summary.json"), &summarize(&cfg, &records))?;
            let bad = records.iter().filter(|r| !r.converged).count();
            if cli.strict && bad > 0 {
                return Err(Failure::NotConverged(format!("{bad} runs did not converge")));
            }
        }
        Command::Predict {
            input,
            n,
            n_tilde,
            mc_draws,
        } => {
            let cfg = load_config(cli)?;
            let prediction = match input {
                Some(dir) => {
                    let meta: crate::harness::InstanceMeta = serde_json::from_str(
                        &std::fs::read_to_string(dir.join(META_FILE)).map_err(|e| Error::io(dir.join(META_FILE), e))?,
                    )
                    .map_err(Error::from)?;
                    let pi = SamplingDistribution::read_csv(&dir.join(PI_FILE), meta.dims)?;
                    let obs = ObservationSet::read_csv(&dir.join(OBS_FILE), meta.dims)?;
                    let setup = crate::harness::prediction_setup(
                        &cfg,
                        &pi,
                        meta.rank_r,
                        meta.sparsity_s,
                        n.unwrap_or(obs.n()),
                        n_tilde.unwrap_or(obs.n_tilde()),
                    );
                    let dual = match cfg.corruption_kind {
                        CorruptionKind::Columnwise => NormKind::L2Inf,
                        CorruptionKind::Entrywise => NormKind::Sup,
                    };
                    let mc = expected_sigma_r_norms(&obs, dual, *mc_draws, cfg.seed)?;
                    setup.predict(Some(mc))
                }
                None => {
                    let value = cfg.axis_grid()[0];
                    let (n0, r, s) = cfg.point(value);
                    let trial = generate_trial(&cfg, value, 0)?;
                    let n = n.unwrap_or(n0);
                    let n_tilde = n_tilde.unwrap_or(if s == 0 { 0 } else { cfg.n_tilde_rule.count(n) });
                    crate::harness::prediction_setup(&cfg, &trial.pi, r, s, n, n_tilde).predict(None)
                }
            };
            create_out(&cli.out)?;
            write_summary(&cli.out.join("prediction.json"), &prediction)?;
        }
    }
    Ok(())
}
