use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ssw_core::experiment::{
    apply_overrides, reference_front_csv, run_experiment, run_stability_report, ExperimentConfig, Overrides,
    StabilityProbes,
};
use ssw_core::{Error, ProblemConfig, Result};

#[derive(Parser)]
#[command(name = "ssw", version, about = "Stochastic steepest-weights optimizer and benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a multi-seed experiment and write per-run CSV, summary JSON and archives.
    Run {
        /// JSON experiment config; flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        problem: Option<String>,
        #[arg(long)]
        m: Option<usize>,
        /// DTLZ2 distance-variable count, or quad2 dimension.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        algo: Option<String>,
        #[arg(long)]
        pop: Option<usize>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        runs: Option<usize>,
        /// Base seed; run i uses seed + i.
        #[arg(long)]
        seed: Option<u64>,
        /// Concurrent runs. Results do not depend on it.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Order of the averaged Hausdorff indicator.
        #[arg(long)]
        p: Option<f64>,
    },
    /// Probe a drift field and write a JSON stability report.
    Stability {
        /// ou:beta=<b>, identity, zero or radial-unit.
        #[arg(long)]
        field: String,
        /// JSON probe parameters; flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        theta0: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long)]
        max_steps: Option<u64>,
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long)]
        burn_in: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit a reference front as CSV.
    Front {
        #[arg(long, default_value = "dtlz2")]
        problem: String,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            problem,
            m,
            k,
            algo,
            pop,
            sigma,
            eps,
            budget,
            runs,
            seed,
            jobs,
            out,
            p,
        } => {
            let base = match &config {
                Some(path) => ExperimentConfig::from_json_file(path)?,
                None => ExperimentConfig::default(),
            };
            let overrides = Overrides {
                problem,
                m,
                k,
                algo,
                pop,
                sigma,
                eps,
                budget,
                runs,
                seed,
                p,
                out,
            };
            let config = apply_overrides(base, &overrides)?;
            let summary = run_experiment(&config, jobs)?;
            println!(
                "{} on {:?}: {} runs, median delta_p {:.6}, iqr {:.6}",
                config.algorithm.name(),
                config.problem,
                summary.per_run.len(),
                summary.aggregate.median,
                summary.aggregate.iqr
            );
            if let Some(dir) = &config.output_dir {
                println!("wrote {}", dir.display());
            }
            Ok(())
        }
        Command::Stability {
            field,
            config,
            dim,
            theta0,
            r,
            mu,
            sigma,
            eps,
            replicas,
            max_steps,
            horizon,
            burn_in,
            seed,
            out,
        } => {
            let mut probes = match &config {
                Some(path) => {
                    let text = std::fs::read_to_string(path)?;
                    serde_json::from_str::<StabilityProbes>(&text)
                        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
                }
                None => StabilityProbes::default(),
            };
            set(&mut probes.dim, dim);
            set(&mut probes.theta0, theta0);
            set(&mut probes.r, r);
            set(&mut probes.mu, mu);
            set(&mut probes.sigma, sigma);
            set(&mut probes.eps, eps);
            set(&mut probes.seed, seed);
            set(&mut probes.hitting.replicas, replicas);
            set(&mut probes.hitting.max_steps, max_steps);
            set(&mut probes.ergodic.horizon_steps, horizon);
            set(&mut probes.ergodic.burn_in_steps, burn_in);
            let report = run_stability_report(&field, &probes, out.as_deref())?;
            if out.is_none() {
                println!("{}", serde_json::to_string_pretty(&report)?);
            }
            Ok(())
        }
        Command::Front {
            problem,
            m,
            k,
            count,
            seed,
            out,
        } => {
            let problem = ProblemConfig::from_name(&problem, m, k)?;
            let count = match count {
                Some(c) => c,
                None => problem.build()?.default_front_size(),
            };
            let csv = reference_front_csv(&problem, count, seed)?;
            match out {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
