use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rpqn::problem::io::{write_least_squares, write_meta, write_pgm, InstanceMeta};
use rpqn::problem::Family;
use rpqn_bench::compare::compare;
use rpqn_bench::psistar::psi_star_cached;
use rpqn_bench::runner::run;
use rpqn_bench::{BenchError, Instance, Result, RunSpec, Scale, SolverKind};

#[derive(Parser)]
#[command(name = "rpqn-bench", about = "Benchmarks for regularized proximal quasi-Newton solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an instance to disk (CSV and JSON, or PGM images for restoration).
    Generate {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, default_value = "instance")]
        out: PathBuf,
    },
    /// Compute (or read from the cache) the reference optimal value.
    Psistar {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, default_value = "cache")]
        cache: PathBuf,
    },
    /// Run a solver over one or more seeded repetitions.
    Run(RunArgs),
    /// Tabulate counts and plot convergence for existing traces.
    Compare {
        #[arg(long, default_value = "compare")]
        out: PathBuf,
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct InstanceArgs {
    #[arg(long)]
    family: Family,
    #[arg(long)]
    scale: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    lambda: Option<f64>,
}

/// Every field overrides the `--config` file when given.
#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    family: Option<Family>,
    #[arg(long)]
    scale: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    solver: Option<SolverKind>,
    #[arg(long)]
    memory: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
}

impl RunArgs {
    fn into_spec(self) -> Result<RunSpec> {
        let mut spec = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|source| BenchError::Io { path: path.clone(), source })?;
                serde_json::from_str(&text).map_err(|source| BenchError::Json { path: path.clone(), source })?
            }
            None => {
                let missing = |what: &str| BenchError::Validation(format!("--{what} is required without --config"));
                RunSpec::new(
                    self.family.ok_or_else(|| missing("family"))?,
                    self.scale.clone().ok_or_else(|| missing("scale"))?,
                    self.solver.ok_or_else(|| missing("solver"))?,
                )
            }
        };
        if let Some(v) = self.family {
            spec.family = v;
        }
        if let Some(v) = self.scale {
            spec.scale = v;
        }
        if let Some(v) = self.seed {
            spec.seed = v;
        }
        if let Some(v) = self.solver {
            spec.solver = v;
        }
        if let Some(v) = self.memory {
            spec.memory = v;
        }
        if let Some(v) = self.tol {
            spec.tol = v;
        }
        if self.max_iter.is_some() {
            spec.max_iter = self.max_iter;
        }
        if let Some(v) = self.reps {
            spec.reps = v;
        }
        if let Some(v) = self.out {
            spec.out = v;
        }
        if let Some(v) = self.cache {
            spec.cache = v;
        }
        if self.lambda.is_some() {
            spec.lambda = self.lambda;
        }
        Ok(spec)
    }
}

fn generate(args: InstanceArgs, out: PathBuf) -> Result<()> {
    let scale = Scale::parse(args.family, &args.scale)?;
    let io_err = |source| BenchError::Io { path: out.clone(), source };
    match Instance::build(scale, args.seed, args.lambda)? {
        Instance::LeastSquares(inst) => write_least_squares(&out, &inst).map_err(io_err)?,
        Instance::Restoration(inst) => {
            fs::create_dir_all(&out).map_err(io_err)?;
            write_pgm(&out.join("truth.pgm"), inst.side, &inst.truth).map_err(io_err)?;
            write_pgm(&out.join("observed.pgm"), inst.side, &inst.observed).map_err(io_err)?;
            let meta = InstanceMeta {
                n: inst.side * inst.side,
                m: inst.side * inst.side,
                lambda: inst.problem.regularizer().lambda(),
                groups: None,
                seed: args.seed,
                family: Family::StudentT,
            };
            write_meta(&out.join("instance.json"), &meta).map_err(io_err)?;
        }
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate { instance, out } => generate(instance, out)?,
        Command::Psistar { instance, cache } => {
            let scale = Scale::parse(instance.family, &instance.scale)?;
            let entry = psi_star_cached(&cache, scale, instance.seed, instance.lambda)?;
            println!("{}", serde_json::to_string_pretty(&entry).expect("plain data"));
        }
        Command::Run(args) => {
            let spec = args.into_spec()?;
            let report = run(&spec)?;
            for r in &report.reps {
                println!(
                    "{} seed {}: {:?} after {} iterations, objective error {:.3e}, {:.3}s",
                    r.label,
                    r.seed,
                    r.status,
                    r.iterations,
                    r.final_state.obj_err.unwrap_or(f64::NAN),
                    r.final_state.time_s
                );
            }
            println!("aggregate: {}", report.aggregate.display());
            if !report.all_converged() {
                return Ok(ExitCode::from(3));
            }
        }
        Command::Compare { out, traces } => {
            let report = compare(&traces, &out)?;
            print!("{}", fs::read_to_string(&report.markdown).unwrap_or_default());
            println!("plot: {}", report.plot.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
