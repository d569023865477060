use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rpqn::baselines::{fista_solve, sparsa_solve};
use rpqn::solver::{solve, SolveResult, Status};
use rpqn::trace::{ClassCounts, FinalState, TraceTable};
use serde::{Deserialize, Serialize};

use crate::error::{IoContext, Result};
use crate::instance::Instance;
use crate::psistar::psi_star_cached;
use crate::spec::{RunSpec, SolverKind};

/// Per-repetition summary, written next to the trace CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepSummary {
    pub label: String,
    pub solver: SolverKind,
    pub memory: Option<usize>,
    pub seed: u64,
    pub status: Status,
    pub psi_star: f64,
    pub psi_start: f64,
    pub iterations: usize,
    pub classes: ClassCounts,
    pub sub_iters: usize,
    pub max_mu: f64,
    pub final_state: FinalState,
    pub trace: PathBuf,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub reps: Vec<RepSummary>,
    pub aggregate: PathBuf,
}

impl RunReport {
    pub fn all_converged(&self) -> bool {
        self.reps.iter().all(|r| r.status == Status::Converged)
    }
}

/// Solves one instance with the configured solver, stopping on objective
/// value error against `psi_star`.
pub fn solve_with(spec: &RunSpec, instance: &Instance, psi_star: f64) -> Result<SolveResult> {
    let (problem, x0) = (instance.problem(), instance.start());
    let out = match spec.solver {
        SolverKind::RpqnBfgs | SolverKind::RpqnSr1 => {
            solve(problem, &x0, &spec.rpqn_config(psi_star).expect("quasi-Newton solver"))?
        }
        SolverKind::Fista => fista_solve(problem, &x0, &spec.fista_config(psi_star))?,
        SolverKind::Sparsa => sparsa_solve(problem, &x0, &spec.sparsa_config(psi_star))?,
    };
    Ok(SolveResult { trace: out.trace.with_reference(psi_star), ..out })
}

/// Executes the repetitions of `spec` (seeds `seed, seed + 1, ...`) and
/// writes `<out>/<label>/rep<i>.csv`, `rep<i>.json` and `aggregate.csv`.
pub fn run(spec: &RunSpec) -> Result<RunReport> {
    let scale = spec.validate()?;
    let label = spec.label();
    let dir = spec.out.join(&label);
    fs::create_dir_all(&dir).at(&dir)?;
    let mut reps = Vec::with_capacity(spec.reps);
    let mut traces = Vec::with_capacity(spec.reps);
    for i in 0..spec.reps {
        let seed = spec.seed + i as u64;
        let reference = psi_star_cached(&spec.cache, scale, seed, spec.lambda)?;
        let instance = Instance::build(scale, seed, spec.lambda)?;
        let out = solve_with(spec, &instance, reference.psi_star)?;
        let trace_path = dir.join(format!("rep{i}.csv"));
        write_trace(&trace_path, &out.trace)?;
        let summary = RepSummary {
            label: label.clone(),
            solver: spec.solver,
            memory: spec.solver.quasi_newton().map(|_| spec.memory),
            seed,
            status: out.status,
            psi_star: reference.psi_star,
            psi_start: out.trace.rows.first().map_or(out.trace.final_state.psi, |r| r.psi),
            iterations: out.trace.iterations(),
            classes: out.trace.class_counts(),
            sub_iters: out.trace.total_sub_iters(),
            max_mu: out.trace.rows.iter().map(|r| r.mu).fold(out.trace.final_state.mu, f64::max),
            final_state: out.trace.final_state.clone(),
            trace: trace_path,
        };
        let json_path = dir.join(format!("rep{i}.json"));
        fs::write(&json_path, serde_json::to_string_pretty(&summary).expect("plain data") + "\n").at(&json_path)?;
        reps.push(summary);
        traces.push(out.trace);
    }
    let aggregate = dir.join("aggregate.csv");
    write_aggregate(&aggregate, &traces)?;
    Ok(RunReport { reps, aggregate })
}

pub fn write_trace(path: &Path, trace: &TraceTable) -> Result<()> {
    let file = fs::File::create(path).at(path)?;
    trace.write_csv(BufWriter::new(file)).at(path)
}

/// Row `k` averages `time_s`, `psi` and `obj_err` over the repetitions
/// that reached iteration `k`.
pub fn write_aggregate(path: &Path, traces: &[TraceTable]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path).at(path)?);
    writeln!(w, "k,reps,time_s,psi,obj_err").at(path)?;
    let longest = traces.iter().map(TraceTable::iterations).max().unwrap_or(0);
    for k in 0..longest {
        let rows: Vec<_> = traces.iter().filter_map(|t| t.rows.get(k)).collect();
        let n = rows.len() as f64;
        let mean = |f: &dyn Fn(&rpqn::trace::IterationRecord) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
        let err = if rows.iter().all(|r| r.obj_err.is_some()) {
            mean(&|r| r.obj_err.unwrap()).to_string()
        } else {
            String::new()
        };
        writeln!(w, "{k},{},{},{},{err}", rows.len(), mean(&|r| r.time_s), mean(&|r| r.psi)).at(path)?;
    }
    w.flush().at(path)
}
