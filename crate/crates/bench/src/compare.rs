//! Counts tables and convergence plots over existing traces.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use rpqn::trace::{IterationRecord, StepClass, TraceTable};
use serde::Serialize;

use crate::error::{validation, IoContext, Result};
use crate::plot::{Series, SvgPlot};
use crate::runner::RepSummary;

/// One line of the counts table. `matvecs` counts products with `A` and
/// with `A^T` separately.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountsRow {
    pub label: String,
    pub iterations: usize,
    pub highly_successful: usize,
    pub successful: usize,
    pub unsuccessful: usize,
    pub sub_iters: usize,
    pub f_evals: u64,
    pub prox_evals: u64,
    pub matvecs: u64,
    pub time_s: f64,
    pub obj_err: Option<f64>,
}

pub const TABLE_HEADER: &str =
    "label,iterations,highly_successful,successful,unsuccessful,sub_iters,f_evals,prox_evals,matvecs,time_s,obj_err";

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub rows: Vec<CountsRow>,
    pub table: PathBuf,
    pub markdown: PathBuf,
    pub plot: PathBuf,
}

/// A trace CSV plus its optional `.json` summary.
#[derive(Debug, Clone)]
pub struct LoadedTrace {
    pub label: String,
    pub rows: Vec<IterationRecord>,
    pub summary: Option<RepSummary>,
}

pub fn load_trace(path: &Path) -> Result<LoadedTrace> {
    let file = fs::File::open(path).at(path)?;
    let rows = TraceTable::read_csv_rows(BufReader::new(file)).at(path)?;
    let sidecar = path.with_extension("json");
    let summary = match fs::read_to_string(&sidecar) {
        Ok(text) => Some(
            serde_json::from_str(&text).map_err(|source| crate::BenchError::Json { path: sidecar.clone(), source })?,
        ),
        Err(_) => None,
    };
    let stem = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let label = match path.parent().and_then(|p| p.file_name()) {
        Some(dir) => format!("{}/{stem}", dir.to_string_lossy()),
        None => stem,
    };
    Ok(LoadedTrace { label, rows, summary })
}

pub fn counts_row(trace: &LoadedTrace) -> CountsRow {
    let count = |c: StepClass| trace.rows.iter().filter(|r| r.step_class == Some(c)).count();
    let last = trace.rows.last();
    let counts = match &trace.summary {
        Some(s) => s.final_state.counts,
        None => last.map(|r| r.counts).unwrap_or_default(),
    };
    CountsRow {
        label: trace.label.clone(),
        iterations: trace.rows.len(),
        highly_successful: count(StepClass::HighlySuccessful),
        successful: count(StepClass::Successful),
        unsuccessful: count(StepClass::Unsuccessful),
        sub_iters: trace.rows.iter().map(|r| r.sub_iters).sum(),
        f_evals: counts.f_evals,
        prox_evals: counts.prox_evals,
        matvecs: counts.matvecs,
        time_s: trace.summary.as_ref().map_or(last.map_or(0.0, |r| r.time_s), |s| s.final_state.time_s),
        obj_err: trace.summary.as_ref().map_or(last.and_then(|r| r.obj_err), |s| s.final_state.obj_err),
    }
}

fn series(trace: &LoadedTrace) -> Series {
    let mut points: Vec<(f64, f64)> =
        trace.rows.iter().filter_map(|r| r.obj_err.map(|e| (r.time_s, e))).collect();
    if let Some(s) = &trace.summary {
        if let Some(e) = s.final_state.obj_err {
            points.push((s.final_state.time_s, e));
        }
    }
    Series { label: trace.label.clone(), points }
}

/// Writes `table.csv`, `table.md` and `convergence.svg` into `out`.
pub fn compare(traces: &[PathBuf], out: &Path) -> Result<CompareReport> {
    if traces.is_empty() {
        return Err(validation("compare needs at least one trace"));
    }
    let loaded = traces.iter().map(|p| load_trace(p)).collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(out).at(out)?;
    let rows: Vec<CountsRow> = loaded.iter().map(counts_row).collect();

    let table = out.join("table.csv");
    let mut csv = String::from(TABLE_HEADER);
    csv.push('\n');
    for r in &rows {
        csv += &format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.label,
            r.iterations,
            r.highly_successful,
            r.successful,
            r.unsuccessful,
            r.sub_iters,
            r.f_evals,
            r.prox_evals,
            r.matvecs,
            r.time_s,
            r.obj_err.map_or(String::new(), |e| e.to_string())
        );
    }
    fs::write(&table, csv).at(&table)?;

    let markdown = out.join("table.md");
    let mut md = fs::File::create(&markdown).at(&markdown)?;
    let mut text = String::from(
        "| run | iter | highly s. | succ. | unsucc. | sub-iter | f evals | prox evals | matvecs | time (s) |\n\
         |---|---:|---:|---:|---:|---:|---:|---:|---:|---:|\n",
    );
    for r in &rows {
        text += &format!(
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {:.3} |\n",
            r.label,
            r.iterations,
            r.highly_successful,
            r.successful,
            r.unsuccessful,
            r.sub_iters,
            r.f_evals,
            r.prox_evals,
            r.matvecs,
            r.time_s
        );
    }
    text += "\nMatrix-vector products count applications of `A` and of `A^T` separately.\n";
    md.write_all(text.as_bytes()).at(&markdown)?;

    let plot = out.join("convergence.svg");
    let svg = SvgPlot::new("run time (s)", "objective value error").render(&loaded.iter().map(series).collect::<Vec<_>>());
    fs::write(&plot, svg).at(&plot)?;
    Ok(CompareReport { rows, table, markdown, plot })
}
