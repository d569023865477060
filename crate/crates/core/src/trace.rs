//! Convergence histories and their CSV form.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::problem::EvalCounts;

/// Exact CSV header of a trace file.
pub const CSV_HEADER: &str =
    "k,time_s,psi,obj_err,res_norm,mu,rho,step_class,pred,ared,d_norm,sub_iters,f_evals,g_evals,prox_evals,matvecs";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepClass {
    Unsuccessful,
    Successful,
    HighlySuccessful,
}

impl StepClass {
    pub fn name(&self) -> &'static str {
        match self {
            StepClass::Unsuccessful => "unsuccessful",
            StepClass::Successful => "successful",
            StepClass::HighlySuccessful => "highly_successful",
        }
    }

    pub fn is_accepted(&self) -> bool {
        !matches!(self, StepClass::Unsuccessful)
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "unsuccessful" => Some(StepClass::Unsuccessful),
            "successful" => Some(StepClass::Successful),
            "highly_successful" => Some(StepClass::HighlySuccessful),
            _ => None,
        }
    }
}

/// Termination rule shared by all solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum StopRule {
    /// `||r(x)||_2 <= tol` with the unit-metric residual.
    Residual { tol: f64 },
    /// `(psi(x) - psi_star) / max(1, |psi_star|) <= tol`.
    ObjectiveError { psi_star: f64, tol: f64 },
}

impl StopRule {
    pub fn psi_star(&self) -> Option<f64> {
        match self {
            StopRule::ObjectiveError { psi_star, .. } => Some(*psi_star),
            StopRule::Residual { .. } => None,
        }
    }

    pub fn needs_residual(&self) -> bool {
        matches!(self, StopRule::Residual { .. })
    }

    pub fn is_met(&self, psi: f64, res_norm: Option<f64>) -> bool {
        match *self {
            StopRule::Residual { tol } => res_norm.is_some_and(|r| r <= tol),
            StopRule::ObjectiveError { psi_star, tol } => objective_error(psi, psi_star) <= tol,
        }
    }
}

/// `(psi - psi_star) / max(1, |psi_star|)`.
pub fn objective_error(psi: f64, psi_star: f64) -> f64 {
    (psi - psi_star) / psi_star.abs().max(1.0)
}

/// One solver iteration: the state `x^k` it started from and what the step did.
///
/// `psi`, `res_norm` and `mu` describe `x^k`; `time_s` is the elapsed time
/// when `x^k` became available. Counters are cumulative at the end of the
/// iteration. For first-order baselines, `mu` holds the step curvature `L`
/// and `sub_iters` the number of backtracking trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub time_s: f64,
    pub psi: f64,
    pub obj_err: Option<f64>,
    pub res_norm: Option<f64>,
    pub mu: f64,
    /// `None` when the ratio test was skipped.
    pub rho: Option<f64>,
    pub step_class: Option<StepClass>,
    pub pred: Option<f64>,
    pub ared: Option<f64>,
    pub d_norm: f64,
    pub sub_iters: usize,
    pub skipped_pair: bool,
    pub counts: EvalCounts,
}

/// State at termination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalState {
    pub k: usize,
    pub time_s: f64,
    pub psi: f64,
    pub obj_err: Option<f64>,
    pub res_norm: Option<f64>,
    pub mu: f64,
    pub counts: EvalCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceTable {
    pub rows: Vec<IterationRecord>,
    pub final_state: FinalState,
}

impl TraceTable {
    pub fn iterations(&self) -> usize {
        self.rows.len()
    }

    /// Fills `obj_err` from a reference optimum.
    pub fn with_reference(mut self, psi_star: f64) -> Self {
        for r in &mut self.rows {
            r.obj_err = Some(objective_error(r.psi, psi_star));
        }
        self.final_state.obj_err = Some(objective_error(self.final_state.psi, psi_star));
        self
    }

    /// Number of rows with each step class.
    pub fn class_counts(&self) -> ClassCounts {
        let mut c = ClassCounts::default();
        for r in &self.rows {
            match r.step_class {
                Some(StepClass::Unsuccessful) => c.unsuccessful += 1,
                Some(StepClass::Successful) => c.successful += 1,
                Some(StepClass::HighlySuccessful) => c.highly_successful += 1,
                None => {}
            }
        }
        c
    }

    pub fn total_sub_iters(&self) -> usize {
        self.rows.iter().map(|r| r.sub_iters).sum()
    }

    /// `(time, psi)` samples including the final state.
    pub fn psi_series(&self) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .map(|r| (r.time_s, r.psi))
            .chain(std::iter::once((self.final_state.time_s, self.final_state.psi)))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.k,
                r.time_s,
                r.psi,
                opt(r.obj_err),
                opt(r.res_norm),
                r.mu,
                opt(r.rho),
                r.step_class.map_or("", |c| c.name()),
                opt(r.pred),
                opt(r.ared),
                r.d_norm,
                r.sub_iters,
                r.counts.f_evals,
                r.counts.g_evals,
                r.counts.prox_evals,
                r.counts.matvecs
            )?;
        }
        w.flush()
    }

    /// Parses rows written by [`TraceTable::write_csv`].
    pub fn read_csv_rows<R: BufRead>(r: R) -> io::Result<Vec<IterationRecord>> {
        let mut lines = r.lines();
        match lines.next() {
            Some(Ok(h)) if h.trim_end() == CSV_HEADER => {}
            Some(Ok(h)) => return Err(bad(format!("unexpected header `{h}`"))),
            Some(Err(e)) => return Err(e),
            None => return Err(bad("empty trace file")),
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            rows.push(parse_row(&line).ok_or_else(|| bad(format!("malformed trace row {}", i + 2)))?);
        }
        Ok(rows)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub unsuccessful: usize,
    pub successful: usize,
    pub highly_successful: usize,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn bad(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

fn parse_row(line: &str) -> Option<IterationRecord> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != 16 {
        return None;
    }
    let num = |s: &str| s.parse::<f64>().ok();
    let maybe = |s: &str| if s.is_empty() { Some(None) } else { num(s).map(Some) };
    let int = |s: &str| s.parse::<u64>().ok();
    Some(IterationRecord {
        k: f[0].parse().ok()?,
        time_s: num(f[1])?,
        psi: num(f[2])?,
        obj_err: maybe(f[3])?,
        res_norm: maybe(f[4])?,
        mu: num(f[5])?,
        rho: maybe(f[6])?,
        step_class: if f[7].is_empty() { None } else { Some(StepClass::parse(f[7])?) },
        pred: maybe(f[8])?,
        ared: maybe(f[9])?,
        d_norm: num(f[10])?,
        sub_iters: f[11].parse().ok()?,
        skipped_pair: false,
        counts: EvalCounts {
            f_evals: int(f[12])?,
            g_evals: int(f[13])?,
            prox_evals: int(f[14])?,
            matvecs: int(f[15])?,
        },
    })
}

/// Assembles a [`TraceTable`] while a solver runs.
pub(crate) struct Recorder {
    start: std::time::Instant,
    psi_star: Option<f64>,
    rows: Vec<IterationRecord>,
}

impl Recorder {
    pub(crate) fn start(psi_star: Option<f64>) -> Self {
        Self { start: std::time::Instant::now(), psi_star, rows: Vec::new() }
    }

    pub(crate) fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    pub(crate) fn obj_err(&self, psi: f64) -> Option<f64> {
        self.psi_star.map(|s| objective_error(psi, s))
    }

    pub(crate) fn push(&mut self, mut rec: IterationRecord) {
        rec.k = self.rows.len();
        rec.obj_err = self.obj_err(rec.psi);
        self.rows.push(rec);
    }

    pub(crate) fn finish(self, psi: f64, res_norm: Option<f64>, mu: f64, counts: EvalCounts) -> TraceTable {
        let final_state = FinalState {
            k: self.rows.len(),
            time_s: self.elapsed(),
            psi,
            obj_err: self.obj_err(psi),
            res_norm,
            mu,
            counts,
        };
        TraceTable { rows: self.rows, final_state }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(k: usize, rho: Option<f64>, class: Option<StepClass>) -> IterationRecord {
        IterationRecord {
            k,
            time_s: 0.25 * k as f64,
            psi: 10.0 - k as f64,
            obj_err: None,
            res_norm: Some(1e-3),
            mu: 1.0,
            rho,
            step_class: class,
            pred: rho.map(|_| 0.5),
            ared: rho.map(|r| 0.5 * r),
            d_norm: 0.1,
            sub_iters: 2,
            skipped_pair: false,
            counts: EvalCounts { f_evals: 1, g_evals: 2, prox_evals: 3, matvecs: 4 },
        }
    }

    fn table(rows: Vec<IterationRecord>) -> TraceTable {
        TraceTable {
            rows,
            final_state: FinalState {
                k: 0,
                time_s: 1.0,
                psi: 1.0,
                obj_err: None,
                res_norm: None,
                mu: 1.0,
                counts: EvalCounts::default(),
            },
        }
    }

    #[test]
    fn header_and_row_count() {
        let t = table(vec![
            record(0, Some(0.95), Some(StepClass::HighlySuccessful)),
            record(1, None, Some(StepClass::Unsuccessful)),
        ]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), t.iterations() + 1);
        // rho empty when the ratio test is skipped
        assert_eq!(lines[2].split(',').nth(6), Some(""));
    }

    #[test]
    fn objective_error_normalization() {
        assert_eq!(objective_error(1.5, 0.5), 1.0);
        assert_eq!(objective_error(22.0, 20.0), 0.1);
        assert!(StopRule::ObjectiveError { psi_star: 20.0, tol: 0.1 }.is_met(22.0, None));
        assert!(!StopRule::Residual { tol: 1e-6 }.is_met(0.0, None));
    }

    proptest! {
        #[test]
        fn csv_round_trip(psi in -1e6f64..1e6, rho in proptest::option::of(-10f64..10.0), k in 0usize..10_000) {
            let class = rho.map(|r| if r > 0.9 { StepClass::HighlySuccessful } else { StepClass::Successful });
            let mut rec = record(k, rho, class);
            rec.psi = psi;
            let t = table(vec![rec.clone()]);
            let mut buf = Vec::new();
            t.write_csv(&mut buf).unwrap();
            let rows = TraceTable::read_csv_rows(io::Cursor::new(buf)).unwrap();
            prop_assert_eq!(&rows[0], &rec);
        }
    }
}
