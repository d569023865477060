//! On-disk instance format: row-per-line CSV matrices plus a JSON sidecar.
//!
//! A least-squares instance directory holds `A.csv` (one row of `A` per
//! line), `b.csv` (one entry per line) and `instance.json` with
//! `{n, m, lambda, groups, seed, family}`. Group indices are zero-based;
//! `groups` is `null` for non-grouped regularizers.

use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{DenseLeastSquaresData, Family, Groups, LeastSquaresInstance, Regularizer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub n: usize,
    pub m: usize,
    pub lambda: f64,
    pub groups: Option<Vec<Vec<usize>>>,
    pub seed: u64,
    pub family: Family,
}

fn bad_data(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

pub fn write_matrix_csv(path: &Path, rows: usize, cols: usize, at: impl Fn(usize, usize) -> f64) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for i in 0..rows {
        for j in 0..cols {
            if j > 0 {
                w.write_all(b",")?;
            }
            // Display for f64 is shortest round-trip
            write!(w, "{}", at(i, j))?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_matrix_csv(path: &Path) -> io::Result<DMatrix<f64>> {
    let file = io::BufReader::new(fs::File::open(path)?);
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (lineno, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad_data(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(bad_data(format!(
                    "{}:{}: expected {c} columns, found {}",
                    path.display(),
                    lineno + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    Ok(DMatrix::from_row_slice(rows, cols.unwrap_or(0), &values))
}

pub fn write_least_squares(dir: &Path, inst: &LeastSquaresInstance) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let a = &inst.data.a;
    write_matrix_csv(&dir.join("A.csv"), a.nrows(), a.ncols(), |i, j| a[(i, j)])?;
    write_matrix_csv(&dir.join("b.csv"), inst.data.b.len(), 1, |i, _| inst.data.b[i])?;
    let meta = InstanceMeta {
        n: a.ncols(),
        m: a.nrows(),
        lambda: inst.regularizer.lambda(),
        groups: inst.regularizer.groups().map(|g| g.sets().to_vec()),
        seed: inst.seed,
        family: inst.family,
    };
    write_meta(&dir.join("instance.json"), &meta)
}

pub fn write_meta(path: &Path, meta: &InstanceMeta) -> io::Result<()> {
    let text = serde_json::to_string_pretty(meta).map_err(io::Error::other)?;
    fs::write(path, text + "\n")
}

pub fn read_meta(path: &Path) -> io::Result<InstanceMeta> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| bad_data(format!("{}: {e}", path.display())))
}

pub fn read_least_squares(dir: &Path) -> io::Result<LeastSquaresInstance> {
    let meta = read_meta(&dir.join("instance.json"))?;
    let a = read_matrix_csv(&dir.join("A.csv"))?;
    let b = read_matrix_csv(&dir.join("b.csv"))?;
    if (a.nrows(), a.ncols()) != (meta.m, meta.n) || b.nrows() != meta.m || b.ncols() != 1 {
        return Err(bad_data(format!("{}: matrix shapes disagree with instance.json", dir.display())));
    }
    let cfg = |e: crate::Error| bad_data(format!("{}: {e}", dir.display()));
    let reg = match &meta.groups {
        Some(sets) => Regularizer::group_l21(meta.lambda, Groups::new(sets.clone(), meta.n).map_err(cfg)?),
        None => Regularizer::l1(meta.lambda),
    }
    .map_err(cfg)?;
    let data = DenseLeastSquaresData::new(a, DVector::from_column_slice(b.as_slice())).map_err(cfg)?;
    LeastSquaresInstance::from_parts(data, reg, meta.family, meta.seed).map_err(cfg)
}

/// Writes a row-major grayscale image as binary PGM, clamping to `[0, 1]`.
pub fn write_pgm(path: &Path, side: usize, pixels: &[f64]) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write!(w, "P5\n{side} {side}\n255\n")?;
    let bytes: Vec<u8> = pixels.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    w.write_all(&bytes)?;
    w.flush()
}
