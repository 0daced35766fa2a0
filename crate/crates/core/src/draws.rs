//! Row-major draw matrices and their CSV layout.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// `T x d` matrix of draws, one row per iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Draws {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Draws {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Draws> {
        if rows * cols != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values cannot fill a {rows} x {cols} matrix",
                data.len()
            )));
        }
        Ok(Draws { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Draws {
        Draws {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Draws> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Draws::new(rows.len(), cols, data)
    }

    /// A single-parameter matrix.
    pub fn from_column(values: Vec<f64>) -> Draws {
        Draws {
            rows: values.len(),
            cols: 1,
            data: values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.cols..(t + 1) * self.cols]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[t * self.cols..(t + 1) * self.cols]
    }

    pub fn get(&self, t: usize, j: usize) -> f64 {
        self.data[t * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        assert!(j < self.cols, "column {j} out of range");
        self.data.iter().skip(j).step_by(self.cols).copied().collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select_columns(&self, cols: &[usize]) -> Draws {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for t in 0..self.rows {
            let row = self.row(t);
            data.extend(cols.iter().map(|&j| row[j]));
        }
        Draws {
            rows: self.rows,
            cols: cols.len(),
            data,
        }
    }

    /// The last `n` rows.
    pub fn tail(&self, n: usize) -> Draws {
        let n = n.min(self.rows);
        Draws {
            rows: n,
            cols: self.cols,
            data: self.data[(self.rows - n) * self.cols..].to_vec(),
        }
    }

    /// CSV with header `iteration,param_1,...,param_d`; iterations count from 1.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "iteration")?;
        for j in 1..=self.cols {
            write!(out, ",param_{j}")?;
        }
        writeln!(out)?;
        for t in 0..self.rows {
            write!(out, "{}", t + 1)?;
            for v in self.row(t) {
                write!(out, ",{v:.16e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Draws> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Config("empty samples CSV".into()))??;
        let cols = header.trim().split(',').count().saturating_sub(1);
        if !header.starts_with("iteration") || cols == 0 {
            return Err(Error::Config(format!("unexpected samples header {header:?}")));
        }
        let mut data = Vec::new();
        let mut rows = 0;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != cols + 1 {
                return Err(Error::Config(format!("row {} has {} fields", rows + 2, fields.len())));
            }
            for f in &fields[1..] {
                data.push(
                    f.parse::<f64>()
                        .map_err(|e| Error::Config(format!("row {}: {e}", rows + 2)))?,
                );
            }
            rows += 1;
        }
        Draws::new(rows, cols, data)
    }
}

/// Retained draws from one shard's chain.
#[derive(Debug, Clone, PartialEq)]
pub struct SubposteriorSamples {
    pub draws: Draws,
    /// 1-based shard index; the full-data reference chain uses 0.
    pub shard_id: usize,
    pub seed: u64,
    pub burnin: usize,
}

impl SubposteriorSamples {
    pub fn len(&self) -> usize {
        self.draws.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.draws.cols()
    }
}
