//! JSON and CSV formats shared by the command-line tool and the examples.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RipError};
use crate::experiments::ExperimentSummary;
use crate::linalg::{DenseMatrix, FactorPair};
use crate::pattern::TraceEntry;

/// Matrix as `{rows, cols, entries}` with entries in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<f64>,
}

impl MatrixJson {
    pub fn to_matrix(&self) -> Result<DenseMatrix> {
        if self.entries.len() != self.rows * self.cols {
            return Err(RipError::DimensionMismatch(format!(
                "{} entries given for a {}x{} matrix",
                self.entries.len(),
                self.rows,
                self.cols
            )));
        }
        if self.entries.iter().any(|v| !v.is_finite()) {
            return Err(RipError::InvalidArgument("matrix entries must be finite".into()));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.entries))
    }
}

impl From<&DenseMatrix> for MatrixJson {
    fn from(m: &DenseMatrix) -> Self {
        let entries = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect();
        Self { rows: m.nrows(), cols: m.ncols(), entries }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorPairJson {
    pub x: MatrixJson,
    pub z: MatrixJson,
}

impl FactorPairJson {
    pub fn to_pair(&self) -> Result<FactorPair> {
        FactorPair::new(self.x.to_matrix()?, self.z.to_matrix()?)
    }
}

impl From<&FactorPair> for FactorPairJson {
    fn from(fp: &FactorPair) -> Self {
        Self { x: fp.x().into(), z: fp.z().into() }
    }
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let m: MatrixJson = serde_json::from_str(&fs::read_to_string(path)?)?;
    m.to_matrix()
}

pub fn read_factor_pair(path: &Path) -> Result<FactorPair> {
    let fp: FactorPairJson = serde_json::from_str(&fs::read_to_string(path)?)?;
    fp.to_pair()
}

pub fn write_factor_pair(path: &Path, fp: &FactorPair) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(&FactorPairJson::from(fp))?)?;
    Ok(())
}

pub fn write_trace_csv<W: Write>(mut w: W, trace: &[TraceEntry]) -> Result<()> {
    writeln!(w, "evaluation,restart,step,value,best")?;
    for t in trace {
        writeln!(w, "{},{},{},{},{}", t.evaluation, t.restart, t.step, t.value, t.best)?;
    }
    Ok(())
}

pub fn write_sgd_csv<W: Write>(mut w: W, summaries: &[ExperimentSummary]) -> Result<()> {
    writeln!(w, "rank,trial,seed,final_distance,final_loss,success")?;
    for s in summaries {
        for t in &s.per_trial {
            writeln!(w, "{},{},{},{},{},{}", t.rank, t.trial, t.seed, t.final_distance, t.final_loss, t.success)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_json_is_row_major() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let j = MatrixJson::from(&m);
        assert_eq!(j.entries, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(j.to_matrix().unwrap(), m);
        let bad = MatrixJson { rows: 2, cols: 2, entries: vec![1.0] };
        assert!(bad.to_matrix().is_err());
    }

    #[test]
    fn factor_pair_round_trip() {
        let fp = FactorPair::new(
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_row_slice(2, 1, &[2f64.sqrt(), 0.0]),
        )
        .unwrap();
        let text = serde_json::to_string(&FactorPairJson::from(&fp)).unwrap();
        let back: FactorPairJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_pair().unwrap(), fp);
    }
}
