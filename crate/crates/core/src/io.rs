//! File formats: folded samples as CSV `n,y` with a JSON sidecar, sampled
//! signals as CSV `n,g`, everything else as JSON.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UsfError};
use crate::forward::SampledSignal;
use crate::front_end::{FoldedSignal, Mode};
use crate::itersis::IterationRecord;

/// Sidecar metadata for a folded-signal CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldedMeta {
    pub lambda: f64,
    pub bits: u32,
    pub mode: Mode,
    pub step: f64,
    pub seed: u64,
}

/// `data.csv` -> `data.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn read_indexed_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "n" || &headers[1] != column {
        return Err(UsfError::invalid(format!(
            "{}: expected header `n,{column}`, found `{}`",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut values = Vec::new();
    for (i, rec) in rdr.deserialize::<(usize, f64)>().enumerate() {
        let (n, v) = rec?;
        if n != i {
            return Err(UsfError::invalid(format!("{}: row {i} has index {n}", path.display())));
        }
        values.push(v);
    }
    Ok(values)
}

fn write_indexed_column(path: &Path, column: &str, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["n", column])?;
    for (n, v) in values.iter().enumerate() {
        w.serialize((n, v))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `path` (CSV) and its sidecar.
pub fn write_folded(path: &Path, y: &FoldedSignal) -> Result<()> {
    write_indexed_column(path, "y", &y.values)?;
    let meta = FoldedMeta { lambda: y.lambda, bits: y.bits, mode: y.mode, step: y.step, seed: y.seed };
    write_json(&sidecar_path(path), &meta)
}

pub fn read_folded(path: &Path) -> Result<FoldedSignal> {
    let values = read_indexed_column(path, "y")?;
    let meta: FoldedMeta = read_json(&sidecar_path(path))?;
    if !(meta.lambda > 0.0 && meta.step > 0.0) {
        return Err(UsfError::invalid("sidecar lambda and step must be positive"));
    }
    Ok(FoldedSignal { values, step: meta.step, lambda: meta.lambda, bits: meta.bits, mode: meta.mode, seed: meta.seed })
}

pub fn write_sampled(path: &Path, g: &SampledSignal) -> Result<()> {
    write_indexed_column(path, "g", &g.values)
}

/// Reads `n,g`; the step is not stored in the file.
pub fn read_sampled(path: &Path, step: f64) -> Result<SampledSignal> {
    Ok(SampledSignal { values: read_indexed_column(path, "g")?, step })
}

pub fn write_diagnostics(path: &Path, trace: &[IterationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iter", "mse", "stop_norm"])?;
    for r in trace {
        w.serialize((r.iter, r.mse, r.stop_norm))?;
    }
    w.flush()?;
    Ok(())
}
