//! CSV and JSON writers. Column dictionaries are listed in the README.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use also::optimizer::{OptTrace, TraceRecord};
use serde::Serialize;

use crate::error::Result;
use crate::experiment::{stat, SweepRow};

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(w, value)?;
    Ok(())
}

/// Columns: iter, backend_value, exact_value, infidelity, copies, evaluations,
/// wall_ms, gain_a, gain_c.
pub fn write_trace(path: &Path, trace: &OptTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in &trace.records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<OptTrace> {
    let mut r = csv::Reader::from_path(path)?;
    let records = r.deserialize::<TraceRecord>().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(OptTrace { records })
}

#[derive(Serialize)]
struct CurveRow {
    iter: u64,
    exact_mean: Option<f64>,
    exact_lower: Option<f64>,
    exact_upper: Option<f64>,
    infidelity_mean: Option<f64>,
    infidelity_lower: Option<f64>,
    infidelity_upper: Option<f64>,
    copies_mean: f64,
}

/// Value of the last row with iter ≤ `it`.
fn at_iter(trace: &OptTrace, it: u64) -> Option<&TraceRecord> {
    trace.records.iter().take_while(|r| r.iter <= it).last()
}

/// Mean ± std band per logged iteration across instances. Instances whose
/// traces log different iterations contribute their latest row at or
/// before each iteration.
pub fn write_curve(path: &Path, traces: &[&OptTrace]) -> Result<()> {
    let iters: BTreeSet<u64> = traces.iter().flat_map(|t| t.records.iter().map(|r| r.iter)).collect();
    let mut w = csv::Writer::from_path(path)?;
    for it in iters {
        let rows: Vec<&TraceRecord> = traces.iter().filter_map(|t| at_iter(t, it)).collect();
        if rows.len() != traces.len() {
            continue;
        }
        let band = |vals: Option<Vec<f64>>| match vals {
            Some(v) => {
                let s = stat(&v);
                (Some(s.mean), Some(s.mean - s.std), Some(s.mean + s.std))
            }
            None => (None, None, None),
        };
        let (em, el, eu) = band(rows.iter().map(|r| r.exact_value).collect());
        let (im, il, iu) = band(rows.iter().map(|r| r.infidelity).collect());
        w.serialize(CurveRow {
            iter: it,
            exact_mean: em,
            exact_lower: el,
            exact_upper: eu,
            infidelity_mean: im,
            infidelity_lower: il,
            infidelity_upper: iu,
            copies_mean: rows.iter().map(|r| r.copies as f64).sum::<f64>() / rows.len() as f64,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Columns: backend, metric, objective, reached, instances, mean_copies, copies_infinite.
pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub d: usize,
    pub terms: usize,
    pub shadows: u64,
    pub seconds: f64,
}

/// Columns: n, d, terms, shadows, seconds.
pub fn write_bench(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
