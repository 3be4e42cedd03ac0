//! CSV layouts of the per-cell artifacts: simulation results, capacity
//! statistics, analytic indicator sets and the event log.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::analytic::IndicatorSet;
use crate::error::{Error, Result};
use crate::grid::{CellId, NUM_CELLS};
use crate::radio::CapacityStats;
use crate::sim::{EventRecord, SimResult};

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::io("<csv sink>", e))
}

/// `cell_id,sigma_hat,rho_hat_1..S,n_hat,seed,virtual_time`.
pub fn write_sim_result<W: Write>(result: &SimResult, sink: W) -> Result<()> {
    let s = result.cells.first().map_or(0, |c| c.rho_hat.len());
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["cell_id".to_string(), "sigma_hat".into()];
    header.extend((1..=s).map(|i| format!("rho_hat_{i}")));
    header.extend(["n_hat".into(), "seed".into(), "virtual_time".into()]);
    w.write_record(&header)?;
    for c in &result.cells {
        let mut rec = vec![c.cell.to_string(), c.sigma_hat.to_string()];
        rec.extend(c.rho_hat.iter().map(f64::to_string));
        rec.extend([
            c.n_hat.to_string(),
            result.seed.to_string(),
            result.virtual_time.to_string(),
        ]);
        w.write_record(&rec)?;
    }
    finish(w)
}

/// `time,user,kind,cell_id,option`.
pub fn write_event_log<W: Write>(log: &[EventRecord], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["time", "user", "kind", "cell_id", "option"])?;
    for e in log {
        w.serialize((e.time, e.user, e.kind, e.cell.0, e.option))?;
    }
    finish(w)
}

/// One line of a capacity statistics table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapStatsRow {
    pub cell_id: u16,
    pub mean_bps: f64,
    pub median_bps: f64,
    pub var_log_c: f64,
    pub n_samples: u64,
    pub seed: u64,
}

impl CapStatsRow {
    pub fn new(cell: CellId, stats: &CapacityStats, seed: u64) -> Self {
        CapStatsRow {
            cell_id: cell.0,
            mean_bps: stats.mean_bps,
            median_bps: stats.median_bps,
            var_log_c: stats.var_log_c,
            n_samples: stats.sample_count,
            seed,
        }
    }

    pub fn stats(&self) -> CapacityStats {
        CapacityStats {
            mean_bps: self.mean_bps,
            median_bps: self.median_bps,
            var_log_c: self.var_log_c,
            sample_count: self.n_samples,
        }
    }
}

/// `cell_id,mean_bps,median_bps,var_log_c,n_samples,seed`.
pub fn write_capstats<W: Write>(rows: &[CapStatsRow], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record([
            "cell_id",
            "mean_bps",
            "median_bps",
            "var_log_c",
            "n_samples",
            "seed",
        ])?;
    }
    finish(w)
}

/// Reads a capacity table into per-cell slots (index = cell index).
pub fn read_capstats<R: Read>(source: R) -> Result<Vec<Option<CapacityStats>>> {
    let mut out = vec![None; NUM_CELLS];
    for row in csv::Reader::from_reader(source).deserialize() {
        let row: CapStatsRow = row?;
        if !(1..=NUM_CELLS as u16).contains(&row.cell_id) {
            return Err(Error::Domain(format!(
                "cell id {} outside 1..={NUM_CELLS}",
                row.cell_id
            )));
        }
        out[CellId(row.cell_id).index()] = Some(row.stats());
    }
    Ok(out)
}

/// `cell_id,variant,sigma,rho_1..S,beta_used,gamma_used`; several sets may
/// share one table.
pub fn write_indicators<W: Write>(sets: &[IndicatorSet], sink: W) -> Result<()> {
    let s = sets
        .first()
        .and_then(|set| set.cells.first())
        .map_or(0, |c| c.rho.len());
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["cell_id".to_string(), "variant".into(), "sigma".into()];
    header.extend((1..=s).map(|i| format!("rho_{i}")));
    header.extend(["beta_used".into(), "gamma_used".into()]);
    w.write_record(&header)?;
    for set in sets {
        for c in &set.cells {
            let mut rec = vec![
                c.cell.to_string(),
                set.variant.to_string(),
                c.sigma.to_string(),
            ];
            rec.extend(c.rho.iter().map(f64::to_string));
            rec.push(c.beta_used.to_string());
            rec.push(c.gamma_used.map_or_else(String::new, |g| g.to_string()));
            w.write_record(&rec)?;
        }
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capstats_round_trip() {
        let stats = CapacityStats {
            mean_bps: 2.3e7,
            median_bps: 1.9e7,
            var_log_c: 0.41,
            sample_count: 1000,
        };
        let rows: Vec<_> = (0..NUM_CELLS)
            .map(|j| CapStatsRow::new(CellId::from_index(j), &stats, 5))
            .collect();
        let mut buf = Vec::new();
        write_capstats(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("cell_id,mean_bps,median_bps,var_log_c,n_samples,seed\n"));
        let back = read_capstats(buf.as_slice()).unwrap();
        assert!(back.iter().all(|s| *s == Some(stats)));
    }

    #[test]
    fn partial_capstats_leave_gaps() {
        let csv = "cell_id,mean_bps,median_bps,var_log_c,n_samples,seed\n3,1e7,9e6,0.2,10,1\n";
        let back = read_capstats(csv.as_bytes()).unwrap();
        assert!(back[2].is_some());
        assert_eq!(back.iter().filter(|s| s.is_some()).count(), 1);
        let bad = "cell_id,mean_bps,median_bps,var_log_c,n_samples,seed\n58,1e7,9e6,0.2,10,1\n";
        assert!(read_capstats(bad.as_bytes()).is_err());
    }
}
