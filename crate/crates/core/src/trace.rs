//! Per-run evaluation history and its CSV form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::bench::merit_phi;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// Combined `r` and `c` evaluations so far.
    pub fevals: u64,
    /// Best merit value seen over the run's iterates.
    pub merit_phi: f64,
    pub f: f64,
    pub cviol_inf: f64,
    pub kkt_scaled: f64,
}

/// Step function of the best-so-far merit against evaluations. Rows have
/// strictly increasing `fevals`; a second record at the same count replaces
/// the first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    rows: Vec<TraceRow>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn record(&mut self, fevals: u64, f: f64, cviol_inf: f64, kkt_scaled: f64) {
        let phi = merit_phi(f, cviol_inf);
        let best = self.rows.last().map_or(phi, |r| r.merit_phi.min(phi));
        let row = TraceRow {
            fevals,
            merit_phi: best,
            f,
            cviol_inf,
            kkt_scaled,
        };
        match self.rows.last_mut() {
            Some(last) if last.fevals >= fevals => *last = row,
            _ => self.rows.push(row),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        for row in &self.rows {
            wtr.serialize(row)?;
        }
        if self.rows.is_empty() {
            wtr.write_record(["fevals", "merit_phi", "f", "cviol_inf", "kkt_scaled"])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let rows = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<TraceRow>, _>>()?;
        Ok(Trace { rows })
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is ascii")
    }
}

impl From<Vec<TraceRow>> for Trace {
    fn from(rows: Vec<TraceRow>) -> Self {
        Trace { rows }
    }
}
