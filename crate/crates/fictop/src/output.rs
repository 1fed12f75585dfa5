//! CSV artifacts: the per-iteration history and cross-section profiles.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use fictop_core::optimizer::IterationRecord;
use fictop_core::study::Profile;

pub const HISTORY_HEADER: [&str; 8] = ["iter", "volume_fraction", "Ju", "Js", "Jp", "J_combined", "lambda", "mu"];

/// Appends one row per iteration and flushes after each.
pub struct HistoryWriter<W: Write> {
    csv: csv::Writer<W>,
    rows: usize,
}

impl HistoryWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> io::Result<Self> {
        HistoryWriter::new(BufWriter::new(File::create(path)?))
    }
}

impl<W: Write> HistoryWriter<W> {
    pub fn new(w: W) -> io::Result<Self> {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(HISTORY_HEADER)?;
        csv.flush()?;
        Ok(HistoryWriter { csv, rows: 0 })
    }

    pub fn push(&mut self, r: &IterationRecord) -> io::Result<()> {
        let values = [r.volume_fraction, r.ju, r.js, r.jp, r.j_combined, r.lambda, r.mu];
        let mut row = vec![r.iter.to_string()];
        row.extend(values.iter().map(|v| v.to_string()));
        self.csv.write_record(&row)?;
        self.csv.flush()?;
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn into_inner(self) -> io::Result<W> {
        self.csv.into_inner().map_err(|e| e.into_error())
    }
}

/// Columns `distance,x,y,grad_magnitude`.
pub fn write_profile(path: &Path, profile: &Profile) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["distance", "x", "y", "grad_magnitude"])?;
    for &(d, x, y, g) in &profile.samples {
        w.write_record([d.to_string(), x.to_string(), y.to_string(), g.to_string()])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_rows() {
        let mut h = HistoryWriter::new(Vec::new()).unwrap();
        let r = IterationRecord {
            iter: 3,
            volume_fraction: 0.5,
            ju: 1.25,
            js: 0.0,
            jp: 0.0,
            j_combined: 1.25,
            lambda: 0.0,
            mu: 1e-3,
        };
        h.push(&r).unwrap();
        assert_eq!(h.rows(), 1);
        let s = String::from_utf8(h.into_inner().unwrap()).unwrap();
        assert_eq!(s, "iter,volume_fraction,Ju,Js,Jp,J_combined,lambda,mu\n3,0.5,1.25,0,0,1.25,0,0.001\n");
    }
}
