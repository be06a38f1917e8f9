//! Time-indexed simulation trace with a fixed column schema.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SimTrace {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SimTrace {
    pub fn new(columns: Vec<String>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "trace row does not match the schema");
        self.rows.push(row);
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.index(name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// CSV with a one-line header. Every `decimate`-th row is written.
    /// Every `n`-th row, starting with the first.
    pub fn decimated(&self, n: usize) -> Self {
        Self { columns: self.columns.clone(), rows: self.rows.iter().step_by(n.max(1)).cloned().collect() }
    }

    pub fn write_csv<W: Write>(&self, out: W, decimate: usize) -> Result<()> {
        let io = |e: csv::Error| Error::Io(format!("cannot write trace: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns).map_err(io)?;
        for row in self.rows.iter().step_by(decimate.max(1)) {
            w.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io(format!("cannot write trace: {e}")))
    }

    pub fn save_csv(&self, path: &Path, decimate: usize) -> Result<()> {
        let file =
            std::fs::File::create(path).map_err(|e| Error::Io(format!("cannot create {}: {e}", path.display())))?;
        self.write_csv(std::io::BufWriter::new(file), decimate)
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let bad = |e: csv::Error| Error::Config(format!("cannot read trace: {e}"));
        let mut r = csv::Reader::from_reader(input);
        let columns = r.headers().map_err(bad)?.iter().map(String::from).collect();
        let mut trace = Self::new(columns);
        for rec in r.records() {
            let rec = rec.map_err(bad)?;
            let row = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Config(format!("bad number {s:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            trace.push(row);
        }
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let mut t = SimTrace::new(vec!["t".into(), "x".into()]);
        for k in 0..5 {
            t.push(vec![k as f64 * 0.1, (k as f64).sqrt() / 3.0]);
        }
        let mut buf = Vec::new();
        t.write_csv(&mut buf, 1).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("t,x\n0.0,"));
        assert_eq!(SimTrace::read_csv(&buf[..]).unwrap(), t);
        let mut dec = Vec::new();
        t.write_csv(&mut dec, 2).unwrap();
        assert_eq!(SimTrace::read_csv(&dec[..]).unwrap().len(), 3);
    }

    #[test]
    fn extreme_values_round_trip() {
        let vals = [9.570225674808305e-14, -1.5e300, f64::INFINITY, f64::NAN, 5e-324];
        let mut t = SimTrace::new(vec!["v".into()]);
        for v in vals {
            t.push(vec![v]);
        }
        let mut buf = Vec::new();
        t.write_csv(&mut buf, 1).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().contains("9.570225674808305e-14"));
        let back = SimTrace::read_csv(&buf[..]).unwrap().column("v").unwrap();
        for (a, b) in vals.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
