use std::io::Write;
use std::path::Path;

use crate::error::{dim_err, Error, Result};

/// One CSV cell. Reals are written with 17 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Real(r) => format!("{r:.16e}"),
        }
    }

    pub fn as_f64(&self) -> f64 {
        match *self {
            Cell::Int(i) => i as f64,
            Cell::Real(r) => r,
        }
    }
}

/// Rectangular numeric table with a header row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(dim_err(format!("row has {} cells, header has {}", row.len(), self.header.len())));
        }
        if let Some(c) = row.iter().find(|c| !c.as_f64().is_finite()) {
            return Err(Error::Evaluation(format!("non-finite cell {c:?}")));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// All values of a named column.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[i].as_f64()).collect())
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Internal(e.to_string()))
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting() {
        let mut t = CsvTable::new(["step", "value"]);
        t.push(vec![3usize.into(), 0.1f64.into()]).unwrap();
        t.push(vec![true.into(), (-2.5f64).into()]).unwrap();
        let s = t.to_csv_string().unwrap();
        assert_eq!(s, "step,value\n3,1.0000000000000001e-1\n1,-2.5000000000000000e0\n");
        let back: f64 = "1.0000000000000001e-1".parse().unwrap();
        assert_eq!(back, 0.1);
    }

    #[test]
    fn rejects_ragged_and_non_finite() {
        let mut t = CsvTable::new(["a", "b"]);
        assert!(t.push(vec![Cell::Int(1)]).is_err());
        assert!(t.push(vec![Cell::Int(1), Cell::Real(f64::INFINITY)]).is_err());
    }
}
