//! Deterministic on-disk artifacts: a small binary snapshot format for
//! velocity fields and CSV tables whose floats carry 17 significant
//! digits, so identical runs produce byte-identical files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectral::{GridSpec, ScalarField, VectorField};

const MAGIC: &[u8; 4] = b"TMF1";

/// Format a float with enough digits to round-trip exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Snapshot layout: magic "TMF1", u32 n, u32 m, f64 time, then the n
/// velocity components in order, each m^n samples, all little endian.
pub fn write_snapshot(path: &Path, field: &VectorField, time: f64) -> Result<()> {
    let grid = field.grid();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(grid.dim() as u32).to_le_bytes())?;
    w.write_all(&(grid.points_per_axis() as u32).to_le_bytes())?;
    w.write_all(&time.to_le_bytes())?;
    for comp in field.components() {
        for &v in comp.samples() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(VectorField, f64)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Snapshot(format!("{}: bad magic", path.display())));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let n = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4)?;
    let m = u32::from_le_bytes(b4) as usize;
    let grid = GridSpec::new(n, m)
        .map_err(|e| Error::Snapshot(format!("{}: {e}", path.display())))?;
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let time = f64::from_le_bytes(b8);
    let mut comps = Vec::with_capacity(n);
    for _ in 0..n {
        let mut data = vec![0.0; grid.len()];
        for v in data.iter_mut() {
            r.read_exact(&mut b8)?;
            *v = f64::from_le_bytes(b8);
        }
        comps.push(ScalarField::from_samples(grid, data));
    }
    if r.read(&mut b8)? != 0 {
        return Err(Error::Snapshot(format!("{}: trailing bytes", path.display())));
    }
    Ok((VectorField::from_components(comps), time))
}

/// Incremental CSV writer. Rows are assembled from preformatted cells;
/// use [`fmt_f64`] for floats so files are reproducible bit for bit.
pub struct CsvWriter {
    w: BufWriter<File>,
    columns: usize,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{}", header.join(","))?;
        Ok(Self { w, columns: header.len() })
    }

    pub fn row(&mut self, cells: &[String]) -> Result<()> {
        debug_assert_eq!(cells.len(), self.columns);
        writeln!(self.w, "{}", cells.join(","))?;
        Ok(())
    }

    /// Sentinel row recorded when an integration diverges; earlier rows
    /// stay valid so partial output survives the failure.
    pub fn blowup_marker(&mut self, step: usize, t: f64) -> Result<()> {
        let mut cells = vec!["BLOWUP".to_string(), step.to_string(), fmt_f64(t)];
        while cells.len() < self.columns {
            cells.push(String::new());
        }
        cells.truncate(self.columns.max(3));
        writeln!(self.w, "{}", cells.join(","))?;
        self.w.flush()?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::fields::taylor_green;
    use crate::spectral::l2_norm;

    #[test]
    fn snapshot_round_trips_exactly() {
        let grid = GridSpec::new(2, 16).unwrap();
        let u = taylor_green(grid);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.bin");
        write_snapshot(&path, &u, 0.125).unwrap();
        let (v, t) = read_snapshot(&path).unwrap();
        assert_eq!(t, 0.125);
        for (a, b) in u.components().iter().zip(v.components()) {
            assert_eq!(a.samples(), b.samples());
        }
        assert!(l2_norm(&v) > 0.0);
    }

    #[test]
    fn snapshot_rejects_corrupt_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(read_snapshot(&path).is_err());
    }

    #[test]
    fn float_formatting_round_trips() {
        for &x in &[0.1, std::f64::consts::PI, 1e-17, -3.25e8, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn csv_rows_are_stable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut w = CsvWriter::create(&path, &["t", "value"]).unwrap();
        w.row(&[fmt_f64(0.5), fmt_f64(1.0 / 3.0)]).unwrap();
        w.blowup_marker(7, 0.75).unwrap();
        w.finish().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,value");
        assert!(lines.next().unwrap().starts_with("5.0000000000000000e-1,"));
        assert!(lines.next().unwrap().starts_with("BLOWUP,7,"));
    }
}
