//! CSV emission and the snapshot CSV reader.
//!
//! Floats are written with 17 significant digits so that every value reads
//! back bit-exactly.

use std::io::{Read, Write};

use thiserror::Error;

use crate::master::Trajectory;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad header: {0}")]
    Header(String),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
}

/// `{:.16e}`: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a header and rows of preformatted cells.
pub fn write_table<W: Write>(out: W, header: &[String], rows: &[Vec<String>]) -> Result<(), CsvError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn species_columns(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}_{i}"))
}

/// Snapshot CSV `t, k, x, u_1 … u_n`, one row per sample time and site.
pub fn write_snapshots<W: Write>(out: W, traj: &Trajectory) -> Result<(), CsvError> {
    let n = traj.n();
    let header: Vec<String> = ["t", "k", "x"].iter().map(|s| s.to_string()).chain(species_columns("u", n)).collect();
    let mut rows = Vec::new();
    for s in &traj.snapshots {
        for k in 0..traj.grid.m() {
            let mut row = vec![fmt_f64(s.time), k.to_string(), fmt_f64(traj.grid.x(k))];
            row.extend(s.u.column(k).iter().map(|&v| fmt_f64(v)));
            rows.push(row);
        }
    }
    write_table(out, &header, &rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRow {
    pub t: f64,
    pub k: usize,
    pub x: f64,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotTable {
    pub n: usize,
    pub rows: Vec<SnapshotRow>,
}

/// Reads a snapshot CSV, checking the header and every cell.
pub fn read_snapshots<R: Read>(input: R) -> Result<SnapshotTable, CsvError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 4 || cols[..3] != ["t", "k", "x"] {
        return Err(CsvError::Header("expected t,k,x,u_1,...".into()));
    }
    let n = cols.len() - 3;
    for (i, c) in cols[3..].iter().enumerate() {
        if *c != format!("u_{}", i + 1) {
            return Err(CsvError::Header(format!("column {} is `{c}`, expected u_{}", i + 4, i + 1)));
        }
    }
    let mut rows = Vec::new();
    for (idx, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = idx + 1;
        let float = |j: usize| -> Result<f64, CsvError> {
            rec[j].trim().parse::<f64>().map_err(|e| CsvError::Row {
                row,
                message: format!("column {}: {e}", j + 1),
            })
        };
        let k = rec[1].trim().parse::<usize>().map_err(|e| CsvError::Row {
            row,
            message: format!("site index: {e}"),
        })?;
        let u = (3..3 + n).map(float).collect::<Result<Vec<_>, _>>()?;
        rows.push(SnapshotRow {
            t: float(0)?,
            k,
            x: float(2)?,
            u,
        });
    }
    Ok(SnapshotTable { n, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::master::DiscreteState;
    use ndarray::array;

    #[test]
    fn round_trip_is_exact() {
        let g = Grid::new(3).unwrap();
        let u = array![[0.1, 1.0 / 3.0, std::f64::consts::PI], [1e-300, 2.5e10, 7.0]];
        let traj = Trajectory {
            grid: g,
            snapshots: vec![DiscreteState::new(g, u.clone(), 0.1 + 0.2).unwrap()],
            steps: 0,
        };
        let mut buf = Vec::new();
        write_snapshots(&mut buf, &traj).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,k,x,u_1,u_2\n"));
        let table = read_snapshots(&buf[..]).unwrap();
        assert_eq!(table.n, 2);
        assert_eq!(table.rows.len(), 3);
        for row in &table.rows {
            assert_eq!(row.t, 0.1 + 0.2);
            assert_eq!(row.x, g.x(row.k));
            assert_eq!(row.u, vec![u[[0, row.k]], u[[1, row.k]]]);
        }
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(read_snapshots("a,b\n".as_bytes()).is_err());
        assert!(read_snapshots("t,k,x,u_2\n".as_bytes()).is_err());
        assert!(read_snapshots("t,k,x,u_1\n0,-1,0,1\n".as_bytes()).is_err());
        assert!(read_snapshots("t,k,x,u_1\n0,0,0\n".as_bytes()).is_err());
        assert!(read_snapshots("t,k,x,u_1\n0,0,0,zz\n".as_bytes()).is_err());
        assert!(read_snapshots("t,k,x,u_1\n0,0,0,1\n".as_bytes()).is_ok());
    }
}
