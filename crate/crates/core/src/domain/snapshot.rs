use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DomainError, Grid, VelocityField};

/// JSON header written next to a CSV snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub grid: Grid,
    pub time: f64,
    pub nodes: usize,
    pub columns: Vec<String>,
}

fn columns(dim: usize) -> Vec<String> {
    let mut c: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    c.extend((1..=dim).map(|i| format!("u{i}")));
    c
}

/// Writes `<stem>.csv` (coordinates and components per node) and
/// `<stem>.json` (grid metadata).
pub fn write_snapshot(u: &VelocityField, time: f64, dir: &Path, stem: &str) -> Result<(), DomainError> {
    let grid = u.grid();
    let d = grid.dim();
    let cols = columns(d);
    let mut csv = cols.join(",");
    csv.push('\n');
    for node in 0..grid.num_nodes() {
        let x = grid.coords(node);
        let v = u.at(node);
        let row: Vec<String> = x[..d].iter().chain(&v[..d]).map(|s| format!("{s:.17e}")).collect();
        writeln!(csv, "{}", row.join(",")).expect("string write");
    }
    fs::create_dir_all(dir)?;
    fs::write(dir.join(format!("{stem}.csv")), csv)?;
    let header = SnapshotHeader { grid: grid.clone(), time, nodes: grid.num_nodes(), columns: cols };
    let json = serde_json::to_string_pretty(&header).map_err(|e| DomainError::Format(e.to_string()))?;
    fs::write(dir.join(format!("{stem}.json")), json)?;
    Ok(())
}

pub fn read_snapshot(dir: &Path, stem: &str) -> Result<(SnapshotHeader, VelocityField), DomainError> {
    let header: SnapshotHeader = serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)
        .map_err(|e| DomainError::Format(e.to_string()))?;
    let grid = &header.grid;
    let d = grid.dim();
    let text = fs::read_to_string(dir.join(format!("{stem}.csv")))?;
    let mut u = VelocityField::zeros(grid);
    let mut rows = 0;
    for (node, line) in text.lines().skip(1).enumerate() {
        let vals = line
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| DomainError::Format(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        if vals.len() != 2 * d || node >= grid.num_nodes() {
            return Err(DomainError::Format(format!("bad row {node}")));
        }
        for c in 0..d {
            u.set(c, node, vals[d + c]);
        }
        rows += 1;
    }
    if rows != grid.num_nodes() {
        return Err(DomainError::Format(format!("expected {} rows, found {rows}", grid.num_nodes())));
    }
    Ok((header, u))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(2, 1.0, 3, true).unwrap();
        let u = VelocityField::from_fn(&g, |x| [x[0].sin() / 3.0, x[1].exp(), 0.0]);
        write_snapshot(&u, 0.25, dir.path(), "snap").unwrap();
        let (h, v) = read_snapshot(dir.path(), "snap").unwrap();
        assert_eq!(h.time, 0.25);
        assert_eq!(h.columns, ["x1", "x2", "u1", "u2"]);
        assert_eq!(u, v);
    }
}
