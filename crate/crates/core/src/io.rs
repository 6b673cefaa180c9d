//! Regular periodic grids read from `x,y,<value>` CSV files (a field `f` or a
//! conformal exponent `u`). Rows may come in any order; the grid must start
//! at the origin and be uniformly spaced, and the cell is inferred as
//! `n·spacing` in each direction.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::PeriodicSpline2;

#[derive(Debug, Clone, PartialEq)]
pub struct GridSamples {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    /// Row-major: `values[j·nx + i]` at `(i·lx/nx, j·ly/ny)`.
    pub values: Vec<f64>,
}

impl GridSamples {
    pub fn spline(&self) -> Result<PeriodicSpline2> {
        PeriodicSpline2::new(self.nx, self.ny, self.lx, self.ly, &self.values)
    }
}

pub fn read_grid_csv(path: &Path, column: &str) -> Result<GridSamples> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_grid_csv_from(file, column)
}

pub fn read_grid_csv_from<R: Read>(reader: R, column: &str) -> Result<GridSamples> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Io(e.to_string()))?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Io(format!("missing column {name:?}; expected x,y,{column}")))
    };
    let (cx, cy, cv) = (find("x")?, find("y")?, find(column)?);
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Io(e.to_string()))?;
        let num = |c: usize| -> Result<f64> {
            let raw = rec.get(c).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Io(format!("line {}: {raw:?} is not a finite number", line + 2)))
        };
        rows.push((num(cx)?, num(cy)?, num(cv)?, line + 2));
    }
    let xs = axis(rows.iter().map(|r| r.0), "x")?;
    let ys = axis(rows.iter().map(|r| r.1), "y")?;
    let (nx, ny) = (xs.len(), ys.len());
    let mut values = vec![f64::NAN; nx * ny];
    for (x, y, v, line) in rows {
        let (i, j) = (locate(&xs, x), locate(&ys, y));
        let slot = &mut values[j * nx + i];
        if !slot.is_nan() {
            return Err(Error::Io(format!("line {line}: duplicate sample at ({x}, {y})")));
        }
        *slot = v;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Io(format!("grid is incomplete: expected {nx} x {ny} samples")));
    }
    let spacing = |a: &[f64]| a[1] - a[0];
    Ok(GridSamples { nx, ny, lx: nx as f64 * spacing(&xs), ly: ny as f64 * spacing(&ys), values })
}

fn axis(values: impl Iterator<Item = f64>, name: &str) -> Result<Vec<f64>> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (1.0 + b.abs()));
    if v.len() < 4 {
        return Err(Error::Io(format!("need at least 4 distinct {name} values, found {}", v.len())));
    }
    let h = v[1] - v[0];
    if v[0].abs() > 1e-9 * h.max(1.0) {
        return Err(Error::Io(format!("the {name} grid must start at 0, found {}", v[0])));
    }
    if v.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-6 * h) {
        return Err(Error::Io(format!("the {name} grid is not uniformly spaced")));
    }
    Ok(v)
}

fn locate(axis: &[f64], x: f64) -> usize {
    let h = axis[1] - axis[0];
    ((x - axis[0]) / h).round().clamp(0.0, (axis.len() - 1) as f64) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_text(n: usize) -> String {
        let mut s = String::from("x,y,f\n");
        // deliberately column-major to exercise reordering
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (i as f64 / n as f64, j as f64 / n as f64);
                s.push_str(&format!("{x},{y},{}\n", (2.0 * std::f64::consts::PI * x).cos() + y));
            }
        }
        s
    }

    #[test]
    fn reads_a_periodic_grid() {
        let g = read_grid_csv_from(grid_text(8).as_bytes(), "f").unwrap();
        assert_eq!((g.nx, g.ny), (8, 8));
        assert!((g.lx - 1.0).abs() < 1e-12 && (g.ly - 1.0).abs() < 1e-12);
        assert!((g.values[8 * 3 + 2] - ((2.0 * std::f64::consts::PI * 0.25).cos() + 0.375)).abs() < 1e-12);
        let spline = g.spline().unwrap();
        assert!((spline.eval(0.25, 0.375) - g.values[8 * 3 + 2]).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_grids() {
        let mut text = grid_text(8);
        text.push_str("0,0,1\n");
        assert!(matches!(read_grid_csv_from(text.as_bytes(), "f"), Err(Error::Io(m)) if m.contains("duplicate")));
        assert!(read_grid_csv_from(grid_text(8).as_bytes(), "u").is_err());
        let bad = "x,y,f\n0,0,1\n0.1,0,nan\n";
        assert!(matches!(read_grid_csv_from(bad.as_bytes(), "f"), Err(Error::Io(m)) if m.contains("line 3")));
        let holes: String = grid_text(8).lines().take(40).map(|l| format!("{l}\n")).collect();
        assert!(read_grid_csv_from(holes.as_bytes(), "f").is_err());
    }
}
