//! Gridded host landscape.
//!
//! Cell centres sit at `((col + 0.5) * cell_size, (row + 0.5) * cell_size)`
//! kilometres. Host density `h` is the fraction of a cell under the host crop.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const DEFAULT_CELL_SIZE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId {
    pub row: usize,
    pub col: usize,
}

impl CellId {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Landscape {
    n_rows: usize,
    n_cols: usize,
    cell_size: f64,
    h: Vec<f64>,
}

impl Landscape {
    /// Builds a landscape from row-major densities.
    pub fn new(n_rows: usize, n_cols: usize, cell_size: f64, h: Vec<f64>) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::InvalidInput(format!(
                "landscape must have at least one row and column, got {n_rows}x{n_cols}"
            )));
        }
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cell size must be positive, got {cell_size}"
            )));
        }
        if h.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch {
                expected: n_rows * n_cols,
                actual: h.len(),
            });
        }
        if let Some(k) = h.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Grid {
                path: "<memory>".into(),
                row: k / n_cols,
                col: k % n_cols,
                message: format!("host density {} outside [0, 1]", h[k]),
            });
        }
        Ok(Self {
            n_rows,
            n_cols,
            cell_size,
            h,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn n_cells(&self) -> usize {
        self.h.len()
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn densities(&self) -> &[f64] {
        &self.h
    }

    pub fn density(&self, cell: CellId) -> Result<f64> {
        Ok(self.h[self.index(cell)?])
    }

    pub fn contains(&self, cell: CellId) -> bool {
        cell.row < self.n_rows && cell.col < self.n_cols
    }

    /// Row-major linear index.
    pub fn index(&self, cell: CellId) -> Result<usize> {
        if !self.contains(cell) {
            return Err(Error::OutOfBounds {
                row: cell.row,
                col: cell.col,
                n_rows: self.n_rows,
                n_cols: self.n_cols,
            });
        }
        Ok(cell.row * self.n_cols + cell.col)
    }

    pub fn cell(&self, index: usize) -> CellId {
        CellId::new(index / self.n_cols, index % self.n_cols)
    }

    /// The cell containing the geometric centre of the grid.
    pub fn centre(&self) -> CellId {
        CellId::new(self.n_rows / 2, self.n_cols / 2)
    }

    pub fn centre_km(&self, cell: CellId) -> (f64, f64) {
        (
            (cell.col as f64 + 0.5) * self.cell_size,
            (cell.row as f64 + 0.5) * self.cell_size,
        )
    }

    /// Euclidean distance between cell centres, in km.
    pub fn distance(&self, a: CellId, b: CellId) -> Result<f64> {
        self.index(a)?;
        self.index(b)?;
        Ok(self.cell_size * grid_offset_sq(a, b).sqrt())
    }

    /// Serializes as a headerless comma-separated grid, one row per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.h.len() * 6);
        for row in self.h.chunks(self.n_cols) {
            for (c, v) in row.iter().enumerate() {
                if c > 0 {
                    out.push(',');
                }
                write!(out, "{v}").expect("writing to a String cannot fail");
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Parses a headerless numeric grid. `source` names the input in errors.
    pub fn from_csv(text: &str, source: &str, cell_size: f64) -> Result<Self> {
        let grid_err = |row: usize, col: usize, message: String| Error::Grid {
            path: source.to_string(),
            row,
            col,
            message,
        };
        let mut h = Vec::new();
        let mut n_cols = None;
        let mut n_rows = 0;
        for (r, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let mut count = 0;
            for (c, field) in line.split(',').enumerate() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| grid_err(r, c, format!("non-numeric value {field:?}")))?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(grid_err(r, c, format!("host density {v} outside [0, 1]")));
                }
                h.push(v);
                count += 1;
            }
            match n_cols {
                None => n_cols = Some(count),
                Some(expected) if expected != count => {
                    return Err(grid_err(
                        r,
                        count.min(expected),
                        format!("ragged row: {count} columns, expected {expected}"),
                    ));
                }
                _ => {}
            }
            n_rows += 1;
        }
        let n_cols = n_cols.ok_or_else(|| Error::InvalidInput(format!("{source}: empty landscape")))?;
        Self::new(n_rows, n_cols, cell_size, h)
    }
}

/// Squared centre offset in cell units.
pub(crate) fn grid_offset_sq(a: CellId, b: CellId) -> f64 {
    let dr = a.row.abs_diff(b.row) as f64;
    let dc = a.col.abs_diff(b.col) as f64;
    dr * dr + dc * dc
}

pub fn uniform_landscape(
    n_rows: usize,
    n_cols: usize,
    occupancy: f64,
    cell_size: f64,
) -> Result<Landscape> {
    if !(0.0..=1.0).contains(&occupancy) {
        return Err(Error::InvalidParameter(format!(
            "occupancy must lie in [0, 1], got {occupancy}"
        )));
    }
    Landscape::new(n_rows, n_cols, cell_size, vec![occupancy; n_rows * n_cols])
}

/// Reads a landscape CSV with the default 1 km cell size.
pub fn load_landscape(path: impl AsRef<Path>) -> Result<Landscape> {
    load_landscape_with_cell_size(path, DEFAULT_CELL_SIZE)
}

pub fn load_landscape_with_cell_size(path: impl AsRef<Path>, cell_size: f64) -> Result<Landscape> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Landscape::from_csv(&text, &path.display().to_string(), cell_size)
}

pub fn distance(a: CellId, b: CellId, landscape: &Landscape) -> Result<f64> {
    landscape.distance(a, b)
}
