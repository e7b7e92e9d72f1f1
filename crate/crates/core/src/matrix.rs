//! Dense day × feature matrix of one participant with explicit missing
//! cells. Rows carry their day number so window-based strategies can find
//! calendar blocks.

use alloc::vec::Vec;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_cols: usize,
    cells: Vec<Option<f64>>,
    days: Vec<i64>,
}

impl FeatureMatrix {
    /// Row-major cells. Panics on shape mismatch.
    pub fn from_parts(n_rows: usize, n_cols: usize, cells: Vec<Option<f64>>, days: Vec<i64>) -> Self {
        assert_eq!(cells.len(), n_rows * n_cols, "cell count does not match shape");
        assert_eq!(days.len(), n_rows, "day count does not match row count");
        Self {
            n_rows,
            n_cols,
            cells,
            days,
        }
    }

    /// Rows on consecutive days starting at day 0.
    pub fn from_rows(rows: &[Vec<Option<f64>>]) -> Self {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut cells = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            assert_eq!(r.len(), n_cols, "ragged rows");
            cells.extend_from_slice(r);
        }
        let days = (0..rows.len() as i64).collect();
        Self::from_parts(rows.len(), n_cols, cells, days)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn days(&self) -> &[i64] {
        &self.days
    }

    pub fn get(&self, r: usize, c: usize) -> Option<f64> {
        self.cells[r * self.n_cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Option<f64>) {
        self.cells[r * self.n_cols + c] = v;
    }

    pub fn is_observed(&self, r: usize, c: usize) -> bool {
        self.get(r, c).is_some()
    }

    pub fn row(&self, r: usize) -> &[Option<f64>] {
        &self.cells[r * self.n_cols..(r + 1) * self.n_cols]
    }

    pub fn cells(&self) -> &[Option<f64>] {
        &self.cells
    }

    /// Observed values of column `c`, in row order.
    pub fn column_observed(&self, c: usize) -> Vec<f64> {
        (0..self.n_rows).filter_map(|r| self.get(r, c)).collect()
    }

    pub fn n_observed(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn n_missing(&self) -> usize {
        self.cells.len() - self.n_observed()
    }

    /// Columns with at least one observed value.
    pub fn active_columns(&self) -> Vec<usize> {
        (0..self.n_cols).filter(|&c| (0..self.n_rows).any(|r| self.is_observed(r, c))).collect()
    }

    /// New matrix with the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut cells = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            cells.extend_from_slice(self.row(r));
        }
        let days = rows.iter().map(|&r| self.days[r]).collect();
        FeatureMatrix::from_parts(rows.len(), self.n_cols, cells, days)
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn stack(&self, other: &FeatureMatrix) -> FeatureMatrix {
        assert_eq!(self.n_cols, other.n_cols, "column mismatch");
        let mut cells = self.cells.clone();
        cells.extend_from_slice(&other.cells);
        let mut days = self.days.clone();
        days.extend_from_slice(&other.days);
        FeatureMatrix::from_parts(self.n_rows + other.n_rows, self.n_cols, cells, days)
    }

    /// Copy with every missing cell set to `fill(r, c)` when it returns `Some`.
    pub fn filled_with(&self, mut fill: impl FnMut(usize, usize) -> Option<f64>) -> FeatureMatrix {
        let mut out = self.clone();
        for r in 0..self.n_rows {
            for c in 0..self.n_cols {
                if !self.is_observed(r, c) {
                    if let Some(v) = fill(r, c) {
                        out.set(r, c, Some(v));
                    }
                }
            }
        }
        out
    }
}
