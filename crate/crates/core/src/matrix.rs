//! Dense masked matrices: the input and output type of every completion
//! routine in this crate.

use nalgebra::DMatrix;

use crate::error::{invalid, CompletionError, Result};

/// Dense grid of real values.
pub type Grid = DMatrix<f64>;

/// Boolean grid; `true` marks a selected (observed, deleted, flagged ...)
/// position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(rows: usize, cols: usize, fill: bool) -> Self {
        Mask { rows, cols, bits: vec![fill; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                bits.push(f(i, j));
            }
        }
        Mask { rows, cols, bits }
    }

    /// Builds a mask from row-major bits.
    pub fn from_row_major(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(invalid(format!(
                "mask has {} cells, expected {rows}x{cols}",
                bits.len()
            )));
        }
        Ok(Mask { rows, cols, bits })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        debug_assert!(i < self.rows && j < self.cols);
        self.bits[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        debug_assert!(i < self.rows && j < self.cols);
        self.bits[i * self.cols + j] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Selected positions in row-major order.
    pub fn positions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let cols = self.cols;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(k, _)| (k / cols, k % cols))
    }

    pub fn complement(&self) -> Mask {
        Mask { rows: self.rows, cols: self.cols, bits: self.bits.iter().map(|b| !b).collect() }
    }

    pub fn row_count(&self, i: usize) -> usize {
        self.bits[i * self.cols..(i + 1) * self.cols].iter().filter(|&&b| b).count()
    }

    pub fn row_major(&self) -> &[bool] {
        &self.bits
    }
}

/// Dense values plus observation mask. Unobserved cells hold `0.0`, which
/// must never be read as data; use [`MaskedMatrix::get`].
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedMatrix {
    values: Grid,
    mask: Mask,
}

impl MaskedMatrix {
    /// Pairs `values` with `mask`, zeroing every unobserved cell. Observed
    /// values must be finite.
    pub fn new(mut values: Grid, mask: Mask) -> Result<Self> {
        if values.shape() != mask.shape() {
            return Err(invalid(format!(
                "values are {:?} but mask is {:?}",
                values.shape(),
                mask.shape()
            )));
        }
        for i in 0..mask.rows() {
            for j in 0..mask.cols() {
                if !mask.get(i, j) {
                    values[(i, j)] = 0.0;
                } else if !values[(i, j)].is_finite() {
                    return Err(invalid(format!("observed entry ({i}, {j}) is not finite")));
                }
            }
        }
        Ok(MaskedMatrix { values, mask })
    }

    pub fn fully_observed(values: Grid) -> Result<Self> {
        let mask = Mask::new(values.nrows(), values.ncols(), true);
        MaskedMatrix::new(values, mask)
    }

    /// Row-major construction with `None` for missing cells.
    pub fn from_rows(rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(invalid("ragged rows"));
        }
        let values = Grid::from_fn(m, n, |i, j| rows[i][j].unwrap_or(0.0));
        let mask = Mask::from_fn(m, n, |i, j| rows[i][j].is_some());
        MaskedMatrix::new(values, mask)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }

    #[inline]
    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.mask.get(i, j)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.mask.get(i, j).then(|| self.values[(i, j)])
    }

    /// Value at an observed cell. Reading an unobserved cell is a bug.
    #[inline]
    pub fn observed(&self, i: usize, j: usize) -> f64 {
        debug_assert!(self.mask.get(i, j), "read of unobserved cell ({i}, {j})");
        self.values[(i, j)]
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    /// Raw values with zero placeholders at unobserved cells (the zero-fill).
    pub fn zero_filled(&self) -> &Grid {
        &self.values
    }

    pub fn observed_count(&self) -> usize {
        self.mask.count()
    }

    pub fn observed_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.mask.positions().map(move |(i, j)| (i, j, self.values[(i, j)]))
    }

    pub fn observed_mean(&self) -> Option<f64> {
        let n = self.observed_count();
        (n > 0).then(|| self.observed_entries().map(|(_, _, v)| v).sum::<f64>() / n as f64)
    }

    /// Fails with [`CompletionError::NonPositive`] naming the first
    /// offending cell.
    pub fn require_positive(&self) -> Result<()> {
        match self.observed_entries().find(|&(_, _, v)| v <= 0.0) {
            Some((row, col, value)) => Err(CompletionError::NonPositive { row, col, value }),
            None => Ok(()),
        }
    }

    pub fn all_positive(&self) -> bool {
        self.observed_entries().all(|(_, _, v)| v > 0.0)
    }

    /// Copy with the selected cells hidden.
    pub fn hide(&self, hidden: &Mask) -> Result<Self> {
        if hidden.shape() != self.shape() {
            return Err(invalid("hide mask shape mismatch"));
        }
        let mask = Mask::from_fn(self.rows(), self.cols(), |i, j| {
            self.mask.get(i, j) && !hidden.get(i, j)
        });
        MaskedMatrix::new(self.values.clone(), mask)
    }

    /// Fills unobserved cells from `fill`, keeping observed cells verbatim.
    pub fn fill_from(&self, fill: &Grid) -> Grid {
        Grid::from_fn(self.rows(), self.cols(), |i, j| {
            if self.mask.get(i, j) {
                self.values[(i, j)]
            } else {
                fill[(i, j)]
            }
        })
    }

    /// Unobserved cells set to the mean of the observed entries.
    pub fn mean_filled(&self) -> Result<Grid> {
        let mean = self
            .observed_mean()
            .ok_or_else(|| invalid("matrix has no observed entries"))?;
        Ok(self.fill_from(&Grid::from_element(self.rows(), self.cols(), mean)))
    }
}

/// A completed grid plus the cells that were filled by a fallback rather
/// than by the method itself.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub values: Grid,
    pub fallback: Mask,
}

impl Completion {
    pub fn fallback_count(&self) -> usize {
        self.fallback.count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MaskedMatrix {
        MaskedMatrix::from_rows(&[vec![Some(1.0), None], vec![Some(3.0), Some(4.0)]]).unwrap()
    }

    #[test]
    fn placeholder_is_zero() {
        let mut v = Grid::from_element(2, 2, 9.0);
        v[(0, 1)] = f64::NAN;
        let mm = MaskedMatrix::new(v, Mask::from_fn(2, 2, |i, j| (i, j) != (0, 1))).unwrap();
        assert_eq!(mm.zero_filled()[(0, 1)], 0.0);
        assert_eq!(mm.get(0, 1), None);
        assert_eq!(mm.get(1, 1), Some(9.0));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let err = MaskedMatrix::new(Grid::zeros(2, 3), Mask::new(3, 2, true));
        assert!(matches!(err, Err(CompletionError::InvalidInput(_))));
    }

    #[test]
    fn nonpositive_cell_is_named() {
        let mm = MaskedMatrix::from_rows(&[vec![Some(1.0), Some(-2.0)]]).unwrap();
        match mm.require_positive() {
            Err(CompletionError::NonPositive { row: 0, col: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mean_fill_and_hide() {
        let mm = sample();
        assert_eq!(mm.observed_mean(), Some(8.0 / 3.0));
        let filled = mm.mean_filled().unwrap();
        assert_eq!(filled[(0, 1)], 8.0 / 3.0);
        assert_eq!(filled[(1, 0)], 3.0);

        let hidden = mm.hide(&Mask::from_fn(2, 2, |i, j| i == 1 && j == 0)).unwrap();
        assert_eq!(hidden.observed_count(), 2);
        assert!(!hidden.is_observed(1, 0));
    }

    #[test]
    fn positions_are_row_major() {
        let m = Mask::from_fn(2, 3, |i, j| (i + j) % 2 == 0);
        let p: Vec<_> = m.positions().collect();
        assert_eq!(p, vec![(0, 0), (0, 2), (1, 1)]);
        assert_eq!(m.row_count(0), 2);
    }
}
