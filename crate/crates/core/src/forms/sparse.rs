//! Compressed sparse row matrices assembled from triplets.

use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMat<T> {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

/// Accumulates `(row, col, value)` contributions; duplicates are summed on finalization.
#[derive(Clone, Debug)]
pub struct TripletBuilder<T> {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Real> TripletBuilder<T> {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(n_rows: usize, n_cols: usize, cap: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: T) {
        debug_assert!(row < self.n_rows && col < self.n_cols);
        self.entries.push((row, col, value));
    }

    pub fn finalize(self) -> SparseMat<T> {
        SparseMat::from_triplets(self.n_rows, self.n_cols, self.entries)
    }
}

impl<T: Real> SparseMat<T> {
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut entries: Vec<(usize, usize, T)>) -> Self {
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<T> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates `(col, value)` of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    /// Iterates all stored `(row, col, value)` entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n_rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => T::zero(),
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `yᵀ A x`.
    pub fn bilinear(&self, y: &[T], x: &[T]) -> T {
        (0..self.n_rows)
            .map(|r| y[r] * self.row(r).map(|(c, v)| v * x[c]).sum::<T>())
            .sum()
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.n_cols, self.n_rows, self.iter().map(|(r, c, v)| (c, r, v)).collect())
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// `max |A - Aᵀ|` over all entries.
    pub fn symmetry_defect(&self) -> T {
        let t = self.transpose();
        let mut worst = T::zero();
        for (r, c, v) in self.iter() {
            worst = worst.max((v - t.get(r, c)).abs());
        }
        for (r, c, v) in t.iter() {
            worst = worst.max((v - self.get(r, c)).abs());
        }
        worst
    }

    /// `alpha * self + beta * other` (same shape).
    pub fn add_scaled(&self, alpha: T, other: &Self, beta: T) -> Self {
        assert_eq!((self.n_rows, self.n_cols), (other.n_rows, other.n_cols));
        let entries = self
            .iter()
            .map(|(r, c, v)| (r, c, alpha * v))
            .chain(other.iter().map(|(r, c, v)| (r, c, beta * v)))
            .collect();
        Self::from_triplets(self.n_rows, self.n_cols, entries)
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.n_cols]; self.n_rows];
        for (r, c, v) in self.iter() {
            d[r][c] = v;
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let m = SparseMat::<f64>::from_triplets(2, 3, vec![(1, 2, 1.0), (0, 0, 2.0), (1, 2, 0.5), (0, 1, -1.0)]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(1, 2), 1.5);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.mul_vec(&[1.0, 1.0, 2.0]), vec![1.0, 3.0]);
        assert_eq!(m.transpose().get(2, 1), 1.5);
    }

    #[test]
    fn symmetry_defect_detects_asymmetry() {
        let s = SparseMat::<f64>::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, 1.0)]);
        assert_eq!(s.symmetry_defect(), 0.0);
        let a = SparseMat::<f64>::from_triplets(2, 2, vec![(0, 1, 1.0)]);
        assert_eq!(a.symmetry_defect(), 1.0);
    }
}
