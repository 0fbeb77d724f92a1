//! Compressed sparse row matrices and an envelope (skyline) Cholesky solver
//! with reverse Cuthill–McKee ordering.

use std::collections::VecDeque;
use std::io::{self, Write};

use crate::error::{EitError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed
    /// and column indices end up sorted within each row.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            cols[next[r]] = c;
            vals[next[r]] = v;
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for r in 0..nrows {
            scratch.clear();
            scratch.extend((counts[r]..counts[r + 1]).map(|k| (cols[k], vals[k])));
            scratch.sort_by_key(|&(c, _)| c);
            for &(c, v) in &scratch {
                if col_idx.len() > row_ptr[r] && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn same_pattern(&self, other: &CsrMatrix) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    /// Submatrix on the given row and column index lists (local numbering).
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (local, &c) in cols.iter().enumerate() {
            col_map[c] = local;
        }
        let mut triplets = Vec::new();
        for (lr, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                if col_map[c] != usize::MAX {
                    triplets.push((lr, col_map[c], v));
                }
            }
        }
        CsrMatrix::from_triplets(rows.len(), cols.len(), &triplets)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// Infinity norm (largest absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows).map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Coordinate-list text dump, one `row col value` line per stored entry.
    pub fn write_coo<W: Write>(&self, mut out: W) -> io::Result<()> {
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                writeln!(out, "{r} {c} {v:.16e}")?;
            }
        }
        Ok(())
    }
}

/// Reverse Cuthill–McKee ordering of a structurally symmetric matrix.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let neighbors = |v: usize| a.row(v).map(|(c, _)| c).filter(move |&c| c != v);
    let degree: Vec<usize> = (0..n).map(|v| neighbors(v).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut level = vec![usize::MAX; n];

    let bfs_last_level = |start: usize, level: &mut Vec<usize>, visited: &[bool]| -> (usize, Vec<usize>) {
        let mut touched = vec![start];
        level[start] = 0;
        let mut queue = VecDeque::from([start]);
        let mut depth = 0;
        while let Some(v) = queue.pop_front() {
            depth = depth.max(level[v]);
            for w in neighbors(v) {
                if !visited[w] && level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    touched.push(w);
                    queue.push_back(w);
                }
            }
        }
        let last: Vec<usize> = touched.iter().copied().filter(|&v| level[v] == depth).collect();
        for v in touched {
            level[v] = usize::MAX;
        }
        (depth, last)
    };

    while order.len() < n {
        let mut start = (0..n).filter(|&v| !visited[v]).min_by_key(|&v| degree[v]).unwrap();
        let (mut ecc, mut last) = bfs_last_level(start, &mut level, &visited);
        for _ in 0..8 {
            let cand = *last.iter().min_by_key(|&&v| degree[v]).unwrap();
            let (e, l) = bfs_last_level(cand, &mut level, &visited);
            if e <= ecc {
                break;
            }
            start = cand;
            ecc = e;
            last = l;
        }
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = neighbors(v).filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// `L L^T` factorization of a symmetric positive definite matrix stored by
/// rows in its envelope.
#[derive(Clone, Debug)]
pub struct SkylineCholesky {
    n: usize,
    perm: Vec<usize>,
    inverse: Vec<usize>,
    first: Vec<usize>,
    row_start: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        Self::factor_with_ordering(a, reverse_cuthill_mckee(a))
    }

    pub fn factor_with_ordering(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || perm.len() != n {
            return Err(EitError::Dimension { expected: n, found: a.ncols().max(perm.len()) });
        }
        let mut inverse = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (i, &old) in perm.iter().enumerate() {
            for (c, _) in a.row(old) {
                first[i] = first[i].min(inverse[c]);
            }
        }
        let mut row_start = Vec::with_capacity(n + 1);
        let mut total = 0;
        for i in 0..n {
            row_start.push(total);
            total += i - first[i] + 1;
        }
        row_start.push(total);
        let mut data = vec![0.0; total];
        for (i, &old) in perm.iter().enumerate() {
            for (c, v) in a.row(old) {
                let j = inverse[c];
                if j <= i {
                    data[row_start[i] + j - first[i]] += v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let ri = row_start[i];
            for j in fi..=i {
                let fj = first[j];
                let rj = row_start[j];
                let k0 = fi.max(fj);
                let li = &data[ri + k0 - fi..ri + j - fi];
                let lj = &data[rj + k0 - fj..rj + j - fj];
                let dot: f64 = li.iter().zip(lj).map(|(x, y)| x * y).sum();
                let s = data[ri + j - fi] - dot;
                if j < i {
                    data[ri + j - fi] = s / data[rj + j - fj];
                } else {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(EitError::Factorization(format!(
                            "non-positive pivot {s:e} at row {i} of {n}; matrix is not positive definite"
                        )));
                    }
                    data[ri + i - fi] = s.sqrt();
                }
            }
        }
        Ok(Self { n, perm, inverse, first, row_start, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..self.n {
            let (fi, ri) = (self.first[i], self.row_start[i]);
            let row = &self.data[ri..ri + i - fi];
            let dot: f64 = row.iter().zip(&x[fi..i]).map(|(l, y)| l * y).sum();
            x[i] = (x[i] - dot) / self.data[ri + i - fi];
        }
        for i in (0..self.n).rev() {
            let (fi, ri) = (self.first[i], self.row_start[i]);
            x[i] /= self.data[ri + i - fi];
            let xi = x[i];
            for (k, l) in (fi..i).zip(&self.data[ri..ri + i - fi]) {
                x[k] -= l * xi;
            }
        }
        let mut out = vec![0.0; self.n];
        for (old, &new) in self.inverse.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }
}
