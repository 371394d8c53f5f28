//! Dense linear algebra over `Z/p`: row reduction, rank, kernels, determinants,
//! and an incremental echelon basis used for span membership tests.

use crate::modp::PrimeChar;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Row count above which elimination sweeps run on the rayon pool.
#[cfg(feature = "parallel")]
const PAR_ROWS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Vec<u32>>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![vec![0; cols]; rows],
        }
    }

    pub fn from_rows(data: Vec<Vec<u32>>) -> Self {
        let rows = data.len();
        let cols = data.first().map_or(0, Vec::len);
        assert!(data.iter().all(|r| r.len() == cols), "ragged matrix");
        Matrix { rows, cols, data }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.data[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: u32) {
        self.data[i][j] = v;
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j][i] = self.data[i][j];
            }
        }
        t
    }

    /// Reduced row echelon form in place. Returns the pivot columns.
    pub fn rref(&mut self, pc: &PrimeChar) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(sel) = (r..self.rows).find(|&i| self.data[i][c] != 0) else {
                continue;
            };
            self.data.swap(r, sel);
            let inv = pc.inv(self.data[r][c]);
            for v in self.data[r].iter_mut() {
                *v = pc.mul(*v, inv);
            }
            let pivot_row = self.data[r].clone();
            let eliminate = |(i, row): (usize, &mut Vec<u32>)| {
                if i != r && row[c] != 0 {
                    let f = row[c];
                    for (x, &y) in row.iter_mut().zip(&pivot_row) {
                        *x = pc.sub(*x, pc.mul(f, y));
                    }
                }
            };
            #[cfg(feature = "parallel")]
            {
                if self.rows >= PAR_ROWS {
                    self.data.par_iter_mut().enumerate().for_each(eliminate);
                } else {
                    self.data.iter_mut().enumerate().for_each(eliminate);
                }
            }
            #[cfg(not(feature = "parallel"))]
            self.data.iter_mut().enumerate().for_each(eliminate);
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    pub fn rank(&self, pc: &PrimeChar) -> usize {
        self.clone().rref(pc).len()
    }

    /// Basis of `{v : M v = 0}`, one vector per free column, each with a 1 in
    /// its own free column.
    pub fn kernel(&self, pc: &PrimeChar) -> Vec<Vec<u32>> {
        let mut m = self.clone();
        let pivots = m.rref(pc);
        let mut is_pivot = vec![false; self.cols];
        for &c in &pivots {
            is_pivot[c] = true;
        }
        let mut basis = Vec::new();
        for free in (0..self.cols).filter(|&c| !is_pivot[c]) {
            let mut v = vec![0; self.cols];
            v[free] = 1;
            for (row, &pc_col) in pivots.iter().enumerate() {
                v[pc_col] = pc.neg(m.data[row][free]);
            }
            basis.push(v);
        }
        basis
    }

    /// Determinant by Gaussian elimination.
    pub fn det(&self, pc: &PrimeChar) -> u32 {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        let mut a = self.data.clone();
        let n = self.rows;
        let mut det = 1;
        for c in 0..n {
            let Some(sel) = (c..n).find(|&i| a[i][c] != 0) else {
                return 0;
            };
            if sel != c {
                a.swap(sel, c);
                det = pc.neg(det);
            }
            det = pc.mul(det, a[c][c]);
            let inv = pc.inv(a[c][c]);
            for i in c + 1..n {
                if a[i][c] != 0 {
                    let f = pc.mul(a[i][c], inv);
                    for j in c..n {
                        let s = pc.mul(f, a[c][j]);
                        a[i][j] = pc.sub(a[i][j], s);
                    }
                }
            }
        }
        det
    }

    pub fn mul_vec(&self, v: &[u32], pc: &PrimeChar) -> Vec<u32> {
        self.data
            .iter()
            .map(|row| {
                row.iter()
                    .zip(v)
                    .fold(0, |acc, (&a, &b)| pc.add(acc, pc.mul(a, b)))
            })
            .collect()
    }

    /// Solves `M x = b`, returning one solution if the system is consistent.
    pub fn solve(&self, b: &[u32], pc: &PrimeChar) -> Option<Vec<u32>> {
        assert_eq!(b.len(), self.rows);
        let mut aug = Matrix::zeros(self.rows, self.cols + 1);
        for i in 0..self.rows {
            aug.data[i][..self.cols].copy_from_slice(&self.data[i]);
            aug.data[i][self.cols] = b[i];
        }
        let pivots = aug.rref(pc);
        if pivots.last() == Some(&self.cols) {
            return None;
        }
        let mut x = vec![0; self.cols];
        for (row, &c) in pivots.iter().enumerate() {
            x[c] = aug.data[row][self.cols];
        }
        Some(x)
    }
}

/// An echelon basis grown one vector at a time.
#[derive(Debug, Clone)]
pub struct EchelonBasis {
    dim: usize,
    rows: Vec<(usize, Vec<u32>)>,
}

impl EchelonBasis {
    pub fn new(dim: usize) -> Self {
        EchelonBasis {
            dim,
            rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Reduces `v` against the current basis.
    pub fn reduce(&self, v: &[u32], pc: &PrimeChar) -> Vec<u32> {
        let mut v = v.to_vec();
        v.resize(self.dim, 0);
        for (pivot, row) in &self.rows {
            let f = v[*pivot];
            if f != 0 {
                for (x, &y) in v.iter_mut().zip(row) {
                    *x = pc.sub(*x, pc.mul(f, y));
                }
            }
        }
        v
    }

    pub fn contains(&self, v: &[u32], pc: &PrimeChar) -> bool {
        self.reduce(v, pc).iter().all(|&x| x == 0)
    }

    /// Adds `v` if it is independent of the basis; returns whether it was.
    pub fn insert(&mut self, v: &[u32], pc: &PrimeChar) -> bool {
        let mut r = self.reduce(v, pc);
        let Some(pivot) = r.iter().position(|&x| x != 0) else {
            return false;
        };
        let inv = pc.inv(r[pivot]);
        for x in r.iter_mut() {
            *x = pc.mul(*x, inv);
        }
        for (_, row) in self.rows.iter_mut() {
            let f = row[pivot];
            if f != 0 {
                for (x, &y) in row.iter_mut().zip(&r) {
                    *x = pc.sub(*x, pc.mul(f, y));
                }
            }
        }
        self.rows.push((pivot, r));
        true
    }
}
