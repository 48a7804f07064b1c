//! Exact permanents of small complex matrices.
//!
//! The permanent is evaluated with Ryser's inclusion-exclusion formula,
//! enumerating column subsets in Gray-code order so that each step adds or
//! removes a single column from the running row sums. Cost is `O(2^n n)`.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::Channel;
use crate::error::{Result, SisError};
use crate::jsa::JsaMatrix;

/// Largest dimension accepted by [`permanent`].
pub const MAX_PERMANENT_DIM: usize = 20;

/// Dense row-major complex matrix with at least one row and one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(SisError::InvalidPattern(format!(
                "matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(SisError::InvalidPattern(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix must be at least 1x1");
        ComplexMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = ComplexMatrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c);
            }
        }
        m
    }

    /// Builds a matrix from nested rows. Panics on ragged or empty input.
    pub fn from_rows<R: AsRef<[Complex64]>>(rows: &[R]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        assert!(
            rows.iter().all(|r| r.as_ref().len() == n_cols),
            "ragged rows"
        );
        let data = rows
            .iter()
            .flat_map(|r| r.as_ref().iter().copied())
            .collect();
        ComplexMatrix::new(n_rows, n_cols, data).expect("non-empty matrix")
    }

    /// Convenience constructor for real-valued matrices.
    pub fn from_real_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let complex: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.as_ref().iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        ComplexMatrix::from_rows(&complex)
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[Complex64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    /// Entries in row-major order.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn scale(&self, factor: Complex64) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * factor).collect(),
        }
    }

    pub fn transpose(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    /// Selects rows and columns by zero-based position, in the order given.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Result<ComplexMatrix> {
        if rows.is_empty() || cols.is_empty() {
            return Err(SisError::InvalidPattern(
                "empty row or column selection".into(),
            ));
        }
        if let Some(&r) = rows.iter().find(|&&r| r >= self.rows) {
            return Err(SisError::InvalidPattern(format!("row {r} out of range")));
        }
        if let Some(&c) = cols.iter().find(|&&c| c >= self.cols) {
            return Err(SisError::InvalidPattern(format!("column {c} out of range")));
        }
        Ok(ComplexMatrix::from_fn(rows.len(), cols.len(), |r, c| {
            self.get(rows[r], cols[c])
        }))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub(crate) fn to_nalgebra(&self) -> nalgebra::DMatrix<Complex64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl fmt::Display for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            let cells: Vec<String> = self.row(r).iter().map(|z| format!("{z:.6}")).collect();
            writeln!(f, "[{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

/// Permanent of a square matrix of dimension at most [`MAX_PERMANENT_DIM`].
pub fn permanent(m: &ComplexMatrix) -> Result<Complex64> {
    if !m.is_square() {
        return Err(SisError::NonSquare {
            rows: m.n_rows(),
            cols: m.n_cols(),
        });
    }
    let n = m.n_rows();
    if n > MAX_PERMANENT_DIM {
        return Err(SisError::DimensionCap {
            n,
            cap: MAX_PERMANENT_DIM,
        });
    }
    Ok(ryser_gray(m))
}

// perm(A) = (-1)^n sum_{S} (-1)^{|S|} prod_i sum_{j in S} a_ij
fn ryser_gray(m: &ComplexMatrix) -> Complex64 {
    let n = m.n_rows();
    let zero = Complex64::new(0.0, 0.0);
    if n == 1 {
        return m.get(0, 0);
    }
    let mut row_sums = vec![zero; n];
    let mut in_set = vec![false; n];
    let mut total = zero;
    let mut gray: u64 = 0;
    for k in 1u64..(1u64 << n) {
        let j = k.trailing_zeros() as usize;
        gray ^= 1 << j;
        let sign = if in_set[j] { -1.0 } else { 1.0 };
        in_set[j] = !in_set[j];
        for (i, s) in row_sums.iter_mut().enumerate() {
            *s += m.get(i, j) * sign;
        }
        let prod = row_sums
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, &s| acc * s);
        if gray.count_ones() % 2 == 1 {
            total -= prod;
        } else {
            total += prod;
        }
    }
    if n % 2 == 1 {
        -total
    } else {
        total
    }
}

/// Number of permutations whose product `prod_q m[sigma(q)][q]` is nonzero,
/// counting products below `1e-12` of the row-maximum product as zero.
/// Enumerates all `n!` permutations, so `n` is capped at 8.
pub fn nonzero_permutation_count(m: &ComplexMatrix) -> Result<usize> {
    if !m.is_square() {
        return Err(SisError::NonSquare {
            rows: m.n_rows(),
            cols: m.n_cols(),
        });
    }
    let n = m.n_rows();
    if n > 8 {
        return Err(SisError::DimensionCap { n, cap: 8 });
    }
    let scale: f64 = (0..n)
        .map(|r| m.row(r).iter().map(|z| z.norm()).fold(0.0, f64::max))
        .product();
    let floor = 1e-12 * scale;
    let mut sigma: Vec<usize> = (0..n).collect();
    let mut count = 0;
    let mut visit = |sigma: &[usize]| {
        let prod: f64 = (0..n).map(|q| m.get(sigma[q], q).norm()).product();
        if prod > floor {
            count += 1;
        }
    };
    // Heap's algorithm.
    let mut stack = vec![0usize; n];
    visit(&sigma);
    let mut i = 1;
    while i < n {
        if stack[i] < i {
            let j = if i % 2 == 0 { 0 } else { stack[i] };
            sigma.swap(j, i);
            visit(&sigma);
            stack[i] += 1;
            i = 1;
        } else {
            stack[i] = 0;
            i += 1;
        }
    }
    Ok(count)
}

/// Extracts the rows (idler channels) and columns (signal channels) of a JSA,
/// in the order the labels are given.
pub fn submatrix(
    jsa: &JsaMatrix,
    idler_rows: &[Channel],
    signal_cols: &[Channel],
) -> Result<ComplexMatrix> {
    let rows = jsa.grid().idler_positions(idler_rows)?;
    let cols = jsa.grid().signal_positions(signal_cols)?;
    jsa.entries().select(&rows, &cols)
}

/// Entrywise `|m_jk|^2` with exactly zero imaginary parts.
pub fn abs_squared_matrix(m: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix {
        rows: m.rows,
        cols: m.cols,
        data: m
            .data
            .iter()
            .map(|z| Complex64::new(z.norm_sqr(), 0.0))
            .collect(),
    }
}

/// Rounds to the nearest Gaussian integer, returning it with the residue.
pub fn nearest_gaussian_integer(z: Complex64) -> (Complex64, f64) {
    let g = Complex64::new(z.re.round(), z.im.round());
    (g, (z - g).norm())
}
