//! Dense and sparse matrix primitives used by the model, attack and defenses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major `f64` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::dims("ragged rows"));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::dims(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        fn run<const W: usize>(a: &Matrix, b: &Matrix, out: &mut Matrix) {
            let w = b.cols;
            for i in 0..a.rows {
                let terms = a.row(i).iter().copied().enumerate();
                gather_rows::<W>(&mut out.data[i * w..(i + 1) * w], terms, &b.data, w);
            }
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        by_width!(other.cols, run(self, other, &mut out));
        Ok(out)
    }

    /// `selfᵀ · other`.
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::dims(format!(
                "t_matmul {}x{}ᵀ by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        fn run<const W: usize>(a: &Matrix, b: &Matrix, out: &mut Matrix) {
            for k in 0..a.rows {
                let terms = a.row(k).iter().copied().enumerate();
                scatter_row::<W>(&mut out.data, terms, b.row(k), b.cols);
            }
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        by_width!(other.cols, run(self, other, &mut out));
        Ok(out)
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::dims(format!(
                "matmul_t {}x{} by {}x{}ᵀ",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        self.matmul(&other.transpose())
    }

    pub fn add_row_vector(&mut self, v: &[f64]) {
        debug_assert_eq!(v.len(), self.cols);
        for i in 0..self.rows {
            for (x, b) in self.row_mut(i).iter_mut().zip(v) {
                *x += b;
            }
        }
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (o, x) in out.iter_mut().zip(self.row(i)) {
                *o += x;
            }
        }
        out
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Row-wise numerically stable softmax, in place.
    pub fn softmax_rows(&mut self) {
        for i in 0..self.rows {
            softmax_in_place(self.row_mut(i));
        }
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Calls `$f::<W>(args)` for the common narrow widths and `$f::<0>` (the
/// dynamic-width path) otherwise.
macro_rules! by_width {
    ($w:expr, $f:ident($($arg:expr),*)) => {
        match $w {
            2 => $f::<2>($($arg),*),
            3 => $f::<3>($($arg),*),
            4 => $f::<4>($($arg),*),
            5 => $f::<5>($($arg),*),
            6 => $f::<6>($($arg),*),
            7 => $f::<7>($($arg),*),
            8 => $f::<8>($($arg),*),
            16 => $f::<16>($($arg),*),
            32 => $f::<32>($($arg),*),
            _ => $f::<0>($($arg),*),
        }
    };
}
pub(crate) use by_width;

/// `out = Σ (j, v) in terms: v · b[j]`, rows of `b` having `width` entries.
#[inline]
pub(crate) fn gather_rows<const W: usize>(
    out: &mut [f64],
    terms: impl Iterator<Item = (usize, f64)>,
    b: &[f64],
    width: usize,
) {
    if W == 0 {
        out.fill(0.0);
        for (j, v) in terms {
            axpy(v, &b[j * width..(j + 1) * width], out);
        }
        return;
    }
    let mut acc = [0.0f64; W];
    for (j, v) in terms {
        let row: &[f64; W] = b[j * W..j * W + W].try_into().expect("row width");
        for c in 0..W {
            acc[c] += v * row[c];
        }
    }
    out.copy_from_slice(&acc);
}

/// `out[j] += v · row` for each `(j, v)` in `terms`.
#[inline]
pub(crate) fn scatter_row<const W: usize>(
    out: &mut [f64],
    terms: impl Iterator<Item = (usize, f64)>,
    row: &[f64],
    width: usize,
) {
    if W == 0 {
        for (j, v) in terms {
            axpy(v, row, &mut out[j * width..(j + 1) * width]);
        }
        return;
    }
    let row: &[f64; W] = row.try_into().expect("row width");
    for (j, v) in terms {
        let dst: &mut [f64; W] = (&mut out[j * W..j * W + W]).try_into().expect("row width");
        for c in 0..W {
            dst[c] += v * row[c];
        }
    }
}

/// Subtracts the row max before exponentiating.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in row.iter_mut() {
        *x /= sum;
    }
}

/// `log Σ exp(row)`, stable.
pub fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Compressed sparse row real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from raw CSR arrays; column indices within each row must be sorted.
    pub fn from_parts(
        rows: usize,
        cols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if indptr.len() != rows + 1 || indices.len() != values.len() {
            return Err(Error::dims("inconsistent CSR arrays"));
        }
        if indptr.last() != Some(&indices.len()) || indptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::dims("CSR indptr is not a valid prefix sum"));
        }
        for r in 0..rows {
            let cols_r = &indices[indptr[r]..indptr[r + 1]];
            if cols_r.windows(2).any(|w| w[0] >= w[1]) || cols_r.iter().any(|&c| c >= cols) {
                return Err(Error::dims(format!(
                    "row {r} has unsorted or out-of-range columns"
                )));
            }
        }
        Ok(CsrMatrix {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn from_dense(m: &Matrix) -> Self {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..m.rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            rows: m.rows(),
            cols: m.cols(),
            indptr,
            indices,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column indices, values)` of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Sparse-times-dense product.
    pub fn spmm(&self, b: &Matrix) -> Result<Matrix> {
        self.spmm_impl(b, None)
    }

    /// Rows `rows` of `self · b`; every other output row is zero.
    pub fn spmm_rows(&self, b: &Matrix, rows: &[usize]) -> Result<Matrix> {
        self.spmm_impl(b, Some(rows))
    }

    fn spmm_impl(&self, b: &Matrix, rows: Option<&[usize]>) -> Result<Matrix> {
        if self.cols != b.rows() {
            return Err(Error::dims(format!(
                "spmm {}x{} by {}x{}",
                self.rows,
                self.cols,
                b.rows(),
                b.cols()
            )));
        }
        self.check_rows(rows)?;
        fn run<const W: usize>(
            a: &CsrMatrix,
            b: &Matrix,
            rows: Option<&[usize]>,
            out: &mut Matrix,
        ) {
            let w = b.cols();
            let mut one = |i: usize| {
                let (cols, vals) = a.row(i);
                let terms = cols.iter().copied().zip(vals.iter().copied());
                gather_rows::<W>(out.row_mut(i), terms, b.as_slice(), w);
            };
            match rows {
                Some(rows) => rows.iter().for_each(|&i| one(i)),
                None => (0..a.rows).for_each(one),
            }
        }
        let mut out = Matrix::zeros(self.rows, b.cols());
        by_width!(b.cols(), run(self, b, rows, &mut out));
        Ok(out)
    }

    /// `selfᵀ · b`.
    pub fn t_spmm(&self, b: &Matrix) -> Result<Matrix> {
        self.t_spmm_impl(b, None)
    }

    /// `selfᵀ · b` for a `b` whose rows outside `rows` are zero.
    pub fn t_spmm_rows(&self, b: &Matrix, rows: &[usize]) -> Result<Matrix> {
        self.t_spmm_impl(b, Some(rows))
    }

    fn t_spmm_impl(&self, b: &Matrix, rows: Option<&[usize]>) -> Result<Matrix> {
        if self.rows != b.rows() {
            return Err(Error::dims("t_spmm row mismatch"));
        }
        self.check_rows(rows)?;
        fn run<const W: usize>(
            a: &CsrMatrix,
            b: &Matrix,
            rows: Option<&[usize]>,
            out: &mut Matrix,
        ) {
            let mut one = |i: usize| {
                let (cols, vals) = a.row(i);
                let terms = cols.iter().copied().zip(vals.iter().copied());
                scatter_row::<W>(out.as_mut_slice(), terms, b.row(i), b.cols());
            };
            match rows {
                Some(rows) => rows.iter().for_each(|&i| one(i)),
                None => (0..a.rows).for_each(one),
            }
        }
        let mut out = Matrix::zeros(self.cols, b.cols());
        by_width!(b.cols(), run(self, b, rows, &mut out));
        Ok(out)
    }

    fn check_rows(&self, rows: Option<&[usize]>) -> Result<()> {
        match rows.and_then(|r| r.iter().find(|&&i| i >= self.rows)) {
            Some(i) => Err(Error::dims(format!(
                "row {i} out of range for {} rows",
                self.rows
            ))),
            None => Ok(()),
        }
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.cols + 1];
        for &j in &self.indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.cols {
            counts[j + 1] += counts[j];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                indices[next[j]] = i;
                values[next[j]] = v;
                next[j] += 1;
            }
        }
        CsrMatrix {
            rows: self.cols,
            cols: self.rows,
            indptr,
            indices,
            values,
        }
    }
}

/// Matrices that can be applied to dense blocks, which is all the
/// truncated SVD needs.
/// Something that can multiply dense matrices from the left.
pub trait LinearOperator: Sync {
    fn shape(&self) -> (usize, usize);
    /// `self · b`
    fn apply(&self, b: &Matrix) -> Matrix;
    /// `selfᵀ · b`
    fn apply_t(&self, b: &Matrix) -> Matrix;
    /// `self · b` where only the output rows in `rows` are needed; the
    /// others are unspecified.
    fn apply_rows(&self, b: &Matrix, _rows: &[usize]) -> Matrix {
        self.apply(b)
    }
    /// `selfᵀ · b` for a `b` that is zero outside `rows`.
    fn apply_t_rows(&self, b: &Matrix, _rows: &[usize]) -> Matrix {
        self.apply_t(b)
    }
}

impl LinearOperator for Matrix {
    fn shape(&self) -> (usize, usize) {
        Matrix::shape(self)
    }
    fn apply(&self, b: &Matrix) -> Matrix {
        self.matmul(b).expect("operator shape checked by caller")
    }
    fn apply_t(&self, b: &Matrix) -> Matrix {
        self.t_matmul(b).expect("operator shape checked by caller")
    }
}

impl LinearOperator for CsrMatrix {
    fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
    fn apply(&self, b: &Matrix) -> Matrix {
        self.spmm(b).expect("operator shape checked by caller")
    }
    fn apply_t(&self, b: &Matrix) -> Matrix {
        self.t_spmm(b).expect("operator shape checked by caller")
    }
    fn apply_rows(&self, b: &Matrix, rows: &[usize]) -> Matrix {
        self.spmm_rows(b, rows).expect("operator shape checked by caller")
    }
    fn apply_t_rows(&self, b: &Matrix, rows: &[usize]) -> Matrix {
        self.t_spmm_rows(b, rows).expect("operator shape checked by caller")
    }
}
