use crate::error::{Error, Result};
use crate::linalg::{by_width, gather_rows, scatter_row, LinearOperator, Matrix};

/// Binary sparse `N×d` attribute matrix. Only the positions of ones are stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
}

impl FeatureMatrix {
    /// Builds from `(row, feature)` pairs; duplicates collapse.
    pub fn from_entries<I>(n_rows: usize, n_cols: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n_rows];
        for (r, f) in entries {
            if r >= n_rows || f >= n_cols {
                return Err(Error::invalid(format!(
                    "feature entry ({r},{f}) out of range for {n_rows}x{n_cols}"
                )));
            }
            rows[r].push(f);
        }
        Ok(Self::from_rows(n_cols, rows))
    }

    fn from_rows(n_cols: usize, mut rows: Vec<Vec<usize>>) -> Self {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        for r in &mut rows {
            r.sort_unstable();
            r.dedup();
            indices.extend_from_slice(r);
            indptr.push(indices.len());
        }
        FeatureMatrix {
            n_rows: rows.len(),
            n_cols,
            indptr,
            indices,
        }
    }

    /// All-ones `n×d` matrix.
    pub fn ones(n_rows: usize, n_cols: usize) -> Self {
        Self::from_rows(n_cols, vec![(0..n_cols).collect(); n_rows])
    }

    /// Binarizes a dense matrix (nonzero → 1).
    pub fn from_dense(m: &Matrix) -> Self {
        let rows = (0..m.rows())
            .map(|i| (0..m.cols()).filter(|&j| m[(i, j)] != 0.0).collect())
            .collect();
        Self::from_rows(m.cols(), rows)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Sorted indices of the features that are on in row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[usize] {
        &self.indices[self.indptr[i]..self.indptr[i + 1]]
    }

    pub fn get(&self, i: usize, f: usize) -> bool {
        self.row(i).binary_search(&f).is_ok()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_rows).flat_map(move |i| self.row(i).iter().map(move |&f| (i, f)))
    }

    /// Returns a copy with entry `(i, f)` set to zero.
    pub fn with_entry_off(&self, i: usize, f: usize) -> Result<Self> {
        let pos = self
            .row(i)
            .binary_search(&f)
            .map_err(|_| Error::invalid(format!("feature ({i},{f}) is already off")))?;
        let mut out = self.clone();
        out.indices.remove(self.indptr[i] + pos);
        for p in &mut out.indptr[i + 1..] {
            *p -= 1;
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n_rows, self.n_cols);
        for (i, f) in self.entries() {
            m[(i, f)] = 1.0;
        }
        m
    }

    /// Inner product of two rows (count of shared features).
    pub fn row_overlap(&self, a: usize, b: usize) -> usize {
        let (ra, rb) = (self.row(a), self.row(b));
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < ra.len() && j < rb.len() {
            match ra[i].cmp(&rb[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    /// `X · W`. With `scale`, nonzero `k` (in row-major order) contributes
    /// `scale[k]` instead of 1; this is how input dropout is applied.
    pub fn matmul(&self, w: &Matrix, scale: Option<&[f64]>) -> Result<Matrix> {
        if w.rows() != self.n_cols {
            return Err(Error::dims(format!(
                "features {}x{} by weights {}x{}",
                self.n_rows,
                self.n_cols,
                w.rows(),
                w.cols()
            )));
        }
        fn run<const W: usize>(
            x: &FeatureMatrix,
            w: &Matrix,
            scale: Option<&[f64]>,
            out: &mut Matrix,
        ) {
            for i in 0..x.n_rows {
                let span = x.indptr[i]..x.indptr[i + 1];
                let cols = &x.indices[span.clone()];
                match scale {
                    None => gather_rows::<W>(
                        out.row_mut(i),
                        cols.iter().map(|&f| (f, 1.0)),
                        w.as_slice(),
                        w.cols(),
                    ),
                    Some(s) => {
                        let terms = cols.iter().copied().zip(s[span].iter().copied());
                        gather_rows::<W>(out.row_mut(i), terms, w.as_slice(), w.cols())
                    }
                }
            }
        }
        let mut out = Matrix::zeros(self.n_rows, w.cols());
        by_width!(w.cols(), run(self, w, scale, &mut out));
        Ok(out)
    }

    /// `Xᵀ · G`, with the same optional per-nonzero scaling as [`matmul`](Self::matmul).
    pub fn t_matmul(&self, g: &Matrix, scale: Option<&[f64]>) -> Result<Matrix> {
        if g.rows() != self.n_rows {
            return Err(Error::dims("features transpose product row mismatch"));
        }
        fn run<const W: usize>(
            x: &FeatureMatrix,
            g: &Matrix,
            scale: Option<&[f64]>,
            out: &mut Matrix,
        ) {
            for i in 0..x.n_rows {
                let span = x.indptr[i]..x.indptr[i + 1];
                let cols = &x.indices[span.clone()];
                let out = out.as_mut_slice();
                match scale {
                    None => {
                        scatter_row::<W>(out, cols.iter().map(|&f| (f, 1.0)), g.row(i), g.cols())
                    }
                    Some(s) => {
                        let terms = cols.iter().copied().zip(s[span].iter().copied());
                        scatter_row::<W>(out, terms, g.row(i), g.cols())
                    }
                }
            }
        }
        let mut out = Matrix::zeros(self.n_cols, g.cols());
        by_width!(g.cols(), run(self, g, scale, &mut out));
        Ok(out)
    }
}

impl LinearOperator for FeatureMatrix {
    fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }
    fn apply(&self, b: &Matrix) -> Matrix {
        self.matmul(b, None).expect("operator shape checked by caller")
    }
    fn apply_t(&self, b: &Matrix) -> Matrix {
        self.t_matmul(b, None).expect("operator shape checked by caller")
    }
}
