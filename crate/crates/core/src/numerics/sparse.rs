use crate::{Error, Result};

/// Compressed-row storage shared by the square and rectangular variants.
#[derive(Debug, Clone, PartialEq)]
struct Csr {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    /// Sums duplicate entries, drops exact zeros and sorts columns per row.
    fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        for &(i, j, v) in triplets {
            if i >= rows || j >= cols {
                return Err(Error::Shape(format!(
                    "entry ({i}, {j}) outside {rows}x{cols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite entry at ({i}, {j})"
                )));
            }
        }
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut it = sorted.into_iter().peekable();
        while let Some((i, j, mut v)) = it.next() {
            while let Some(&(i2, j2, v2)) = it.peek() {
                if i2 == i && j2 == j {
                    v += v2;
                    it.next();
                } else {
                    break;
                }
            }
            if v != 0.0 {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
            }
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.rows)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .collect()
    }
}

/// Square symmetric sparse matrix with the full (both triangles) pattern stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetric {
    csr: Csr,
}

impl SparseSymmetric {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    /// Fails unless the assembled matrix is symmetric to `1e-13` relative
    /// to its largest entry.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let csr = Csr::from_triplets(n, n, triplets)?;
        let scale = csr.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for (j, v) in csr.row(i) {
                let vt = csr.get(j, i);
                if (v - vt).abs() > 1e-13 * scale {
                    return Err(Error::InvalidArgument(format!(
                        "matrix is not symmetric at ({i}, {j}): {v} vs {vt}"
                    )));
                }
            }
        }
        Ok(Self { csr })
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let t: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self {
            csr: Csr::from_triplets(d.len(), d.len(), &t).expect("diagonal is valid"),
        }
    }

    pub fn dim(&self) -> usize {
        self.csr.rows
    }

    pub fn nnz(&self) -> usize {
        self.csr.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.csr.get(i, j)
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.csr.row(i)
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        self.csr.mul_vec_into(x, y)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    /// `a·X + b·Y` on the union pattern.
    pub fn linear_combination(a: f64, x: &Self, b: f64, y: &Self) -> Result<Self> {
        if x.dim() != y.dim() {
            return Err(Error::Shape(format!(
                "cannot combine {}x{} and {}x{} matrices",
                x.dim(),
                x.dim(),
                y.dim(),
                y.dim()
            )));
        }
        let mut t: Vec<_> = x.csr.triplets().into_iter().map(|(i, j, v)| (i, j, a * v)).collect();
        t.extend(y.csr.triplets().into_iter().map(|(i, j, v)| (i, j, b * v)));
        Ok(Self {
            csr: Csr::from_triplets(x.dim(), x.dim(), &t)?,
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut m = vec![vec![0.0; n]; n];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        m
    }
}

/// Rectangular sparse matrix (`rows x cols`) in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRect {
    csr: Csr,
}

impl SparseRect {
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        Ok(Self {
            csr: Csr::from_triplets(rows, cols, triplets)?,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            csr: Csr::from_triplets(rows, cols, &[]).expect("empty matrix"),
        }
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let t: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(d.len(), d.len(), &t).expect("diagonal is valid")
    }

    pub fn rows(&self) -> usize {
        self.csr.rows
    }

    pub fn cols(&self) -> usize {
        self.csr.cols
    }

    pub fn nnz(&self) -> usize {
        self.csr.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.csr.get(i, j)
    }

    /// `D x` with `x` of length `cols`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows()];
        self.csr.mul_vec_into(x, &mut y);
        y
    }

    /// `Dᵀ y` with `y` of length `rows`.
    pub fn mul_transpose_vec(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows());
        let mut x = vec![0.0; self.cols()];
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            for (j, v) in self.csr.row(i) {
                x[j] += v * yi;
            }
        }
        x
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// `y += a·x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}
