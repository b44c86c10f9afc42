//! Random-feature design matrices stored column-major, so the two columns
//! belonging to one frequency can be read and replaced as contiguous slices.

use ndarray::{Array2, ArrayView1, ArrayView2, ShapeBuilder};

use crate::error::{check_dim, Result};
use crate::rff::{feature_map_into, FrequencyMatrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Design<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Design<T> {
    /// `N × 2M` matrix whose row `i` is `φ(X_i)`.
    pub fn build(x: ArrayView2<'_, T>, w: &FrequencyMatrix<T>) -> Result<Self> {
        check_dim("design covariates", w.dim(), x.ncols())?;
        let rows = x.nrows();
        let cols = w.n_features();
        let mut data = vec![T::zero(); rows * cols];
        let mut buf = vec![T::zero(); cols];
        for (i, xi) in x.rows().into_iter().enumerate() {
            feature_map_into(xi, w, &mut buf)?;
            for (f, v) in buf.iter().enumerate() {
                data[f * rows + i] = *v;
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_matrix(phi: ArrayView2<'_, T>) -> Self {
        let rows = phi.nrows();
        let cols = phi.ncols();
        let mut data = Vec::with_capacity(rows * cols);
        for c in phi.columns() {
            data.extend(c.iter().copied());
        }
        Self { rows, cols, data }
    }

    /// Horizontal concatenation, preserving block order.
    pub fn concat(blocks: &[Design<T>]) -> Result<Self> {
        let rows = blocks.first().map_or(0, |b| b.rows);
        let mut data = Vec::new();
        let mut cols = 0;
        for b in blocks {
            check_dim("design block rows", rows, b.rows)?;
            data.extend_from_slice(&b.data);
            cols += b.cols;
        }
        Ok(Self { rows, cols, data })
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, f: usize) -> &[T] {
        &self.data[f * self.rows..(f + 1) * self.rows]
    }

    pub fn view(&self) -> ArrayView2<'_, T> {
        ArrayView2::from_shape((self.rows, self.cols).f(), &self.data).expect("design shape is consistent")
    }

    pub fn to_array(&self) -> Array2<T> {
        self.view().to_owned()
    }

    pub fn row(&self, i: usize) -> Vec<T> {
        (0..self.cols).map(|f| self.data[f * self.rows + i]).collect()
    }

    /// Overwrites the `(cos, sin)` column pair of frequency `j`.
    pub fn replace_frequency(&mut self, j: usize, cos: &[T], sin: &[T]) {
        let m = self.cols / 2;
        let rows = self.rows;
        self.data[j * rows..(j + 1) * rows].copy_from_slice(cos);
        self.data[(m + j) * rows..(m + j + 1) * rows].copy_from_slice(sin);
    }

    /// Rows restricted to `indices`.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let rows = indices.len();
        let mut data = Vec::with_capacity(rows * self.cols);
        for f in 0..self.cols {
            let col = self.column(f);
            data.extend(indices.iter().map(|&i| col[i]));
        }
        Self {
            rows,
            cols: self.cols,
            data,
        }
    }
}

/// The `(cos, sin)` design columns that frequency `omega` would produce in a
/// feature map with `m` frequencies.
pub fn frequency_columns<T: Scalar>(
    x: ArrayView2<'_, T>,
    omega: ArrayView1<'_, T>,
    m: usize,
) -> Result<(Vec<T>, Vec<T>)> {
    check_dim("frequency columns", x.ncols(), omega.len())?;
    let scale = T::from_usize_lossy(m).sqrt().recip();
    let proj = x.dot(&omega);
    let mut cos = Vec::with_capacity(proj.len());
    let mut sin = Vec::with_capacity(proj.len());
    for p in proj.iter() {
        let (s, c) = p.sin_cos();
        cos.push(c * scale);
        sin.push(s * scale);
    }
    Ok((cos, sin))
}

/// Public name for [`Design::build`].
pub fn build_design<T: Scalar>(x: ArrayView2<'_, T>, w: &FrequencyMatrix<T>) -> Result<Design<T>> {
    Design::build(x, w)
}
