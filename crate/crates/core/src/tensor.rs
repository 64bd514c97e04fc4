//! Dense N-dimensional tensors and the structural/multilinear primitives the
//! decomposition algorithms are built from.
//!
//! All values are 64-bit floats stored in a single column-major linearization
//! (first index varies fastest). Every reshape in this crate is defined
//! relative to that order and never reorders data.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("invalid permutation {0:?}")]
    InvalidPermutation(Vec<usize>),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Dense N-dimensional tensor with explicit mode sizes.
///
/// Invariants: `shape.len() >= 1`, every mode size `>= 1`, and
/// `data.len() == product(shape)`. Values are immutable after construction;
/// all operations are pure functions returning new tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, TensorError> {
        if shape.is_empty() {
            return Err(TensorError::InvalidArgument("tensor order must be >= 1".into()));
        }
        if shape.iter().any(|&s| s == 0) {
            return Err(TensorError::InvalidArgument(format!(
                "every mode size must be >= 1, got {shape:?}"
            )));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(TensorError::ShapeMismatch(format!(
                "shape {shape:?} wants {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self::new(shape.to_vec(), vec![0.0; len]).expect("valid shape")
    }

    /// Build a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..len {
            data.push(f(&idx));
            for (i, s) in idx.iter_mut().zip(shape) {
                *i += 1;
                if *i < *s {
                    break;
                }
                *i = 0;
            }
        }
        Self::new(shape.to_vec(), data).expect("valid shape")
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    fn strides(&self) -> Vec<usize> {
        strides_of(&self.shape)
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        idx.iter()
            .zip(self.strides())
            .map(|(i, s)| i * s)
            .sum()
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.linear_index(idx)]
    }

    /// Relabel to a new shape with the same element count. Data is untouched.
    pub fn reshape(&self, new_shape: &[usize]) -> Result<Self, TensorError> {
        let want: usize = new_shape.iter().product();
        if want != self.data.len() {
            return Err(TensorError::ShapeMismatch(format!(
                "cannot reshape {:?} ({} values) to {:?} ({} values)",
                self.shape,
                self.data.len(),
                new_shape,
                want
            )));
        }
        Self::new(new_shape.to_vec(), self.data.clone())
    }

    /// Mode-`mode` matricization: rows are the mode-`mode` index, columns run
    /// over the remaining modes in natural order (first of them fastest).
    pub fn matricize(&self, mode: usize) -> Result<Matrix, TensorError> {
        if mode >= self.ndim() {
            return Err(TensorError::IndexOutOfRange(format!(
                "mode {mode} of an order-{} tensor",
                self.ndim()
            )));
        }
        let rows = self.shape[mode];
        let cols = self.data.len() / rows;
        let mut out = vec![0.0; self.data.len()];
        let strides = self.strides();
        let mode_stride = strides[mode];
        // Iterate source in storage order, computing the destination slot.
        let mut idx = vec![0usize; self.ndim()];
        for (lin, &v) in self.data.iter().enumerate() {
            let _ = lin;
            let r = idx[mode];
            let mut col = 0usize;
            let mut mult = 1usize;
            for (k, &i) in idx.iter().enumerate() {
                if k == mode {
                    continue;
                }
                col += i * mult;
                mult *= self.shape[k];
            }
            out[r + rows * col] = v;
            for (i, s) in idx.iter_mut().zip(&self.shape) {
                *i += 1;
                if *i < *s {
                    break;
                }
                *i = 0;
            }
        }
        let _ = mode_stride;
        Matrix::new(rows, cols, out)
    }

    /// Inverse of [`matricize`]: rebuild a tensor of `shape` from its mode-`mode`
    /// unfolding.
    pub fn dematricize(m: &Matrix, mode: usize, shape: &[usize]) -> Result<Self, TensorError> {
        if mode >= shape.len() {
            return Err(TensorError::IndexOutOfRange(format!(
                "mode {mode} of an order-{} shape",
                shape.len()
            )));
        }
        let rows = shape[mode];
        let total: usize = shape.iter().product();
        if m.rows() != rows || m.rows() * m.cols() != total {
            return Err(TensorError::ShapeMismatch(format!(
                "unfolding {}x{} does not match shape {shape:?} at mode {mode}",
                m.rows(),
                m.cols()
            )));
        }
        let mut out = DenseTensor::zeros(shape);
        let mut idx = vec![0usize; shape.len()];
        for slot in out.data.iter_mut() {
            let r = idx[mode];
            let mut col = 0usize;
            let mut mult = 1usize;
            for (k, &i) in idx.iter().enumerate() {
                if k == mode {
                    continue;
                }
                col += i * mult;
                mult *= shape[k];
            }
            *slot = m.data()[r + rows * col];
            for (i, s) in idx.iter_mut().zip(shape) {
                *i += 1;
                if *i < *s {
                    break;
                }
                *i = 0;
            }
        }
        Ok(out)
    }

    /// n-mode product: contract `m` (rows x I_mode) against mode `mode`.
    /// The result replaces that mode size with `m.rows()`.
    pub fn mode_product(&self, m: &Matrix, mode: usize) -> Result<Self, TensorError> {
        if mode >= self.ndim() {
            return Err(TensorError::IndexOutOfRange(format!(
                "mode {mode} of an order-{} tensor",
                self.ndim()
            )));
        }
        if m.cols() != self.shape[mode] {
            return Err(TensorError::ShapeMismatch(format!(
                "matrix has {} columns but mode {mode} has size {}",
                m.cols(),
                self.shape[mode]
            )));
        }
        let unfolded = self.matricize(mode)?;
        let product = m.multiply(&unfolded)?;
        let mut new_shape = self.shape.clone();
        new_shape[mode] = m.rows();
        Self::dematricize(&product, mode, &new_shape)
    }

    /// Move axes: result axis `j` is source axis `perm[j]`, so the entry at
    /// `(i_0..i_{N-1})` lands at the position given by the permutation.
    pub fn permute_axes(&self, perm: &[usize]) -> Result<Self, TensorError> {
        let n = self.ndim();
        if perm.len() != n {
            return Err(TensorError::InvalidPermutation(perm.to_vec()));
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || seen[p] {
                return Err(TensorError::InvalidPermutation(perm.to_vec()));
            }
            seen[p] = true;
        }
        let new_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let src_strides = self.strides();
        let mut out = DenseTensor::zeros(&new_shape);
        let mut idx = vec![0usize; n];
        for slot in out.data.iter_mut() {
            let mut lin = 0usize;
            for (j, &i) in idx.iter().enumerate() {
                lin += i * src_strides[perm[j]];
            }
            *slot = self.data[lin];
            for (i, s) in idx.iter_mut().zip(&new_shape) {
                *i += 1;
                if *i < *s {
                    break;
                }
                *i = 0;
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn add(&self, other: &Self) -> Result<Self, TensorError> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Self::new(self.shape.clone(), data)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, TensorError> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Self::new(self.shape.clone(), data)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| c * v).collect(),
        }
    }

    /// Relative Frobenius distance `||a - b||_F / ||a||_F` (absolute when `a` is zero).
    pub fn relative_error(&self, other: &Self) -> f64 {
        let denom = self.frobenius_norm();
        let num = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if denom == 0.0 {
            num
        } else {
            num / denom
        }
    }

    /// Extract the leading corner block of the given shape.
    pub fn slice_corner(&self, block: &[usize]) -> Result<Self, TensorError> {
        if block.len() != self.ndim() {
            return Err(TensorError::ShapeMismatch(format!(
                "block order {} vs tensor order {}",
                block.len(),
                self.ndim()
            )));
        }
        for (b, s) in block.iter().zip(&self.shape) {
            if b > s || *b == 0 {
                return Err(TensorError::IndexOutOfRange(format!(
                    "block {block:?} outside shape {:?}",
                    self.shape
                )));
            }
        }
        let src_strides = self.strides();
        let mut out = DenseTensor::zeros(block);
        let mut idx = vec![0usize; block.len()];
        for slot in out.data.iter_mut() {
            let lin: usize = idx.iter().zip(&src_strides).map(|(i, s)| i * s).sum();
            *slot = self.data[lin];
            for (i, s) in idx.iter_mut().zip(block) {
                *i += 1;
                if *i < *s {
                    break;
                }
                *i = 0;
            }
        }
        Ok(out)
    }

    /// Direct sum: `a` and `b` in disjoint diagonal blocks, mode sizes add.
    pub fn direct_sum(&self, other: &Self) -> Result<Self, TensorError> {
        if self.ndim() != other.ndim() {
            return Err(TensorError::ShapeMismatch(format!(
                "order {} vs {}",
                self.ndim(),
                other.ndim()
            )));
        }
        let shape: Vec<usize> = self
            .shape
            .iter()
            .zip(&other.shape)
            .map(|(a, b)| a + b)
            .collect();
        let mut out = DenseTensor::zeros(&shape);
        let out_strides = out.strides();
        let mut idx = vec![0usize; self.ndim()];
        for &v in &self.data {
            let lin: usize = idx.iter().zip(&out_strides).map(|(i, s)| i * s).sum();
            out.data[lin] = v;
            for (i, s) in idx.iter_mut().zip(&self.shape) {
                *i += 1;
                if *i < *s {
                    break;
                }
                *i = 0;
            }
        }
        let mut idx = vec![0usize; other.ndim()];
        for &v in &other.data {
            let lin: usize = idx
                .iter()
                .zip(&out_strides)
                .zip(&self.shape)
                .map(|((i, s), off)| (i + off) * s)
                .sum();
            out.data[lin] = v;
            for (i, s) in idx.iter_mut().zip(&other.shape) {
                *i += 1;
                if *i < *s {
                    break;
                }
                *i = 0;
            }
        }
        Ok(out)
    }

    /// Generalized Kronecker product: mode sizes multiply; per mode the index
    /// of `other` varies fastest, matching the matrix convention.
    pub fn kronecker(&self, other: &Self) -> Result<Self, TensorError> {
        if self.ndim() != other.ndim() {
            return Err(TensorError::ShapeMismatch(format!(
                "order {} vs {}",
                self.ndim(),
                other.ndim()
            )));
        }
        let shape: Vec<usize> = self
            .shape
            .iter()
            .zip(&other.shape)
            .map(|(a, b)| a * b)
            .collect();
        let mut out = DenseTensor::zeros(&shape);
        let mut idx = vec![0usize; shape.len()];
        for slot in out.data.iter_mut() {
            let mut a_idx = Vec::with_capacity(shape.len());
            let mut b_idx = Vec::with_capacity(shape.len());
            for (k, &i) in idx.iter().enumerate() {
                a_idx.push(i / other.shape[k]);
                b_idx.push(i % other.shape[k]);
            }
            *slot = self.get(&a_idx) * other.get(&b_idx);
            for (i, s) in idx.iter_mut().zip(&shape) {
                *i += 1;
                if *i < *s {
                    break;
                }
                *i = 0;
            }
        }
        Ok(out)
    }

    /// Elementwise product; shapes must match.
    pub fn hadamard(&self, other: &Self) -> Result<Self, TensorError> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .collect();
        Self::new(self.shape.clone(), data)
    }
}

pub(crate) fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = Vec::with_capacity(shape.len());
    let mut acc = 1usize;
    for &s in shape {
        strides.push(acc);
        acc *= s;
    }
    strides
}

/// Column-major matrix of 64-bit floats; the matricization target and the
/// factor-matrix type.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, TensorError> {
        if rows * cols != data.len() {
            return Err(TensorError::ShapeMismatch(format!(
                "{rows}x{cols} matrix wants {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i + n * i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for c in 0..cols {
            for r in 0..rows {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r + self.rows * c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r + self.rows * c] = v;
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub(crate) fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_column_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_nalgebra(m: &nalgebra::DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.as_slice().to_vec(),
        }
    }

    pub fn multiply(&self, other: &Self) -> Result<Self, TensorError> {
        if self.cols != other.rows {
            return Err(TensorError::ShapeMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Self::from_nalgebra(
            &(self.to_nalgebra() * other.to_nalgebra()),
        ))
    }

    /// Scale column `j` by `factors[j]`.
    pub fn scale_columns(&self, factors: &[f64]) -> Result<Self, TensorError> {
        if factors.len() != self.cols {
            return Err(TensorError::ShapeMismatch(format!(
                "{} factors for {} columns",
                factors.len(),
                self.cols
            )));
        }
        let mut out = self.clone();
        for (c, f) in factors.iter().enumerate() {
            for r in 0..self.rows {
                out.data[r + self.rows * c] *= f;
            }
        }
        Ok(out)
    }

    /// Scale row `i` by `factors[i]`.
    pub fn scale_rows(&self, factors: &[f64]) -> Result<Self, TensorError> {
        if factors.len() != self.rows {
            return Err(TensorError::ShapeMismatch(format!(
                "{} factors for {} rows",
                factors.len(),
                self.rows
            )));
        }
        let mut out = self.clone();
        for c in 0..self.cols {
            for (r, f) in factors.iter().enumerate() {
                out.data[r + self.rows * c] *= f;
            }
        }
        Ok(out)
    }

    pub fn to_tensor(&self) -> DenseTensor {
        DenseTensor::new(vec![self.rows, self.cols], self.data.clone()).expect("valid")
    }

    pub fn from_tensor(t: &DenseTensor) -> Result<Self, TensorError> {
        if t.ndim() != 2 {
            return Err(TensorError::ShapeMismatch(format!(
                "expected a 2-mode tensor, got order {}",
                t.ndim()
            )));
        }
        Self::new(t.shape()[0], t.shape()[1], t.data().to_vec())
    }

    /// Block-diagonal direct sum.
    pub fn direct_sum(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.rows + other.rows, self.cols + other.cols);
        for c in 0..self.cols {
            for r in 0..self.rows {
                out.data[r + out.rows * c] = self.get(r, c);
            }
        }
        for c in 0..other.cols {
            for r in 0..other.rows {
                out.data[self.rows + r + out.rows * (self.cols + c)] = other.get(r, c);
            }
        }
        out
    }

    /// Column concatenation of factor matrices sharing their row mode.
    pub fn partial_direct_sum(&self, other: &Self) -> Result<Self, TensorError> {
        if self.rows != other.rows {
            return Err(TensorError::ShapeMismatch(format!(
                "shared row mode differs: {} vs {}",
                self.rows, other.rows
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Self::new(self.rows, self.cols + other.cols, data)
    }

    /// Standard Kronecker product (right operand's indices vary fastest).
    pub fn kronecker(&self, other: &Self) -> Self {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        Matrix::from_fn(rows, cols, |r, c| {
            self.get(r / other.rows, c / other.cols) * other.get(r % other.rows, c % other.cols)
        })
    }

    /// Row-wise (partial) Kronecker product: row `r` of the result is
    /// `kron(self[r,:], other[r,:])`; the shared row mode must match.
    pub fn partial_kronecker(&self, other: &Self) -> Result<Self, TensorError> {
        if self.rows != other.rows {
            return Err(TensorError::ShapeMismatch(format!(
                "shared row mode differs: {} vs {}",
                self.rows, other.rows
            )));
        }
        Ok(Matrix::from_fn(self.rows, self.cols * other.cols, |r, c| {
            self.get(r, c / other.cols) * other.get(r, c % other.cols)
        }))
    }

    pub fn hadamard(&self, other: &Self) -> Result<Self, TensorError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(TensorError::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .collect();
        Self::new(self.rows, self.cols, data)
    }
}
