use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix. Column vectors are `n x 1`, scalars `1 x 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T: Scalar> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "from_vec",
                format!("{} entries", rows * cols),
                format!("{}", data.len()),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Build from nested rows; handy in tests.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    pub fn scalar(x: T) -> Self {
        Matrix {
            rows: 1,
            cols: 1,
            data: vec![x],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, T::one());
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn shape_str(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Index of the first non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|x| !x.is_finite())
    }

    pub fn transpose(&self) -> Matrix<T> {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix<T>) -> Result<Matrix<T>> {
        if self.cols != other.rows {
            return Err(Error::shape(
                "matmul",
                format!("lhs cols = rhs rows ({})", self.cols),
                format!("{} vs {}", self.shape_str(), other.shape_str()),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        if other.cols == 1 {
            // Matrix-vector product: one contiguous dot per output row.
            for i in 0..self.rows {
                let row = &self.data[i * self.cols..(i + 1) * self.cols];
                out.data[i] = dot_unrolled(row, &other.data);
            }
            return Ok(out);
        }
        // i-k-j order keeps both operands streaming over contiguous rows.
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == T::zero() {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row.iter()) {
                    *o = *o + a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self^T * other` without materializing the transpose.
    pub fn transposed_matmul(&self, other: &Matrix<T>) -> Result<Matrix<T>> {
        if self.rows != other.rows {
            return Err(Error::shape(
                "transposed_matmul",
                format!("lhs rows = rhs rows ({})", self.rows),
                format!("{} vs {}", self.shape_str(), other.shape_str()),
            ));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        if other.cols == 1 {
            for i in 0..self.rows {
                let a_row = &self.data[i * self.cols..(i + 1) * self.cols];
                let g = other.data[i];
                if g == T::zero() {
                    continue;
                }
                for (o, &a) in out.data.iter_mut().zip(a_row.iter()) {
                    *o = *o + a * g;
                }
            }
            return Ok(out);
        }
        for i in 0..self.rows {
            let a_row = &self.data[i * self.cols..(i + 1) * self.cols];
            let b_row = &other.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in a_row.iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                let out_row = &mut out.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row.iter()) {
                    *o = *o + a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * other^T` without materializing the transpose.
    pub fn matmul_transposed(&self, other: &Matrix<T>) -> Result<Matrix<T>> {
        if self.cols != other.cols {
            return Err(Error::shape(
                "matmul_transposed",
                format!("lhs cols = rhs cols ({})", self.cols),
                format!("{} vs {}", self.shape_str(), other.shape_str()),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        if self.cols == 1 {
            // Rank-1 outer product.
            for i in 0..self.rows {
                let a = self.data[i];
                if a == T::zero() {
                    continue;
                }
                let out_row = &mut out.data[i * other.rows..(i + 1) * other.rows];
                for (o, &b) in out_row.iter_mut().zip(other.data.iter()) {
                    *o = a * b;
                }
            }
            return Ok(out);
        }
        for i in 0..self.rows {
            let a_row = &self.data[i * self.cols..(i + 1) * self.cols];
            for j in 0..other.rows {
                let b_row = &other.data[j * other.cols..(j + 1) * other.cols];
                out.data[i * other.rows + j] = dot_unrolled(a_row, b_row);
            }
        }
        Ok(out)
    }

    pub fn hadamard(&self, other: &Matrix<T>) -> Result<Matrix<T>> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                "hadamard",
                self.shape_str(),
                other.shape_str(),
            ));
        }
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(&a, &b)| a * b)
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn add(&self, other: &Matrix<T>) -> Result<Matrix<T>> {
        if self.shape() != other.shape() {
            return Err(Error::shape("add", self.shape_str(), other.shape_str()));
        }
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn sub(&self, other: &Matrix<T>) -> Result<Matrix<T>> {
        if self.shape() != other.shape() {
            return Err(Error::shape("sub", self.shape_str(), other.shape_str()));
        }
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(&a, &b)| a - b)
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, s: T) -> Matrix<T> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Matrix<T> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Sum over columns: `r x m -> r x 1` (multiplication by the ones vector).
    pub fn row_sum(&self) -> Matrix<T> {
        let mut out = Matrix::zeros(self.rows, 1);
        for r in 0..self.rows {
            let mut acc = T::zero();
            for c in 0..self.cols {
                acc = acc + self.get(r, c);
            }
            out.set(r, 0, acc);
        }
        out
    }

    pub fn sum(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &x| acc + x)
    }

    pub fn frobenius_norm(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, &x| acc + x * x)
            .sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, &x| acc.max(x.abs()))
    }

    /// Euclidean norm of the flattened entries (same as Frobenius).
    pub fn norm2(&self) -> T {
        self.frobenius_norm()
    }

    pub fn to_f64(&self) -> Matrix<f64> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x.to_f64_lossy()).collect(),
        }
    }

    pub fn from_f64(m: &Matrix<f64>) -> Matrix<T> {
        Matrix {
            rows: m.rows,
            cols: m.cols,
            data: m.data.iter().map(|&x| T::from_f64_lossy(x)).collect(),
        }
    }
}

/// Dot product with four independent accumulators; the serial dependency
/// of a single accumulator otherwise caps matvec throughput.
fn dot_unrolled<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc0 = T::zero();
    let mut acc1 = T::zero();
    let mut acc2 = T::zero();
    let mut acc3 = T::zero();
    let mut a_chunks = a.chunks_exact(4);
    let mut b_chunks = b.chunks_exact(4);
    for (ac, bc) in (&mut a_chunks).zip(&mut b_chunks) {
        acc0 = acc0 + ac[0] * bc[0];
        acc1 = acc1 + ac[1] * bc[1];
        acc2 = acc2 + ac[2] * bc[2];
        acc3 = acc3 + ac[3] * bc[3];
    }
    let mut tail = T::zero();
    for (&x, &y) in a_chunks.remainder().iter().zip(b_chunks.remainder()) {
        tail = tail + x * y;
    }
    ((acc0 + acc1) + (acc2 + acc3)) + tail
}

/// Relative residual `|a - b| / max(floor, |a|)` used by the oracle checks.
pub fn relative_residual<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>, floor: T) -> T {
    let diff = a.sub(b).expect("residual shapes");
    diff.norm2() / floor.max(a.norm2())
}
