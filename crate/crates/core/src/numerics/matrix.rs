//! Dense row-major f64 matrix.

use crate::error::{Error, Result};
use crate::numerics::Vector;

/// Dense matrix of 64-bit floats, row-major storage.
///
/// Pattern stores treat a `d x N` matrix as `N` column vectors; [`Matrix::column`]
/// is the accessor for that view. The physical layout stays row-major, which
/// keeps the per-row inner loops of the attention readouts cache-friendly.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                op: "matrix::new",
                left: format!("{rows}x{cols}"),
                right: format!("data[{}]", data.len()),
            });
        }
        Ok(Matrix { data, rows, cols })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            data: vec![0.0; rows * cols],
            rows,
            cols,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { data, rows, cols }
    }

    /// Build from column vectors; every column must share one dimension.
    pub fn from_columns(columns: &[Vector]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidParameter(
                "from_columns needs at least one column".into(),
            ));
        }
        let rows = columns[0].dim();
        for (i, c) in columns.iter().enumerate() {
            if c.dim() != rows {
                return Err(Error::ShapeMismatch {
                    op: "from_columns",
                    left: format!("column 0 [{rows}]"),
                    right: format!("column {i} [{}]", c.dim()),
                });
            }
        }
        Ok(Matrix::from_fn(rows, columns.len(), |r, c| columns[c][r]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Column `c` as an owned vector (strided copy out of the row-major buffer).
    pub fn column(&self, c: usize) -> Vector {
        Vector::from_fn(self.rows, |r| self.get(r, c))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// self * v
    pub fn matvec(&self, v: &Vector) -> Result<Vector> {
        if v.dim() != self.cols {
            return Err(Error::ShapeMismatch {
                op: "matvec",
                left: format!("{}x{}", self.rows, self.cols),
                right: format!("vector[{}]", v.dim()),
            });
        }
        let mut out = Vector::zeros(self.rows);
        for r in 0..self.rows {
            let row = self.row(r);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(v.iter()) {
                acc += a * b;
            }
            out[r] = acc;
        }
        Ok(out)
    }

    /// self^T * v without materializing the transpose.
    pub fn matvec_transpose(&self, v: &Vector) -> Result<Vector> {
        if v.dim() != self.rows {
            return Err(Error::ShapeMismatch {
                op: "matvec_transpose",
                left: format!("{}x{} (transposed)", self.rows, self.cols),
                right: format!("vector[{}]", v.dim()),
            });
        }
        let mut out = Vector::zeros(self.cols);
        for r in 0..self.rows {
            let row = self.row(r);
            let vr = v[r];
            for (o, a) in out.iter_mut().zip(row.iter()) {
                *o += vr * a;
            }
        }
        Ok(out)
    }

    /// self * other
    pub fn matmat(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch {
                op: "matmat",
                left: format!("{}x{}", self.rows, self.cols),
                right: format!("{}x{}", other.rows, other.cols),
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0.0 {
                    continue;
                }
                for c in 0..other.cols {
                    let v = out.get(r, c) + a * other.get(k, c);
                    out.set(r, c, v);
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    /// Lower-triangular Cholesky factor of a symmetric positive definite
    /// matrix. Fails on non-square or non-SPD input.
    pub fn cholesky(&self) -> Result<Matrix> {
        if self.rows != self.cols {
            return Err(Error::ShapeMismatch {
                op: "cholesky",
                left: format!("{}x{}", self.rows, self.cols),
                right: "square matrix".into(),
            });
        }
        let n = self.rows;
        let mut l = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut sum = self.get(i, j);
                for k in 0..j {
                    sum -= l.get(i, k) * l.get(j, k);
                }
                if i == j {
                    if sum <= 0.0 {
                        return Err(Error::InvalidParameter(
                            "matrix is not positive definite".into(),
                        ));
                    }
                    l.set(i, j, sum.sqrt());
                } else {
                    l.set(i, j, sum / l.get(j, j));
                }
            }
        }
        Ok(l)
    }
}

/// k-th entry is the squared Euclidean distance between `z` and column k of `m`.
///
/// Computed as an explicit difference-and-square sweep (never by expanding
/// dot products), which stays accurate far away from the columns.
pub fn squared_distance_columns(z: &Vector, m: &Matrix) -> Result<Vector> {
    if z.dim() != m.rows() {
        return Err(Error::ShapeMismatch {
            op: "squared_distance_columns",
            left: format!("vector[{}]", z.dim()),
            right: format!("{}x{}", m.rows(), m.cols()),
        });
    }
    let mut out = Vector::zeros(m.cols());
    for r in 0..m.rows() {
        let row = m.row(r);
        let zr = z[r];
        for (o, a) in out.iter_mut().zip(row.iter()) {
            let d = zr - a;
            *o += d * d;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    #[test]
    fn matvec_against_loop_oracle() {
        let mut rng = RngStream::new(3);
        for _ in 0..50 {
            let rows = 1 + (rng.next_u64() % 8) as usize;
            let cols = 1 + (rng.next_u64() % 8) as usize;
            let m = Matrix::from_fn(rows, cols, |_, _| rng.next_f64() - 0.5);
            let v = Vector::from_fn(cols, |_| rng.next_f64() - 0.5);
            let got = m.matvec(&v).unwrap();
            for r in 0..rows {
                let mut acc = 0.0;
                for c in 0..cols {
                    acc += m.get(r, c) * v[c];
                }
                assert!((got[r] - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matvec_transpose_matches_explicit_transpose() {
        let mut rng = RngStream::new(4);
        let m = Matrix::from_fn(5, 7, |_, _| rng.next_f64() - 0.5);
        let v = Vector::from_fn(5, |_| rng.next_f64() - 0.5);
        let fast = m.matvec_transpose(&v).unwrap();
        let slow = m.transpose().matvec(&v).unwrap();
        for i in 0..7 {
            assert!((fast[i] - slow[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn matmat_identity() {
        let mut rng = RngStream::new(5);
        let m = Matrix::from_fn(4, 4, |_, _| rng.next_f64());
        let prod = m.matmat(&Matrix::identity(4)).unwrap();
        assert_eq!(prod, m);
    }

    #[test]
    fn transpose_involution() {
        let mut rng = RngStream::new(6);
        let m = Matrix::from_fn(3, 5, |_, _| rng.next_f64());
        assert_eq!(m.transpose().transpose(), m);
    }

    #[test]
    fn squared_distances_zero_at_matching_column() {
        let m = Matrix::from_columns(&[
            Vector::new(vec![1.0, 0.0]),
            Vector::new(vec![0.0, 2.0]),
        ])
        .unwrap();
        let d = squared_distance_columns(&Vector::new(vec![1.0, 0.0]), &m).unwrap();
        assert_eq!(d[0], 0.0);
        let d = squared_distance_columns(&Vector::new(vec![0.0, 0.0]), &m).unwrap();
        assert_eq!(d.as_slice(), &[1.0, 4.0]);
    }

    #[test]
    fn squared_distances_against_loop_oracle() {
        let mut rng = RngStream::new(9);
        for _ in 0..50 {
            let d = 1 + (rng.next_u64() % 10) as usize;
            let n = 1 + (rng.next_u64() % 10) as usize;
            let m = Matrix::from_fn(d, n, |_, _| rng.next_f64() * 4.0 - 2.0);
            let z = Vector::from_fn(d, |_| rng.next_f64() * 4.0 - 2.0);
            let got = squared_distance_columns(&z, &m).unwrap();
            for k in 0..n {
                let mut acc = 0.0;
                for r in 0..d {
                    let diff = z[r] - m.get(r, k);
                    acc += diff * diff;
                }
                assert!((got[k] - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_mismatch_reports_both_shapes() {
        let m = Matrix::zeros(3, 4);
        let v = Vector::zeros(3);
        let msg = m.matvec(&v).unwrap_err().to_string();
        assert!(msg.contains("3x4") && msg.contains("vector[3]"));
    }

    #[test]
    fn cholesky_roundtrip() {
        // A = L L^T for a hand-built SPD matrix.
        let a = Matrix::new(3, 3, vec![4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0]).unwrap();
        let l = a.cholesky().unwrap();
        let back = l.matmat(&l.transpose()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((back.get(i, j) - a.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Matrix::new(2, 2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(a.cholesky().is_err());
    }
}
