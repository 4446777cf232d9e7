//! The memory matrix: a d x N store whose columns are pattern
//! representations, written one-shot and never trained.

use crate::error::{Error, Result};
use crate::model::format_f64;
use crate::numerics::{Matrix, Vector};

/// Immutable pattern store. Columns are patterns; writing returns a new
/// store with one appended column, so existing references stay valid and
/// read-only sharing across workers is safe.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryMatrix {
    dim: usize,
    mat: Option<Matrix>,
}

impl MemoryMatrix {
    /// Store with no patterns yet. Retrieval against it reports
    /// [`Error::EmptyMemory`].
    pub fn empty(dim: usize) -> Self {
        MemoryMatrix { dim, mat: None }
    }

    pub fn from_patterns(patterns: &[Vector]) -> Result<Self> {
        if patterns.is_empty() {
            return Err(Error::InvalidParameter(
                "from_patterns needs at least one pattern; use MemoryMatrix::empty".into(),
            ));
        }
        let mat = Matrix::from_columns(patterns)?;
        Ok(MemoryMatrix {
            dim: mat.rows(),
            mat: Some(mat),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored patterns.
    pub fn len(&self) -> usize {
        self.mat.as_ref().map_or(0, Matrix::cols)
    }

    pub fn is_empty(&self) -> bool {
        self.mat.is_none()
    }

    /// The d x N matrix view; errors when nothing is stored.
    pub fn matrix(&self) -> Result<&Matrix> {
        self.mat.as_ref().ok_or(Error::EmptyMemory)
    }

    /// Pattern `k` (0-based).
    pub fn pattern(&self, k: usize) -> Result<Vector> {
        let mat = self.matrix()?;
        if k >= mat.cols() {
            return Err(Error::InvalidParameter(format!(
                "pattern index {k} out of range for {} patterns",
                mat.cols()
            )));
        }
        Ok(mat.column(k))
    }

    /// New store with `z` appended as the last column.
    pub fn write_pattern(&self, z: &Vector) -> Result<MemoryMatrix> {
        if z.dim() != self.dim {
            return Err(Error::ShapeMismatch {
                op: "write_pattern",
                left: format!("memory dim [{}]", self.dim),
                right: format!("pattern [{}]", z.dim()),
            });
        }
        let mat = match &self.mat {
            None => Matrix::from_columns(std::slice::from_ref(z))?,
            Some(m) => {
                Matrix::from_fn(self.dim, m.cols() + 1, |r, c| {
                    if c < m.cols() {
                        m.get(r, c)
                    } else {
                        z[r]
                    }
                })
            }
        };
        Ok(MemoryMatrix {
            dim: self.dim,
            mat: Some(mat),
        })
    }

    /// Index and Euclidean distance of the stored pattern closest to `z`.
    /// Exact ties resolve to the lowest index.
    pub fn nearest(&self, z: &Vector) -> Result<(usize, f64)> {
        let mat = self.matrix()?;
        if z.dim() != self.dim {
            return Err(Error::ShapeMismatch {
                op: "nearest",
                left: format!("memory dim [{}]", self.dim),
                right: format!("query [{}]", z.dim()),
            });
        }
        let dists = crate::numerics::squared_distance_columns(z, mat)?;
        let mut best = 0;
        for k in 1..dists.dim() {
            if dists[k] < dists[best] {
                best = k;
            }
        }
        Ok((best, dists[best].sqrt()))
    }

    /// Smallest Euclidean distance between two distinct stored patterns;
    /// `None` with fewer than two patterns.
    pub fn min_pairwise_distance(&self) -> Option<f64> {
        let mat = self.mat.as_ref()?;
        let n = mat.cols();
        if n < 2 {
            return None;
        }
        let mut min = f64::INFINITY;
        for i in 0..n {
            let col = mat.column(i);
            let dists = crate::numerics::squared_distance_columns(&col, mat).ok()?;
            for j in 0..n {
                if j != i && dists[j] < min {
                    min = dists[j];
                }
            }
        }
        Some(min.sqrt())
    }

    /// Text form: `d=<d> n=<N>` header, then one pattern per line with 17
    /// significant digits.
    pub fn save(&self) -> String {
        let mut out = format!("d={} n={}\n", self.dim, self.len());
        for k in 0..self.len() {
            let col = self.mat.as_ref().expect("non-empty").column(k);
            let fields: Vec<String> = col.iter().map(|&v| format_f64(v)).collect();
            out.push_str(&fields.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn load(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hno, header) = lines.next().ok_or(Error::Parse {
            line: 0,
            message: "empty memory file".into(),
        })?;
        let mut dim: Option<usize> = None;
        let mut count: Option<usize> = None;
        for field in header.split_whitespace() {
            if let Some(v) = field.strip_prefix("d=") {
                dim = v.parse().ok();
            } else if let Some(v) = field.strip_prefix("n=") {
                count = v.parse().ok();
            }
        }
        let (dim, count) = match (dim, count) {
            (Some(d), Some(n)) if d > 0 => (d, n),
            _ => {
                return Err(Error::Parse {
                    line: hno + 1,
                    message: "expected header 'd=<d> n=<N>'".into(),
                })
            }
        };
        let mut patterns = Vec::with_capacity(count);
        for _ in 0..count {
            let (lno, line) = lines.next().ok_or(Error::Parse {
                line: hno + 1,
                message: format!("file ends before {count} patterns"),
            })?;
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|_| Error::Parse {
                        line: lno + 1,
                        message: format!("bad float '{tok}'"),
                    })
                })
                .collect::<Result<_>>()?;
            if values.len() != dim {
                return Err(Error::Parse {
                    line: lno + 1,
                    message: format!("expected {dim} values, found {}", values.len()),
                });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    line: lno + 1,
                    message: "non-finite value".into(),
                });
            }
            patterns.push(Vector::new(values));
        }
        if patterns.is_empty() {
            Ok(MemoryMatrix::empty(dim))
        } else {
            MemoryMatrix::from_patterns(&patterns)
        }
    }
}
