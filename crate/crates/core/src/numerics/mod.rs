//! Dense f64 vector/matrix arithmetic, stable reductions and seeded
//! randomness used by every other module.
//!
//! All arithmetic is 64-bit. Matrices are stored row-major; pattern stores
//! expose a column-oriented view on top of that layout (see
//! [`Matrix::column`]).

mod matrix;
mod rng;
mod vector;

pub use matrix::{squared_distance_columns, Matrix};
pub use rng::RngStream;
pub use vector::{axpy, log_sum_exp, softmax, Vector};
