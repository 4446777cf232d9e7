//! Prior families over the latent representation, centered on the stored
//! patterns.
//!
//! Three families are supported:
//!
//! - balanced Gaussian mixture: uniform weights, shared isotropic covariance
//!   `sigma^2 I`; every stored pattern gets its own density mode
//! - norm-biased mixture: mixing weights grow with `exp(beta/2 * ||M_k||^2)`
//!   and covariance `1/beta I`; its negative log-density is, up to an
//!   additive constant, the continuous Hopfield energy
//!   `beta/2 z'z - log sum_k exp(beta z'M_k)`, so patterns dominated by an
//!   aligned larger-norm pattern lose their mode
//! - shared-precision mixture: uniform weights with covariance `P^{-1}`,
//!   letting trained precision coefficients down-weight latent dimensions
//!   that are unreliable for retrieval
//!
//! All log-densities keep their full normalization constants so the
//! energy-constancy and landscape checks can compare them directly.

use crate::error::{Error, Result};
use crate::numerics::{
    log_sum_exp, softmax, squared_distance_columns, Matrix, RngStream, Vector,
};

use super::store::MemoryMatrix;

const LN_2PI: f64 = 1.8378770664093453;

/// Shared precision of the precision-mixture prior: either a positive
/// diagonal or a full SPD matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Precision {
    Diagonal(Vector),
    Full(Matrix),
}

impl Precision {
    pub fn diagonal(values: Vector) -> Result<Self> {
        if values.dim() == 0 {
            return Err(Error::InvalidParameter("empty precision diagonal".into()));
        }
        if values.iter().any(|&p| p <= 0.0 || !p.is_finite()) {
            return Err(Error::InvalidParameter(
                "diagonal precision entries must be positive and finite".into(),
            ));
        }
        Ok(Precision::Diagonal(values))
    }

    pub fn full(matrix: Matrix) -> Result<Self> {
        matrix.cholesky()?; // SPD check
        Ok(Precision::Full(matrix))
    }

    /// Isotropic precision `1/sigma^2` on every dimension.
    pub fn isotropic(dim: usize, sigma: f64) -> Result<Self> {
        if sigma <= 0.0 || sigma.is_nan() {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        Precision::diagonal(Vector::from_fn(dim, |_| 1.0 / (sigma * sigma)))
    }

    pub fn dim(&self) -> usize {
        match self {
            Precision::Diagonal(v) => v.dim(),
            Precision::Full(m) => m.rows(),
        }
    }

    pub fn log_det(&self) -> Result<f64> {
        match self {
            Precision::Diagonal(v) => Ok(v.iter().map(|p| p.ln()).sum()),
            Precision::Full(m) => {
                let l = m.cholesky()?;
                Ok(2.0 * (0..l.rows()).map(|i| l.get(i, i).ln()).sum::<f64>())
            }
        }
    }

    /// k-th entry is the squared Mahalanobis distance
    /// `(z - M_k)' P (z - M_k)`.
    pub fn mahalanobis_columns(&self, z: &Vector, mat: &Matrix) -> Result<Vector> {
        if z.dim() != mat.rows() || z.dim() != self.dim() {
            return Err(Error::ShapeMismatch {
                op: "mahalanobis_columns",
                left: format!("precision [{}] / query [{}]", self.dim(), z.dim()),
                right: format!("{}x{}", mat.rows(), mat.cols()),
            });
        }
        match self {
            Precision::Diagonal(p) => {
                let mut out = Vector::zeros(mat.cols());
                for r in 0..mat.rows() {
                    let row = mat.row(r);
                    let (zr, pr) = (z[r], p[r]);
                    for (o, a) in out.iter_mut().zip(row.iter()) {
                        let d = zr - a;
                        *o += pr * d * d;
                    }
                }
                Ok(out)
            }
            Precision::Full(p) => {
                let mut out = Vector::zeros(mat.cols());
                for k in 0..mat.cols() {
                    let diff = Vector::from_fn(mat.rows(), |r| z[r] - mat.get(r, k));
                    let pd = p.matvec(&diff)?;
                    out[k] = diff.dot(&pd)?;
                }
                Ok(out)
            }
        }
    }

    /// P v
    pub fn apply(&self, v: &Vector) -> Result<Vector> {
        match self {
            Precision::Diagonal(p) => {
                if p.dim() != v.dim() {
                    return Err(Error::ShapeMismatch {
                        op: "precision::apply",
                        left: format!("precision [{}]", p.dim()),
                        right: format!("vector [{}]", v.dim()),
                    });
                }
                Ok(Vector::from_fn(v.dim(), |i| p[i] * v[i]))
            }
            Precision::Full(p) => p.matvec(v),
        }
    }
}

/// Which prior the retrieval dynamics descend.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorSpec {
    BalancedGmm { sigma: f64 },
    Mchn { beta: f64 },
    PrecisionGmm { precision: Precision },
}

impl PriorSpec {
    pub fn balanced(sigma: f64) -> Result<Self> {
        if sigma <= 0.0 || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive and finite, got {sigma}"
            )));
        }
        Ok(PriorSpec::BalancedGmm { sigma })
    }

    pub fn mchn(beta: f64) -> Result<Self> {
        if beta <= 0.0 || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "beta must be positive and finite, got {beta}"
            )));
        }
        Ok(PriorSpec::Mchn { beta })
    }

    pub fn precision(precision: Precision) -> Self {
        PriorSpec::PrecisionGmm { precision }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            PriorSpec::BalancedGmm { .. } => "balanced_gmm",
            PriorSpec::Mchn { .. } => "mchn",
            PriorSpec::PrecisionGmm { .. } => "precision_gmm",
        }
    }

    pub fn log_density(&self, z: &Vector, memory: &MemoryMatrix) -> Result<f64> {
        match self {
            PriorSpec::BalancedGmm { sigma } => log_prior_balanced(z, memory, *sigma),
            PriorSpec::Mchn { beta } => log_prior_mchn(z, memory, *beta),
            PriorSpec::PrecisionGmm { precision } => log_prior_precision(z, memory, precision),
        }
    }

    pub fn grad_log_density(&self, z: &Vector, memory: &MemoryMatrix) -> Result<Vector> {
        match self {
            PriorSpec::BalancedGmm { sigma } => grad_log_prior_balanced(z, memory, *sigma),
            PriorSpec::Mchn { beta } => {
                // grad log p = beta * (softmax(beta M'z) readout - z)
                let readout = mchn_readout(z, memory, *beta)?;
                Ok(Vector::from_fn(z.dim(), |i| *beta * (readout[i] - z[i])))
            }
            PriorSpec::PrecisionGmm { precision } => {
                grad_log_prior_precision(z, memory, precision)
            }
        }
    }
}

fn check_query(z: &Vector, memory: &MemoryMatrix, op: &'static str) -> Result<()> {
    if z.dim() != memory.dim() {
        return Err(Error::ShapeMismatch {
            op,
            left: format!("query [{}]", z.dim()),
            right: format!("memory dim [{}]", memory.dim()),
        });
    }
    Ok(())
}

/// log of the balanced mixture density `1/N sum_k N(z; M_k, sigma^2 I)`,
/// including the full normalization `-d/2 ln(2 pi sigma^2) - ln N`.
pub fn log_prior_balanced(z: &Vector, memory: &MemoryMatrix, sigma: f64) -> Result<f64> {
    check_query(z, memory, "log_prior_balanced")?;
    if sigma <= 0.0 || sigma.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let mat = memory.matrix()?;
    let dists = squared_distance_columns(z, mat)?;
    let scaled = Vector::from_fn(dists.dim(), |k| -dists[k] / (2.0 * sigma * sigma));
    let d = memory.dim() as f64;
    let n = memory.len() as f64;
    Ok(log_sum_exp(&scaled)? - n.ln() - 0.5 * d * (LN_2PI + 2.0 * sigma.ln()))
}

/// Gradient of [`log_prior_balanced`]:
/// `1/sigma^2 (softmax(-||z - M||^2 / 2 sigma^2) M' - z)`.
pub fn grad_log_prior_balanced(z: &Vector, memory: &MemoryMatrix, sigma: f64) -> Result<Vector> {
    check_query(z, memory, "grad_log_prior_balanced")?;
    if sigma <= 0.0 || sigma.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let mat = memory.matrix()?;
    let dists = squared_distance_columns(z, mat)?;
    let scaled = Vector::from_fn(dists.dim(), |k| -dists[k] / (2.0 * sigma * sigma));
    let weights = softmax(&scaled)?;
    let readout = mat.matvec(&weights)?;
    let inv = 1.0 / (sigma * sigma);
    Ok(Vector::from_fn(z.dim(), |i| inv * (readout[i] - z[i])))
}

fn mchn_scores(z: &Vector, mat: &Matrix, beta: f64) -> Result<Vector> {
    let dots = mat.matvec_transpose(z)?;
    Ok(Vector::from_fn(dots.dim(), |k| beta * dots[k]))
}

fn mchn_readout(z: &Vector, memory: &MemoryMatrix, beta: f64) -> Result<Vector> {
    let mat = memory.matrix()?;
    let weights = softmax(&mchn_scores(z, mat, beta)?)?;
    mat.matvec(&weights)
}

/// Continuous Hopfield energy `beta/2 z'z - log sum_k exp(beta z'M_k)`
/// (additive constant dropped).
pub fn mchn_energy(z: &Vector, memory: &MemoryMatrix, beta: f64) -> Result<f64> {
    check_query(z, memory, "mchn_energy")?;
    if beta <= 0.0 || beta.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "beta must be positive, got {beta}"
        )));
    }
    let mat = memory.matrix()?;
    let scores = mchn_scores(z, mat, beta)?;
    Ok(0.5 * beta * z.dot(z)? - log_sum_exp(&scores)?)
}

/// Full log-density of the norm-biased mixture: components `N(z; M_k, 1/beta I)`
/// with weights `softmax(beta/2 ||M_k||^2)`. Satisfies
/// `log_prior_mchn = -mchn_energy + const(beta, M, d)`.
pub fn log_prior_mchn(z: &Vector, memory: &MemoryMatrix, beta: f64) -> Result<f64> {
    check_query(z, memory, "log_prior_mchn")?;
    if beta <= 0.0 || beta.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "beta must be positive, got {beta}"
        )));
    }
    let mat = memory.matrix()?;
    let d = memory.dim() as f64;
    // log pi_k (unnormalized) = beta/2 ||M_k||^2
    let self_terms = Vector::from_fn(memory.len(), |k| {
        let col = mat.column(k);
        0.5 * beta * col.iter().map(|v| v * v).sum::<f64>()
    });
    let dists = squared_distance_columns(z, mat)?;
    let combined = Vector::from_fn(memory.len(), |k| self_terms[k] - 0.5 * beta * dists[k]);
    Ok(0.5 * d * (beta.ln() - LN_2PI) - log_sum_exp(&self_terms)? + log_sum_exp(&combined)?)
}

/// log of the shared-precision mixture `1/N sum_k N(z; M_k, P^{-1})`.
pub fn log_prior_precision(
    z: &Vector,
    memory: &MemoryMatrix,
    precision: &Precision,
) -> Result<f64> {
    check_query(z, memory, "log_prior_precision")?;
    let mat = memory.matrix()?;
    let mahal = precision.mahalanobis_columns(z, mat)?;
    let scaled = Vector::from_fn(mahal.dim(), |k| -0.5 * mahal[k]);
    let d = memory.dim() as f64;
    let n = memory.len() as f64;
    Ok(log_sum_exp(&scaled)? - n.ln() - 0.5 * d * LN_2PI + 0.5 * precision.log_det()?)
}

/// Gradient of [`log_prior_precision`]:
/// `P (softmax(-1/2 (z-M)' P (z-M)) M' - z)`.
pub fn grad_log_prior_precision(
    z: &Vector,
    memory: &MemoryMatrix,
    precision: &Precision,
) -> Result<Vector> {
    check_query(z, memory, "grad_log_prior_precision")?;
    let mat = memory.matrix()?;
    let mahal = precision.mahalanobis_columns(z, mat)?;
    let scaled = Vector::from_fn(mahal.dim(), |k| -0.5 * mahal[k]);
    let weights = softmax(&scaled)?;
    let readout = mat.matvec(&weights)?;
    precision.apply(&readout.sub(z)?)
}

/// One draw from the balanced mixture: a uniformly chosen stored pattern
/// plus isotropic noise of scale `sigma`.
pub fn sample_prior(memory: &MemoryMatrix, sigma: f64, rng: &mut RngStream) -> Result<Vector> {
    if sigma <= 0.0 || sigma.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let mat = memory.matrix()?;
    let k = rng.next_below(mat.cols());
    let col = mat.column(k);
    Ok(Vector::from_fn(col.dim(), |i| col[i] + sigma * rng.normal()))
}
