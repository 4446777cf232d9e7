//! Training of the diagonal precision coefficients used by the
//! Mahalanobis-attention engine.
//!
//! The precision is parameterized as `P_jj = exp(raw_j)` with a floor of
//! 1e-8, so positivity holds by construction. The loss is the mean squared
//! distance between the latent after a fixed number of unrolled readout
//! iterations and the correct stored pattern; its gradient is obtained by
//! reverse-mode differentiation through the unrolled softmax readouts.
//! Training is plain full-batch gradient descent, deterministic given the
//! task.

use crate::error::{Error, Result};
use crate::memory::{MemoryMatrix, Precision};
use crate::model::format_f64;
use crate::numerics::{softmax, RngStream, Vector};

/// Lower bound on every precision entry.
pub const PRECISION_FLOOR: f64 = 1e-8;

/// Unconstrained parameters behind a positive diagonal precision.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionParams {
    raw: Vector,
}

impl PrecisionParams {
    pub fn from_raw(raw: Vector) -> Self {
        PrecisionParams { raw }
    }

    /// Uniform precision `1/sigma^2` on every dimension, matching the
    /// isotropic mixture prior with scale `sigma`.
    pub fn uniform(dim: usize, sigma: f64) -> Result<Self> {
        if sigma <= 0.0 || sigma.is_nan() {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        let raw = (1.0 / (sigma * sigma)).ln();
        Ok(PrecisionParams {
            raw: Vector::from_fn(dim, |_| raw),
        })
    }

    pub fn raw(&self) -> &Vector {
        &self.raw
    }

    pub fn dim(&self) -> usize {
        self.raw.dim()
    }

    /// The positive diagonal: `exp(raw_j)` floored at [`PRECISION_FLOOR`].
    pub fn values(&self) -> Vector {
        Vector::from_fn(self.raw.dim(), |j| self.raw[j].exp().max(PRECISION_FLOOR))
    }

    pub fn precision(&self) -> Precision {
        Precision::diagonal(self.values()).expect("floored values are positive")
    }

    /// One labeled line in the model text format.
    pub fn save(&self) -> String {
        let fields: Vec<String> = self.raw.iter().map(|&v| format_f64(v)).collect();
        format!("precision_raw= {}\n", fields.join(" "))
    }

    pub fn load(text: &str) -> Result<Self> {
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(rest) = line.strip_prefix("precision_raw=") {
                let values: Vec<f64> = rest
                    .split_whitespace()
                    .map(|tok| {
                        tok.parse::<f64>().map_err(|_| Error::Parse {
                            line: idx + 1,
                            message: format!("bad float '{tok}'"),
                        })
                    })
                    .collect::<Result<_>>()?;
                if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Parse {
                        line: idx + 1,
                        message: "precision_raw needs finite values".into(),
                    });
                }
                return Ok(PrecisionParams::from_raw(Vector::new(values)));
            }
        }
        Err(Error::Parse {
            line: 0,
            message: "no precision_raw= line found".into(),
        })
    }
}

/// A retrieval task for precision training: latent queries with known
/// target patterns. `corrupted_dims` records which latent dimensions the
/// task corrupted; it is reporting metadata only.
#[derive(Debug, Clone)]
pub struct PrecisionTask {
    pub memory: MemoryMatrix,
    pub examples: Vec<(Vector, usize)>,
    pub corrupted_dims: Vec<usize>,
}

impl PrecisionTask {
    pub fn validate(&self) -> Result<()> {
        if self.examples.is_empty() {
            return Err(Error::InvalidParameter("task has no examples".into()));
        }
        let n = self.memory.len();
        for (i, (q, target)) in self.examples.iter().enumerate() {
            if q.dim() != self.memory.dim() {
                return Err(Error::ShapeMismatch {
                    op: "precision_task",
                    left: format!("example {i} [{}]", q.dim()),
                    right: format!("memory dim [{}]", self.memory.dim()),
                });
            }
            if *target >= n {
                return Err(Error::InvalidParameter(format!(
                    "example {i} targets pattern {target}, memory holds {n}"
                )));
            }
        }
        Ok(())
    }
}

/// Build the synthetic subspace-corruption task: each stored pattern yields
/// `examples_per_pattern` queries equal to the pattern plus Gaussian noise of
/// scale `noise_std` on the dimensions in `dims` only.
pub fn subspace_noise_task(
    memory: &MemoryMatrix,
    dims: &[usize],
    noise_std: f64,
    examples_per_pattern: usize,
    rng: &mut RngStream,
) -> Result<PrecisionTask> {
    let d = memory.dim();
    if dims.iter().any(|&j| j >= d) {
        return Err(Error::InvalidParameter(format!(
            "corrupted dimension out of range for d={d}"
        )));
    }
    let mut examples = Vec::with_capacity(memory.len() * examples_per_pattern);
    for k in 0..memory.len() {
        let pattern = memory.pattern(k)?;
        for _ in 0..examples_per_pattern {
            let mut q = pattern.clone();
            for &j in dims {
                q[j] += noise_std * rng.normal();
            }
            examples.push((q, k));
        }
    }
    Ok(PrecisionTask {
        memory: memory.clone(),
        examples,
        corrupted_dims: dims.to_vec(),
    })
}

/// Forward pass of the unrolled readout for one example, keeping what the
/// backward pass needs.
struct Unrolled {
    /// z_0 .. z_T
    latents: Vec<Vector>,
    /// softmax weights used at each of the T transitions
    weights: Vec<Vector>,
}

fn unroll(
    values: &Vector,
    memory: &MemoryMatrix,
    query: &Vector,
    iters: usize,
) -> Result<Unrolled> {
    let mat = memory.matrix()?;
    let n = mat.cols();
    let d = mat.rows();
    let mut latents = Vec::with_capacity(iters + 1);
    let mut weights = Vec::with_capacity(iters);
    latents.push(query.clone());
    for _ in 0..iters {
        let z = latents.last().expect("non-empty");
        let mut scores = Vector::zeros(n);
        for j in 0..d {
            let row = mat.row(j);
            let (zj, pj) = (z[j], values[j]);
            for (s, a) in scores.iter_mut().zip(row.iter()) {
                let diff = zj - a;
                *s += -0.5 * pj * diff * diff;
            }
        }
        let w = softmax(&scores)?;
        latents.push(mat.matvec(&w)?);
        weights.push(w);
    }
    Ok(Unrolled { latents, weights })
}

/// Mean over examples of `||z_final - M_target||^2`, where `z_final` results
/// from `iters` Mahalanobis-attention readouts starting at the query latent.
pub fn precision_loss(
    params: &PrecisionParams,
    task: &PrecisionTask,
    iters: usize,
) -> Result<f64> {
    Ok(precision_loss_grad(params, task, iters)?.0)
}

/// Loss and its gradient w.r.t. the raw (unconstrained) parameters,
/// backpropagated through the unrolled readouts.
pub fn precision_loss_grad(
    params: &PrecisionParams,
    task: &PrecisionTask,
    iters: usize,
) -> Result<(f64, Vector)> {
    if iters == 0 {
        return Err(Error::InvalidParameter(
            "iters_per_example must be at least 1".into(),
        ));
    }
    task.validate()?;
    if params.dim() != task.memory.dim() {
        return Err(Error::ShapeMismatch {
            op: "precision_loss",
            left: format!("params [{}]", params.dim()),
            right: format!("memory dim [{}]", task.memory.dim()),
        });
    }
    let values = params.values();
    let mat = task.memory.matrix()?;
    let d = mat.rows();
    let n = mat.cols();
    let count = task.examples.len() as f64;

    let mut loss = 0.0;
    let mut grad_p = Vector::zeros(d);
    for (query, target) in &task.examples {
        let pass = unroll(&values, &task.memory, query, iters)?;
        let z_final = pass.latents.last().expect("non-empty");
        let target_col = mat.column(*target);
        let resid = z_final.sub(&target_col)?;
        loss += resid.dot(&resid)? / count;

        // dL/dz_T for this example (mean already folded in)
        let mut g = resid.scale(2.0 / count);
        for t in (0..iters).rev() {
            let z = &pass.latents[t];
            let z_next = &pass.latents[t + 1];
            let w = &pass.weights[t];
            // dL/da_k = w_k * sum_i g_i (M_ik - z_next_i)
            let mut da = Vector::zeros(n);
            for j in 0..d {
                let row = mat.row(j);
                let gj = g[j];
                let znj = z_next[j];
                for (a, m) in da.iter_mut().zip(row.iter()) {
                    *a += gj * (m - znj);
                }
            }
            for k in 0..n {
                da[k] *= w[k];
            }
            // a_k = -1/2 sum_j P_j (z_j - M_jk)^2
            let mut g_prev = Vector::zeros(d);
            for j in 0..d {
                let row = mat.row(j);
                let (zj, pj) = (z[j], values[j]);
                let mut acc_p = 0.0;
                let mut acc_z = 0.0;
                for (dak, m) in da.iter().zip(row.iter()) {
                    let diff = zj - m;
                    acc_p += dak * (-0.5) * diff * diff;
                    acc_z += dak * (-pj) * diff;
                }
                grad_p[j] += acc_p;
                g_prev[j] = acc_z;
            }
            g = g_prev;
        }
    }
    // Through the exp parameterization; flat below the floor.
    let grad_raw = Vector::from_fn(d, |j| {
        if params.raw[j].exp() > PRECISION_FLOOR {
            grad_p[j] * values[j]
        } else {
            0.0
        }
    });
    Ok((loss, grad_raw))
}

/// Full-batch gradient descent on [`precision_loss`] with a fixed number of
/// unrolled readout iterations per example. Returns the trained parameters
/// and the per-epoch loss trace.
pub fn train_precision(
    task: &PrecisionTask,
    init: &PrecisionParams,
    epochs: usize,
    learning_rate: f64,
    iters_per_example: usize,
) -> Result<(PrecisionParams, Vec<f64>)> {
    task.validate()?;
    let mut params = init.clone();
    let mut trace = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let (loss, grad) = precision_loss_grad(&params, task, iters_per_example)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "precision loss diverged at epoch {epoch}"
            )));
        }
        trace.push(loss);
        let raw = Vector::from_fn(params.dim(), |j| params.raw[j] - learning_rate * grad[j]);
        params = PrecisionParams::from_raw(raw);
    }
    Ok((params, trace))
}

/// Fraction of task examples whose final latent lands within `tau` of the
/// target pattern after `iters` readouts.
pub fn task_success_rate(
    params: &PrecisionParams,
    task: &PrecisionTask,
    iters: usize,
    tau: f64,
) -> Result<f64> {
    task.validate()?;
    let values = params.values();
    let mat = task.memory.matrix()?;
    let mut hits = 0usize;
    for (query, target) in &task.examples {
        let pass = unroll(&values, &task.memory, query, iters)?;
        let z_final = pass.latents.last().expect("non-empty");
        let dist = z_final.sub(&mat.column(*target))?.norm();
        if dist < tau {
            hits += 1;
        }
    }
    Ok(hits as f64 / task.examples.len() as f64)
}

/// Nearest neighbor restricted to the dimensions outside `masked`: the
/// oracle for subspace-corruption tasks.
pub fn masked_nearest_success_rate(task: &PrecisionTask) -> Result<f64> {
    task.validate()?;
    let mat = task.memory.matrix()?;
    let d = mat.rows();
    let keep: Vec<usize> = (0..d)
        .filter(|j| !task.corrupted_dims.contains(j))
        .collect();
    let mut hits = 0usize;
    for (query, target) in &task.examples {
        let mut best = 0usize;
        let mut best_dist = f64::INFINITY;
        for k in 0..mat.cols() {
            let mut acc = 0.0;
            for &j in &keep {
                let diff = query[j] - mat.get(j, k);
                acc += diff * diff;
            }
            if acc < best_dist {
                best_dist = acc;
                best = k;
            }
        }
        if best == *target {
            hits += 1;
        }
    }
    Ok(hits as f64 / task.examples.len() as f64)
}
