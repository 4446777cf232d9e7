//! Predictive-coding retrieval: per-level estimates and prediction-error
//! populations jointly relax on the free energy
//! `sum_l 1/2 ||h_l - f^l(h_{l+1})||^2 - log p(z; M)`.
//!
//! Levels follow the generative orientation: level 0 is the clamped
//! observation, level L the latent. Each sweep recomputes every prediction
//! error, nudges the intermediate estimates by the balance of bottom-up and
//! top-down signals, and moves the latent by its bottom-up signal plus the
//! mixture-prior pull.

use crate::error::{Error, Result};
use crate::memory::{log_prior_balanced, MemoryMatrix};
use crate::model::{LayerStack, VaeModel};
use crate::numerics::Vector;

use super::steps::gmm_step;
use super::{initial_latent, InitMode, RetrievalConfig, RetrievalResult};

/// Estimates and prediction errors of the network during inference.
#[derive(Debug, Clone, PartialEq)]
pub struct PcState {
    /// `estimates[l]` is the level-l posterior mean; `estimates[0]` is the
    /// clamped observation and is never updated, `estimates[L]` is the latent.
    estimates: Vec<Vector>,
    /// `errors[l]` is `h_l - f^l(h_{l+1})` for `l` in `0..L`, as of the last
    /// sweep.
    errors: Vec<Vector>,
}

impl PcState {
    /// Standard initialization: latent from `z`, intermediate levels from the
    /// pure forward cascade (so every error except the observation-level one
    /// starts at zero), observation clamped to `x`.
    pub fn init_cascade(stack: &LayerStack, x: &Vector, z: &Vector) -> Result<Self> {
        if x.dim() != stack.output_dim() {
            return Err(Error::ShapeMismatch {
                op: "pc::init_cascade",
                left: format!("observation [{}]", x.dim()),
                right: format!("stack output [{}]", stack.output_dim()),
            });
        }
        if z.dim() != stack.input_dim() {
            return Err(Error::ShapeMismatch {
                op: "pc::init_cascade",
                left: format!("latent [{}]", z.dim()),
                right: format!("stack input [{}]", stack.input_dim()),
            });
        }
        let depth = stack.depth();
        let trace = stack.decode(z)?;
        let mut estimates = Vec::with_capacity(depth + 1);
        estimates.push(x.clone());
        for l in 1..depth {
            estimates.push(trace.level_value(l).clone());
        }
        estimates.push(z.clone());
        let errors = compute_errors(&estimates, stack)?;
        Ok(PcState { estimates, errors })
    }

    pub fn depth(&self) -> usize {
        self.estimates.len() - 1
    }

    pub fn latent(&self) -> &Vector {
        self.estimates.last().expect("non-empty")
    }

    pub fn observation(&self) -> &Vector {
        &self.estimates[0]
    }

    pub fn estimate(&self, level: usize) -> &Vector {
        &self.estimates[level]
    }

    pub fn error(&self, level: usize) -> &Vector {
        &self.errors[level]
    }

    pub fn errors(&self) -> &[Vector] {
        &self.errors
    }

    /// Free energy of the current estimates (errors recomputed, additive
    /// constant dropped): `sum_l 1/2 ||eps_l||^2 - log p(z; M)`.
    pub fn vfe(&self, stack: &LayerStack, memory: &MemoryMatrix, sigma: f64) -> Result<f64> {
        let errors = compute_errors(&self.estimates, stack)?;
        let error_term: f64 = errors.iter().map(|e| 0.5 * e.dot(e).unwrap()).sum();
        Ok(error_term - log_prior_balanced(self.latent(), memory, sigma)?)
    }
}

fn compute_errors(estimates: &[Vector], stack: &LayerStack) -> Result<Vec<Vector>> {
    let depth = estimates.len() - 1;
    (0..depth)
        .map(|l| {
            let pred = stack.level(l).forward(&estimates[l + 1])?;
            estimates[l].sub(&pred)
        })
        .collect()
}

/// One full inference iteration with predictions recomputed from the current
/// estimates. All updates read the pre-sweep state.
pub fn pc_sweep(
    state: &PcState,
    stack: &LayerStack,
    memory: &MemoryMatrix,
    sigma: f64,
    alpha: f64,
) -> Result<PcState> {
    let depth = state.depth();
    let errors = compute_errors(&state.estimates, stack)?;
    let mut next = state.estimates.clone();
    for l in 1..depth {
        let bottom_up = stack.level(l - 1).vjp(&state.estimates[l], &errors[l - 1])?;
        next[l] = Vector::from_fn(state.estimates[l].dim(), |i| {
            state.estimates[l][i] + alpha * (bottom_up[i] - errors[l][i])
        });
    }
    let z = state.latent();
    let bottom_up = stack.level(depth - 1).vjp(z, &errors[depth - 1])?;
    let readout = gmm_step(z, memory, sigma)?;
    let rate = alpha / (sigma * sigma);
    next[depth] = Vector::from_fn(z.dim(), |i| {
        z[i] + alpha * bottom_up[i] + rate * (readout[i] - z[i])
    });
    Ok(PcState {
        estimates: next,
        errors,
    })
}

/// One latent update under the fixed-prediction assumption: predictions and
/// Jacobians freeze at the sweep start, the error populations settle to
/// their equilibrium `eps_l = J_{l-1}' eps_{l-1}` under those frozen
/// predictions, and the latent then moves by its bottom-up signal plus the
/// prior pull. At the equilibrium errors the intermediate estimates are
/// already stationary, so only the latent changes. With `alpha` equal to the
/// prior weight of the descent loss this reproduces the backprop gradient
/// step exactly.
pub fn pc_fixed_prediction_step(
    state: &PcState,
    stack: &LayerStack,
    memory: &MemoryMatrix,
    sigma: f64,
    alpha: f64,
) -> Result<PcState> {
    let depth = state.depth();
    let mut errors = Vec::with_capacity(depth);
    let pred0 = stack.level(0).forward(&state.estimates[1])?;
    errors.push(state.estimates[0].sub(&pred0)?);
    for l in 1..depth {
        let eq = stack.level(l - 1).vjp(&state.estimates[l], &errors[l - 1])?;
        errors.push(eq);
    }
    let z = state.latent();
    let bottom_up = stack.level(depth - 1).vjp(z, &errors[depth - 1])?;
    let readout = gmm_step(z, memory, sigma)?;
    let rate = alpha / (sigma * sigma);
    let new_z = Vector::from_fn(z.dim(), |i| {
        z[i] + alpha * bottom_up[i] + rate * (readout[i] - z[i])
    });
    let mut estimates = state.estimates.clone();
    *estimates.last_mut().expect("non-empty") = new_z;
    Ok(PcState { estimates, errors })
}

/// Full predictive-coding retrieval over the generative stack.
///
/// The latent initializes per `config.init` (encoder initialization needs
/// `vae`), intermediate levels from the forward cascade. Each iteration is
/// one [`pc_sweep`]; the free energy is logged at every visited state and
/// iteration stops when the latent moves less than `tol` in max norm.
pub fn pc_gmm_retrieve(
    x: &Vector,
    vae: Option<&VaeModel>,
    stack: &LayerStack,
    memory: &MemoryMatrix,
    sigma: f64,
    config: &RetrievalConfig,
) -> Result<RetrievalResult> {
    if sigma <= 0.0 || sigma.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if stack.input_dim() != memory.dim() {
        return Err(Error::Config(format!(
            "stack latent dimension {} does not match memory dimension {}",
            stack.input_dim(),
            memory.dim()
        )));
    }
    memory.matrix()?;
    let init = match &config.init {
        InitMode::QueryAsZ if x.dim() != memory.dim() => {
            return Err(Error::Config(
                "pc_gmm with query-as-latent initialization needs a latent-space query; \
                 use encoder initialization for observations"
                    .into(),
            ))
        }
        other => other.clone(),
    };
    let z0 = initial_latent(x, vae, memory, &init)?;
    let mut state = PcState::init_cascade(stack, x, &z0)?;

    let mut energies = Vec::new();
    let mut trajectory = Vec::new();
    if config.log_trajectory {
        trajectory.push(state.latent().clone());
    }
    let mut iterations_used = 0;
    for step in 0..config.max_iters {
        if config.log_energies {
            let f = state.vfe(stack, memory, sigma)?;
            if !f.is_finite() {
                return Err(Error::NonFinite(format!(
                    "free energy diverged at step {step}"
                )));
            }
            energies.push(f);
        }
        let next = pc_sweep(&state, stack, memory, sigma, config.step_size)?;
        let delta = next.latent().sub(state.latent())?.norm_inf();
        state = next;
        iterations_used += 1;
        if config.log_trajectory {
            trajectory.push(state.latent().clone());
        }
        if delta < config.tol {
            break;
        }
    }
    if config.log_energies {
        energies.push(state.vfe(stack, memory, sigma)?);
    }
    let (matched_index, matched_distance) = memory.nearest(state.latent())?;
    Ok(RetrievalResult {
        z_final: state.latent().clone(),
        trajectory: super::thin_trajectory(trajectory),
        energies,
        iterations_used,
        matched_index,
        matched_distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::grad_log_prior_balanced;
    use crate::model::{Activation, Layer, LayerStack};
    use crate::numerics::{Matrix, RngStream};

    fn identity_stack(dim: usize) -> LayerStack {
        LayerStack::new(vec![Layer::new(
            Matrix::identity(dim),
            Vector::zeros(dim),
            Activation::Identity,
        )
        .unwrap()])
        .unwrap()
    }

    fn random_linear_stack(dims: &[usize], seed: u64) -> LayerStack {
        let mut rng = RngStream::new(seed);
        let layers = dims
            .windows(2)
            .map(|w| {
                let m = Matrix::from_fn(w[1], w[0], |_, _| rng.normal() * 0.3);
                Layer::new(m, Vector::zeros(w[1]), Activation::Identity).unwrap()
            })
            .collect();
        LayerStack::new(layers).unwrap()
    }

    fn random_nonlinear_stack(dims: &[usize], seed: u64) -> LayerStack {
        let mut rng = RngStream::new(seed);
        let acts: Vec<Activation> = (0..dims.len() - 1)
            .map(|i| {
                if i + 2 == dims.len() {
                    Activation::Identity
                } else {
                    Activation::Tanh
                }
            })
            .collect();
        LayerStack::random(dims, &acts, &mut rng).unwrap()
    }

    #[test]
    fn single_identity_layer_reaches_the_closed_form() {
        // With one identity layer and a single stored pattern the stationary
        // latent solves z - x = (M_1 - z)/sigma^2, i.e.
        // z = (sigma^2 x + M_1) / (sigma^2 + 1).
        let dim = 4;
        let stack = identity_stack(dim);
        let mut rng = RngStream::new(40);
        let m1 = rng.normal_vector(dim);
        let mem = MemoryMatrix::from_patterns(std::slice::from_ref(&m1)).unwrap();
        let x = rng.normal_vector(dim);
        let sigma = 0.8;
        let config = RetrievalConfig {
            step_size: 0.1,
            max_iters: 20_000,
            tol: 1e-13,
            init: InitMode::Explicit(rng.normal_vector(dim)),
            log_energies: false,
            ..RetrievalConfig::default()
        };
        let result = pc_gmm_retrieve(&x, None, &stack, &mem, sigma, &config).unwrap();
        let s2 = sigma * sigma;
        let expected = Vector::from_fn(dim, |i| (s2 * x[i] + m1[i]) / (s2 + 1.0));
        assert!(
            result.z_final.sub(&expected).unwrap().norm() < 1e-8,
            "distance {}",
            result.z_final.sub(&expected).unwrap().norm()
        );
    }

    #[test]
    fn consistent_state_at_stored_pattern_is_a_fixed_point() {
        let stack = random_nonlinear_stack(&[3, 6, 5], 41);
        let mut rng = RngStream::new(42);
        // isolated patterns: prior readout at a pattern stays put
        let patterns: Vec<Vector> = (0..3)
            .map(|k| {
                let mut v = rng.normal_vector(3);
                v[0] += k as f64 * 10.0;
                v
            })
            .collect();
        let mem = MemoryMatrix::from_patterns(&patterns).unwrap();
        let sigma = 0.3;
        assert!(mem.min_pairwise_distance().unwrap() > 12.0 * sigma);
        let z = mem.pattern(1).unwrap();
        let x = stack.forward(&z).unwrap(); // all prediction errors vanish
        let state = PcState::init_cascade(&stack, &x, &z).unwrap();
        let next = pc_sweep(&state, &stack, &mem, sigma, 0.1).unwrap();
        for l in 0..=state.depth() {
            let moved = next.estimate(l).sub(state.estimate(l)).unwrap().norm();
            assert!(moved < 1e-10, "level {l} moved {moved}");
        }
    }

    #[test]
    fn equilibrium_errors_satisfy_the_recurrence() {
        // Two-layer linear stacks relaxed to stillness: the intermediate
        // error must equal the transported observation error.
        for trial in 0..5 {
            let stack = random_linear_stack(&[3, 4, 5], 50 + trial);
            let mut rng = RngStream::new(60 + trial);
            let m1 = rng.normal_vector(3);
            let mem = MemoryMatrix::from_patterns(std::slice::from_ref(&m1)).unwrap();
            let sigma = 0.7;
            let x = rng.normal_vector(5);
            let z0 = rng.normal_vector(3);
            let mut state = PcState::init_cascade(&stack, &x, &z0).unwrap();
            let alpha = 0.1;
            for _ in 0..200_000 {
                let next = pc_sweep(&state, &stack, &mem, sigma, alpha).unwrap();
                let mut max_update = 0.0_f64;
                for l in 1..=state.depth() {
                    max_update = max_update
                        .max(next.estimate(l).sub(state.estimate(l)).unwrap().norm_inf());
                }
                state = next;
                if max_update < 1e-8 {
                    break;
                }
            }
            let errors = compute_errors(&state.estimates, &stack).unwrap();
            let transported = stack.level(0).vjp(state.estimate(1), &errors[0]).unwrap();
            let residual = errors[1].sub(&transported).unwrap().norm();
            assert!(residual < 1e-6, "trial {trial}: residual {residual}");
        }
    }

    #[test]
    fn fixed_prediction_step_matches_backprop_gradient_step() {
        // gamma = alpha = 2: one fixed-prediction latent update equals the
        // unit-rate gradient step on ||f(z)-x||^2 - gamma log p(z; M).
        let mut rng = RngStream::new(70);
        for trial in 0..20 {
            let dims: &[usize] = if trial % 2 == 0 {
                &[3, 5, 4]
            } else {
                &[2, 6, 5, 4]
            };
            let stack = random_nonlinear_stack(dims, 80 + trial);
            let n = 1 + (trial % 4) as usize;
            let patterns: Vec<Vector> = (0..n).map(|_| rng.normal_vector(dims[0])).collect();
            let mem = MemoryMatrix::from_patterns(&patterns).unwrap();
            let sigma = 0.4 + rng.next_f64();
            let x = rng.normal_vector(*dims.last().unwrap());
            let z = rng.normal_vector(dims[0]);

            let state = PcState::init_cascade(&stack, &x, &z).unwrap();
            let stepped = pc_fixed_prediction_step(&state, &stack, &mem, sigma, 2.0).unwrap();

            let gamma = 2.0;
            let resid = stack.forward(&z).unwrap().sub(&x).unwrap();
            let recon_grad = stack.vjp(&z, &resid).unwrap();
            let prior_grad = grad_log_prior_balanced(&z, &mem, sigma).unwrap();
            let bp_next = Vector::from_fn(z.dim(), |i| {
                z[i] - (2.0 * recon_grad[i] - gamma * prior_grad[i])
            });
            let gap = stepped.latent().sub(&bp_next).unwrap().norm_inf();
            assert!(gap < 1e-10, "trial {trial}: gap {gap}");
        }
    }

    #[test]
    fn fixed_prediction_single_layer_equals_ordinary_sweep() {
        let stack = random_nonlinear_stack(&[3, 5], 90);
        let mut rng = RngStream::new(91);
        let mem = MemoryMatrix::from_patterns(&[rng.normal_vector(3), rng.normal_vector(3)])
            .unwrap();
        let x = rng.normal_vector(5);
        let z = rng.normal_vector(3);
        let state = PcState::init_cascade(&stack, &x, &z).unwrap();
        let a = pc_fixed_prediction_step(&state, &stack, &mem, 0.6, 0.3).unwrap();
        let b = pc_sweep(&state, &stack, &mem, 0.6, 0.3).unwrap();
        assert_eq!(a.latent(), b.latent());
    }

    #[test]
    fn zero_errors_and_settled_prior_do_not_move() {
        let stack = random_nonlinear_stack(&[3, 6, 4], 92);
        let mut rng = RngStream::new(93);
        let m1 = rng.normal_vector(3);
        let mem = MemoryMatrix::from_patterns(std::slice::from_ref(&m1)).unwrap();
        let x = stack.forward(&m1).unwrap();
        let state = PcState::init_cascade(&stack, &x, &m1).unwrap();
        let next = pc_fixed_prediction_step(&state, &stack, &mem, 0.5, 2.0).unwrap();
        assert!(next.latent().sub(state.latent()).unwrap().norm() < 1e-12);
        for e in next.errors() {
            assert!(e.norm() < 1e-12);
        }
    }

    #[test]
    fn vfe_decreases_along_the_sweeps() {
        let stack = random_linear_stack(&[3, 5, 6], 94);
        let mut rng = RngStream::new(95);
        let m1 = rng.normal_vector(3);
        let mem = MemoryMatrix::from_patterns(std::slice::from_ref(&m1)).unwrap();
        let x = rng.normal_vector(6);
        let config = RetrievalConfig {
            step_size: 0.05,
            max_iters: 300,
            init: InitMode::Explicit(rng.normal_vector(3)),
            ..RetrievalConfig::default()
        };
        let result = pc_gmm_retrieve(&x, None, &stack, &mem, 0.8, &config).unwrap();
        assert_eq!(result.energies.len(), result.iterations_used + 1);
        let first = result.energies.first().unwrap();
        let last = result.energies.last().unwrap();
        assert!(last < first, "VFE did not decrease: {first} -> {last}");
    }
}
