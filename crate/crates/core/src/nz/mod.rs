//! Exact and projected dynamics: Liouville propagation, `e^{L_0' t}`, the key operator
//! `R_m`, memory kernels, the initial-correlation term, the exact projected master
//! equation, the weak-coupling generator and the recurrence identity.

mod frame;
mod generator;
mod key;
mod propagate;
mod recurrence;
mod solver;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{hs_norm, spectral_norm, trace, CMat};
use crate::model::ModelSpec;

pub use frame::FreeFrame;
pub use generator::{
    markov_propagate, vanhove_generator, vanhove_generator_time_integral, MarkovGenerator,
};
pub use key::{
    apply_r_operators, correlation_series, correlation_term, memory_kernel, r_operator,
    RApplication,
};
pub use propagate::{
    contractive_identity, dense_l0_prime, interaction_picture_exact, propagate_exact,
    propagate_q_projected, propagate_q_projected_dense,
};
pub use recurrence::{verify_recurrence, RecurrenceReport};
pub use solver::{solve_nz, NzOptions};

/// Largest composite dimension for which `D^2 x D^2` superoperators are exponentiated.
pub const MAX_EXPM_DIM: usize = 16;

/// Ordered time points with the state at each.
#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    #[serde(with = "crate::codec::matrix_list")]
    pub states: Vec<CMat>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<CMat>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::Shape(format!(
                "{} times but {} states",
                times.len(),
                states.len()
            )));
        }
        check_increasing(&times)?;
        for (t, s) in times.iter().zip(&states) {
            let tr = trace(s);
            if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
                return Err(Error::Integration(format!("trace {tr} at t = {t}")));
            }
        }
        Ok(Self { times, states })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Finite, strictly increasing time grid.
pub fn check_time_grid(times: &[f64]) -> Result<()> {
    check_increasing(times)
}

pub(crate) fn check_increasing(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::Validation("time grid contains non-finite values".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation("time grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Step size `0.05 / ||H||` for the total Hamiltonian at coupling `lambda`.
pub fn default_dt(spec: &ModelSpec, lambda: f64) -> f64 {
    let h = spec.with_lambda(lambda).total_hamiltonian();
    0.05 / spectral_norm(&h).max(1e-12)
}

pub(crate) fn require_coupling(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Precondition(format!("coupling must be positive, got {lambda}")));
    }
    Ok(())
}

pub(crate) fn require_step(dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Validation(format!("step size must be positive, got {dt}")));
    }
    Ok(())
}

/// Guard `tau / lambda^2` against the model's bath window.
pub(crate) fn guard_scaled_time(spec: &ModelSpec, tau: f64, lambda: f64) -> Result<f64> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::Validation(format!("scaled time must be >= 0, got {tau}")));
    }
    let t = tau / (lambda * lambda);
    spec.check_window(t, || format!(" (tau = {tau}, lambda = {lambda})"))?;
    Ok(t)
}

pub(crate) fn check_dense(spec: &ModelSpec, context: &'static str) -> Result<()> {
    let d = spec.dim();
    if d > MAX_EXPM_DIM {
        return Err(Error::DimensionLimit { dim: d, limit: MAX_EXPM_DIM, context });
    }
    Ok(())
}

pub(crate) fn check_state(spec: &ModelSpec, rho0: &CMat) -> Result<()> {
    let d = spec.dim();
    if rho0.nrows() != d || rho0.ncols() != d {
        return Err(Error::Dimension(format!(
            "state is {}x{}, model dimension is {d}",
            rho0.nrows(),
            rho0.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn require_centered(frame: &FreeFrame, lambda: f64) -> Result<()> {
    let defect = lambda * frame.centering_defect();
    if defect > 1e-9 {
        return Err(Error::Precondition(format!(
            "interaction is not centered: ||P L_SB P|| = {defect:.3e}; apply center_interaction"
        )));
    }
    Ok(())
}

/// `Q rho0` below rounding level, treated as an exact product with the reference.
pub(crate) fn is_uncorrelated(q_rho0: &CMat, rho0: &CMat) -> bool {
    hs_norm(q_rho0) <= 1e-13 * hs_norm(rho0).max(1.0)
}
