use crate::error::{Error, Result};
use crate::linalg::{devectorize, vectorize, CMat, CVec, C64};
use crate::liouville::{BohrDecomposition, ProjectorPair};
use crate::model::ModelSpec;

use super::propagate::DenseOps;
use super::{
    check_dense, check_increasing, check_state, guard_scaled_time, require_coupling,
    require_step, FreeFrame, Trajectory,
};

#[derive(Clone, Copy, Debug)]
pub struct NzOptions {
    /// Keep the inhomogeneous initial-correlation term.
    pub include_correlation: bool,
    /// Largest tolerated drift of `tr rho_I`.
    pub trace_tol: f64,
}

impl Default for NzOptions {
    fn default() -> Self {
        Self { include_correlation: true, trace_tol: 1e-4 }
    }
}

/// Integrates the exact projected equation for `rho_I(tau) = e^{-L_S t} P rho(t)`, `t = tau / lambda^2`.
///
/// Works in unscaled time with `z(t) = tr_B rho_I`:
/// `z'(t) = e^{-L_S t} [ int_0^t G(t - s) e^{L_S s} z(s) ds + lambda tr_B L_SB e^{L_0' t} Q rho0 ]`,
/// `G(s) = lambda^2 tr_B L_SB e^{L_0' s} L_SB (. (x) Omega_B)`. The memory integral uses
/// fourth-order Gregory weights, the outer equation Adams-Moulton 4 with exact Bohr phases.
#[allow(clippy::too_many_arguments)]
pub fn solve_nz(
    pair: &ProjectorPair,
    spec: &ModelSpec,
    bohr: &BohrDecomposition,
    rho0: &CMat,
    tau_grid: &[f64],
    lambda: f64,
    dt: f64,
    options: NzOptions,
) -> Result<Trajectory> {
    require_coupling(lambda)?;
    require_step(dt)?;
    check_state(spec, rho0)?;
    check_increasing(tau_grid)?;
    check_dense(spec, "projected master equation solver")?;
    if tau_grid.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::Validation("scaled times must be >= 0".into()));
    }
    let spec_l = spec.with_lambda(lambda);
    let frame = FreeFrame::new(&spec_l, pair, bohr);
    super::require_centered(&frame, lambda)?;

    let mut grid_steps = Vec::with_capacity(tau_grid.len());
    for &tau in tau_grid {
        let t = guard_scaled_time(spec, tau, lambda)?;
        let k = (t / dt).round();
        if (k * dt - t).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::Validation(format!(
                "tau = {tau} maps to t = {t}, which is not a multiple of dt = {dt}"
            )));
        }
        grid_steps.push(k as usize);
    }
    let n_max = grid_steps.last().copied().unwrap_or(0);

    let ops = DenseOps::new(pair, &spec_l)?;
    let step = ops.l0_prime(lambda).exp(dt);
    let lsb = ops.lsb.matrix();
    let reduce_lsb = &ops.reduce * lsb;

    // G_k = lambda^2 tr_B L_SB M^k L_SB lift, M = e^{L_0' dt}
    let mut kernel = Vec::with_capacity(n_max + 1);
    let mut v = lsb * &ops.lift;
    for _ in 0..=n_max {
        kernel.push(&reduce_lsb * &v * C64::new(lambda * lambda, 0.0));
        v = step.matrix() * v;
    }

    // b_k = lambda tr_B L_SB e^{L_0' t_k} Q rho0
    let n = spec.dim_s;
    let mut source = vec![CVec::zeros(n * n); n_max + 1];
    let q0 = pair.q(rho0);
    if options.include_correlation && !super::is_uncorrelated(&q0, rho0) {
        let mut y = vectorize(&q0);
        for b in source.iter_mut() {
            *b = &reduce_lsb * &y * C64::new(lambda, 0.0);
            y = step.matrix() * y;
        }
    }

    let rotate = |x: &CVec, t: f64| -> CVec {
        let m = devectorize(x).expect("square");
        vectorize(&bohr.evolve(&m, t))
    };

    let z0 = vectorize(&pair.reduce(rho0));
    let tr0 = trace_vec(&z0, n);
    let mut z: Vec<CVec> = Vec::with_capacity(n_max + 1);
    let mut p: Vec<CVec> = Vec::with_capacity(n_max + 1);
    let mut f: Vec<CVec> = Vec::with_capacity(n_max + 1);
    z.push(z0.clone());
    p.push(z0.clone());
    f.push(rotate(&source[0], 0.0));

    for step_n in 1..=n_max {
        let t = step_n as f64 * dt;
        let w = gregory_weights(step_n);
        let mut history = CVec::zeros(n * n);
        for (j, pj) in p.iter().enumerate() {
            history += &kernel[step_n - j] * pj * C64::new(w[j] * dt, 0.0);
        }
        history += &source[step_n];
        let implicit = &kernel[0] * C64::new(w[step_n] * dt, 0.0);
        let (beta0, explicit) = adams_moulton(&f, step_n, dt);
        let base = &z[step_n - 1] + explicit;

        let mut zn = z[step_n - 1].clone();
        let mut fn_ = CVec::zeros(n * n);
        for _ in 0..50 {
            let pn = rotate(&zn, t);
            fn_ = rotate(&(&history + &implicit * &pn), -t);
            let next = &base + &fn_ * C64::new(beta0 * dt, 0.0);
            let change = (&next - &zn).norm();
            zn = next;
            if change <= 1e-15 * zn.norm().max(1.0) {
                break;
            }
        }
        let drift = (trace_vec(&zn, n) - tr0).norm();
        if !drift.is_finite() || drift > options.trace_tol {
            return Err(Error::Integration(format!(
                "trace drift {drift:.3e} at t = {t}; reduce dt (currently {dt})"
            )));
        }
        p.push(rotate(&zn, t));
        f.push(fn_);
        z.push(zn);
    }

    let states = grid_steps
        .iter()
        .map(|&k| pair.lift(&devectorize(&z[k]).expect("square")))
        .collect();
    Trajectory::new(tau_grid.to_vec(), states)
}

fn trace_vec(x: &CVec, n: usize) -> C64 {
    (0..n).map(|i| x[i + i * n]).sum()
}

/// Weights `w_j` with `int_0^{n h} g = h sum_j w_j g(j h) + O(h^5)` (trapezoid for `n = 1`).
pub(crate) fn gregory_weights(n: usize) -> Vec<f64> {
    match n {
        0 => vec![0.0],
        1 => vec![0.5, 0.5],
        2 => vec![1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0],
        3 => vec![0.375, 1.125, 1.125, 0.375],
        4 => vec![1.0 / 3.0, 4.0 / 3.0, 2.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0],
        _ => {
            let mut w = vec![1.0; n + 1];
            let ends = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
            for (k, e) in ends.iter().enumerate() {
                w[k] = *e;
                w[n - k] = *e;
            }
            w
        }
    }
}

/// Implicit coefficient and explicit part of the Adams-Moulton step into `step_n`
/// (orders 2, 3, then 4).
fn adams_moulton(f: &[CVec], step_n: usize, dt: f64) -> (f64, CVec) {
    let k = step_n - 1;
    let s = |c: f64| C64::new(c * dt, 0.0);
    match step_n {
        1 => (0.5, &f[k] * s(0.5)),
        2 => (5.0 / 12.0, &f[k] * s(8.0 / 12.0) - &f[k - 1] * s(1.0 / 12.0)),
        _ => (
            9.0 / 24.0,
            &f[k] * s(19.0 / 24.0) - &f[k - 1] * s(5.0 / 24.0) + &f[k - 2] * s(1.0 / 24.0),
        ),
    }
}
