use crate::error::{Error, Result};
use crate::linalg::{gauss_legendre, CMat, Superop, C64};
use crate::liouville::{BohrDecomposition, ProjectorPair};
use crate::model::ModelSpec;

use super::propagate::{DenseOps, InteractionStepper};
use super::{check_dense, check_increasing, check_state, guard_scaled_time, require_coupling};
use super::FreeFrame;

/// `R_m(tau) = int_0^{tau/lambda^2} Q e^{(L_0' + i omega_m) t} dt`, integrated exactly
/// through an augmented exponential (small models).
pub fn r_operator(
    pair: &ProjectorPair,
    spec: &ModelSpec,
    bohr: &BohrDecomposition,
    m: usize,
    tau: f64,
    lambda: f64,
) -> Result<Superop> {
    require_coupling(lambda)?;
    check_bohr_index(bohr, m)?;
    let t = guard_scaled_time(spec, tau, lambda)?;
    check_dense(spec, "dense R operator")?;
    let ops = DenseOps::new(pair, spec)?;
    Ok(r_dense(&ops, lambda, bohr.entries[m].omega, t))
}

pub(crate) fn r_dense(ops: &DenseOps, lambda: f64, omega: f64, t: f64) -> Superop {
    if t == 0.0 {
        return Superop::zero(ops.l0.dim());
    }
    let gen = ops.l0_prime(lambda).shift(C64::new(0.0, omega));
    let (_, integral) = gen.exp_and_integral(t);
    ops.q.compose(&integral)
}

pub(crate) fn check_bohr_index(bohr: &BohrDecomposition, m: usize) -> Result<()> {
    if m >= bohr.len() {
        return Err(Error::Validation(format!(
            "Bohr index {m} out of range ({} frequencies)",
            bohr.len()
        )));
    }
    Ok(())
}

/// `K_mn(tau) = P Q~_m L_SB R_m(tau) L_SB Q~_n P` (small models).
pub fn memory_kernel(
    pair: &ProjectorPair,
    spec: &ModelSpec,
    bohr: &BohrDecomposition,
    m: usize,
    n: usize,
    tau: f64,
    lambda: f64,
) -> Result<Superop> {
    check_bohr_index(bohr, n)?;
    let r = r_operator(pair, spec, bohr, m, tau, lambda)?;
    let ops = DenseOps::new(pair, spec)?;
    let qm = bohr.dense_full(m, spec.dim_b)?;
    let qn = bohr.dense_full(n, spec.dim_b)?;
    Ok(ops
        .p
        .compose(&qm)
        .compose(&ops.lsb)
        .compose(&r)
        .compose(&ops.lsb)
        .compose(&qn)
        .compose(&ops.p))
}

/// `R_m(tau_k) X0` for every Bohr index `m` and grid point `k`.
#[derive(Clone, Debug)]
pub struct RApplication {
    pub taus: Vec<f64>,
    /// `values[k][m]`.
    pub values: Vec<Vec<CMat>>,
}

/// Matrix-free `R_m(tau) X0` for a `Q`-ranged operand. The trajectory `e^{L_0' t} X0` is
/// stepped with RK4 in the `L_0` interaction frame; each step's contribution to
/// `int e^{i omega_m t} e^{L_0' t} X0 dt` is integrated exactly against the cubic Hermite
/// interpolant of the frame trajectory.
pub fn apply_r_operators(
    pair: &ProjectorPair,
    spec: &ModelSpec,
    bohr: &BohrDecomposition,
    x0: &CMat,
    tau_grid: &[f64],
    lambda: f64,
    dt: f64,
) -> Result<RApplication> {
    require_coupling(lambda)?;
    super::require_step(dt)?;
    check_state(spec, x0)?;
    check_increasing(tau_grid)?;
    let times = scaled_times(spec, tau_grid, lambda)?;
    let spec_l = spec.with_lambda(lambda);
    let frame = FreeFrame::new(&spec_l, pair, bohr);
    let y0 = frame.to_frame(&pair.q(x0));
    let values = r_apply_frame(&frame, lambda, y0, &times, dt)
        .into_iter()
        .map(|per_m| per_m.iter().map(|z| frame.from_frame(z)).collect())
        .collect();
    Ok(RApplication { taus: tau_grid.to_vec(), values })
}

fn scaled_times(spec: &ModelSpec, tau_grid: &[f64], lambda: f64) -> Result<Vec<f64>> {
    tau_grid.iter().map(|&tau| guard_scaled_time(spec, tau, lambda)).collect()
}

/// Filon weights `int_0^1 e^{i phi s} h_k(s) ds` for the cubic Hermite basis
/// `h00, h10, h01, h11`.
fn filon_weights(phi: f64, rule: &crate::linalg::GaussLegendre) -> [C64; 4] {
    let mut w = [C64::new(0.0, 0.0); 4];
    for (&s, &ws) in rule.nodes.iter().zip(&rule.weights) {
        let e = C64::from_polar(ws, phi * s);
        let s2 = s * s;
        let s3 = s2 * s;
        w[0] += e * (2.0 * s3 - 3.0 * s2 + 1.0);
        w[1] += e * (s3 - 2.0 * s2 + s);
        w[2] += e * (-2.0 * s3 + 3.0 * s2);
        w[3] += e * (s3 - s2);
    }
    w
}

/// Frame-basis accumulation of `int_0^{t_k} e^{i omega_m t} e^{L_0' t} Y0 dt`.
pub(crate) fn r_apply_frame(
    frame: &FreeFrame,
    lambda: f64,
    y0: CMat,
    times: &[f64],
    dt: f64,
) -> Vec<Vec<CMat>> {
    let d = frame.dim();
    let nm = frame.omegas.len();
    let rule = gauss_legendre(8);
    let mut stepper = InteractionStepper::new(frame, lambda, y0, 0.0);
    let mut acc = vec![CMat::zeros(d, d); nm];
    let mut out = Vec::with_capacity(times.len());
    let mut t_prev = 0.0;
    // theta_ab = omega_m - nu_ab, column-major like the matrix storage
    let theta: Vec<Vec<f64>> = frame
        .omegas
        .iter()
        .map(|&w| {
            let mut th = vec![0.0; d * d];
            for b in 0..d {
                for a in 0..d {
                    th[a + b * d] = w - frame.nu(a, b);
                }
            }
            th
        })
        .collect();
    let mut cached: Option<(f64, Vec<Vec<[C64; 5]>>)> = None;
    for &t_k in times {
        if t_k > t_prev {
            let steps = ((t_k - t_prev) / dt).ceil().max(1.0) as usize;
            let h = (t_k - t_prev) / steps as f64;
            let reuse = matches!(&cached, Some((hc, _)) if (hc - h).abs() <= 1e-14 * h);
            if !reuse {
                // four weights and the per-step phase advance, per m and element
                let table = theta
                    .iter()
                    .map(|th| {
                        th.iter()
                            .map(|&x| {
                                let w = filon_weights(x * h, &rule);
                                [w[0], w[1], w[2], w[3], C64::from_polar(1.0, x * h)]
                            })
                            .collect()
                    })
                    .collect();
                cached = Some((h, table));
            }
            let table = &cached.as_ref().expect("filled above").1;
            let mut phase: Vec<Vec<C64>> = theta
                .iter()
                .map(|th| th.iter().map(|&x| C64::from_polar(h, x * t_prev)).collect())
                .collect();
            for _ in 0..steps {
                let ya = stepper.y.clone();
                let da = stepper.dy.clone();
                stepper.step(h);
                let (ya, da) = (ya.as_slice(), da.as_slice());
                let (yb, db) = (stepper.y.as_slice(), stepper.dy.as_slice());
                for m in 0..nm {
                    let z = acc[m].as_mut_slice();
                    let tab = &table[m];
                    let ph = &mut phase[m];
                    for k in 0..d * d {
                        let w = &tab[k];
                        let val =
                            w[0] * ya[k] + w[1] * da[k] * h + w[2] * yb[k] + w[3] * db[k] * h;
                        z[k] += ph[k] * val;
                        ph[k] *= w[4];
                    }
                }
            }
            t_prev = t_k;
        }
        out.push(acc.clone());
    }
    out
}

/// `I(tau) = lambda sum_m P Q~_m L_SB R_m(tau) Q rho0`.
pub fn correlation_term(
    pair: &ProjectorPair,
    spec: &ModelSpec,
    bohr: &BohrDecomposition,
    rho0: &CMat,
    tau: f64,
    lambda: f64,
    dt: f64,
) -> Result<CMat> {
    let grid = if tau > 0.0 { vec![0.0, tau] } else { vec![0.0] };
    Ok(correlation_series(pair, spec, bohr, rho0, &grid, lambda, dt)?.pop().expect("non-empty"))
}

/// `I(tau_k)` along a grid, from a single pass over `[0, max tau / lambda^2]`.
pub fn correlation_series(
    pair: &ProjectorPair,
    spec: &ModelSpec,
    bohr: &BohrDecomposition,
    rho0: &CMat,
    tau_grid: &[f64],
    lambda: f64,
    dt: f64,
) -> Result<Vec<CMat>> {
    require_coupling(lambda)?;
    super::require_step(dt)?;
    check_state(spec, rho0)?;
    check_increasing(tau_grid)?;
    let times = scaled_times(spec, tau_grid, lambda)?;
    let d = spec.dim();
    let q0 = pair.q(rho0);
    if super::is_uncorrelated(&q0, rho0) {
        return Ok(vec![CMat::zeros(d, d); tau_grid.len()]);
    }
    let spec_l = spec.with_lambda(lambda);
    let frame = FreeFrame::new(&spec_l, pair, bohr);
    let z = r_apply_frame(&frame, lambda, frame.to_frame(&q0), &times, dt);
    Ok(z.into_iter()
        .map(|per_m| {
            let mut total = CMat::zeros(d, d);
            for (m, zm) in per_m.iter().enumerate() {
                total += frame.pair.p(&frame.bohr_project(m, &frame.l_sb(zm)));
            }
            frame.from_frame(&(total * C64::new(lambda, 0.0)))
        })
        .collect())
}
