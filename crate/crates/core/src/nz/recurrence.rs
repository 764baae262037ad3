use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{CMat, Superop, C64};
use crate::liouville::{BohrDecomposition, ProjectorPair};
use crate::model::ModelSpec;

use super::key::check_bohr_index;
use super::propagate::DenseOps;
use super::{check_dense, guard_scaled_time, require_coupling};

/// Samples per window when tracking the convolution norm.
const CONV_SAMPLES: usize = 200;

#[derive(Clone, Debug, Serialize)]
pub struct RecurrenceReport {
    pub m: usize,
    pub omega: f64,
    pub tau: f64,
    pub lambda: f64,
    pub eta: f64,
    /// Largest entrywise difference between both sides.
    pub residual: f64,
    pub relative_residual: f64,
    pub r_norm: f64,
    pub resolvent_term_norm: f64,
    pub convolution_term_norm: f64,
    pub feedback_term_norm: f64,
    /// Largest convolution norm over `[0, T]`.
    pub conv_max_first: f64,
    /// Largest convolution norm over `[T, 2T]`.
    pub conv_max_second: f64,
    pub conv_bounded: bool,
    /// `lambda^3 ||R||`.
    pub highest_order: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub const RECURRENCE_TOL: f64 = 1e-6;

/// Checks the three-term recurrence for the damped key operator
/// `R = Q int_0^T e^{(L_0' + i omega_m - eta) t} dt`, `T = tau / lambda^2`:
///
/// `R = Q A^{-1}(e^{A T} - 1) + lambda Q A^{-1} e^{(i omega_m - eta) T} C(T) - lambda Q A^{-1} L_SB R`
///
/// with `A = L_0 + i omega_m - eta` and `C(T) = int_0^T e^{L_0 (T - t)} Q L_SB Q e^{L_0' t} dt`.
/// Both sides are computed independently from augmented exponentials.
#[allow(clippy::too_many_arguments)]
pub fn verify_recurrence(
    pair: &ProjectorPair,
    spec: &ModelSpec,
    bohr: &BohrDecomposition,
    m: usize,
    tau: f64,
    lambda: f64,
    eta: f64,
) -> Result<RecurrenceReport> {
    require_coupling(lambda)?;
    check_bohr_index(bohr, m)?;
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::Validation(format!("damping must be positive, got {eta}")));
    }
    let t = guard_scaled_time(spec, tau, lambda)?;
    check_dense(spec, "recurrence check")?;
    let ops = DenseOps::new(pair, spec)?;
    let omega = bohr.entries[m].omega;
    let dim = ops.l0.dim();
    let shift = C64::new(-eta, omega);
    let lam = C64::new(lambda, 0.0);

    let l0p = ops.l0_prime(lambda);
    let (_, integral) = l0p.shift(shift).exp_and_integral(t);
    let direct = ops.q.compose(&integral);

    let a = ops.l0.shift(shift);
    let a_inv = a.inverse().ok_or_else(|| Error::Conditioning {
        omega,
        detail: "L_0 + i omega - eta is singular".into(),
    })?;
    let qa_inv = ops.q.compose(&a_inv);
    let ea = a.exp(t);
    let resolvent_term = qa_inv.compose(&ea.sub(&Superop::identity(dim)));

    let qlq = ops.q.compose(&ops.lsb).compose(&ops.q);
    let block = block_generator(&ops.l0, &qlq, &l0p);
    let conv = top_right(&(&block * C64::new(t, 0.0)).exp(), dim);
    let conv_term = qa_inv
        .compose(&conv)
        .scale(lam * (shift * t).exp());
    let feedback_term = qa_inv.compose(&ops.lsb).compose(&direct).scale(-lam);

    let rhs = resolvent_term.add(&conv_term).add(&feedback_term);
    let residual = rhs.max_abs_diff(&direct);
    let scale = direct.matrix().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let r_norm = direct.hs_operator_norm();

    let (conv_max_first, conv_max_second) = convolution_maxima(&block, dim, t);
    let conv_bounded = conv_max_first.is_finite()
        && conv_max_second.is_finite()
        && conv_max_second <= conv_max_first * (1.0 + 1e-9);

    Ok(RecurrenceReport {
        m,
        omega,
        tau,
        lambda,
        eta,
        residual,
        relative_residual: residual / scale.max(f64::MIN_POSITIVE),
        r_norm,
        resolvent_term_norm: resolvent_term.hs_operator_norm(),
        convolution_term_norm: conv_term.hs_operator_norm(),
        feedback_term_norm: feedback_term.hs_operator_norm(),
        conv_max_first,
        conv_max_second,
        conv_bounded,
        highest_order: lambda.powi(3) * r_norm,
        tolerance: RECURRENCE_TOL,
        passed: residual <= RECURRENCE_TOL,
    })
}

/// `[[L_0, Q L_SB Q], [0, L_0']]`, whose exponential carries the convolution in its corner.
fn block_generator(l0: &Superop, coupling: &Superop, l0p: &Superop) -> CMat {
    let n = l0.matrix().nrows();
    let mut mat = CMat::zeros(2 * n, 2 * n);
    mat.view_mut((0, 0), (n, n)).copy_from(l0.matrix());
    mat.view_mut((0, n), (n, n)).copy_from(coupling.matrix());
    mat.view_mut((n, n), (n, n)).copy_from(l0p.matrix());
    mat
}

fn top_right(e: &CMat, dim: usize) -> Superop {
    let n = dim * dim;
    let mat = e.view((0, n), (n, n)).into_owned();
    Superop::from_matrix(dim, mat).expect("block size")
}

fn convolution_maxima(block: &CMat, dim: usize, t: f64) -> (f64, f64) {
    let h = t / CONV_SAMPLES as f64;
    let step = (block * C64::new(h, 0.0)).exp();
    let mut current = step.clone();
    let (mut first, mut second) = (0.0_f64, 0.0_f64);
    for k in 1..=2 * CONV_SAMPLES {
        let norm = top_right(&current, dim).hs_operator_norm();
        if k <= CONV_SAMPLES {
            first = first.max(norm);
        } else {
            second = second.max(norm);
        }
        current = &current * &step;
    }
    (first, second)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouville::build_projectors;
    use crate::model::{build_random_model, center_interaction};

    fn setup(lambda: f64) -> (ModelSpec, ProjectorPair, BohrDecomposition) {
        let spec = center_interaction(&build_random_model(2, 3, lambda, 11).unwrap()).unwrap();
        let pair = build_projectors(&spec).unwrap();
        let bohr = BohrDecomposition::from_spec(&spec).unwrap();
        (spec, pair, bohr)
    }

    #[test]
    fn recurrence_holds_on_small_model() {
        let (spec, pair, bohr) = setup(0.2);
        for m in 0..bohr.len() {
            let r = verify_recurrence(&pair, &spec, &bohr, m, 1.0, 0.2, 0.05).unwrap();
            assert!(r.passed, "m={m} residual {}", r.residual);
            assert!(r.conv_max_first.is_finite() && r.conv_max_second.is_finite());
        }
    }

    #[test]
    fn collapses_to_resolvent_term_without_interaction() {
        let (mut spec, pair, bohr) = setup(0.2);
        spec.h_sb = CMat::zeros(6, 6);
        let r = verify_recurrence(&pair, &spec, &bohr, 0, 1.0, 0.2, 0.05).unwrap();
        assert_eq!(r.convolution_term_norm, 0.0);
        assert_eq!(r.feedback_term_norm, 0.0);
        assert!(r.residual < 1e-10);
    }

    #[test]
    fn highest_order_term_shrinks_with_coupling() {
        let (spec, pair, bohr) = setup(0.2);
        let big = verify_recurrence(&pair, &spec, &bohr, 0, 0.5, 0.4, 0.05).unwrap();
        let small = verify_recurrence(&pair, &spec, &bohr, 0, 0.5, 0.2, 0.05).unwrap();
        assert!(small.highest_order < big.highest_order);
    }

    #[test]
    fn rejects_non_positive_damping() {
        let (spec, pair, bohr) = setup(0.2);
        assert!(verify_recurrence(&pair, &spec, &bohr, 0, 1.0, 0.2, 0.0).is_err());
    }
}
