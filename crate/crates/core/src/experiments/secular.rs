use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{hs_norm, validate_density, CMat, CVec, C64, I};
use crate::liouville::ProjectorPair;
use crate::nz::FreeFrame;

use super::config::StudyConfig;
use super::study::couple;
use super::Check;

/// Correct-projector slope allowed, relative to `||P||`.
pub const SECULAR_TOL: f64 = 1e-6;
/// Largest fit residual allowed for the wrong projector, relative to the range of `S`.
pub const LINEARITY_TOL: f64 = 0.01;
const DEFAULT_POINTS: usize = 21;
const DEFAULT_SPAN: f64 = 0.4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub max_residual: f64,
    /// `max S - min S` over the samples.
    pub range: f64,
}

/// Least-squares line through `(x, y)`; refuses fewer than four points.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("{} abscissae, {} values", x.len(), y.len())));
    }
    if x.len() < 4 {
        return Err(Error::Fit(format!("a linear fit needs at least 4 points, got {}", x.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Fit("all abscissae coincide".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual =
        x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).abs()).fold(0.0, f64::max);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(LinearFit { slope, intercept, max_residual, range: hi - lo })
}

#[derive(Clone, Debug, Serialize)]
pub struct SecularReport {
    /// Bohr index and frequency of the most degenerate block.
    pub m: usize,
    pub omega: f64,
    pub times: Vec<f64>,
    pub s_correct: Vec<f64>,
    pub s_wrong: Vec<f64>,
    pub fit_correct: LinearFit,
    pub fit_wrong: LinearFit,
    /// `||P||`, the operand the slopes are measured against.
    pub operand_norm: f64,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// `S(T) = ||int_0^T Q' e^{(L_0 + i omega_m) t} dt P||` for the wrong (`Q'`) and correct (`Q`)
/// complement, `P` built on the model's reference state and `m` the most degenerate block.
///
/// The integral is exact: `L_0 + i omega_m` is diagonal in the free eigenbasis, entry
/// `(a, b)` picking up `int_0^T e^{i theta t} dt` with `theta = omega_m - nu_ab`. Since
/// `P = lift . tr_B` and `tr_B tr_B^dagger = dimB`, `||X P|| = sqrt(dimB) ||X lift||`.
pub fn secular_demo(cfg: &StudyConfig) -> Result<SecularReport> {
    let setup = cfg.setup()?;
    let wrong = cfg
        .wrong_reference
        .as_ref()
        .ok_or_else(|| Error::Config("secular demo needs wrong_reference".into()))?;
    let spec = &setup.spec;
    let db = spec.dim_b;
    if wrong.nrows() != db || wrong.ncols() != db {
        return Err(Error::Dimension(format!("wrong_reference must be {db}x{db}")));
    }
    validate_density(wrong, spec.tolerances.herm_tol, "wrong_reference")?;
    let defect = hs_norm(&(&spec.h_b * wrong - wrong * &spec.h_b));
    if defect > spec.tolerances.stat_tol {
        return Err(Error::Validation(format!(
            "wrong_reference is not stationary: ||[H_B, Omega_B']|| = {defect:.3e}"
        )));
    }
    let times = match &cfg.secular_times {
        Some(t) => {
            crate::nz::check_time_grid(t)?;
            for &x in t {
                spec.check_window(x, String::new)?;
            }
            t.clone()
        }
        None => {
            let w = spec.window.ok_or_else(|| {
                Error::Config("model has no bath window; give secular_times explicitly".into())
            })?;
            let end = DEFAULT_SPAN * w.t_rec;
            (0..DEFAULT_POINTS).map(|k| end * k as f64 / (DEFAULT_POINTS - 1) as f64).collect()
        }
    };
    if times.len() < 4 {
        return Err(Error::Fit(format!(
            "the secular fit needs at least 4 time points, got {}",
            times.len()
        )));
    }

    let lambda = cfg.lambdas[0];
    let c = couple(spec, lambda)?;
    let m = c.bohr.most_degenerate();
    let omega = c.bohr.entries[m].omega;
    let frame = FreeFrame::new(&c.spec, &c.pair, &c.bohr);
    let wrong_pair = ProjectorPair::with_reference(spec.dim_s, wrong.clone());
    let lifted: Vec<CMat> = system_units(spec.dim_s)
        .iter()
        .map(|e| frame.to_frame(&c.pair.lift(e)))
        .collect();
    let scale = (db as f64).sqrt();
    let mut s_correct = Vec::with_capacity(times.len());
    let mut s_wrong = Vec::with_capacity(times.len());
    for &t in &times {
        let integrated: Vec<CMat> = lifted
            .iter()
            .map(|y| frame.from_frame(&integrate(&frame, y, omega, t)))
            .collect();
        s_correct.push(scale * block_norm(&integrated, |x| c.pair.q(x)));
        s_wrong.push(scale * block_norm(&integrated, |x| wrong_pair.q(x)));
    }
    let operand_norm = scale * hs_norm(&c.spec.omega_b);
    let fit_correct = linear_fit(&times, &s_correct)?;
    let fit_wrong = linear_fit(&times, &s_wrong)?;
    let checks = vec![
        Check::new(
            "correct_projector_flat",
            fit_correct.slope.abs() <= SECULAR_TOL * operand_norm,
            format!("slope {:.3e}, operand norm {operand_norm:.3e}", fit_correct.slope),
        ),
        Check::new(
            "wrong_projector_secular",
            fit_wrong.slope > 0.0 && fit_wrong.max_residual < LINEARITY_TOL * fit_wrong.range,
            format!(
                "slope {:.6e}, residual {:.3e} of range {:.3e}",
                fit_wrong.slope, fit_wrong.max_residual, fit_wrong.range
            ),
        ),
    ];
    Ok(SecularReport {
        m,
        omega,
        times,
        s_correct,
        s_wrong,
        fit_correct,
        fit_wrong,
        operand_norm,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

fn system_units(n: usize) -> Vec<CMat> {
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            out.push(crate::linalg::ket_bra(n, i, j));
        }
    }
    out
}

/// `int_0^t e^{(L_0 + i omega) s} Y ds` for `Y` in the free eigenbasis.
fn integrate(frame: &FreeFrame, y: &CMat, omega: f64, t: f64) -> CMat {
    let d = frame.dim();
    CMat::from_fn(d, d, |a, b| {
        let theta = omega - frame.nu(a, b);
        let w = if (theta * t).abs() < 1e-8 {
            C64::new(t, 0.0) * (I * theta * t * 0.5).exp()
        } else {
            ((I * theta * t).exp() - 1.0) / (I * theta)
        };
        y[(a, b)] * w
    })
}

/// Operator norm of the map sending the `k`-th system unit to `q(columns[k])`.
fn block_norm(columns: &[CMat], q: impl Fn(&CMat) -> CMat) -> f64 {
    let d = columns[0].nrows();
    let mut mat = CMat::zeros(d * d, columns.len());
    for (k, col) in columns.iter().enumerate() {
        let v: CVec = crate::linalg::vectorize(&q(col));
        mat.set_column(k, &v);
    }
    mat.singular_values().iter().copied().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_a_line_and_refuses_short_grids() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
        assert!(f.max_residual < 1e-14);
        assert!(matches!(linear_fit(&x[..3], &y[..3]), Err(Error::Fit(_))));
    }

    #[test]
    fn wrong_thermal_reference_grows_linearly() {
        let rep = secular_demo(&StudyConfig::spin_bath_demo()).unwrap();
        assert_eq!(rep.omega, 0.0);
        assert!(rep.passed, "{:?}", rep.checks);
        assert!(rep.s_correct.iter().all(|s| *s < 1e-10));
    }

    #[test]
    fn correct_reference_as_wrong_one_is_flat() {
        let mut cfg = StudyConfig::spin_bath_demo();
        let setup = cfg.setup().unwrap();
        let omega_b = setup.spec.omega_b.clone();
        let norm = hs_norm(&omega_b);
        cfg.wrong_reference = Some(omega_b);
        let rep = secular_demo(&cfg).unwrap();
        assert!(rep.fit_wrong.slope.abs() <= 1e-8 * norm);
    }

    #[test]
    fn single_point_grid_refused() {
        let mut cfg = StudyConfig::spin_bath_demo();
        cfg.secular_times = Some(vec![1.0]);
        assert!(matches!(secular_demo(&cfg), Err(Error::Fit(_))));
    }

    #[test]
    fn non_stationary_reference_rejected() {
        let mut cfg = StudyConfig::spin_bath_demo();
        let mut w = CMat::identity(8, 8).map(|z| z / 8.0);
        w[(0, 1)] = C64::new(0.01, 0.0);
        w[(1, 0)] = C64::new(0.01, 0.0);
        cfg.wrong_reference = Some(w);
        assert!(matches!(secular_demo(&cfg), Err(Error::Validation(_))));
    }
}
