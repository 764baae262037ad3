//! Finite-bath diagnostics for the mixing hypothesis. Mixing is certified operationally:
//! a deviation must fall below a fraction of its initial value before the window closes.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, identity, trace, CMat, HermitianEigen, C64};
use crate::model::ModelSpec;

/// Deviation ratio required at the end of the window.
pub const DECAY_FRACTION: f64 = 0.05;
/// Share of the grid, counted from its end, forming the final window.
pub const TAIL_FRACTION: f64 = 0.2;
/// Absolute floor below which a deviation counts as zero.
const ZERO_FLOOR: f64 = 1e-12;

/// `C(t) = tr{X(t) Y Omega_B} - tr{X Omega_B} tr{Y Omega_B}` with `X(t) = e^{i H_B t} X e^{-i H_B t}`.
pub fn bath_autocorrelation(
    spec: &ModelSpec,
    x: &CMat,
    y: &CMat,
    t_grid: &[f64],
) -> Result<Vec<C64>> {
    let db = spec.dim_b;
    for (name, op) in [("X", x), ("Y", y)] {
        if op.nrows() != db || op.ncols() != db {
            return Err(Error::Dimension(format!(
                "bath operator {name} is {}x{}, bath dimension is {db}",
                op.nrows(),
                op.ncols()
            )));
        }
    }
    check_grid(spec, t_grid)?;
    let eig = HermitianEigen::new(&spec.h_b);
    let mean = trace(&(x * &spec.omega_b)) * trace(&(y * &spec.omega_b));
    let y_omega = y * &spec.omega_b;
    Ok(t_grid
        .iter()
        .map(|&t| {
            let u = eig.propagator(t);
            let xt = u.adjoint() * x * &u;
            trace(&(xt * &y_omega)) - mean
        })
        .collect())
}

/// Summary of an autocorrelation run.
#[derive(Clone, Debug, Serialize)]
pub struct AutocorrelationReport {
    pub times: Vec<f64>,
    pub modulus: Vec<f64>,
    pub initial: f64,
    /// Largest `|C|` over the final window.
    pub tail_max: f64,
    pub passed: bool,
}

pub fn autocorrelation_report(times: &[f64], values: &[C64]) -> AutocorrelationReport {
    let modulus: Vec<f64> = values.iter().map(|z| z.norm()).collect();
    let initial = modulus.first().copied().unwrap_or(0.0);
    let tail_max = tail_max(times, &modulus);
    AutocorrelationReport {
        times: times.to_vec(),
        passed: decayed(initial, tail_max),
        modulus,
        initial,
        tail_max,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ObservableTrace {
    pub index: usize,
    pub deviation: Vec<f64>,
    pub initial: f64,
    pub tail_max: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RelaxationReport {
    /// `bath` for `e^{L_B t}`, `free` for `e^{L_0 t}`.
    pub dynamics: &'static str,
    pub times: Vec<f64>,
    pub observables: Vec<ObservableTrace>,
    pub decay_fraction: f64,
    pub passed: bool,
}

impl RelaxationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `|tr{D e^{L_B t} rho0} - tr{D (tr_B rho0 (x) Omega_B)}|` for each observable `D`.
pub fn relaxation_check(
    spec: &ModelSpec,
    rho0: &CMat,
    observables: &[CMat],
    t_grid: &[f64],
) -> Result<RelaxationReport> {
    check_inputs(spec, rho0, observables)?;
    check_grid(spec, t_grid)?;
    let target = spec.with_reference(&linalg::partial_trace_bath(rho0, spec.dim_s, spec.dim_b)?);
    let bath = HermitianEigen::new(&spec.h_b);
    let evolve = |t: f64| {
        let u = identity(spec.dim_s).kronecker(&bath.propagator(t));
        &u * rho0 * u.adjoint()
    };
    Ok(report("bath", observables, t_grid, evolve, |_| target.clone()))
}

/// Same metric for `e^{L_0 t} rho0` against `e^{L_S t}(tr_B rho0 (x) Omega_B)`.
pub fn free_factorization_check(
    spec: &ModelSpec,
    rho0: &CMat,
    observables: &[CMat],
    t_grid: &[f64],
) -> Result<RelaxationReport> {
    check_inputs(spec, rho0, observables)?;
    check_grid(spec, t_grid)?;
    let rho_s = linalg::partial_trace_bath(rho0, spec.dim_s, spec.dim_b)?;
    let free = HermitianEigen::new(&spec.free_hamiltonian());
    let system = HermitianEigen::new(&spec.h_s);
    Ok(report(
        "free",
        observables,
        t_grid,
        |t| free.evolve(rho0, t),
        |t| spec.with_reference(&system.evolve(&rho_s, t)),
    ))
}

fn report(
    dynamics: &'static str,
    observables: &[CMat],
    t_grid: &[f64],
    evolved: impl Fn(f64) -> CMat,
    target: impl Fn(f64) -> CMat,
) -> RelaxationReport {
    let mut deviation = vec![Vec::with_capacity(t_grid.len()); observables.len()];
    for &t in t_grid {
        let diff = evolved(t) - target(t);
        for (k, d) in observables.iter().enumerate() {
            deviation[k].push(trace(&(d * &diff)).norm());
        }
    }
    let observables: Vec<ObservableTrace> = deviation
        .into_iter()
        .enumerate()
        .map(|(index, deviation)| {
            let initial = deviation.first().copied().unwrap_or(0.0);
            let tail_max = tail_max(t_grid, &deviation);
            ObservableTrace { index, passed: decayed(initial, tail_max), deviation, initial, tail_max }
        })
        .collect();
    RelaxationReport {
        dynamics,
        times: t_grid.to_vec(),
        passed: observables.iter().all(|o| o.passed),
        observables,
        decay_fraction: DECAY_FRACTION,
    }
}

fn decayed(initial: f64, tail_max: f64) -> bool {
    tail_max <= ZERO_FLOOR || tail_max < DECAY_FRACTION * initial
}

fn tail_max(times: &[f64], values: &[f64]) -> f64 {
    let (Some(&first), Some(&last)) = (times.first(), times.last()) else {
        return 0.0;
    };
    let start = last - TAIL_FRACTION * (last - first);
    times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= start)
        .map(|(_, v)| *v)
        .fold(0.0, f64::max)
}

fn check_inputs(spec: &ModelSpec, rho0: &CMat, observables: &[CMat]) -> Result<()> {
    let d = spec.dim();
    let shape_ok = |m: &CMat| m.nrows() == d && m.ncols() == d;
    if !shape_ok(rho0) {
        return Err(Error::Dimension(format!(
            "state is {}x{}, model dimension is {d}",
            rho0.nrows(),
            rho0.ncols()
        )));
    }
    if let Some(k) = observables.iter().position(|m| !shape_ok(m)) {
        return Err(Error::Dimension(format!("observable {k} is not {d}x{d}")));
    }
    Ok(())
}

fn check_grid(spec: &ModelSpec, t_grid: &[f64]) -> Result<()> {
    crate::nz::check_time_grid(t_grid)?;
    if t_grid.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::Validation("times must be >= 0".into()));
    }
    for &t in t_grid {
        spec.check_window(t, String::new)?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BohrFrequency {
    pub omega: f64,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct BathSpectrumReport {
    pub dim_b: usize,
    /// Distinct eigenvalues of `L_B` (differences `e_i - e_j`), ascending.
    pub frequencies: Vec<BohrFrequency>,
    pub kernel_dimension: usize,
    /// Smallest gap between distinct bath levels; absent when `H_B` is degenerate to a point.
    pub min_gap: Option<f64>,
    pub recurrence_time: Option<f64>,
    /// Nonzero frequencies whose multiplicity exceeds one.
    pub degenerate_count: usize,
    pub max_multiplicity: usize,
    pub flagged: bool,
}

impl BathSpectrumReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Bohr frequencies of `H_B` with multiplicities. A nondegenerate generic spectrum gives every
/// nonzero frequency multiplicity one; anything higher is flagged.
pub fn bath_spectrum_report(spec: &ModelSpec) -> BathSpectrumReport {
    let e = HermitianEigen::new(&spec.h_b).values;
    let scale = e.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(1.0);
    let tol = spec.tolerances.degeneracy_tol * scale;
    let mut diffs: Vec<f64> = e.iter().flat_map(|a| e.iter().map(move |b| a - b)).collect();
    diffs.sort_by(f64::total_cmp);

    let mut frequencies: Vec<BohrFrequency> = Vec::new();
    let mut anchor = f64::NAN;
    for d in diffs {
        match frequencies.last_mut() {
            Some(last) if (d - anchor).abs() <= tol => last.multiplicity += 1,
            _ => {
                anchor = d;
                frequencies.push(BohrFrequency { omega: d, multiplicity: 1 });
            }
        }
    }
    let mut kernel_dimension = 0;
    for f in frequencies.iter_mut() {
        if f.omega.abs() <= tol {
            f.omega = 0.0;
            kernel_dimension += f.multiplicity;
        }
    }
    let nonzero = frequencies.iter().filter(|f| f.omega != 0.0);
    let degenerate_count = nonzero.clone().filter(|f| f.multiplicity > 1).count();
    let max_multiplicity = nonzero.map(|f| f.multiplicity).max().unwrap_or(0);
    let min_gap = e
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|g| *g > tol)
        .fold(None, |m: Option<f64>, g| Some(m.map_or(g, |m| m.min(g))));
    BathSpectrumReport {
        dim_b: spec.dim_b,
        frequencies,
        kernel_dimension,
        min_gap,
        recurrence_time: min_gap.map(|g| std::f64::consts::TAU / g),
        degenerate_count,
        max_multiplicity,
        flagged: degenerate_count > 0,
    }
}
