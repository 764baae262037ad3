use serde::Serialize;

use crate::error::Result;
use crate::linalg::{hs_norm, trace_distance, CMat};
use crate::liouville::{build_projectors, BohrDecomposition, ProjectorPair};
use crate::model::{center_interaction, ModelSpec};
use crate::nz::{correlation_series, markov_propagate, propagate_exact, vanhove_generator};

use super::config::{Setup, StudyConfig};
use super::{elapsed_ms, Check, Stopwatch};

/// Allowed relative change of the decay rates under `eta -> 2 eta`.
pub const ETA_STABILITY: f64 = 0.3;
/// Bounds for `max I(lambda_{k+1}) / max I(lambda_k)` between successive couplings.
pub const I_RATIO_RANGE: [f64; 2] = [0.3, 0.8];
pub const TAU0_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StudyRow {
    pub lambda: f64,
    pub tau: f64,
    /// Trace distance between the exact interaction-picture reduced state and the Markov one.
    pub d_markov: f64,
    /// `||I(tau)||_HS`.
    pub i_norm: f64,
    /// `||Q rho(tau / lambda^2)||_HS`.
    pub q_norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LambdaSummary {
    pub lambda: f64,
    pub d_markov_final: f64,
    pub i_norm_max: f64,
    pub q_norm_initial: f64,
    /// Level depletion rates `-K_{kk,kk}` at `eta`.
    pub rates: Vec<f64>,
    pub rates_doubled_eta: Vec<f64>,
    /// `max_k |rate_k(2 eta) - rate_k(eta)| / max_k rate_k(eta)`.
    pub rate_change: f64,
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyMetadata {
    pub config_hash: String,
    pub seed: u64,
    pub eta: f64,
    pub dt: f64,
    pub total_ms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyResult {
    /// Ordered by `(lambda, tau)` ascending.
    pub rows: Vec<StudyRow>,
    /// Ordered by `lambda` descending, the direction of the limit.
    pub summaries: Vec<LambdaSummary>,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub metadata: StudyMetadata,
}

pub(crate) struct Coupled {
    pub spec: ModelSpec,
    pub pair: ProjectorPair,
    pub bohr: BohrDecomposition,
}

/// Rescales to `lambda` and centers the interaction.
pub(crate) fn couple(base: &ModelSpec, lambda: f64) -> Result<Coupled> {
    let spec = center_interaction(&base.with_lambda(lambda))?;
    let pair = build_projectors(&spec)?;
    let bohr = BohrDecomposition::from_spec(&spec)?;
    Ok(Coupled { spec, pair, bohr })
}

/// Exact states at `t = tau / lambda^2`.
pub(crate) fn exact_states(c: &Coupled, rho0: &CMat, taus: &[f64], lambda: f64) -> Result<Vec<CMat>> {
    let times: Vec<f64> = taus.iter().map(|t| t / (lambda * lambda)).collect();
    Ok(propagate_exact(&c.spec, rho0, &times)?.states)
}

fn run_lambda(setup: &Setup, cfg: &StudyConfig, lambda: f64) -> Result<(Vec<StudyRow>, LambdaSummary)> {
    let clock = Stopwatch::start();
    let c = couple(&setup.spec, lambda)?;
    let taus = &cfg.tau_grid;
    let states = exact_states(&c, &setup.rho0, taus, lambda)?;
    let gen = vanhove_generator(&c.pair, &c.spec, &c.bohr, cfg.eta)?;
    let markov = markov_propagate(&gen, &c.pair.reduce(&setup.rho0), taus)?;
    let corr = correlation_series(&c.pair, &c.spec, &c.bohr, &setup.rho0, taus, lambda, cfg.dt)?;

    let mut rows = Vec::with_capacity(taus.len());
    for (k, &tau) in taus.iter().enumerate() {
        let t = tau / (lambda * lambda);
        let rotated = c.bohr.evolve(&c.pair.reduce(&states[k]), -t);
        rows.push(StudyRow {
            lambda,
            tau,
            d_markov: trace_distance(&rotated, &markov.states[k])?,
            i_norm: hs_norm(&corr[k]),
            q_norm: hs_norm(&c.pair.q(&states[k])),
        });
    }

    let doubled = vanhove_generator(&c.pair, &c.spec, &c.bohr, 2.0 * cfg.eta)?;
    let n = c.spec.dim_s;
    let rates: Vec<f64> = (0..n).map(|k| gen.depletion_rate(k)).collect();
    let rates_doubled: Vec<f64> = (0..n).map(|k| doubled.depletion_rate(k)).collect();
    let scale = rates.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
    let rate_change = if scale > 0.0 {
        rates.iter().zip(&rates_doubled).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
    } else {
        0.0
    };
    let summary = LambdaSummary {
        lambda,
        d_markov_final: rows.last().map_or(0.0, |r| r.d_markov),
        i_norm_max: rows.iter().map(|r| r.i_norm).fold(0.0, f64::max),
        q_norm_initial: rows.first().map_or(0.0, |r| r.q_norm),
        rates,
        rates_doubled_eta: rates_doubled,
        rate_change,
        elapsed_ms: clock.elapsed_ms(),
    };
    Ok((rows, summary))
}

/// Exact, Markov and correlation-term comparison across couplings at matched scaled times.
pub fn scaling_study(cfg: &StudyConfig) -> Result<StudyResult> {
    let clock = Stopwatch::start();
    let setup = cfg.setup()?;
    let per_lambda = map_lambdas(&cfg.lambdas, |l| run_lambda(&setup, cfg, l))?;

    let mut rows: Vec<StudyRow> = per_lambda.iter().flat_map(|(r, _)| r.iter().copied()).collect();
    rows.sort_by(|a, b| a.lambda.total_cmp(&b.lambda).then(a.tau.total_cmp(&b.tau)));
    let mut summaries: Vec<LambdaSummary> = per_lambda.into_iter().map(|(_, s)| s).collect();
    summaries.sort_by(|a, b| b.lambda.total_cmp(&a.lambda));

    let checks = study_checks(&summaries, cfg.tau_grid[0] == 0.0);
    Ok(StudyResult {
        passed: checks.iter().all(|c| c.passed),
        rows,
        summaries,
        checks,
        metadata: StudyMetadata {
            config_hash: cfg.hash()?,
            seed: cfg.seed,
            eta: cfg.eta,
            dt: cfg.dt,
            total_ms: elapsed_ms(&clock),
        },
    })
}

fn study_checks(s: &[LambdaSummary], has_tau0: bool) -> Vec<Check> {
    let pairs: Vec<(&LambdaSummary, &LambdaSummary)> = s.iter().zip(s.iter().skip(1)).collect();
    let d: Vec<f64> = s.iter().map(|x| x.d_markov_final).collect();
    let i: Vec<f64> = s.iter().map(|x| x.i_norm_max).collect();
    let ratios: Vec<f64> = pairs.iter().map(|(a, b)| b.i_norm_max / a.i_norm_max).collect();
    let mut checks = vec![
        Check::new(
            "d_markov_decreasing",
            pairs.iter().all(|(a, b)| b.d_markov_final < a.d_markov_final),
            format!("d_markov at final tau, lambda descending: {d:?}"),
        ),
        Check::new(
            "d_markov_halved",
            s.len() >= 2 && d[d.len() - 1] < 0.5 * d[0],
            format!("smallest / largest lambda: {:?}", d.last().zip(d.first()).map(|(a, b)| a / b)),
        ),
        Check::new(
            "i_norm_decreasing",
            pairs.iter().all(|(a, b)| b.i_norm_max < a.i_norm_max),
            format!("max_tau i_norm, lambda descending: {i:?}"),
        ),
        Check::new(
            "i_norm_ratio",
            ratios.iter().all(|r| (I_RATIO_RANGE[0]..=I_RATIO_RANGE[1]).contains(r)),
            format!("successive ratios {ratios:?}, required in {I_RATIO_RANGE:?}"),
        ),
        Check::new(
            "generator_eta_stable",
            s.iter().all(|x| x.rate_change < ETA_STABILITY),
            format!(
                "relative rate change under eta -> 2 eta: {:?}",
                s.iter().map(|x| x.rate_change).collect::<Vec<_>>()
            ),
        ),
    ];
    if has_tau0 {
        let q0: Vec<f64> = s.iter().map(|x| x.q_norm_initial).collect();
        let spread = q0.iter().map(|q| (q - q0[0]).abs()).fold(0.0, f64::max);
        checks.push(Check::new(
            "q_norm_tau0_lambda_independent",
            spread <= TAU0_TOL,
            format!("spread {spread:.3e}"),
        ));
    }
    checks
}

pub(crate) fn map_lambdas<T: Send>(
    lambdas: &[f64],
    f: impl Fn(f64) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        lambdas.par_iter().map(|&l| f(l)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        lambdas.iter().map(|&l| f(l)).collect()
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FactorizationRow {
    pub lambda: f64,
    pub tau: f64,
    pub q_norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FactorizationReport {
    pub taus: Vec<f64>,
    /// Ordered by `lambda` descending, then `tau`.
    pub rows: Vec<FactorizationRow>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Scaled times at which the factorization table is read off.
pub const FACTORIZATION_TAUS: [f64; 3] = [0.0, 0.5, 1.0];

/// `||Q rho(tau / lambda^2)||` at fixed `tau`: decreasing in `lambda` for every `tau > 0`.
pub fn factorization_decay(cfg: &StudyConfig) -> Result<FactorizationReport> {
    let mut cfg = cfg.clone();
    cfg.tau_grid = FACTORIZATION_TAUS.to_vec();
    let setup = cfg.setup()?;
    let per_lambda = map_lambdas(&cfg.lambdas, |l| {
        let c = couple(&setup.spec, l)?;
        let states = exact_states(&c, &setup.rho0, &cfg.tau_grid, l)?;
        Ok(states.iter().map(|s| hs_norm(&c.pair.q(s))).collect::<Vec<f64>>())
    })?;
    let mut order: Vec<usize> = (0..cfg.lambdas.len()).collect();
    order.sort_by(|&a, &b| cfg.lambdas[b].total_cmp(&cfg.lambdas[a]));

    let mut rows = Vec::new();
    for &k in &order {
        for (j, &tau) in cfg.tau_grid.iter().enumerate() {
            rows.push(FactorizationRow { lambda: cfg.lambdas[k], tau, q_norm: per_lambda[k][j] });
        }
    }
    let mut checks = Vec::new();
    for (j, &tau) in cfg.tau_grid.iter().enumerate() {
        let column: Vec<f64> = order.iter().map(|&k| per_lambda[k][j]).collect();
        if tau == 0.0 {
            let spread = column.iter().map(|q| (q - column[0]).abs()).fold(0.0, f64::max);
            checks.push(Check::new(
                "q_norm_tau0_lambda_independent",
                spread <= TAU0_TOL,
                format!("spread {spread:.3e}"),
            ));
        } else {
            checks.push(Check::new(
                &format!("q_norm_decreasing_tau_{tau}"),
                column.windows(2).all(|w| w[1] < w[0]),
                format!("q_norm, lambda descending: {column:?}"),
            ));
        }
    }
    Ok(FactorizationReport {
        taus: cfg.tau_grid.clone(),
        passed: checks.iter().all(|c| c.passed),
        rows,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::{ModelConfig, RecipeConfig};
    use crate::linalg::c;

    fn small_config() -> StudyConfig {
        StudyConfig {
            model: ModelConfig::Random { dim_s: 2, dim_b: 3 },
            recipe: RecipeConfig::Random,
            lambdas: vec![0.3, 0.2],
            tau_grid: vec![0.0, 0.1, 0.2],
            eta: 0.1,
            dt: 0.01,
            wrong_reference: None,
            secular_times: None,
            seed: 4,
            output: None,
        }
    }

    #[test]
    fn rows_are_ordered_finite_and_nonnegative() {
        let res = scaling_study(&small_config()).unwrap();
        assert_eq!(res.rows.len(), 6);
        assert!(res.rows.windows(2).all(|w| (w[0].lambda, w[0].tau) < (w[1].lambda, w[1].tau)));
        for r in &res.rows {
            for v in [r.d_markov, r.i_norm, r.q_norm] {
                assert!(v.is_finite() && v >= 0.0);
            }
        }
        assert_eq!(res.summaries[0].lambda, 0.3);
    }

    #[test]
    fn no_interaction_means_nothing_moves() {
        let mut cfg = small_config();
        let mut spec = cfg.setup().unwrap().spec;
        spec.h_sb = CMat::zeros(6, 6);
        cfg.model = ModelConfig::Explicit { spec };
        let setup = cfg.setup().unwrap();
        let q0 = hs_norm(&build_projectors(&setup.spec).unwrap().q(&setup.rho0));
        let res = scaling_study(&cfg).unwrap();
        for r in &res.rows {
            assert!(r.d_markov < 1e-10, "{r:?}");
            assert_eq!(r.i_norm, 0.0);
            assert!((r.q_norm - q0).abs() < 1e-10);
        }
    }

    #[test]
    fn product_state_has_no_correlation_term() {
        let mut cfg = small_config();
        let mut rho_s = CMat::zeros(2, 2);
        rho_s[(0, 0)] = c(0.6, 0.0);
        rho_s[(1, 1)] = c(0.4, 0.0);
        cfg.recipe = RecipeConfig::Factorized { system_state: rho_s };
        let res = scaling_study(&cfg).unwrap();
        assert!(res.rows.iter().all(|r| r.i_norm == 0.0));
    }

    #[test]
    fn factorization_table_tau0_row_is_exact() {
        let rep = factorization_decay(&small_config()).unwrap();
        assert_eq!(rep.rows.len(), 6);
        let tau0: Vec<f64> = rep.rows.iter().filter(|r| r.tau == 0.0).map(|r| r.q_norm).collect();
        assert!((tau0[0] - tau0[1]).abs() <= TAU0_TOL);
        assert!(rep.checks[0].passed);
    }
}
