use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, gauss_legendre, CMat, Superop, C64};
use crate::liouville::{BohrDecomposition, ProjectorPair};
use crate::model::ModelSpec;

use super::{check_increasing, FreeFrame, Trajectory};

/// Weak-coupling generator `K` on system operators, with its per-frequency blocks.
#[derive(Clone, Debug)]
pub struct MarkovGenerator {
    pub k: Superop,
    pub eta: f64,
    pub per_block: Vec<(f64, Superop)>,
}

#[derive(Serialize)]
struct GeneratorJson<'a> {
    dim_s: usize,
    eta: f64,
    #[serde(with = "crate::codec::matrix")]
    k: &'a CMat,
    blocks: Vec<BlockJson<'a>>,
}

#[derive(Serialize)]
struct BlockJson<'a> {
    omega: f64,
    #[serde(with = "crate::codec::matrix")]
    k: &'a CMat,
}

impl MarkovGenerator {
    pub fn dim_s(&self) -> usize {
        self.k.dim()
    }

    pub fn apply(&self, x: &CMat) -> CMat {
        self.k.apply(x)
    }

    /// `max |tr K(X)|` over the matrix units.
    pub fn trace_defect(&self) -> f64 {
        let n = self.dim_s();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max(linalg::trace(&self.apply(&linalg::ket_bra(n, i, j))).norm());
            }
        }
        worst
    }

    /// `max ||K(X^dagger) - K(X)^dagger||` over the matrix units.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim_s();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let x = linalg::ket_bra(n, i, j);
                let lhs = self.apply(&x.adjoint());
                let rhs = self.apply(&x).adjoint();
                worst = worst.max(linalg::hs_norm(&(lhs - rhs)));
            }
        }
        worst
    }

    /// `-<k| K(|k><k|) |k>`: the depletion rate of level `k` of the system basis.
    pub fn depletion_rate(&self, k: usize) -> f64 {
        let n = self.dim_s();
        -self.apply(&linalg::ket_bra(n, k, k))[(k, k)].re
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = GeneratorJson {
            dim_s: self.dim_s(),
            eta: self.eta,
            k: self.k.matrix(),
            blocks: self
                .per_block
                .iter()
                .map(|(omega, k)| BlockJson { omega: *omega, k: k.matrix() })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

/// Largest ratio of resolvent denominators tolerated before refusing.
const MAX_RESOLVENT_CONDITION: f64 = 1e12;

/// `K = -sum_m P Q~_m L_SB Q (L_0 + i omega_m - eta)^{-1} L_SB Q~_m P`, with the resolvent
/// applied entrywise in the eigenbasis of `H_0`.
pub fn vanhove_generator(
    pair: &ProjectorPair,
    spec: &ModelSpec,
    bohr: &BohrDecomposition,
    eta: f64,
) -> Result<MarkovGenerator> {
    let frame = generator_frame(pair, spec, bohr, eta)?;
    let scale = frame.nu.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
        + frame.omegas.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
        + eta;
    if scale / eta > MAX_RESOLVENT_CONDITION {
        let omega = frame.omegas.iter().cloned().fold(0.0, |a: f64, b| if b.abs() > a.abs() { b } else { a });
        return Err(Error::Conditioning {
            omega,
            detail: format!("eta = {eta:e} is negligible against the L_0 spectrum width {scale:e}"),
        });
    }
    let d = frame.dim();
    assemble(&frame, eta, |m, y| {
        let w = frame.omegas[m];
        CMat::from_fn(d, d, |a, b| {
            // (L_0 + i w - eta) acts on entry (a, b) as -i nu_ab + i w - eta
            y[(a, b)] / C64::new(-eta, w - frame.nu(a, b))
        })
    })
}

/// Same generator with the resolvent replaced by `-int_0^inf e^{-eta t} e^{(L_0 + i omega_m) t} dt`,
/// evaluated by composite Gauss-Legendre quadrature out to `40 / eta`.
pub fn vanhove_generator_time_integral(
    pair: &ProjectorPair,
    spec: &ModelSpec,
    bohr: &BohrDecomposition,
    eta: f64,
) -> Result<MarkovGenerator> {
    let frame = generator_frame(pair, spec, bohr, eta)?;
    let d = frame.dim();
    let horizon = 40.0 / eta;
    let rule = gauss_legendre(10);
    let mut cache: HashMap<u64, C64> = HashMap::new();
    let mut damped = |theta: f64| -> C64 {
        *cache.entry(theta.to_bits()).or_insert_with(|| {
            let rate = C64::new(-eta, theta);
            let panel = (2.0 / (theta.abs() + eta)).min(horizon);
            let panels = (horizon / panel).ceil() as usize;
            let h = horizon / panels as f64;
            let mut sum = C64::new(0.0, 0.0);
            for p in 0..panels {
                let t0 = p as f64 * h;
                for (s, w) in rule.nodes.iter().zip(&rule.weights) {
                    sum += (rate * (t0 + s * h)).exp() * (w * h);
                }
            }
            sum
        })
    };
    assemble(&frame, eta, |m, y| {
        let w = frame.omegas[m];
        let mut out = CMat::zeros(d, d);
        for b in 0..d {
            for a in 0..d {
                let v = y[(a, b)];
                if v != C64::new(0.0, 0.0) {
                    out[(a, b)] = -v * damped(w - frame.nu(a, b));
                }
            }
        }
        out
    })
}

fn generator_frame(
    pair: &ProjectorPair,
    spec: &ModelSpec,
    bohr: &BohrDecomposition,
    eta: f64,
) -> Result<FreeFrame> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::Validation(format!("eta must be positive, got {eta}")));
    }
    let frame = FreeFrame::new(spec, pair, bohr);
    super::require_centered(&frame, 1.0)?;
    Ok(frame)
}

/// Builds `K` column by column from `x -> -tr_B[Q~_m L_SB Res_m(Q L_SB Q~_m (x (x) Omega_B))]`.
fn assemble(
    frame: &FreeFrame,
    eta: f64,
    mut resolvent: impl FnMut(usize, &CMat) -> CMat,
) -> Result<MarkovGenerator> {
    let n = frame.dim_s;
    let nm = frame.omegas.len();
    let mut blocks = vec![CMat::zeros(n * n, n * n); nm];
    for col in 0..n * n {
        let mut x = CMat::zeros(n, n);
        x[(col % n, col / n)] = C64::new(1.0, 0.0);
        let lifted = frame.pair.lift(&x);
        for (m, block) in blocks.iter_mut().enumerate() {
            let inner = frame.pair.q(&frame.l_sb(&frame.bohr_project(m, &lifted)));
            if linalg::hs_norm(&inner) == 0.0 {
                continue;
            }
            let res = frame.pair.q(&resolvent(m, &inner));
            let outer = frame.pair.reduce(&frame.bohr_project(m, &frame.l_sb(&res)));
            block.set_column(col, &linalg::vectorize(&(-outer)));
        }
    }
    // the frame's system basis is V_S; conjugate each block back to the model basis
    let t = frame.system_basis.conjugate().kronecker(&frame.system_basis);
    let per_block: Vec<(f64, Superop)> = blocks
        .into_iter()
        .zip(&frame.omegas)
        .map(|(b, &w)| (w, Superop::from_matrix(n, &t * b * t.adjoint()).expect("square")))
        .collect();
    let k = per_block.iter().fold(Superop::zero(n), |acc, (_, b)| acc.add(b));
    Ok(MarkovGenerator { k, eta, per_block })
}

/// `e^{K tau} rho_S0` on a grid, by dense exponentiation of the generator.
pub fn markov_propagate(
    gen: &MarkovGenerator,
    rho_s0: &CMat,
    tau_grid: &[f64],
) -> Result<Trajectory> {
    let n = gen.dim_s();
    if rho_s0.nrows() != n || rho_s0.ncols() != n {
        return Err(Error::Dimension(format!(
            "system state is {}x{}, generator acts on {n}x{n}",
            rho_s0.nrows(),
            rho_s0.ncols()
        )));
    }
    linalg::validate_density(rho_s0, 1e-9, "initial system state")?;
    check_increasing(tau_grid)?;
    let states = tau_grid.iter().map(|&tau| gen.k.exp(tau).apply(rho_s0)).collect();
    Trajectory::new(tau_grid.to_vec(), states)
}
