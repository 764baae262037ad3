//! Finite system + bath models, reference states, correlated initial states
//! and the interaction-centering transformation.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, c, hs_norm, identity, ket_bra, partial_trace_bath, tensor, trace, CMat, HermitianEigen,
    MAX_MATRIX_FREE_DIM, ZERO,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub herm_tol: f64,
    pub stat_tol: f64,
    /// Relative to the spectral width of `H_S` when clustering Bohr frequencies.
    pub degeneracy_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { herm_tol: 1e-9, stat_tol: 1e-9, degeneracy_tol: 1e-8 }
    }
}

/// Time range over which a finite bath stands in for a mixing reservoir.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BathWindow {
    pub t_rec: f64,
    pub usable_fraction: f64,
}

impl BathWindow {
    pub const DEFAULT_FRACTION: f64 = 0.5;

    pub fn new(t_rec: f64) -> Result<Self> {
        if !(t_rec > 0.0) || !t_rec.is_finite() {
            return Err(Error::Validation(format!("recurrence time must be positive, got {t_rec}")));
        }
        Ok(Self { t_rec, usable_fraction: Self::DEFAULT_FRACTION })
    }

    /// `t_rec = 2 pi / (smallest gap between distinct eigenvalues of H_B)`.
    pub fn from_bath_hamiltonian(h_b: &CMat, tol: f64) -> Result<Self> {
        let e = HermitianEigen::new(h_b).values;
        let scale = e.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(1.0);
        let gap = e
            .windows(2)
            .map(|w| w[1] - w[0])
            .filter(|g| *g > tol * scale)
            .fold(f64::INFINITY, f64::min);
        if !gap.is_finite() {
            return Err(Error::Validation(
                "bath Hamiltonian has no nonzero level gap; no recurrence time".into(),
            ));
        }
        Self::new(TAU / gap)
    }

    pub fn usable(&self) -> f64 {
        self.t_rec * self.usable_fraction
    }

    pub fn check(&self, t: f64, detail: impl FnOnce() -> String) -> Result<()> {
        // slack for grids built as k * step
        if t > self.usable() * (1.0 + 1e-12) {
            return Err(Error::Window {
                time: t,
                window: self.usable(),
                t_rec: self.t_rec,
                detail: detail(),
            });
        }
        Ok(())
    }
}

/// Complete description of an S+B model with coupling `lambda`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(rename = "dimS")]
    pub dim_s: usize,
    #[serde(rename = "dimB")]
    pub dim_b: usize,
    #[serde(rename = "H_S", with = "crate::codec::matrix")]
    pub h_s: CMat,
    #[serde(rename = "H_B", with = "crate::codec::matrix")]
    pub h_b: CMat,
    #[serde(rename = "H_SB", with = "crate::codec::matrix")]
    pub h_sb: CMat,
    pub lambda: f64,
    #[serde(with = "crate::codec::matrix")]
    pub omega_b: CMat,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Present for models built as quasi-continuum surrogates; guards apply only then.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<BathWindow>,
}

impl ModelSpec {
    pub fn dim(&self) -> usize {
        self.dim_s * self.dim_b
    }

    pub fn validate(&self) -> Result<()> {
        let tol = self.tolerances.herm_tol;
        let (ds, db) = (self.dim_s, self.dim_b);
        if ds == 0 || db == 0 {
            return Err(Error::Validation("dimensions must be positive".into()));
        }
        if ds * db > MAX_MATRIX_FREE_DIM {
            return Err(Error::DimensionLimit {
                dim: ds * db,
                limit: MAX_MATRIX_FREE_DIM,
                context: "model",
            });
        }
        let shape_ok = |m: &CMat, n: usize| m.nrows() == n && m.ncols() == n;
        if !shape_ok(&self.h_s, ds)
            || !shape_ok(&self.h_b, db)
            || !shape_ok(&self.h_sb, ds * db)
            || !shape_ok(&self.omega_b, db)
        {
            return Err(Error::Dimension(format!(
                "model matrices do not match dimS={ds}, dimB={db}"
            )));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Validation(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        linalg::ensure_hermitian(&self.h_s, tol, "H_S")?;
        linalg::ensure_hermitian(&self.h_b, tol, "H_B")?;
        linalg::ensure_hermitian(&self.h_sb, tol, "H_SB")?;
        linalg::validate_density(&self.omega_b, tol.max(1e-9), "Omega_B")?;
        let stat = self.stationarity_defect();
        if stat > self.tolerances.stat_tol {
            return Err(Error::Validation(format!(
                "Omega_B is not stationary: ||[H_B, Omega_B]|| = {stat:.3e}"
            )));
        }
        Ok(())
    }

    pub fn stationarity_defect(&self) -> f64 {
        hs_norm(&linalg::commutator(&self.h_b, &self.omega_b))
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..self.clone() }
    }

    /// `H_S (x) 1 + 1 (x) H_B`.
    pub fn free_hamiltonian(&self) -> CMat {
        self.h_s.kronecker(&identity(self.dim_b)) + identity(self.dim_s).kronecker(&self.h_b)
    }

    /// `H_0 + lambda H_SB`.
    pub fn total_hamiltonian(&self) -> CMat {
        self.free_hamiltonian() + self.h_sb.map(|z| z * self.lambda)
    }

    /// Reference state tensored with `X_S`.
    pub fn with_reference(&self, x_s: &CMat) -> CMat {
        x_s.kronecker(&self.omega_b)
    }

    pub fn check_window(&self, t: f64, detail: impl FnOnce() -> String) -> Result<()> {
        match &self.window {
            Some(w) => w.check(t, detail),
            None => Ok(()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// `e^{-beta H} / tr e^{-beta H}`.
pub fn thermal_state(h: &CMat, beta: f64) -> CMat {
    let eig = HermitianEigen::new(h);
    let e_min = eig.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = eig.values.iter().map(|e| (-beta * (e - e_min)).exp()).collect();
    let z: f64 = weights.iter().sum();
    eig.apply_fn(|e| (-beta * (e - e_min)).exp() / z)
}

/// Bath operators `L_i` producing `rho0 = sum_i L_i (1_S (x) Omega_B) L_i^dagger`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedStateRecipe {
    #[serde(with = "crate::codec::matrix_list")]
    pub ops: Vec<CMat>,
    #[serde(default = "default_true")]
    pub normalize: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug)]
pub struct CorrelatedState {
    pub rho: CMat,
    /// Trace of the unnormalized sum; the state was divided by it when normalizing.
    pub trace_factor: f64,
}

pub fn build_correlated_state(
    spec: &ModelSpec,
    recipe: &CorrelatedStateRecipe,
) -> Result<CorrelatedState> {
    let d = spec.dim();
    let sector = tensor(&identity(spec.dim_s), &spec.omega_b)?;
    let mut rho = CMat::zeros(d, d);
    for (k, l) in recipe.ops.iter().enumerate() {
        if l.nrows() != d || l.ncols() != d {
            return Err(Error::Dimension(format!(
                "recipe operator {k} is {}x{}, expected {d}x{d}",
                l.nrows(),
                l.ncols()
            )));
        }
        rho += l * &sector * l.adjoint();
    }
    let tr = trace(&rho).re;
    let scale = rho.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    if recipe.ops.is_empty() || tr.abs() <= 1e-14 * scale {
        return Err(Error::DegenerateRecipe(
            "the recipe annihilates the sector state (zero trace)".into(),
        ));
    }
    // Hermitian by construction; clean roundoff
    rho = (&rho + rho.adjoint()).scale(0.5);
    if recipe.normalize {
        rho.unscale_mut(tr);
    }
    Ok(CorrelatedState { rho, trace_factor: tr })
}

/// Absorbs the mean-field part `tr_B[(1 (x) Omega_B) H_SB]` into `H_S` so that `P L_SB P = 0`.
pub fn center_interaction(spec: &ModelSpec) -> Result<ModelSpec> {
    spec.validate()?;
    let weighted = tensor(&identity(spec.dim_s), &spec.omega_b)? * &spec.h_sb;
    let mean = partial_trace_bath(&weighted, spec.dim_s, spec.dim_b)?;
    let mean = (&mean + mean.adjoint()).scale(0.5);
    let mut out = spec.clone();
    out.h_s = &spec.h_s + mean.scale(spec.lambda);
    out.h_sb = &spec.h_sb - tensor(&mean, &identity(spec.dim_b))?;
    Ok(out)
}

/// Coupling profile of a Friedrichs bath.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CouplingProfile {
    Flat { g: f64 },
    /// `g * exp(-(w - center)^2 / (2 width^2))`.
    Gaussian { g: f64, center: f64, width: f64 },
}

impl CouplingProfile {
    pub fn at(&self, w: f64) -> f64 {
        match *self {
            CouplingProfile::Flat { g } => g,
            CouplingProfile::Gaussian { g, center, width } => {
                g * (-(w - center).powi(2) / (2.0 * width * width)).exp()
            }
        }
    }
}

/// Two-level system coupled to `N` modes, truncated to at most one bath excitation.
///
/// System basis: `0 = |g>`, `1 = |e>`. Bath basis: `0 = vacuum`, `k = one excitation in mode k`.
#[derive(Clone, Debug)]
pub struct FriedrichsModel {
    pub spec: ModelSpec,
    pub frequencies: Vec<f64>,
    pub couplings: Vec<f64>,
    /// Nominal level spacing `(w_max - w_min)/(N - 1)`; zero for a single mode.
    pub spacing: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FriedrichsParams {
    pub n_modes: usize,
    pub omega0: f64,
    pub band: [f64; 2],
    pub profile: CouplingProfile,
    /// Relative frequency perturbation amplitude (0.01 = +-1%).
    #[serde(default)]
    pub jitter: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub lambda: f64,
}

impl FriedrichsParams {
    /// Default quasi-continuum: 40 modes across `[0.75, 1.25]`, flat coupling tuned so the
    /// golden-rule rate `2 pi g^2 / spacing` equals 1.
    pub fn default_demo() -> Self {
        let spacing = 0.5 / 39.0;
        Self {
            n_modes: 40,
            omega0: 1.0,
            band: [0.75, 1.25],
            profile: CouplingProfile::Flat { g: (spacing / std::f64::consts::TAU).sqrt() },
            jitter: 0.0,
            seed: 0,
            lambda: 0.0,
        }
    }
}

pub fn build_friedrichs_model(
    n: usize,
    omega0: f64,
    band: (f64, f64),
    coupling_profile: impl Fn(f64) -> f64,
) -> Result<FriedrichsModel> {
    build_friedrichs_with(n, omega0, band, coupling_profile, 0.0, 0)
}

pub fn build_friedrichs(params: &FriedrichsParams) -> Result<FriedrichsModel> {
    let profile = params.profile;
    let mut m = build_friedrichs_with(
        params.n_modes,
        params.omega0,
        (params.band[0], params.band[1]),
        |w| profile.at(w),
        params.jitter,
        params.seed,
    )?;
    m.spec.lambda = params.lambda;
    Ok(m)
}

fn build_friedrichs_with(
    n: usize,
    omega0: f64,
    band: (f64, f64),
    coupling_profile: impl Fn(f64) -> f64,
    jitter: f64,
    seed: u64,
) -> Result<FriedrichsModel> {
    let (w_min, w_max) = band;
    if n == 0 {
        return Err(Error::Validation("Friedrichs model needs N >= 1 modes".into()));
    }
    let degenerate_ok = n == 1 && w_min == w_max;
    if !(w_min < w_max) && !degenerate_ok {
        return Err(Error::Validation(format!("empty band [{w_min}, {w_max}]")));
    }
    let dim = 2 * (n + 1);
    if dim > MAX_MATRIX_FREE_DIM {
        return Err(Error::DimensionLimit { dim, limit: MAX_MATRIX_FREE_DIM, context: "Friedrichs model" });
    }
    let spacing = if n > 1 { (w_max - w_min) / (n - 1) as f64 } else { 0.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frequencies: Vec<f64> = (0..n)
        .map(|k| {
            let w = if n > 1 { w_min + spacing * k as f64 } else { 0.5 * (w_min + w_max) };
            if jitter > 0.0 {
                w * (1.0 + jitter * rng.gen_range(-1.0..1.0))
            } else {
                w
            }
        })
        .collect();
    let couplings: Vec<f64> = frequencies.iter().map(|&w| coupling_profile(w)).collect();

    let db = n + 1;
    let h_s = linalg::diag_real(&[0.0, omega0]);
    let mut hb = vec![0.0];
    hb.extend(&frequencies);
    let h_b = linalg::diag_real(&hb);
    let sigma_plus = ket_bra(2, 1, 0);
    let mut h_sb = CMat::zeros(2 * db, 2 * db);
    for (k, g) in couplings.iter().enumerate() {
        // sigma_+ (x) b_k with b_k = |vac><k|
        let term = sigma_plus.kronecker(&ket_bra(db, 0, k + 1)).map(|z| z * *g);
        h_sb += &term + term.adjoint();
    }
    let omega_b = ket_bra(db, 0, 0);
    let window = if n > 1 {
        Some(BathWindow::new(TAU / min_gap(&frequencies).max(f64::MIN_POSITIVE))?)
    } else {
        Some(BathWindow::from_bath_hamiltonian(&h_b, 1e-12)?)
    };
    let spec = ModelSpec {
        dim_s: 2,
        dim_b: db,
        h_s,
        h_b,
        h_sb,
        lambda: 0.0,
        omega_b,
        tolerances: Tolerances::default(),
        window,
    };
    spec.validate()?;
    Ok(FriedrichsModel { spec, frequencies, couplings, spacing })
}

fn min_gap(freqs: &[f64]) -> f64 {
    let mut sorted = freqs.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

/// `sum_k w_k (b_k + b_k^dagger)` on the truncated Friedrichs bath.
pub fn friedrichs_quadrature(n_modes: usize, weights: &[f64]) -> CMat {
    let db = n_modes + 1;
    let mut x = CMat::zeros(db, db);
    for (k, w) in weights.iter().enumerate().take(n_modes) {
        x[(0, k + 1)] = c(*w, 0.0);
        x[(k + 1, 0)] = c(*w, 0.0);
    }
    x
}

/// `|vac><phi| + |phi><vac|` and `|phi><phi|` for the normalized mode `phi ~ sum_k w_k |k>`.
pub fn friedrichs_local_mode(n_modes: usize, weights: &[f64]) -> (CMat, CMat) {
    let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    let unit: Vec<f64> = weights.iter().map(|w| w / norm).collect();
    let quad = friedrichs_quadrature(n_modes, &unit);
    let db = n_modes + 1;
    let mut occ = CMat::zeros(db, db);
    for (a, wa) in unit.iter().enumerate() {
        for (b, wb) in unit.iter().enumerate() {
            occ[(a + 1, b + 1)] = c(wa * wb, 0.0);
        }
    }
    (quad, occ)
}

/// Single operator `exp(-i theta sigma_x (x) B) (|e><e| (x) 1)`, with `B` the
/// normalized coupled-mode quadrature: an atom entangled with the field near it.
pub fn friedrichs_entangled_recipe(model: &FriedrichsModel, theta: f64) -> CorrelatedStateRecipe {
    let n = model.frequencies.len();
    let (quad, _) = friedrichs_local_mode(n, &model.couplings);
    let gen = linalg::pauli_x().kronecker(&quad);
    let u = linalg::expm(&gen.map(|z| z * c(0.0, -theta)));
    let excite = ket_bra(2, 1, 1).kronecker(&identity(n + 1));
    CorrelatedStateRecipe { ops: vec![u * excite], normalize: true }
}

/// `P_S (x) 1_B`: yields the factorized state `P_S / tr P_S (x) Omega_B`.
pub fn factorized_recipe(system_projector: &CMat, dim_b: usize) -> CorrelatedStateRecipe {
    CorrelatedStateRecipe {
        ops: vec![system_projector.kronecker(&identity(dim_b))],
        normalize: true,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinBathParams {
    pub n_spins: usize,
    pub beta: f64,
    pub couplings: Vec<f64>,
    /// Bath spin splittings; defaults to `1 + 0.3 k + 0.1 k^2` when empty.
    #[serde(default)]
    pub frequencies: Vec<f64>,
    #[serde(default = "default_omega_s")]
    pub omega_s: f64,
    #[serde(default)]
    pub lambda: f64,
}

fn default_omega_s() -> f64 {
    1.0
}

impl SpinBathParams {
    pub fn default_demo() -> Self {
        Self {
            n_spins: 3,
            beta: 1.0,
            couplings: vec![0.3, 0.2, 0.1],
            frequencies: Vec::new(),
            omega_s: 1.0,
            lambda: 0.1,
        }
    }
}

fn embed_spin(op: &CMat, site: usize, n_sites: usize) -> CMat {
    let mut out = CMat::identity(1, 1);
    for k in 0..n_sites {
        let factor = if k == site { op.clone() } else { identity(2) };
        out = out.kronecker(&factor);
    }
    out
}

pub fn default_spin_frequencies(n: usize) -> Vec<f64> {
    (0..n).map(|k| 1.0 + 0.3 * k as f64 + 0.1 * (k * k) as f64).collect()
}

/// Qubit `(omega_s/2) sigma_z` coupled through `sigma_x (x) sigma_x^(k)` to `N` bath qubits.
pub fn build_spin_bath_model(n: usize, beta: f64, couplings: &[f64]) -> Result<ModelSpec> {
    build_spin_bath(&SpinBathParams {
        n_spins: n,
        beta,
        couplings: couplings.to_vec(),
        frequencies: Vec::new(),
        omega_s: 1.0,
        lambda: 0.0,
    })
}

pub fn build_spin_bath(params: &SpinBathParams) -> Result<ModelSpec> {
    let n = params.n_spins;
    if n == 0 {
        return Err(Error::Validation("spin bath needs N >= 1".into()));
    }
    if n >= 8 || (1usize << (n + 1)) > MAX_MATRIX_FREE_DIM {
        return Err(Error::DimensionLimit {
            dim: 1usize << (n + 1).min(20),
            limit: MAX_MATRIX_FREE_DIM,
            context: "spin bath",
        });
    }
    if params.couplings.len() != n {
        return Err(Error::Validation(format!(
            "{} couplings given for {n} bath spins",
            params.couplings.len()
        )));
    }
    let freqs = if params.frequencies.is_empty() {
        default_spin_frequencies(n)
    } else if params.frequencies.len() == n {
        params.frequencies.clone()
    } else {
        return Err(Error::Validation("one frequency per bath spin required".into()));
    };
    let db = 1usize << n;
    let sz = linalg::pauli_z();
    let sx = linalg::pauli_x();
    let mut h_b = CMat::zeros(db, db);
    let mut coupling_b = Vec::with_capacity(n);
    for k in 0..n {
        h_b += embed_spin(&sz, k, n).map(|z| z * (0.5 * freqs[k]));
        coupling_b.push(embed_spin(&sx, k, n));
    }
    let h_s = sz.map(|z| z * (0.5 * params.omega_s));
    let mut h_sb = CMat::zeros(2 * db, 2 * db);
    for (g, b) in params.couplings.iter().zip(&coupling_b) {
        h_sb += sx.kronecker(b).map(|z| z * *g);
    }
    let omega_b = thermal_state(&h_b, params.beta);
    let spec = ModelSpec {
        dim_s: 2,
        dim_b: db,
        h_s,
        h_b: h_b.clone(),
        h_sb,
        lambda: params.lambda,
        omega_b,
        tolerances: Tolerances::default(),
        window: Some(BathWindow::from_bath_hamiltonian(&h_b, 1e-9)?),
    };
    spec.validate()?;
    Ok(spec)
}

/// Entangling recipe `exp(-i theta sigma_x (x) sigma_x^(0))` for the spin bath.
pub fn spin_bath_recipe(spec: &ModelSpec, theta: f64) -> CorrelatedStateRecipe {
    let n = spec.dim_b.trailing_zeros() as usize;
    let gen = linalg::pauli_x().kronecker(&embed_spin(&linalg::pauli_x(), 0, n));
    let u = linalg::expm(&gen.map(|z| z * c(0.0, -theta)));
    CorrelatedStateRecipe { ops: vec![u], normalize: true }
}

/// Random small model with a thermal (beta = 1) reference state. Carries no bath window.
pub fn build_random_model(dim_s: usize, dim_b: usize, lambda: f64, seed: u64) -> Result<ModelSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h_s = linalg::random_hermitian(&mut rng, dim_s);
    let h_b = linalg::random_hermitian(&mut rng, dim_b);
    let h_sb = linalg::random_hermitian(&mut rng, dim_s * dim_b);
    let omega_b = thermal_state(&h_b, 1.0);
    let spec = ModelSpec {
        dim_s,
        dim_b,
        h_s,
        h_b,
        h_sb,
        lambda,
        omega_b,
        tolerances: Tolerances::default(),
        window: None,
    };
    spec.validate()?;
    Ok(spec)
}

/// A random two-operator recipe on the model's full space.
pub fn random_recipe(spec: &ModelSpec, seed: u64) -> CorrelatedStateRecipe {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = spec.dim();
    CorrelatedStateRecipe {
        ops: vec![linalg::random_matrix(&mut rng, d), linalg::random_matrix(&mut rng, d)],
        normalize: true,
    }
}

/// Total excitation number `|e><e| (x) 1 + 1 (x) sum_k |k><k|` of a Friedrichs model.
pub fn friedrichs_excitation_number(model: &FriedrichsModel) -> CMat {
    let db = model.spec.dim_b;
    let mut nb = CMat::identity(db, db);
    nb[(0, 0)] = ZERO;
    ket_bra(2, 1, 1).kronecker(&identity(db)) + identity(2).kronecker(&nb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{commutator, trace_distance, HermitianEigen, ONE};

    #[test]
    fn friedrichs_boundaries_and_window() {
        assert!(build_friedrichs_model(0, 1.0, (0.5, 1.5), |_| 0.1).is_err());
        let one = build_friedrichs_model(1, 1.0, (1.0, 1.0), |_| 0.1).unwrap();
        assert_eq!(one.spec.dim_b, 2);
        let fifty = build_friedrichs_model(50, 1.0, (0.5, 1.5), |_| 0.01).unwrap();
        let t_rec = fifty.spec.window.unwrap().t_rec;
        assert!((t_rec - TAU * 49.0).abs() < 1e-9 * t_rec);
        assert!(matches!(
            build_friedrichs_model(200, 1.0, (0.5, 1.5), |_| 0.01),
            Err(Error::DimensionLimit { .. })
        ));
    }

    #[test]
    fn friedrichs_single_mode_rabi_oscillation() {
        // |e,vac> <-> |g,1> resonant two-level block: P_e(t) = cos^2(g t).
        let g = 0.1;
        let mut m = build_friedrichs_model(1, 1.0, (1.0, 1.0), |_| g).unwrap();
        m.spec.lambda = 1.0;
        let h = m.spec.total_hamiltonian();
        let start = ket_bra(2, 1, 1).kronecker(&ket_bra(2, 0, 0));
        let pe = ket_bra(2, 1, 1).kronecker(&identity(2));
        let eig = HermitianEigen::new(&h);
        for &t in &[0.0, 3.0, 7.85, 12.0, 31.4] {
            let rho = eig.evolve(&start, t);
            let p = trace(&(&pe * rho)).re;
            assert!((p - (g * t).cos().powi(2)).abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn friedrichs_conserves_excitations() {
        let mut m = build_friedrichs_model(6, 1.0, (0.8, 1.2), |_| 0.05).unwrap();
        m.spec.lambda = 0.7;
        let n_op = friedrichs_excitation_number(&m);
        let h = m.spec.total_hamiltonian();
        assert!(hs_norm(&commutator(&h, &n_op)) < 1e-10);
        // a single-excitation state never leaks out of its sector
        let psi = ket_bra(2, 1, 1).kronecker(&ket_bra(7, 0, 0));
        let rho = HermitianEigen::new(&h).evolve(&psi, 9.0);
        let eig_n = HermitianEigen::new(&n_op);
        let mut proj = CMat::zeros(14, 14);
        for (k, v) in eig_n.values.iter().enumerate() {
            if (v - 1.0).abs() < 1e-9 {
                let col = eig_n.vectors.column(k).into_owned();
                proj += &col * col.adjoint();
            }
        }
        let leak = hs_norm(&(&rho - &proj * &rho * &proj));
        assert!(leak < 1e-10);
    }

    #[test]
    fn spin_bath_thermal_state_limits() {
        let hot = build_spin_bath_model(2, 0.0, &[0.1, 0.2]).unwrap();
        assert!(hs_norm(&(&hot.omega_b - identity(4).scale(0.25))) < 1e-14);
        let freqs = default_spin_frequencies(2);
        let norm: f64 = freqs.iter().sum::<f64>() / 2.0;
        let cold = build_spin_bath_model(2, 1e3 / norm, &[0.1, 0.2]).unwrap();
        // ground state of sum_k (w_k/2) sigma_z^(k) is |11>
        assert!(hs_norm(&(&cold.omega_b - ket_bra(4, 3, 3))) < 1e-6);
        let s = build_spin_bath_model(3, 1.0, &[0.3, 0.2, 0.1]).unwrap();
        assert!((trace(&s.omega_b) - ONE).norm() < 1e-14);
        assert!(hs_norm(&commutator(&s.h_b, &s.omega_b)) < 1e-14);
        assert!(build_spin_bath_model(8, 1.0, &[0.1; 8]).is_err());
    }

    #[test]
    fn centering_cases() {
        // sigma_x (x) b with tr(b Omega_B) = 0: unchanged
        let s = build_spin_bath_model(1, 1.0, &[0.3]).unwrap().with_lambda(0.2);
        let centered = center_interaction(&s).unwrap();
        assert!(hs_norm(&(&centered.h_sb - &s.h_sb)) < 1e-14);
        assert!(hs_norm(&(&centered.h_s - &s.h_s)) < 1e-14);
        // pure mean field sigma_x (x) 1
        let mut mf = s.clone();
        mf.h_sb = linalg::pauli_x().kronecker(&identity(2));
        let centered = center_interaction(&mf).unwrap();
        assert!(hs_norm(&centered.h_sb) < 1e-14);
        let want = &mf.h_s + linalg::pauli_x().scale(0.2);
        assert!(hs_norm(&(&centered.h_s - want)) < 1e-14);
    }

    #[test]
    fn centering_preserves_total_hamiltonian_and_is_idempotent() {
        let spec = build_random_model(2, 3, 0.37, 5).unwrap();
        let once = center_interaction(&spec).unwrap();
        let twice = center_interaction(&once).unwrap();
        assert!(hs_norm(&(once.total_hamiltonian() - spec.total_hamiltonian())) < 1e-12);
        assert!(hs_norm(&(&twice.h_s - &once.h_s)) < 1e-12);
        assert!(hs_norm(&(&twice.h_sb - &once.h_sb)) < 1e-12);
    }

    #[test]
    fn correlated_state_cases() {
        let spec = build_random_model(2, 3, 0.3, 1).unwrap();
        // factorized special case
        let p0 = ket_bra(2, 0, 0);
        let st = build_correlated_state(&spec, &factorized_recipe(&p0, 3)).unwrap();
        assert!(hs_norm(&(&st.rho - p0.kronecker(&spec.omega_b))) < 1e-14);
        // unitary recipe keeps trace dimS before normalization
        let u = HermitianEigen::new(&linalg::random_hermitian(
            &mut ChaCha8Rng::seed_from_u64(2),
            6,
        ))
        .propagator(1.3);
        let st = build_correlated_state(
            &spec,
            &CorrelatedStateRecipe { ops: vec![u], normalize: true },
        )
        .unwrap();
        assert!((st.trace_factor - 2.0).abs() < 1e-12);
        assert!((trace(&st.rho) - ONE).norm() < 1e-13);
        // zero recipe
        let zero = CorrelatedStateRecipe { ops: vec![CMat::zeros(6, 6)], normalize: true };
        assert!(matches!(build_correlated_state(&spec, &zero), Err(Error::DegenerateRecipe(_))));
        let wrong = CorrelatedStateRecipe { ops: vec![identity(4)], normalize: true };
        assert!(matches!(build_correlated_state(&spec, &wrong), Err(Error::Dimension(_))));
    }

    #[test]
    fn controlled_coupling_creates_correlations() {
        let s = build_spin_bath_model(2, 1.0, &[0.1, 0.2]).unwrap();
        let recipe = spin_bath_recipe(&s, 0.5);
        let rho = build_correlated_state(&s, &recipe).unwrap().rho;
        let rs = partial_trace_bath(&rho, 2, 4).unwrap();
        let product = rs.kronecker(&s.omega_b);
        assert!(trace_distance(&rho, &product).unwrap() > 1e-3);
    }

    #[test]
    fn json_roundtrip() {
        let spec = build_spin_bath_model(2, 0.5, &[0.1, 0.2]).unwrap();
        let text = spec.to_json().unwrap();
        assert!(text.contains("\"dimS\"") && text.contains("\"H_SB\""));
        let back = ModelSpec::from_json(&text).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn non_stationary_reference_rejected() {
        let mut spec = build_spin_bath_model(1, 1.0, &[0.2]).unwrap();
        spec.omega_b = CMat::from_element(2, 2, c(0.5, 0.0));
        assert!(matches!(spec.validate(), Err(Error::Validation(_))));
    }
}
