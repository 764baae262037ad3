//! Liouvillians, the Bohr decomposition of `L_S`, and the projector pair `P = tr_B(.) (x) Omega_B`.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    self, hs_norm, identity, partial_trace_bath, random_matrix, CMat, HermitianEigen, Superop,
    C64, I, ZERO,
};
use crate::model::ModelSpec;

/// Dense `X -> -i[H, X]`.
pub fn liouvillian(h: &CMat) -> Result<Superop> {
    linalg::check_square(h, "Hamiltonian")?;
    linalg::ensure_hermitian(h, 1e-9, "Hamiltonian")?;
    Superop::commutator_generator(h)
}

/// `-i[H, X]` without forming a superoperator.
pub fn apply_liouvillian(h: &CMat, x: &CMat) -> CMat {
    linalg::commutator(h, x) * -I
}

/// Full-space Hamiltonian pieces `H_S (x) 1`, `1 (x) H_B`, `H_SB` for matrix-free action.
#[derive(Clone, Debug)]
pub struct Liouvillians {
    pub h_s_full: CMat,
    pub h_b_full: CMat,
    pub h_sb: CMat,
    pub lambda: f64,
}

impl Liouvillians {
    pub fn new(spec: &ModelSpec) -> Self {
        Self {
            h_s_full: spec.h_s.kronecker(&identity(spec.dim_b)),
            h_b_full: identity(spec.dim_s).kronecker(&spec.h_b),
            h_sb: spec.h_sb.clone(),
            lambda: spec.lambda,
        }
    }

    pub fn l_s(&self, x: &CMat) -> CMat {
        apply_liouvillian(&self.h_s_full, x)
    }

    pub fn l_b(&self, x: &CMat) -> CMat {
        apply_liouvillian(&self.h_b_full, x)
    }

    /// Coupling Liouvillian without the factor `lambda`.
    pub fn l_sb(&self, x: &CMat) -> CMat {
        apply_liouvillian(&self.h_sb, x)
    }

    pub fn l0(&self, x: &CMat) -> CMat {
        apply_liouvillian(&(&self.h_s_full + &self.h_b_full), x)
    }
}

/// One Bohr frequency `omega_m` with the eigenbasis index pairs `(i, j)`, `E_i - E_j = omega_m`.
#[derive(Clone, Debug, Serialize)]
pub struct BohrEntry {
    pub omega: f64,
    pub pairs: Vec<(usize, usize)>,
}

impl BohrEntry {
    pub fn rank(&self) -> usize {
        self.pairs.len()
    }
}

/// Eigenprojections `Q~_m` of `L_S = -i sum_m omega_m Q~_m`, sorted by ascending frequency.
#[derive(Clone, Debug)]
pub struct BohrDecomposition {
    pub entries: Vec<BohrEntry>,
    pub degeneracy_tol: f64,
    eigen: HermitianEigen,
    /// `label[i * n + j]` = index of the entry holding pair `(i, j)`.
    label: Vec<usize>,
}

pub fn bohr_decomposition(h_s: &CMat, tol: f64) -> Result<BohrDecomposition> {
    linalg::check_square(h_s, "H_S")?;
    linalg::ensure_hermitian(h_s, 1e-9, "H_S")?;
    let eigen = HermitianEigen::new(h_s);
    let n = eigen.dim();
    let e = &eigen.values;
    let scale = e.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let abs_tol = tol * scale.max(f64::MIN_POSITIVE);

    let mut diffs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            diffs.push((e[i] - e[j], i, j));
        }
    }
    diffs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut clusters: Vec<Vec<(f64, usize, usize)>> = Vec::new();
    for d in diffs {
        match clusters.last_mut() {
            Some(cl) if d.0 - cl.last().unwrap().0 <= abs_tol => cl.push(d),
            _ => clusters.push(vec![d]),
        }
    }
    let mut label = vec![0; n * n];
    let entries: Vec<BohrEntry> = clusters
        .into_iter()
        .enumerate()
        .map(|(m, cl)| {
            let mut omega = cl.iter().map(|d| d.0).sum::<f64>() / cl.len() as f64;
            // keep the diagonal cluster exactly at zero
            if cl.iter().any(|d| d.1 == d.2) {
                omega = 0.0;
            }
            let pairs: Vec<(usize, usize)> = cl.iter().map(|d| (d.1, d.2)).collect();
            for &(i, j) in &pairs {
                label[i * n + j] = m;
            }
            BohrEntry { omega, pairs }
        })
        .collect();
    Ok(BohrDecomposition { entries, degeneracy_tol: tol, eigen, label })
}

impl BohrDecomposition {
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        bohr_decomposition(&spec.h_s, spec.tolerances.degeneracy_tol)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim_s(&self) -> usize {
        self.eigen.dim()
    }

    pub fn omegas(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.omega).collect()
    }

    pub fn eigen(&self) -> &HermitianEigen {
        &self.eigen
    }

    /// Index of the entry with frequency closest to `omega`.
    pub fn index_of(&self, omega: f64) -> usize {
        let mut best = 0;
        for (k, e) in self.entries.iter().enumerate() {
            if (e.omega - omega).abs() < (self.entries[best].omega - omega).abs() {
                best = k;
            }
        }
        best
    }

    /// Entry of largest rank, ties broken toward smaller `|omega|`.
    pub fn most_degenerate(&self) -> usize {
        let mut best = 0;
        for (k, e) in self.entries.iter().enumerate() {
            let b = &self.entries[best];
            if e.rank() > b.rank() || (e.rank() == b.rank() && e.omega.abs() < b.omega.abs()) {
                best = k;
            }
        }
        best
    }

    /// Entry label of each system eigenbasis pair.
    pub fn label(&self, i: usize, j: usize) -> usize {
        self.label[i * self.dim_s() + j]
    }

    /// `Q~_m` on system operators.
    pub fn apply(&self, m: usize, x: &CMat) -> CMat {
        let n = self.dim_s();
        let y = self.eigen.to_eigenbasis(x);
        let masked = CMat::from_fn(n, n, |i, j| if self.label(i, j) == m { y[(i, j)] } else { ZERO });
        self.eigen.from_eigenbasis(&masked)
    }

    /// `(Q~_m (x) id_B)` on operators of the composite space.
    pub fn apply_full(&self, m: usize, x: &CMat, dim_b: usize) -> CMat {
        let n = self.dim_s();
        let v = self.eigen.vectors.kronecker(&identity(dim_b));
        let y = v.adjoint() * x * &v;
        let masked = CMat::from_fn(n * dim_b, n * dim_b, |a, b| {
            if self.label(a / dim_b, b / dim_b) == m {
                y[(a, b)]
            } else {
                ZERO
            }
        });
        &v * masked * v.adjoint()
    }

    pub fn dense(&self, m: usize) -> Result<Superop> {
        Superop::from_fn(self.dim_s(), |x| self.apply(m, x))
    }

    pub fn dense_full(&self, m: usize, dim_b: usize) -> Result<Superop> {
        Superop::from_fn(self.dim_s() * dim_b, |x| self.apply_full(m, x, dim_b))
    }

    /// `e^{L_S t} X = sum_m e^{-i omega_m t} Q~_m X`, using exact Bohr phases.
    pub fn evolve(&self, x: &CMat, t: f64) -> CMat {
        let n = self.dim_s();
        let y = self.eigen.to_eigenbasis(x);
        let rotated = CMat::from_fn(n, n, |i, j| {
            let w = self.entries[self.label(i, j)].omega;
            y[(i, j)] * C64::from_polar(1.0, -w * t)
        });
        self.eigen.from_eigenbasis(&rotated)
    }
}

/// `P X = tr_B(X) (x) Omega_B`, `Q = 1 - P`.
#[derive(Clone, Debug)]
pub struct ProjectorPair {
    pub dim_s: usize,
    pub dim_b: usize,
    pub reference: CMat,
}

pub fn build_projectors(spec: &ModelSpec) -> Result<ProjectorPair> {
    let defect = spec.stationarity_defect();
    if defect > spec.tolerances.stat_tol {
        return Err(Error::Validation(format!(
            "reference state is not stationary: ||[H_B, Omega_B]|| = {defect:.3e}"
        )));
    }
    Ok(ProjectorPair { dim_s: spec.dim_s, dim_b: spec.dim_b, reference: spec.omega_b.clone() })
}

impl ProjectorPair {
    pub fn with_reference(dim_s: usize, reference: CMat) -> Self {
        Self { dim_s, dim_b: reference.nrows(), reference }
    }

    pub fn dim(&self) -> usize {
        self.dim_s * self.dim_b
    }

    pub fn reduce(&self, x: &CMat) -> CMat {
        partial_trace_bath(x, self.dim_s, self.dim_b).expect("operator on the composite space")
    }

    pub fn lift(&self, x_s: &CMat) -> CMat {
        x_s.kronecker(&self.reference)
    }

    pub fn p(&self, x: &CMat) -> CMat {
        self.lift(&self.reduce(x))
    }

    pub fn q(&self, x: &CMat) -> CMat {
        x - self.p(x)
    }

    pub fn dense_p(&self) -> Result<Superop> {
        Superop::from_fn(self.dim(), |x| self.p(x))
    }

    pub fn dense_q(&self) -> Result<Superop> {
        Superop::from_fn(self.dim(), |x| self.q(x))
    }

    /// `||Q X||`: distance of `X` from the range of `P`.
    pub fn q_defect(&self, x: &CMat) -> f64 {
        hs_norm(&self.q(x))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProjectorReport {
    pub probes: usize,
    pub residuals: BTreeMap<String, f64>,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub const PROJECTOR_TOL: f64 = 1e-9;

pub fn verify_projector_algebra(
    pair: &ProjectorPair,
    spec: &ModelSpec,
    probes: usize,
) -> ProjectorReport {
    verify_projector_algebra_seeded(pair, spec, probes, 0)
}

/// Max residuals, relative to each probe's norm, of the projector identities.
pub fn verify_projector_algebra_seeded(
    pair: &ProjectorPair,
    spec: &ModelSpec,
    probes: usize,
    seed: u64,
) -> ProjectorReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ls = Liouvillians::new(spec);
    let mut residuals: BTreeMap<String, f64> = BTreeMap::new();
    let mut record = |name: &str, value: f64| {
        let slot = residuals.entry(name.to_string()).or_insert(0.0);
        *slot = slot.max(value);
    };
    for _ in 0..probes {
        let x = random_matrix(&mut rng, pair.dim());
        let nx = hs_norm(&x);
        let px = pair.p(&x);
        let qx = pair.q(&x);
        let rel = |m: CMat| hs_norm(&m) / nx;
        record("P^2-P", rel(pair.p(&px) - &px));
        record("Q^2-Q", rel(pair.q(&qx) - &qx));
        record("PQ", rel(pair.p(&qx)));
        record("QP", rel(pair.q(&px)));
        record("[P,L_S]", rel(pair.p(&ls.l_s(&x)) - ls.l_s(&px)));
        record("PL_B", rel(pair.p(&ls.l_b(&x))));
        record("L_BQ-L_B", rel(ls.l_b(&qx) - ls.l_b(&x)));
        record("PL_SBP", rel(pair.p(&ls.l_sb(&px)).scale(spec.lambda)));
    }
    let max_residual = residuals.values().cloned().fold(0.0, f64::max);
    ProjectorReport {
        probes,
        residuals,
        max_residual,
        tolerance: PROJECTOR_TOL,
        passed: max_residual <= PROJECTOR_TOL,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, expm, pauli_x, pauli_y, pauli_z, random_density, random_hermitian};
    use crate::model::{
        build_correlated_state, build_friedrichs_model, build_random_model, build_spin_bath_model,
        center_interaction, spin_bath_recipe,
    };

    #[test]
    fn liouvillian_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_hermitian(&mut rng, 3);
        let l = liouvillian(&h).unwrap();
        assert!(hs_norm(&l.apply(&identity(3))) < 1e-14);
        let lz = liouvillian(&pauli_z()).unwrap();
        assert!(hs_norm(&(lz.apply(&pauli_x()) - pauli_y().scale(2.0))) < 1e-14);
        assert!(hs_norm(&(lz.apply(&pauli_y()) + pauli_x().scale(2.0))) < 1e-14);
        let x = random_matrix(&mut rng, 3);
        let direct = (&h * &x - &x * &h) * -I;
        assert!(hs_norm(&(l.apply(&x) - direct)) < 1e-13);
        let bad = random_matrix(&mut rng, 3);
        assert!(matches!(liouvillian(&bad), Err(Error::Validation(_))));
    }

    #[test]
    fn liouvillian_is_anti_hermitian_and_trace_annihilating() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_hermitian(&mut rng, 3);
        let l = liouvillian(&h).unwrap();
        let m = l.matrix();
        assert!((m + m.adjoint()).iter().all(|z| z.norm() < 1e-13));
        let x = random_matrix(&mut rng, 3);
        assert!(linalg::trace(&l.apply(&x)).norm() < 1e-13);
    }

    #[test]
    fn bohr_examples() {
        let z = bohr_decomposition(&pauli_z(), 1e-8).unwrap();
        assert_eq!(z.omegas(), vec![-2.0, 0.0, 2.0]);
        assert_eq!(z.entries.iter().map(BohrEntry::rank).collect::<Vec<_>>(), vec![1, 2, 1]);
        let d = bohr_decomposition(&linalg::diag_real(&[0.0, 1.0, 3.0]), 1e-8).unwrap();
        assert_eq!(d.omegas(), vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
        let eq = bohr_decomposition(&linalg::diag_real(&[0.0, 1.0, 2.0]), 1e-8).unwrap();
        let one = eq.index_of(1.0);
        assert!((eq.entries[one].omega - 1.0).abs() < 1e-12);
        assert_eq!(eq.entries[one].rank(), 2);
        assert_eq!(eq.most_degenerate(), eq.index_of(0.0));
    }

    #[test]
    fn bohr_invariants_on_random_hamiltonian() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = random_hermitian(&mut rng, 3);
        let b = bohr_decomposition(&h, 1e-8).unwrap();
        let dense: Vec<Superop> = (0..b.len()).map(|m| b.dense(m).unwrap()).collect();
        let id = Superop::identity(3);
        let sum = dense.iter().fold(Superop::zero(3), |acc, q| acc.add(q));
        assert!(sum.max_abs_diff(&id) < 1e-10);
        for (m, qm) in dense.iter().enumerate() {
            for (n, qn) in dense.iter().enumerate() {
                let prod = qm.compose(qn);
                let want = if m == n { qm.clone() } else { Superop::zero(3) };
                assert!(prod.max_abs_diff(&want) < 1e-10);
            }
        }
        let ls = liouvillian(&h).unwrap();
        let resolved = dense
            .iter()
            .zip(&b.entries)
            .fold(Superop::zero(3), |acc, (q, e)| acc.add(&q.scale(c(0.0, -e.omega))));
        assert!(resolved.max_abs_diff(&ls) < 1e-10);
        let x = random_matrix(&mut rng, 3);
        for &t in &[0.1, 1.0, 10.0] {
            let direct = ls.exp(t).apply(&x);
            assert!(hs_norm(&(b.evolve(&x, t) - direct)) < 1e-9);
        }
    }

    #[test]
    fn full_space_projection_matches_tensor_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_hermitian(&mut rng, 2);
        let b = bohr_decomposition(&h, 1e-8).unwrap();
        let xs = random_matrix(&mut rng, 2);
        let xb = random_matrix(&mut rng, 3);
        for m in 0..b.len() {
            let full = b.apply_full(m, &xs.kronecker(&xb), 3);
            let want = b.apply(m, &xs).kronecker(&xb);
            assert!(hs_norm(&(full - want)) < 1e-12);
        }
    }

    #[test]
    fn projector_examples() {
        let spec = build_random_model(2, 3, 0.3, 9).unwrap();
        let pair = build_projectors(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rs = random_density(&mut rng, 2);
        let fact = rs.kronecker(&spec.omega_b);
        assert!(hs_norm(&(pair.p(&fact) - &fact)) < 1e-14);
        assert!(hs_norm(&pair.q(&fact)) < 1e-14);
        let rho = random_density(&mut rng, 6);
        let want = linalg::tensor(&partial_trace_bath(&rho, 2, 3).unwrap(), &spec.omega_b).unwrap();
        assert!(hs_norm(&(pair.p(&rho) - want)) < 1e-14);
        let dense = pair.dense_p().unwrap();
        assert!(hs_norm(&(dense.apply(&rho) - pair.p(&rho))) < 1e-13);
    }

    #[test]
    fn non_stationary_reference_rejected() {
        let mut spec = build_spin_bath_model(1, 1.0, &[0.2]).unwrap();
        spec.omega_b = CMat::from_element(2, 2, c(0.5, 0.0));
        let err = build_projectors(&spec).unwrap_err();
        assert!(err.to_string().contains("[H_B, Omega_B]"));
    }

    #[test]
    fn projector_algebra_reports() {
        let m = build_friedrichs_model(5, 1.0, (0.8, 1.2), |_| 0.05).unwrap();
        let spec = center_interaction(&m.spec.with_lambda(0.2)).unwrap();
        let pair = build_projectors(&spec).unwrap();
        let rep = verify_projector_algebra(&pair, &spec, 10);
        assert!(rep.passed && rep.max_residual <= 1e-10, "{rep:?}");

        let mut mf = build_spin_bath_model(1, 1.0, &[0.3]).unwrap().with_lambda(0.5);
        mf.h_sb = pauli_x().kronecker(&identity(2));
        let pair = build_projectors(&mf).unwrap();
        let rep = verify_projector_algebra(&pair, &mf, 5);
        assert!(!rep.passed && rep.residuals["PL_SBP"] > 1e-3);

        let empty = verify_projector_algebra(&pair, &mf, 0);
        assert!(empty.passed && empty.max_residual == 0.0);
    }

    #[test]
    fn p_commutes_with_free_system_evolution() {
        let spec = build_random_model(2, 2, 0.1, 4).unwrap();
        let pair = build_projectors(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_matrix(&mut rng, 4);
        let u = expm(&spec.h_s.kronecker(&identity(2)).map(|z| z * c(0.0, -1.7)));
        let evolve = |y: &CMat| &u * y * u.adjoint();
        assert!(hs_norm(&(pair.p(&evolve(&x)) - evolve(&pair.p(&x)))) < 1e-10);
    }

    #[test]
    fn q_vanishes_only_on_reference_products() {
        let spec = build_spin_bath_model(2, 1.0, &[0.1, 0.2]).unwrap();
        let pair = build_projectors(&spec).unwrap();
        let rho = build_correlated_state(&spec, &spin_bath_recipe(&spec, 0.5)).unwrap().rho;
        assert!(pair.q_defect(&rho) > 1e-3);
        let fact = pair.p(&rho);
        assert!(pair.q_defect(&fact) < 1e-14);
        let other = linalg::ket_bra(2, 0, 0).kronecker(&identity(4).scale(0.25));
        assert!(pair.q_defect(&other) > 1e-3);
    }
}
