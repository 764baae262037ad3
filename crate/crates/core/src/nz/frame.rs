//! The eigenbasis of the free Hamiltonian `H_0 = H_S (x) 1 + 1 (x) H_B`.
//!
//! In this basis `L_0` acts entrywise, `Y_ab -> -i nu_ab Y_ab`, with
//! `nu_ab = omega_m(i, j) + e_mu - e_nu` for `a = (i, mu)`, `b = (j, nu)`.
//! The system part uses the clustered Bohr frequencies so phases are exact.

use crate::linalg::{CMat, HermitianEigen, SparseMatrix, C64, I, ZERO};
use crate::liouville::{BohrDecomposition, ProjectorPair};
use crate::model::ModelSpec;

#[derive(Clone, Debug)]
pub struct FreeFrame {
    pub dim_s: usize,
    pub dim_b: usize,
    /// `V_S (x) V_B`.
    pub basis: CMat,
    /// `V_S`, the eigenbasis used by the Bohr decomposition.
    pub system_basis: CMat,
    pub bath_energies: Vec<f64>,
    /// `nu_ab`, row-major `a * D + b`.
    pub nu: Vec<f64>,
    /// Bohr label of each pair, row-major.
    pub label: Vec<usize>,
    pub omegas: Vec<f64>,
    /// `H_SB` in this basis.
    pub h_sb: SparseMatrix,
    /// Projector pair whose reference is `V_B^dagger Omega_B V_B`.
    pub pair: ProjectorPair,
}

impl FreeFrame {
    pub fn new(spec: &ModelSpec, pair: &ProjectorPair, bohr: &BohrDecomposition) -> Self {
        let (ds, db) = (spec.dim_s, spec.dim_b);
        let d = ds * db;
        let bath = HermitianEigen::new(&spec.h_b);
        let system_basis = bohr.eigen().vectors.clone();
        let basis = system_basis.kronecker(&bath.vectors);
        let omegas = bohr.omegas();
        let mut nu = vec![0.0; d * d];
        let mut label = vec![0; d * d];
        for a in 0..d {
            for b in 0..d {
                let m = bohr.label(a / db, b / db);
                label[a * d + b] = m;
                nu[a * d + b] = omegas[m] + bath.values[a % db] - bath.values[b % db];
            }
        }
        let h_sb_dense = basis.adjoint() * &spec.h_sb * &basis;
        let h_sb = SparseMatrix::from_dense(&h_sb_dense, 1e-15);
        let reference = bath.vectors.adjoint() * &pair.reference * &bath.vectors;
        Self {
            dim_s: ds,
            dim_b: db,
            basis,
            system_basis,
            bath_energies: bath.values,
            nu,
            label,
            omegas,
            h_sb,
            pair: ProjectorPair::with_reference(ds, reference),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim_s * self.dim_b
    }

    pub fn to_frame(&self, x: &CMat) -> CMat {
        self.basis.adjoint() * x * &self.basis
    }

    pub fn from_frame(&self, y: &CMat) -> CMat {
        &self.basis * y * self.basis.adjoint()
    }

    pub fn system_to_frame(&self, x: &CMat) -> CMat {
        self.system_basis.adjoint() * x * &self.system_basis
    }

    pub fn system_from_frame(&self, y: &CMat) -> CMat {
        &self.system_basis * y * self.system_basis.adjoint()
    }

    pub fn nu(&self, a: usize, b: usize) -> f64 {
        self.nu[a * self.dim() + b]
    }

    /// `-i [H_SB, Y]`.
    pub fn l_sb(&self, y: &CMat) -> CMat {
        self.h_sb.commutator(y) * -I
    }

    /// `-i [H_SB(t), Y]` with `H_SB(t) = e^{i H_0 t} H_SB e^{-i H_0 t}`.
    pub fn l_sb_at(&self, y: &CMat, t: f64) -> CMat {
        let rotated = self.h_sb.map_entries(|a, b| C64::from_polar(1.0, self.nu(a, b) * t));
        rotated.commutator(y) * -I
    }

    /// `e^{L_0 t} Y`.
    pub fn free_evolve(&self, y: &CMat, t: f64) -> CMat {
        let d = self.dim();
        CMat::from_fn(d, d, |a, b| y[(a, b)] * C64::from_polar(1.0, -self.nu(a, b) * t))
    }

    /// `Q~_m` acting on the system factor.
    pub fn bohr_project(&self, m: usize, y: &CMat) -> CMat {
        let d = self.dim();
        CMat::from_fn(d, d, |a, b| if self.label[a * d + b] == m { y[(a, b)] } else { ZERO })
    }

    /// `e^{L_S t} x` for a system operator given in the frame basis.
    pub fn system_evolve(&self, x: &CMat, t: f64) -> CMat {
        let n = self.dim_s;
        CMat::from_fn(n, n, |i, j| {
            let m = self.label[(i * self.dim_b) * self.dim() + j * self.dim_b];
            x[(i, j)] * C64::from_polar(1.0, -self.omegas[m] * t)
        })
    }

    /// `||P L_SB P||` evaluated on the system basis operators.
    pub fn centering_defect(&self) -> f64 {
        let n = self.dim_s;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let mut x = CMat::zeros(n, n);
                x[(i, j)] = C64::new(1.0, 0.0);
                let y = self.pair.p(&self.l_sb(&self.pair.lift(&x)));
                worst = worst.max(crate::linalg::hs_norm(&y));
            }
        }
        worst
    }
}
