//! Dense complex operator algebra on finite Hilbert spaces.
//!
//! Operators are `DMatrix<Complex64>`. Vectorization is column stacking,
//! which matches nalgebra's column-major storage, so `vec(X)[i + j*D] = X[i,j]`.
//! Composite spaces are ordered system-major: the index of `|i> (x) |mu>`
//! is `i * dim_b + mu`.

mod quadrature;
mod sparse;
mod superop;

pub use quadrature::{gauss_legendre, GaussLegendre};
pub use sparse::SparseMatrix;
pub use superop::Superop;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Largest Hilbert dimension for which D^2 x D^2 superoperators are materialized.
pub const MAX_DENSE_DIM: usize = 64;
/// Largest Hilbert dimension accepted by matrix-free paths.
pub const MAX_MATRIX_FREE_DIM: usize = 256;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(n: usize) -> CMat {
    CMat::zeros(n, n)
}

pub fn diag_real(values: &[f64]) -> CMat {
    let n = values.len();
    let mut m = zeros(n);
    for (k, v) in values.iter().enumerate() {
        m[(k, k)] = c(*v, 0.0);
    }
    m
}

/// Ket-bra `|i><j|` on an `n`-dimensional space.
pub fn ket_bra(n: usize, i: usize, j: usize) -> CMat {
    let mut m = zeros(n);
    m[(i, j)] = ONE;
    m
}

pub fn pauli_x() -> CMat {
    CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> CMat {
    CMat::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> CMat {
    CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

pub fn check_square(x: &CMat, what: &str) -> Result<usize> {
    if x.nrows() != x.ncols() || x.nrows() == 0 {
        return Err(Error::Shape(format!(
            "{what} must be a non-empty square matrix, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(x.nrows())
}

/// Kronecker product `A (x) B`.
pub fn tensor(a: &CMat, b: &CMat) -> Result<CMat> {
    let da = check_square(a, "left factor")?;
    let db = check_square(b, "right factor")?;
    let d = da * db;
    if d > MAX_MATRIX_FREE_DIM {
        return Err(Error::DimensionLimit {
            dim: d,
            limit: MAX_MATRIX_FREE_DIM,
            context: "tensor product",
        });
    }
    Ok(a.kronecker(b))
}

/// `tr_B X` for `X` on `C^{dim_s} (x) C^{dim_b}`.
pub fn partial_trace_bath(x: &CMat, dim_s: usize, dim_b: usize) -> Result<CMat> {
    check_composite(x, dim_s, dim_b)?;
    let mut out = zeros(dim_s);
    for i in 0..dim_s {
        for j in 0..dim_s {
            let mut acc = ZERO;
            for mu in 0..dim_b {
                acc += x[(i * dim_b + mu, j * dim_b + mu)];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// `tr_S X` for `X` on `C^{dim_s} (x) C^{dim_b}`.
pub fn partial_trace_system(x: &CMat, dim_s: usize, dim_b: usize) -> Result<CMat> {
    check_composite(x, dim_s, dim_b)?;
    let mut out = zeros(dim_b);
    for mu in 0..dim_b {
        for nu in 0..dim_b {
            let mut acc = ZERO;
            for i in 0..dim_s {
                acc += x[(i * dim_b + mu, i * dim_b + nu)];
            }
            out[(mu, nu)] = acc;
        }
    }
    Ok(out)
}

fn check_composite(x: &CMat, dim_s: usize, dim_b: usize) -> Result<()> {
    let d = check_square(x, "operator")?;
    if dim_s == 0 || dim_b == 0 || d != dim_s * dim_b {
        return Err(Error::Dimension(format!(
            "operator of dimension {d} is not on a {dim_s} x {dim_b} composite space"
        )));
    }
    Ok(())
}

pub fn vectorize(x: &CMat) -> CVec {
    CVec::from_column_slice(x.as_slice())
}

pub fn devectorize(v: &CVec) -> Result<CMat> {
    let len = v.len();
    let d = (len as f64).sqrt().round() as usize;
    if d * d != len || d == 0 {
        return Err(Error::Shape(format!(
            "vector of length {len} is not a vectorized square matrix"
        )));
    }
    Ok(CMat::from_column_slice(d, d, v.as_slice()))
}

pub fn dagger(x: &CMat) -> CMat {
    x.adjoint()
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn trace(x: &CMat) -> C64 {
    x.trace()
}

/// Hilbert-Schmidt (Frobenius) norm.
pub fn hs_norm(x: &CMat) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `<X, Y> = tr(X^dagger Y)`.
pub fn hs_inner(x: &CMat, y: &CMat) -> C64 {
    x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum()
}

pub fn hermiticity_defect(x: &CMat) -> f64 {
    hs_norm(&(x - x.adjoint()))
}

/// Largest singular value.
pub fn spectral_norm(x: &CMat) -> f64 {
    x.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

pub fn ensure_hermitian(x: &CMat, tol: f64, what: &str) -> Result<()> {
    check_square(x, what)?;
    let defect = hermiticity_defect(x);
    let scale = hs_norm(x).max(1.0);
    if defect > tol * scale {
        return Err(Error::Validation(format!(
            "{what} is not Hermitian: ||X - X^dagger|| = {defect:.3e}"
        )));
    }
    Ok(())
}

/// Checks the density-matrix contract: Hermitian, unit trace, no eigenvalue below `-tol`.
pub fn validate_density(x: &CMat, tol: f64, what: &str) -> Result<()> {
    ensure_hermitian(x, tol, what)?;
    let tr = trace(x);
    if (tr - ONE).norm() > tol.max(1e-12) * x.nrows() as f64 {
        return Err(Error::Validation(format!(
            "{what} has trace {:.6}{:+.2e}i, expected 1",
            tr.re, tr.im
        )));
    }
    let min_eig = HermitianEigen::new(x).values.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eig < -tol.max(1e-10) {
        return Err(Error::Validation(format!(
            "{what} has negative eigenvalue {min_eig:.3e}"
        )));
    }
    Ok(())
}

/// Eigendecomposition `H = V diag(E) V^dagger` of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermitianEigen {
    /// Eigenvalues are returned in ascending order. Only the Hermitian part is used.
    pub fn new(h: &CMat) -> Self {
        let sym = (h + h.adjoint()).scale(0.5);
        let n = sym.nrows();
        let eig = sym.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let mut vectors = zeros(n);
        for (col, &k) in order.iter().enumerate() {
            vectors.set_column(col, &eig.eigenvectors.column(k));
        }
        Self { values, vectors }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `e^{-iHt}`.
    pub fn propagator(&self, t: f64) -> CMat {
        let phases: Vec<C64> = self.values.iter().map(|e| C64::from_polar(1.0, -e * t)).collect();
        let mut scaled = self.vectors.clone();
        for (j, ph) in phases.iter().enumerate() {
            for i in 0..scaled.nrows() {
                scaled[(i, j)] *= ph;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    /// `e^{-iHt} rho e^{iHt}`.
    pub fn evolve(&self, rho: &CMat, t: f64) -> CMat {
        let u = self.propagator(t);
        &u * rho * u.adjoint()
    }

    /// `V^dagger X V`.
    pub fn to_eigenbasis(&self, x: &CMat) -> CMat {
        self.vectors.adjoint() * x * &self.vectors
    }

    /// `V X V^dagger`.
    pub fn from_eigenbasis(&self, x: &CMat) -> CMat {
        &self.vectors * x * self.vectors.adjoint()
    }

    pub fn apply_fn(&self, f: impl Fn(f64) -> f64) -> CMat {
        let d: Vec<f64> = self.values.iter().map(|&e| f(e)).collect();
        self.from_eigenbasis(&diag_real(&d))
    }
}

/// `e^{-iHt} rho e^{iHt}`, computed through the eigendecomposition of `H`.
pub fn evolve_unitary(h: &CMat, rho: &CMat, t: f64, herm_tol: f64) -> Result<CMat> {
    ensure_hermitian(h, herm_tol, "Hamiltonian")?;
    if h.nrows() != rho.nrows() || rho.nrows() != rho.ncols() {
        return Err(Error::Dimension(format!(
            "Hamiltonian is {0}x{0} but state is {1}x{2}",
            h.nrows(),
            rho.nrows(),
            rho.ncols()
        )));
    }
    Ok(HermitianEigen::new(h).evolve(rho, t))
}

/// `(1/2) ||rho - sigma||_1`, from the singular values of the difference.
pub fn trace_distance(rho: &CMat, sigma: &CMat) -> Result<f64> {
    if rho.shape() != sigma.shape() {
        return Err(Error::Dimension(format!(
            "trace distance between {:?} and {:?} matrices",
            rho.shape(),
            sigma.shape()
        )));
    }
    let diff = rho - sigma;
    Ok(0.5 * diff.singular_values().iter().sum::<f64>())
}

/// Matrix exponential (Pade with scaling and squaring).
pub fn expm(m: &CMat) -> CMat {
    m.exp()
}

pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    CMat::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    let a = random_matrix(rng, n);
    (&a + a.adjoint()).scale(0.5)
}

/// Random full-rank density matrix `A A^dagger / tr(A A^dagger)`.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    let a = random_matrix(rng, n);
    let p = &a * a.adjoint();
    let tr = trace(&p);
    p.map(|z| z / tr)
}

/// Projector onto a normalized vector.
pub fn projector(v: &CVec) -> CMat {
    let n = v.norm();
    let u = v.unscale(n);
    &u * u.adjoint()
}
