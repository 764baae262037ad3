use nalgebra::DMatrix;

use super::{devectorize, vectorize, CMat, C64, MAX_DENSE_DIM};
use crate::error::{Error, Result};

/// Dense superoperator: a `D^2 x D^2` matrix acting on column-stacked `D x D` operators.
#[derive(Clone, Debug, PartialEq)]
pub struct Superop {
    dim: usize,
    mat: CMat,
}

pub(crate) fn check_dense_dim(d: usize, context: &'static str) -> Result<()> {
    if d > MAX_DENSE_DIM {
        return Err(Error::DimensionLimit { dim: d, limit: MAX_DENSE_DIM, context });
    }
    Ok(())
}

impl Superop {
    /// Materializes a linear map by applying it to the `|i><j|` basis.
    pub fn from_fn(dim: usize, f: impl Fn(&CMat) -> CMat) -> Result<Self> {
        check_dense_dim(dim, "dense superoperator")?;
        let n = dim * dim;
        let mut mat = CMat::zeros(n, n);
        let mut basis = CMat::zeros(dim, dim);
        for col in 0..n {
            let (i, j) = (col % dim, col / dim);
            basis[(i, j)] = C64::new(1.0, 0.0);
            let image = f(&basis);
            basis[(i, j)] = C64::new(0.0, 0.0);
            mat.set_column(col, &vectorize(&image));
        }
        Ok(Self { dim, mat })
    }

    pub fn from_matrix(dim: usize, mat: CMat) -> Result<Self> {
        if mat.nrows() != dim * dim || mat.ncols() != dim * dim {
            return Err(Error::Dimension(format!(
                "superoperator matrix {:?} does not act on {dim}x{dim} operators",
                mat.shape()
            )));
        }
        Ok(Self { dim, mat })
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, mat: CMat::identity(dim * dim, dim * dim) }
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, mat: CMat::zeros(dim * dim, dim * dim) }
    }

    /// `X -> -i[H, X]`, i.e. `-i (1 (x) H - H^T (x) 1)` in column stacking.
    pub fn commutator_generator(h: &CMat) -> Result<Self> {
        let d = h.nrows();
        check_dense_dim(d, "dense Liouvillian")?;
        let id = CMat::identity(d, d);
        let mat = (id.kronecker(h) - h.transpose().kronecker(&id)) * C64::new(0.0, -1.0);
        Ok(Self { dim: d, mat })
    }

    /// Hilbert dimension `D` of the operators acted on.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn apply(&self, x: &CMat) -> CMat {
        devectorize(&(&self.mat * vectorize(x))).expect("square by construction")
    }

    /// `self . other`.
    pub fn compose(&self, other: &Superop) -> Superop {
        Superop { dim: self.dim, mat: &self.mat * &other.mat }
    }

    pub fn add(&self, other: &Superop) -> Superop {
        Superop { dim: self.dim, mat: &self.mat + &other.mat }
    }

    pub fn sub(&self, other: &Superop) -> Superop {
        Superop { dim: self.dim, mat: &self.mat - &other.mat }
    }

    pub fn scale(&self, z: C64) -> Superop {
        Superop { dim: self.dim, mat: &self.mat * z }
    }

    pub fn shift(&self, z: C64) -> Superop {
        let n = self.dim * self.dim;
        Superop { dim: self.dim, mat: &self.mat + CMat::identity(n, n) * z }
    }

    /// Frobenius norm of the `D^2 x D^2` matrix.
    pub fn frobenius_norm(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Operator norm induced by the Hilbert-Schmidt norm.
    pub fn hs_operator_norm(&self) -> f64 {
        self.mat.clone().singular_values().iter().cloned().fold(0.0, f64::max)
    }

    pub fn exp(&self, t: f64) -> Superop {
        Superop { dim: self.dim, mat: (&self.mat * C64::new(t, 0.0)).exp() }
    }

    /// `(e^{S t}, int_0^t e^{S s} ds)` from one exponential of the block matrix `[[S, 1], [0, 0]] t`.
    pub fn exp_and_integral(&self, t: f64) -> (Superop, Superop) {
        let n = self.dim * self.dim;
        let mut aug = CMat::zeros(2 * n, 2 * n);
        aug.view_mut((0, 0), (n, n)).copy_from(&(&self.mat * C64::new(t, 0.0)));
        for k in 0..n {
            aug[(k, n + k)] = C64::new(t, 0.0);
        }
        let e = aug.exp();
        let prop = e.view((0, 0), (n, n)).into_owned();
        let integral = e.view((0, n), (n, n)).into_owned();
        (Superop { dim: self.dim, mat: prop }, Superop { dim: self.dim, mat: integral })
    }

    pub fn inverse(&self) -> Option<Superop> {
        self.mat.clone().try_inverse().map(|mat| Superop { dim: self.dim, mat })
    }

    pub fn max_abs_diff(&self, other: &Superop) -> f64 {
        (&self.mat - &other.mat).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl From<Superop> for DMatrix<C64> {
    fn from(s: Superop) -> Self {
        s.mat
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{commutator, hs_norm, random_hermitian, random_matrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn commutator_generator_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = random_hermitian(&mut rng, 4);
        let x = random_matrix(&mut rng, 4);
        let l = Superop::commutator_generator(&h).unwrap();
        let direct = commutator(&h, &x) * C64::new(0.0, -1.0);
        assert!(hs_norm(&(l.apply(&x) - direct)) < 1e-12);
        let from_fn =
            Superop::from_fn(4, |y| commutator(&h, y) * C64::new(0.0, -1.0)).unwrap();
        assert!(l.max_abs_diff(&from_fn) < 1e-14);
    }

    #[test]
    fn exp_and_integral_scalar_case() {
        // S = i w on a 1x1 space: integral = (e^{iwt} - 1) / (iw)
        let s = Superop::from_matrix(1, CMat::from_element(1, 1, C64::new(0.0, 1.3))).unwrap();
        let (e, integral) = s.exp_and_integral(2.0);
        let z = C64::new(0.0, 1.3);
        let want = ((z * 2.0).exp() - 1.0) / z;
        assert!((integral.matrix()[(0, 0)] - want).norm() < 1e-13);
        assert!((e.matrix()[(0, 0)] - (z * 2.0).exp()).norm() < 1e-13);
    }

    #[test]
    fn dense_cap_enforced() {
        assert!(matches!(
            Superop::from_fn(65, |x| x.clone()),
            Err(Error::DimensionLimit { .. })
        ));
    }
}
