use super::{CMat, C64, ZERO};

/// Coordinate-list matrix for the sparse Hamiltonians of excitation-conserving models.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    dim: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl SparseMatrix {
    /// Keeps entries with modulus above `drop_tol * max|entry|`.
    pub fn from_dense(m: &CMat, drop_tol: f64) -> Self {
        let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let cut = drop_tol * scale;
        let mut entries = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let z = m[(i, j)];
                if z.norm() > cut && z != ZERO {
                    entries.push((i, j, z));
                }
            }
        }
        Self { dim: m.nrows(), entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, C64)] {
        &self.entries
    }

    /// Same sparsity pattern with each entry `(i, j)` multiplied by `f(i, j)`.
    pub fn map_entries(&self, f: impl Fn(usize, usize) -> C64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|&(i, j, z)| (i, j, z * f(i, j))).collect(),
        }
    }

    /// `S X`.
    pub fn mul_left(&self, x: &CMat) -> CMat {
        let mut out = CMat::zeros(self.dim, x.ncols());
        for &(i, k, s) in &self.entries {
            for j in 0..x.ncols() {
                out[(i, j)] += s * x[(k, j)];
            }
        }
        out
    }

    /// `X S`.
    pub fn mul_right(&self, x: &CMat) -> CMat {
        let mut out = CMat::zeros(x.nrows(), self.dim);
        for &(k, j, s) in &self.entries {
            for i in 0..x.nrows() {
                out[(i, j)] += x[(i, k)] * s;
            }
        }
        out
    }

    /// `S X - X S`.
    pub fn commutator(&self, x: &CMat) -> CMat {
        self.mul_left(x) - self.mul_right(x)
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.dim, self.dim);
        for &(i, j, z) in &self.entries {
            m[(i, j)] += z;
        }
        m
    }
}
