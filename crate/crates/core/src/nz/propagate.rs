use crate::error::{Error, Result};
use crate::linalg::{hs_norm, vectorize, CMat, HermitianEigen, Superop, C64};
use crate::liouville::{BohrDecomposition, ProjectorPair};
use crate::model::ModelSpec;

use super::{check_dense, check_increasing, check_state, FreeFrame, Trajectory};

/// `rho(t) = e^{-iHt} rho0 e^{iHt}` with `H = H_0 + lambda H_SB`.
pub fn propagate_exact(spec: &ModelSpec, rho0: &CMat, times: &[f64]) -> Result<Trajectory> {
    check_state(spec, rho0)?;
    check_increasing(times)?;
    let states = ExactPropagator::new(spec).states(rho0, times);
    Trajectory::new(times.to_vec(), states)
}

/// Diagonalized total Hamiltonian, reused across many time points.
pub(crate) struct ExactPropagator {
    eig: HermitianEigen,
}

impl ExactPropagator {
    pub fn new(spec: &ModelSpec) -> Self {
        Self { eig: HermitianEigen::new(&spec.total_hamiltonian()) }
    }

    pub fn states(&self, rho0: &CMat, times: &[f64]) -> Vec<CMat> {
        let y0 = self.eig.to_eigenbasis(rho0);
        let e = &self.eig.values;
        times
            .iter()
            .map(|&t| {
                let n = y0.nrows();
                let y = CMat::from_fn(n, n, |a, b| {
                    y0[(a, b)] * C64::from_polar(1.0, -(e[a] - e[b]) * t)
                });
                self.eig.from_eigenbasis(&y)
            })
            .collect()
    }
}

/// `e^{-L_S t} P rho(t)` from exact propagation, with exact Bohr phases.
pub fn interaction_picture_exact(
    pair: &ProjectorPair,
    spec: &ModelSpec,
    bohr: &BohrDecomposition,
    rho0: &CMat,
    tau_grid: &[f64],
    lambda: f64,
) -> Result<Trajectory> {
    super::require_coupling(lambda)?;
    check_state(spec, rho0)?;
    check_increasing(tau_grid)?;
    let times: Vec<f64> = tau_grid.iter().map(|tau| tau / (lambda * lambda)).collect();
    let states = ExactPropagator::new(&spec.with_lambda(lambda)).states(rho0, &times);
    let rotated = states
        .iter()
        .zip(&times)
        .map(|(rho, &t)| pair.lift(&bohr.evolve(&pair.reduce(rho), -t)))
        .collect();
    Trajectory::new(tau_grid.to_vec(), rotated)
}

/// Dense superoperators of a small model.
pub(crate) struct DenseOps {
    pub l0: Superop,
    pub lsb: Superop,
    pub p: Superop,
    pub q: Superop,
    /// Columns `vec(E_ij (x) Omega_B)`, `D^2 x dimS^2`.
    pub lift: CMat,
    /// Rows giving `vec(tr_B X)`, `dimS^2 x D^2`.
    pub reduce: CMat,
}

impl DenseOps {
    pub fn new(pair: &ProjectorPair, spec: &ModelSpec) -> Result<Self> {
        check_dense(spec, "dense projected dynamics")?;
        let d = spec.dim();
        let n = spec.dim_s;
        let l0 = Superop::commutator_generator(&spec.free_hamiltonian())?;
        let lsb = Superop::commutator_generator(&spec.h_sb)?;
        let p = pair.dense_p()?;
        let q = pair.dense_q()?;
        let mut lift = CMat::zeros(d * d, n * n);
        for col in 0..n * n {
            let mut e = CMat::zeros(n, n);
            e[(col % n, col / n)] = C64::new(1.0, 0.0);
            lift.set_column(col, &vectorize(&pair.lift(&e)));
        }
        let mut reduce = CMat::zeros(n * n, d * d);
        for col in 0..d * d {
            let mut e = CMat::zeros(d, d);
            e[(col % d, col / d)] = C64::new(1.0, 0.0);
            reduce.set_column(col, &vectorize(&pair.reduce(&e)));
        }
        Ok(Self { l0, lsb, p, q, lift, reduce })
    }

    /// `L_0 + lambda Q L_SB Q`.
    pub fn l0_prime(&self, lambda: f64) -> Superop {
        let qlq = self.q.compose(&self.lsb).compose(&self.q);
        self.l0.add(&qlq.scale(C64::new(lambda, 0.0)))
    }
}

/// Dense `L_0' = L_0 + lambda Q L_SB Q` on a small model, at the spec's coupling.
pub fn dense_l0_prime(pair: &ProjectorPair, spec: &ModelSpec) -> Result<Superop> {
    Ok(DenseOps::new(pair, spec)?.l0_prime(spec.lambda))
}

fn require_q_ranged(pair: &ProjectorPair, x0: &CMat) -> Result<()> {
    let defect = hs_norm(&pair.p(x0));
    if defect > 1e-10 * hs_norm(x0).max(1.0) {
        return Err(Error::Precondition(format!(
            "operand is not in the range of Q: ||P X0|| = {defect:.3e}"
        )));
    }
    Ok(())
}

/// `e^{L_0' t} X0` for `Q`-ranged `X0`, by fourth-order stepping in the interaction frame of `L_0`.
pub fn propagate_q_projected(
    pair: &ProjectorPair,
    spec: &ModelSpec,
    x0: &CMat,
    t: f64,
    dt: f64,
) -> Result<CMat> {
    check_state(spec, x0)?;
    require_q_ranged(pair, x0)?;
    super::require_step(dt)?;
    if !(t >= 0.0) {
        return Err(Error::Validation(format!("time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(x0.clone());
    }
    let bohr = BohrDecomposition::from_spec(spec)?;
    let frame = FreeFrame::new(spec, pair, &bohr);
    let y0 = frame.to_frame(x0);
    if spec.lambda == 0.0 {
        return Ok(frame.from_frame(&frame.free_evolve(&y0, t)));
    }
    let steps = (t / dt).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let mut stepper = InteractionStepper::new(&frame, spec.lambda, y0, 0.0);
    for _ in 0..steps {
        stepper.step(h);
    }
    Ok(frame.from_frame(&frame.free_evolve(&stepper.y, t)))
}

/// `e^{L_0' t} X0` by a dense exponential of `L_0'` (small models).
pub fn propagate_q_projected_dense(
    pair: &ProjectorPair,
    spec: &ModelSpec,
    x0: &CMat,
    t: f64,
) -> Result<CMat> {
    check_state(spec, x0)?;
    require_q_ranged(pair, x0)?;
    let l0p = dense_l0_prime(pair, spec)?;
    Ok(l0p.exp(t).apply(x0))
}

/// `Q e^{L t} Q X0`. Agrees with `e^{L_0' t} X0` only when the coupling vanishes.
pub fn contractive_identity(
    pair: &ProjectorPair,
    spec: &ModelSpec,
    x0: &CMat,
    t: f64,
) -> Result<CMat> {
    check_state(spec, x0)?;
    let q0 = pair.q(x0);
    let evolved = ExactPropagator::new(spec).states(&q0, &[t]).remove(0);
    Ok(pair.q(&evolved))
}

/// Classical RK4 for `dY/dt = lambda Q (-i [H_SB(t), Y])`, the `L_0`-interaction picture
/// of `dX/dt = L_0' X` on the range of `Q`. Keeps the derivative at the current time.
pub(crate) struct InteractionStepper<'a> {
    frame: &'a FreeFrame,
    lambda: f64,
    pub t: f64,
    pub y: CMat,
    pub dy: CMat,
}

impl<'a> InteractionStepper<'a> {
    pub fn new(frame: &'a FreeFrame, lambda: f64, y0: CMat, t0: f64) -> Self {
        let mut s = Self { frame, lambda, t: t0, dy: CMat::zeros(0, 0), y: y0 };
        s.dy = s.rhs(t0, &s.y);
        s
    }

    fn rhs(&self, t: f64, y: &CMat) -> CMat {
        self.frame.pair.q(&self.frame.l_sb_at(y, t)) * C64::new(self.lambda, 0.0)
    }

    pub fn step(&mut self, h: f64) {
        let t = self.t;
        let k1 = &self.dy;
        let k2 = self.rhs(t + 0.5 * h, &(&self.y + k1 * C64::new(0.5 * h, 0.0)));
        let k3 = self.rhs(t + 0.5 * h, &(&self.y + &k2 * C64::new(0.5 * h, 0.0)));
        let k4 = self.rhs(t + h, &(&self.y + &k3 * C64::new(h, 0.0)));
        let incr = (k1 + (&k2 + &k3) * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0);
        self.y += incr;
        self.t = t + h;
        self.dy = self.rhs(self.t, &self.y);
    }
}
