//! Mechanical systems, phase-space states and sampled trajectories.
//!
//! Sign convention used throughout the crate: the generalized
//! nonconservative force enters on the right-hand side of the momentum
//! equation,
//!
//! ```text
//! dq/dt =  ∂H/∂p
//! dp/dt = -∂H/∂q + F(q, dq/dt)
//! ```
//!
//! so viscous damping is `F = -C q̇`. Worked examples that write the damping
//! term on the left-hand side (`ẍ + c ẋ = 0` with "force" `c ẋ`) appear here
//! with the opposite sign.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use crate::error::ModelError;
use crate::interp::{hermite, hermite_derivative};
use crate::quadrature;

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

pub type ScalarFn = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
pub type ForceFn = Arc<dyn Fn(&Vector, &Vector) -> Vector + Send + Sync>;

/// Conservative part of the Hamiltonian, `V(q)`.
#[derive(Clone)]
pub enum Potential {
    /// `V(q) = ½ qᵀ K q`.
    Linear { stiffness: Matrix },
    /// Arbitrary potential given by its value and gradient.
    Custom { value: ScalarFn, gradient: VectorFn },
}

/// Generalized nonconservative force `F(q, q̇)`.
#[derive(Clone)]
pub enum ForceLaw {
    None,
    /// `F = -C q̇`.
    Viscous {
        damping: Matrix,
    },
    Custom(ForceFn),
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Linear { stiffness } => f.debug_struct("Linear").field("stiffness", stiffness).finish(),
            Potential::Custom { .. } => f.write_str("Custom(..)"),
        }
    }
}

impl fmt::Debug for ForceLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForceLaw::None => f.write_str("None"),
            ForceLaw::Viscous { damping } => f.debug_struct("Viscous").field("damping", damping).finish(),
            ForceLaw::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// A dissipative (or conservative) mechanical system in canonical form.
#[derive(Clone, Debug)]
pub struct SystemDefinition {
    dim: usize,
    mass: Matrix,
    mass_inv: Matrix,
    potential: Potential,
    force: ForceLaw,
}

fn check_square(m: &Matrix, n: usize, what: &'static str) -> Result<(), ModelError> {
    if m.nrows() != n || m.ncols() != n {
        return Err(ModelError::DimensionMismatch {
            what,
            expected: n,
            got: if m.nrows() != n { m.nrows() } else { m.ncols() },
        });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(ModelError::NonFinite(what));
    }
    Ok(())
}

impl SystemDefinition {
    /// Free particle of dimension `dim` with identity mass, no potential and no force.
    pub fn new(dim: usize) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::EmptySystem);
        }
        Ok(Self {
            dim,
            mass: Matrix::identity(dim, dim),
            mass_inv: Matrix::identity(dim, dim),
            potential: Potential::Linear { stiffness: Matrix::zeros(dim, dim) },
            force: ForceLaw::None,
        })
    }

    /// Linear family `M q̈ + C q̇ + K q = 0`.
    pub fn linear(mass: Option<Matrix>, damping: Option<Matrix>, stiffness: Matrix) -> Result<Self, ModelError> {
        let n = stiffness.nrows();
        let mut sys = Self::new(n)?.with_potential(Potential::Linear { stiffness })?;
        if let Some(m) = mass {
            sys = sys.with_mass(m)?;
        }
        if let Some(c) = damping {
            sys = sys.with_force(ForceLaw::Viscous { damping: c })?;
        }
        Ok(sys)
    }

    pub fn with_mass(mut self, mass: Matrix) -> Result<Self, ModelError> {
        check_square(&mass, self.dim, "mass matrix")?;
        let asym = (&mass - mass.transpose()).amax();
        if asym > 1e-12 * mass.amax().max(1.0) {
            return Err(ModelError::MassNotSpd);
        }
        let chol = mass.clone().cholesky().ok_or(ModelError::MassNotSpd)?;
        self.mass_inv = chol.inverse();
        self.mass = mass;
        Ok(self)
    }

    pub fn with_potential(mut self, potential: Potential) -> Result<Self, ModelError> {
        if let Potential::Linear { stiffness } = &potential {
            check_square(stiffness, self.dim, "stiffness matrix")?;
        }
        self.potential = potential;
        Ok(self)
    }

    pub fn with_force(mut self, force: ForceLaw) -> Result<Self, ModelError> {
        if let ForceLaw::Viscous { damping } = &force {
            check_square(damping, self.dim, "damping matrix")?;
        }
        self.force = force;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mass(&self) -> &Matrix {
        &self.mass
    }

    pub fn mass_inverse(&self) -> &Matrix {
        &self.mass_inv
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn force_law(&self) -> &ForceLaw {
        &self.force
    }

    pub fn stiffness(&self) -> Option<&Matrix> {
        match &self.potential {
            Potential::Linear { stiffness } => Some(stiffness),
            Potential::Custom { .. } => None,
        }
    }

    pub fn damping(&self) -> Option<&Matrix> {
        match &self.force {
            ForceLaw::Viscous { damping } => Some(damping),
            _ => None,
        }
    }

    /// True when the Jacobian of the phase vector field is available in closed form.
    pub fn is_linear_family(&self) -> bool {
        matches!(self.potential, Potential::Linear { .. }) && !matches!(self.force, ForceLaw::Custom(_))
    }

    /// Same mass and potential with the nonconservative force removed.
    pub fn conservative_part(&self) -> SystemDefinition {
        SystemDefinition { force: ForceLaw::None, ..self.clone() }
    }

    pub fn velocity(&self, p: &Vector) -> Vector {
        &self.mass_inv * p
    }

    pub fn potential_energy(&self, q: &Vector) -> f64 {
        match &self.potential {
            Potential::Linear { stiffness } => 0.5 * q.dot(&(stiffness * q)),
            Potential::Custom { value, .. } => value(q),
        }
    }

    /// `∂V/∂q`.
    pub fn potential_gradient(&self, q: &Vector) -> Vector {
        match &self.potential {
            Potential::Linear { stiffness } => stiffness * q,
            Potential::Custom { gradient, .. } => gradient(q),
        }
    }

    /// Hessian of `V`; central differences of the gradient for custom potentials.
    pub fn potential_hessian(&self, q: &Vector) -> Matrix {
        match &self.potential {
            Potential::Linear { stiffness } => stiffness.clone(),
            Potential::Custom { gradient, .. } => {
                let n = self.dim;
                let mut h = Matrix::zeros(n, n);
                for j in 0..n {
                    let step = fd_step(q[j]);
                    let mut qp = q.clone();
                    let mut qm = q.clone();
                    qp[j] += step;
                    qm[j] -= step;
                    let col = (gradient(&qp) - gradient(&qm)) / (2.0 * step);
                    h.set_column(j, &col);
                }
                0.5 * (&h + h.transpose())
            }
        }
    }

    /// Nonconservative force without validation; used on hot paths.
    pub fn force_at(&self, q: &Vector, qdot: &Vector) -> Vector {
        match &self.force {
            ForceLaw::None => Vector::zeros(self.dim),
            ForceLaw::Viscous { damping } => -(damping * qdot),
            ForceLaw::Custom(f) => f(q, qdot),
        }
    }

    /// Generalized nonconservative force at a state, in the right-hand-side convention.
    pub fn evaluate_force(&self, state: &State) -> Result<Vector, ModelError> {
        self.check_state(state)?;
        let qdot = self.velocity(&state.p);
        Ok(self.force_at(&state.q, &qdot))
    }

    /// Mechanical energy `H = ½ pᵀ M⁻¹ p + V(q)`.
    pub fn total_energy(&self, state: &State) -> Result<f64, ModelError> {
        self.check_state(state)?;
        Ok(self.energy(&state.q, &state.p))
    }

    pub(crate) fn energy(&self, q: &Vector, p: &Vector) -> f64 {
        0.5 * p.dot(&(&self.mass_inv * p)) + self.potential_energy(q)
    }

    /// Phase vector field `(q̇, ṗ)` of the dissipative equations of motion.
    pub fn rates(&self, q: &Vector, p: &Vector) -> (Vector, Vector) {
        let qdot = self.velocity(p);
        let pdot = self.force_at(q, &qdot) - self.potential_gradient(q);
        (qdot, pdot)
    }

    /// Closed-form Jacobian of the phase vector field for the linear family,
    /// ordered as `(q, p)`.
    pub fn analytic_jacobian(&self) -> Option<Matrix> {
        if !self.is_linear_family() {
            return None;
        }
        let n = self.dim;
        let k = self.stiffness()?;
        let mut j = Matrix::zeros(2 * n, 2 * n);
        j.view_mut((0, n), (n, n)).copy_from(&self.mass_inv);
        j.view_mut((n, 0), (n, n)).copy_from(&(-k));
        if let Some(c) = self.damping() {
            j.view_mut((n, n), (n, n)).copy_from(&(-(c * &self.mass_inv)));
        }
        Some(j)
    }

    /// Central-difference Jacobian of the phase vector field.
    pub fn fd_jacobian(&self, q: &Vector, p: &Vector) -> Matrix {
        let n = self.dim;
        let mut j = Matrix::zeros(2 * n, 2 * n);
        for col in 0..2 * n {
            let (mut qp, mut pp) = (q.clone(), p.clone());
            let (mut qm, mut pm) = (q.clone(), p.clone());
            let x = if col < n { q[col] } else { p[col - n] };
            let h = fd_step(x);
            if col < n {
                qp[col] += h;
                qm[col] -= h;
            } else {
                pp[col - n] += h;
                pm[col - n] -= h;
            }
            let (a1, b1) = self.rates(&qp, &pp);
            let (a0, b0) = self.rates(&qm, &pm);
            for row in 0..n {
                j[(row, col)] = (a1[row] - a0[row]) / (2.0 * h);
                j[(row + n, col)] = (b1[row] - b0[row]) / (2.0 * h);
            }
        }
        j
    }

    /// Divergence of the phase vector field, `tr(Df)`.
    pub fn phase_divergence(&self, q: &Vector, p: &Vector) -> f64 {
        if self.is_linear_family() {
            match self.damping() {
                Some(c) => -(c * &self.mass_inv).trace(),
                None => 0.0,
            }
        } else {
            self.fd_jacobian(q, p).trace()
        }
    }

    pub fn check_state(&self, state: &State) -> Result<(), ModelError> {
        for (what, v) in [("q", &state.q), ("p", &state.p)] {
            if v.len() != self.dim {
                return Err(ModelError::DimensionMismatch { what, expected: self.dim, got: v.len() });
            }
        }
        if !state.is_finite() {
            return Err(ModelError::NonFinite("state"));
        }
        Ok(())
    }
}

/// Finite-difference step `max(1e-6, 1e-6 |x|)`.
pub fn fd_step(x: f64) -> f64 {
    (1e-6 * x.abs()).max(1e-6)
}

/// A point in phase space at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub t: f64,
    pub q: Vector,
    pub p: Vector,
}

impl State {
    pub fn new(t: f64, q: Vector, p: Vector) -> Self {
        Self { t, q, p }
    }

    pub fn from_slices(t: f64, q: &[f64], p: &[f64]) -> Self {
        Self { t, q: Vector::from_column_slice(q), p: Vector::from_column_slice(p) }
    }

    /// Build from a flat `[q..., p...]` vector.
    pub fn from_phase(t: f64, z: &[f64]) -> Self {
        let n = z.len() / 2;
        Self::from_slices(t, &z[..n], &z[n..])
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.q.iter().chain(self.p.iter()).all(|x| x.is_finite())
    }

    pub fn phase(&self) -> Vec<f64> {
        self.q.iter().chain(self.p.iter()).copied().collect()
    }

    /// Max-norm distance in phase space.
    pub fn phase_distance(&self, other: &State) -> f64 {
        let dq = (&self.q - &other.q).amax();
        let dp = (&self.p - &other.p).amax();
        dq.max(dp)
    }
}

/// Time derivatives stored alongside each sample for Hermite dense output.
#[derive(Clone, Debug, PartialEq)]
pub struct Rates {
    pub qdot: Vector,
    pub pdot: Vector,
    pub qddot: Vector,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryMeta {
    pub integrator: String,
    pub tolerance: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evaluations: usize,
}

/// Ordered phase-space samples from one initial condition.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    samples: Vec<State>,
    rates: Vec<Rates>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn new(samples: Vec<State>, rates: Vec<Rates>, meta: TrajectoryMeta) -> Result<Self, ModelError> {
        if samples.is_empty() {
            return Err(ModelError::Invalid("trajectory needs at least one sample".into()));
        }
        if samples.len() != rates.len() {
            return Err(ModelError::Invalid("samples and rates differ in length".into()));
        }
        let n = samples[0].dim();
        if samples.iter().any(|s| s.dim() != n || s.p.len() != n) {
            return Err(ModelError::Invalid("non-uniform sample dimension".into()));
        }
        if samples.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(ModelError::Invalid("sample times must be strictly increasing".into()));
        }
        Ok(Self { samples, rates, meta })
    }

    pub fn samples(&self) -> &[State] {
        &self.samples
    }

    pub fn rates(&self) -> &[Rates] {
        &self.rates
    }

    pub fn ic(&self) -> &State {
        &self.samples[0]
    }

    pub fn last(&self) -> &State {
        self.samples.last().expect("non-empty")
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].dim()
    }

    pub fn t_start(&self) -> f64 {
        self.samples[0].t
    }

    pub fn t_end(&self) -> f64 {
        self.last().t
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    /// Index `k` of the interval `[t_k, t_{k+1}]` containing `t` (clamped).
    pub fn interval(&self, t: f64) -> usize {
        let n = self.samples.len();
        if n < 2 {
            return 0;
        }
        let k = self.samples.partition_point(|s| s.t <= t);
        k.saturating_sub(1).min(n - 2)
    }

    fn exact_index(&self, t: f64) -> Option<usize> {
        let k = self.samples.partition_point(|s| s.t < t);
        (k < self.samples.len() && self.samples[k].t == t).then_some(k)
    }

    /// Cubic Hermite dense output of the full state.
    pub fn state_at(&self, t: f64) -> State {
        if let Some(k) = self.exact_index(t) {
            return self.samples[k].clone();
        }
        if self.samples.len() == 1 {
            return self.samples[0].clone();
        }
        let k = self.interval(t);
        let (a, b) = (&self.samples[k], &self.samples[k + 1]);
        let (ra, rb) = (&self.rates[k], &self.rates[k + 1]);
        let n = a.dim();
        let q = Vector::from_fn(n, |i, _| hermite(a.t, b.t, a.q[i], b.q[i], ra.qdot[i], rb.qdot[i], t));
        let p = Vector::from_fn(n, |i, _| hermite(a.t, b.t, a.p[i], b.p[i], ra.pdot[i], rb.pdot[i], t));
        State { t, q, p }
    }

    /// Dense `(q_i(t), q̇_i(t))`; the velocity uses its own Hermite on `(q̇, q̈)`.
    pub fn coordinate_at(&self, i: usize, t: f64) -> (f64, f64) {
        if let Some(k) = self.exact_index(t) {
            return (self.samples[k].q[i], self.rates[k].qdot[i]);
        }
        if self.samples.len() == 1 {
            return (self.samples[0].q[i], self.rates[0].qdot[i]);
        }
        let k = self.interval(t);
        let (a, b) = (&self.samples[k], &self.samples[k + 1]);
        let (ra, rb) = (&self.rates[k], &self.rates[k + 1]);
        let q = hermite(a.t, b.t, a.q[i], b.q[i], ra.qdot[i], rb.qdot[i], t);
        let v = hermite(a.t, b.t, ra.qdot[i], rb.qdot[i], ra.qddot[i], rb.qddot[i], t);
        (q, v)
    }

    /// Derivative of the position Hermite, consistent with `coordinate_at(..).0`.
    pub fn position_slope(&self, i: usize, t: f64) -> f64 {
        if self.samples.len() == 1 {
            return self.rates[0].qdot[i];
        }
        let k = self.interval(t);
        let (a, b) = (&self.samples[k], &self.samples[k + 1]);
        let (ra, rb) = (&self.rates[k], &self.rates[k + 1]);
        hermite_derivative(a.t, b.t, a.q[i], b.q[i], ra.qdot[i], rb.qdot[i], t)
    }

    /// Dense velocity vector `q̇(t)`.
    pub fn velocity_at(&self, t: f64) -> Vector {
        let n = self.dim();
        Vector::from_fn(n, |i, _| self.coordinate_at(i, t).1)
    }

    /// SHA-256 over the bit patterns of all samples, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for s in &self.samples {
            h.update(s.t.to_bits().to_le_bytes());
            for x in s.q.iter().chain(s.p.iter()) {
                h.update(x.to_bits().to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Work-energy consistency residual along a trajectory:
/// `max_k |H(t_k) - H(t_0) - Σ_i ∫ F_i dq_i|`.
///
/// The work integral is the cumulative trapezoid of the power `F·q̇` in time,
/// refined once by Richardson extrapolation with dense-output midpoints.
pub fn energy_rate_check(sys: &SystemDefinition, traj: &Trajectory) -> f64 {
    let power = |s: &State| {
        let qdot = sys.velocity(&s.p);
        sys.force_at(&s.q, &qdot).dot(&qdot)
    };
    let times: Vec<f64> = traj.times().collect();
    let nodes: Vec<f64> = traj.samples().iter().map(power).collect();
    let mids: Vec<f64> = times.windows(2).map(|w| power(&traj.state_at(0.5 * (w[0] + w[1])))).collect();
    let work = quadrature::cumulative_richardson(&times, &nodes, &mids);
    let h0 = sys.energy(&traj.ic().q, &traj.ic().p);
    traj.samples().iter().zip(work).map(|(s, w)| (sys.energy(&s.q, &s.p) - h0 - w).abs()).fold(0.0, f64::max)
}
