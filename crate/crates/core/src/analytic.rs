//! Closed-form solutions of the three example families, used as oracles.
//!
//! All families have unit mass and viscous damping; the reconstructed force
//! along a curve is the damping force `-C q̇` written as a function of the
//! coordinate it acts on.

use crate::error::{AnalyticError, ModelError};
use crate::model::{Matrix, Rates, State, SystemDefinition, Trajectory, TrajectoryMeta, Vector};

/// A solution `q(t)` known in closed form together with its system.
pub trait ClosedForm {
    fn system(&self) -> SystemDefinition;
    fn position(&self, t: f64) -> Vector;
    fn velocity(&self, t: f64) -> Vector;
    fn acceleration(&self, t: f64) -> Vector;

    fn state(&self, t: f64) -> State {
        let m = self.system().mass().clone();
        State::new(t, self.position(t), m * self.velocity(t))
    }

    /// `max |M q̈ - (-∇V + F)|` at time `t`.
    fn ode_residual(&self, t: f64) -> f64 {
        let sys = self.system();
        let s = self.state(t);
        let (_, pdot) = sys.rates(&s.q, &s.p);
        (sys.mass() * self.acceleration(t) - pdot).amax()
    }

    /// Exact samples on `times`, with exact rates for dense output.
    fn trajectory(&self, times: &[f64]) -> Result<Trajectory, ModelError> {
        let m = self.system().mass().clone();
        let samples = times.iter().map(|&t| self.state(t)).collect();
        let rates = times
            .iter()
            .map(|&t| {
                let qddot = self.acceleration(t);
                Rates { qdot: self.velocity(t), pdot: &m * &qddot, qddot }
            })
            .collect();
        let meta = TrajectoryMeta { integrator: "closed-form".into(), ..Default::default() };
        Trajectory::new(samples, rates, meta)
    }
}

/// `ẍ = -c ẋ`: `x(t) = A₁ + A₂ e^{-ct}` with `A₁ = x₀ + ẋ₀/c`, `A₂ = -ẋ₀/c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Drag1d {
    pub c: f64,
    pub x0: f64,
    pub v0: f64,
}

impl Drag1d {
    pub fn new(c: f64, x0: f64, v0: f64) -> Result<Self, AnalyticError> {
        if !(c > 0.0) {
            return Err(AnalyticError::NonPositiveDamping(c));
        }
        Ok(Self { c, x0, v0 })
    }

    /// Rest position `x(∞)`.
    pub fn a1(&self) -> f64 {
        self.x0 + self.v0 / self.c
    }

    pub fn a2(&self) -> f64 {
        -self.v0 / self.c
    }

    /// Restricted force `𝓕(x) = c²(x - A₁)`.
    pub fn force(&self, x: f64) -> f64 {
        self.c * self.c * (x - self.a1())
    }

    /// `W(x) = ∫_{x₀}^{x} 𝓕`.
    pub fn work(&self, x: f64) -> f64 {
        let a = self.a1();
        0.5 * self.c * self.c * ((x - a).powi(2) - (self.x0 - a).powi(2))
    }

    /// `Ĥ(x, p) = ½p² - W(x)`.
    pub fn substitute_hamiltonian(&self, x: f64, p: f64) -> f64 {
        0.5 * p * p - self.work(x)
    }

    /// Value of `Ĥ` along the curve; the kinetic energy eventually dissipated.
    pub fn hamiltonian_value(&self) -> f64 {
        0.5 * self.v0 * self.v0
    }
}

impl ClosedForm for Drag1d {
    fn system(&self) -> SystemDefinition {
        SystemDefinition::linear(None, Some(Matrix::from_element(1, 1, self.c)), Matrix::zeros(1, 1))
            .expect("1x1 system")
    }

    fn position(&self, t: f64) -> Vector {
        Vector::from_element(1, self.a1() + self.a2() * (-self.c * t).exp())
    }

    fn velocity(&self, t: f64) -> Vector {
        Vector::from_element(1, self.v0 * (-self.c * t).exp())
    }

    fn acceleration(&self, t: f64) -> Vector {
        Vector::from_element(1, -self.c * self.v0 * (-self.c * t).exp())
    }
}

/// Two unit masses coupled by a damper: `ẍ = -(ẋ - ẏ)`, `ÿ = ẋ - ẏ`.
///
/// In `s = x + y`, `u = x - y`: `s̈ = 0` and `ü = -2u̇`. With `ẋ₀ + ẏ₀ = 0`
/// the sum is constant and each coordinate is a function of `u` alone,
/// which makes the restricted forces closed form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coupled2d {
    pub q0: [f64; 2],
    pub v0: [f64; 2],
    constrained: bool,
}

fn constraint_gap(v0: [f64; 2]) -> f64 {
    v0[0] + v0[1]
}

impl Coupled2d {
    /// Requires `ẋ₀ + ẏ₀ = 0` (to 1e-12 relative).
    pub fn new(q0: [f64; 2], v0: [f64; 2]) -> Result<Self, AnalyticError> {
        let gap = constraint_gap(v0);
        if gap.abs() > 1e-12 * v0[0].abs().max(v0[1].abs()).max(1.0) {
            return Err(AnalyticError::ConstraintViolated(gap));
        }
        Ok(Self { q0, v0, constrained: true })
    }

    /// Any initial state; the sum then drifts linearly and only the
    /// solution itself is available.
    pub fn general(q0: [f64; 2], v0: [f64; 2]) -> Self {
        Self { q0, v0, constrained: false }
    }

    fn require_constraint(&self) -> Result<(), AnalyticError> {
        match self.constrained {
            true => Ok(()),
            false => Err(AnalyticError::ConstraintViolated(constraint_gap(self.v0))),
        }
    }

    fn sum0(&self) -> f64 {
        self.q0[0] + self.q0[1]
    }

    fn diff0(&self) -> f64 {
        self.q0[0] - self.q0[1]
    }

    fn diff_rate0(&self) -> f64 {
        self.v0[0] - self.v0[1]
    }

    /// Restricted forces `(𝓕₁(x), 𝓕₂(y))`, each linear in its coordinate.
    pub fn force(&self, x: f64, y: f64) -> Result<[f64; 2], AnalyticError> {
        self.require_constraint()?;
        let (s, u0, w0) = (self.sum0(), self.diff0(), self.diff_rate0());
        Ok([4.0 * x - 2.0 * s - 2.0 * u0 - w0, 4.0 * y - 2.0 * s + 2.0 * u0 + w0])
    }

    /// `(W₁(x), W₂(y))`, each vanishing at the initial coordinate.
    pub fn work(&self, x: f64, y: f64) -> Result<[f64; 2], AnalyticError> {
        self.require_constraint()?;
        let (s, u0, w0) = (self.sum0(), self.diff0(), self.diff_rate0());
        let [x0, y0] = self.q0;
        Ok([
            2.0 * (x * x - x0 * x0) - (2.0 * s + 2.0 * u0 + w0) * (x - x0),
            2.0 * (y * y - y0 * y0) - (2.0 * s - 2.0 * u0 - w0) * (y - y0),
        ])
    }

    /// `Ĥ = ½|p|² - W₁(x) - W₂(y)`.
    pub fn substitute_hamiltonian(&self, q: [f64; 2], p: [f64; 2]) -> Result<f64, AnalyticError> {
        let [w1, w2] = self.work(q[0], q[1])?;
        Ok(0.5 * (p[0] * p[0] + p[1] * p[1]) - w1 - w2)
    }

    pub fn hamiltonian_value(&self) -> Result<f64, AnalyticError> {
        self.require_constraint()?;
        Ok(0.5 * (self.v0[0] * self.v0[0] + self.v0[1] * self.v0[1]))
    }

    fn sum_diff(&self, t: f64) -> (f64, f64, f64, f64) {
        let e = (-2.0 * t).exp();
        let sigma = self.v0[0] + self.v0[1];
        let w0 = self.diff_rate0();
        let s = self.sum0() + sigma * t;
        let u = self.diff0() + 0.5 * w0 * (1.0 - e);
        (s, u, sigma, w0 * e)
    }
}

impl ClosedForm for Coupled2d {
    fn system(&self) -> SystemDefinition {
        coupled_system()
    }

    fn position(&self, t: f64) -> Vector {
        let (s, u, ..) = self.sum_diff(t);
        Vector::from_vec(vec![0.5 * (s + u), 0.5 * (s - u)])
    }

    fn velocity(&self, t: f64) -> Vector {
        let (_, _, sd, ud) = self.sum_diff(t);
        Vector::from_vec(vec![0.5 * (sd + ud), 0.5 * (sd - ud)])
    }

    fn acceleration(&self, t: f64) -> Vector {
        let (.., ud) = self.sum_diff(t);
        Vector::from_vec(vec![-ud, ud])
    }
}

/// `C = [[1, -1], [-1, 1]]`, `K = 0`.
pub fn coupled_system() -> SystemDefinition {
    let c = Matrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
    SystemDefinition::linear(None, Some(c), Matrix::zeros(2, 2)).expect("2x2 system")
}

/// `ẍ + 2η ẋ + ω² x = 0` with `0 ≤ η < ω`; `ω₁ = √(ω² - η²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DampedOscillator {
    pub eta: f64,
    pub omega: f64,
    pub x0: f64,
    pub v0: f64,
}

impl DampedOscillator {
    pub fn new(eta: f64, omega: f64, x0: f64, v0: f64) -> Result<Self, AnalyticError> {
        if !(eta >= 0.0 && eta < omega && omega.is_finite()) {
            return Err(AnalyticError::NotUnderdamped { eta, omega });
        }
        Ok(Self { eta, omega, x0, v0 })
    }

    pub fn damped_frequency(&self) -> f64 {
        (self.omega * self.omega - self.eta * self.eta).sqrt()
    }

    /// `x = e^{-ηt}(a cos ω₁t + b sin ω₁t)`.
    fn coefficients(&self) -> (f64, f64) {
        (self.x0, (self.v0 + self.eta * self.x0) / self.damped_frequency())
    }

    /// `ẋ = e^{-ηt}(c cos ω₁t + d sin ω₁t)`.
    fn velocity_coefficients(&self) -> (f64, f64) {
        let (a, b) = self.coefficients();
        let w = self.damped_frequency();
        (b * w - self.eta * a, -(a * w + self.eta * b))
    }

    /// Zeros of `ẋ` in `(0, t_end]`, ascending.
    pub fn turning_times(&self, t_end: f64) -> Vec<f64> {
        let (c, d) = self.velocity_coefficients();
        if c == 0.0 && d == 0.0 {
            return Vec::new();
        }
        let w = self.damped_frequency();
        // c cos θ + d sin θ = R cos(θ - φ), zero at θ = φ + π/2 + kπ
        let first = d.atan2(c) + std::f64::consts::FRAC_PI_2;
        let mut theta = first.rem_euclid(std::f64::consts::PI);
        if theta <= 1e-12 {
            theta += std::f64::consts::PI;
        }
        let mut out = Vec::new();
        while theta / w <= t_end {
            out.push(theta / w);
            theta += std::f64::consts::PI;
        }
        out
    }
}

impl ClosedForm for DampedOscillator {
    fn system(&self) -> SystemDefinition {
        SystemDefinition::linear(
            None,
            Some(Matrix::from_element(1, 1, 2.0 * self.eta)),
            Matrix::from_element(1, 1, self.omega * self.omega),
        )
        .expect("1x1 system")
    }

    fn position(&self, t: f64) -> Vector {
        let (a, b) = self.coefficients();
        let (s, c) = (self.damped_frequency() * t).sin_cos();
        Vector::from_element(1, (-self.eta * t).exp() * (a * c + b * s))
    }

    fn velocity(&self, t: f64) -> Vector {
        let (c0, d0) = self.velocity_coefficients();
        let (s, c) = (self.damped_frequency() * t).sin_cos();
        Vector::from_element(1, (-self.eta * t).exp() * (c0 * c + d0 * s))
    }

    fn acceleration(&self, t: f64) -> Vector {
        let x = self.position(t)[0];
        let v = self.velocity(t)[0];
        Vector::from_element(1, -2.0 * self.eta * v - self.omega * self.omega * x)
    }
}

/// Linear system `q̈ + C q̇ + K q = 0` with unit mass.
pub fn build_ndim_damped(c: Matrix, k: Matrix) -> Result<SystemDefinition, AnalyticError> {
    let n = k.nrows();
    if !k.is_square() || !c.is_square() || c.nrows() != n {
        return Err(AnalyticError::Shape(format!(
            "C is {}x{}, K is {}x{}; both must be square of the same size",
            c.nrows(),
            c.ncols(),
            k.nrows(),
            k.ncols()
        )));
    }
    if (&k - k.transpose()).amax() > 1e-12 * k.amax().max(1.0) {
        return Err(AnalyticError::Shape("K must be symmetric".into()));
    }
    Ok(SystemDefinition::linear(None, Some(c), k)?)
}
