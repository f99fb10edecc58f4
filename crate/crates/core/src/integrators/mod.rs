//! Time integration. Dissipative systems use explicit Runge-Kutta and
//! substitute Hamiltonians use symplectic schemes. Phase-volume audits
//! propagate the variational equations alongside the state.

mod dopri;
mod monodromy;
mod rk4;
mod symplectic;

use serde::{Deserialize, Serialize};

pub use dopri::{Dopri5, StepStats};
pub use monodromy::{integrate_with_monodromy, monodromy_along_curve, MonodromyOptions, MonodromyTrajectory};
pub use symplectic::{
    gauss4_step, implicit_midpoint_step, integrate_hamiltonian, integrate_hamiltonian_until_exit, stormer_verlet_step,
    Hamiltonian, HamiltonianRun,
};

use crate::error::IntegrationError;
use crate::model::{Rates, State, SystemDefinition, Trajectory, TrajectoryMeta, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rk4Fixed,
    Rk45Adaptive,
    StormerVerlet,
    /// Two-stage Gauss–Legendre collocation (order 4).
    Gauss4,
    ImplicitMidpoint,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Rk4Fixed => "rk4-fixed",
            Method::Rk45Adaptive => "rk45-adaptive",
            Method::StormerVerlet => "stormer-verlet",
            Method::Gauss4 => "gauss4",
            Method::ImplicitMidpoint => "implicit-midpoint",
        }
    }

    pub fn is_symplectic(self) -> bool {
        matches!(self, Method::StormerVerlet | Method::Gauss4 | Method::ImplicitMidpoint)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Fixed step for rk4 and the symplectic methods.
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default = "default_tol")]
    pub abs_tol: f64,
    #[serde(default = "default_tol")]
    pub rel_tol: f64,
    /// Absolute end time.
    pub t_end: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    /// Spacing of the returned samples; defaults to 1e-3.
    #[serde(default)]
    pub output_step: Option<f64>,
    /// Upper bound on adaptive steps.
    #[serde(default)]
    pub max_step: Option<f64>,
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_steps() -> usize {
    10_000_000
}

pub const DEFAULT_OUTPUT_STEP: f64 = 1e-3;

impl IntegratorConfig {
    pub fn rk45(t_end: f64, tol: f64) -> Self {
        Self {
            method: Method::Rk45Adaptive,
            step: None,
            abs_tol: tol,
            rel_tol: tol,
            t_end,
            max_steps: default_max_steps(),
            output_step: None,
            max_step: None,
        }
    }

    pub fn fixed(method: Method, t_end: f64, step: f64) -> Self {
        Self { method, step: Some(step), ..Self::rk45(t_end, default_tol()) }
    }

    pub fn with_output_step(mut self, dt: f64) -> Self {
        self.output_step = Some(dt);
        self
    }

    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn output_step(&self) -> f64 {
        self.output_step.unwrap_or(DEFAULT_OUTPUT_STEP)
    }

    pub fn validate(&self, t0: f64) -> Result<(), IntegrationError> {
        let bad = |m: &str| Err(IntegrationError::Config(m.to_string()));
        if !(self.t_end > t0) || !self.t_end.is_finite() {
            return bad("t_end must be finite and after the initial time");
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if let Some(h) = self.step {
            if !(h > 0.0 && h.is_finite()) {
                return bad("step must be positive");
            }
        }
        if !(self.output_step() > 0.0) {
            return bad("output_step must be positive");
        }
        if self.max_step.is_some_and(|h| !(h > 0.0)) {
            return bad("max_step must be positive");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        if (matches!(self.method, Method::Rk4Fixed) || self.method.is_symplectic()) && self.step.is_none() {
            return bad("fixed-step methods need `step`");
        }
        Ok(())
    }

    /// Output grid `t0 + k·dt`, always ending exactly at `t_end`.
    pub fn output_times(&self, t0: f64) -> Vec<f64> {
        output_grid(t0, self.t_end, self.output_step())
    }
}

pub fn output_grid(t0: f64, t_end: f64, dt: f64) -> Vec<f64> {
    let span = t_end - t0;
    let n = (span / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let mut out: Vec<f64> = (0..n).map(|k| t0 + dt * k as f64).collect();
    out.push(t_end);
    out
}

/// First-order system `y' = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), IntegrationError>;
}

/// Phase-space form `y = (q, p)` of a dissipative system.
pub(crate) struct PhaseOde<'a> {
    pub sys: &'a SystemDefinition,
}

impl OdeSystem for PhaseOde<'_> {
    fn dim(&self) -> usize {
        2 * self.sys.dim()
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), IntegrationError> {
        let n = self.sys.dim();
        let q = Vector::from_column_slice(&y[..n]);
        let p = Vector::from_column_slice(&y[n..]);
        let (qdot, pdot) = self.sys.rates(&q, &p);
        dy[..n].copy_from_slice(qdot.as_slice());
        dy[n..].copy_from_slice(pdot.as_slice());
        Ok(())
    }
}

/// Sample an ODE on `times` (the first entry is the initial time).
pub fn solve_ode<S: OdeSystem>(
    sys: &S,
    y0: &[f64],
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<(Vec<Vec<f64>>, StepStats), IntegrationError> {
    let t0 = times[0];
    let t_end = *times.last().unwrap();
    let mut out = Vec::with_capacity(times.len());
    let stats = match cfg.method {
        Method::Rk45Adaptive => {
            let solver = Dopri5::from_config(cfg);
            solver.run(sys, t0, y0, t_end, &times[1..], None, |_, y| out.push(y.to_vec()))?
        }
        Method::Rk4Fixed => {
            rk4::run(sys, t0, y0, &times[1..], cfg.step.unwrap(), cfg.max_steps, |_, y| out.push(y.to_vec()))?
        }
        m => {
            return Err(IntegrationError::Config(format!(
                "{} integrates Hamiltonian systems; use rk4-fixed or rk45-adaptive",
                m.name()
            )))
        }
    };
    let mut all = Vec::with_capacity(times.len());
    all.push(y0.to_vec());
    all.extend(out);
    Ok((all, stats))
}

/// Integrate the dissipative equations of motion from `ic`, sampled on the
/// configured output grid.
pub fn integrate(sys: &SystemDefinition, ic: &State, cfg: &IntegratorConfig) -> Result<Trajectory, IntegrationError> {
    sys.check_state(ic)?;
    cfg.validate(ic.t)?;
    let times = cfg.output_times(ic.t);
    let (ys, stats) = solve_ode(&PhaseOde { sys }, &ic.phase(), &times, cfg)?;
    let n = sys.dim();
    let mut samples = Vec::with_capacity(ys.len());
    let mut rates = Vec::with_capacity(ys.len());
    for (t, y) in times.iter().zip(&ys) {
        let mut s = State::from_phase(*t, y);
        if samples.is_empty() {
            s = ic.clone();
        }
        if !s.is_finite() {
            return Err(IntegrationError::NonFinite(*t));
        }
        let (qdot, pdot) = sys.rates(&s.q, &s.p);
        let qddot = sys.velocity(&pdot);
        debug_assert_eq!(qdot.len(), n);
        rates.push(Rates { qdot, pdot, qddot });
        samples.push(s);
    }
    let meta = TrajectoryMeta {
        integrator: cfg.method.name().to_string(),
        tolerance: match cfg.method {
            Method::Rk45Adaptive => cfg.rel_tol.max(cfg.abs_tol),
            _ => cfg.step.unwrap_or(0.0),
        },
        accepted_steps: stats.accepted,
        rejected_steps: stats.rejected,
        rhs_evaluations: stats.evaluations,
    };
    Ok(Trajectory::new(samples, rates, meta)?)
}
