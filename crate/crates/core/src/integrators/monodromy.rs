use super::{Dopri5, IntegratorConfig, Method, OdeSystem};
use crate::error::IntegrationError;
use crate::model::{Matrix, Rates, State, SystemDefinition, Trajectory, TrajectoryMeta, Vector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonodromyOptions {
    /// Permit central-difference Jacobians when no closed form exists.
    pub allow_fd: bool,
}

impl Default for MonodromyOptions {
    fn default() -> Self {
        Self { allow_fd: true }
    }
}

/// A trajectory together with the phase-volume factor of its flow map.
///
/// `jacobian_dets[k]` is `det Φ(t_k)` for the state-transition matrix
/// `Φ(t_k) = ∂z(t_k)/∂z(t_0)`; `trace_dets[k]` is `exp ∫ tr(Df) dt`,
/// integrated as an independent scalar. Both start at 1.
#[derive(Clone, Debug)]
pub struct MonodromyTrajectory {
    pub base: Trajectory,
    pub jacobian_dets: Vec<f64>,
    pub trace_dets: Vec<f64>,
}

/// `(t, z) -> (z', A)`.
type VariationalField<'a> = dyn Fn(f64, &[f64]) -> (Vec<f64>, Matrix) + 'a;

/// States, `det Φ` and `exp ∫ tr A` per output time, then accepted, rejected
/// and evaluation counts.
type Propagation = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>, usize, usize, usize);

/// State-plus-variational system `(z, Φ, ℓ)` with `Φ' = A Φ`, `ℓ' = tr A`.
/// `field(t, z)` returns `(z', A)`; `m = 0` means `A` depends on `t` alone.
struct Variational<'a> {
    m: usize,
    d: usize,
    field: &'a VariationalField<'a>,
}

impl OdeSystem for Variational<'_> {
    fn dim(&self) -> usize {
        self.m + self.d * self.d + 1
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), IntegrationError> {
        let (m, d) = (self.m, self.d);
        let (zdot, a) = (self.field)(t, &y[..m]);
        dy[..m].copy_from_slice(&zdot);
        let phi = nalgebra::DMatrixView::from_slice(&y[m..m + d * d], d, d);
        let prod = &a * phi;
        dy[m..m + d * d].copy_from_slice(prod.as_slice());
        dy[m + d * d] = a.trace();
        Ok(())
    }
}

/// Propagate `Φ` over each output interval separately, restarting from the
/// identity, and accumulate `det Φ` as a product. This keeps every factor
/// well conditioned when the total volume change spans many decades.
fn propagate(
    sys: &Variational<'_>,
    z0: &[f64],
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Propagation, IntegrationError> {
    let (m, d) = (sys.m, sys.d);
    let mut y = vec![0.0; sys.dim()];
    y[..m].copy_from_slice(z0);
    let mut states = vec![z0.to_vec()];
    let mut dets = vec![1.0];
    let mut traces = vec![1.0];
    let (mut det, mut ell) = (1.0f64, 0.0f64);
    let (mut acc, mut rej, mut ev) = (0, 0, 0);
    let mut h = None;
    let solver = Dopri5::from_config(cfg);
    for w in times.windows(2) {
        for v in &mut y[m..] {
            *v = 0.0;
        }
        for i in 0..d {
            y[m + i * d + i] = 1.0;
        }
        let mut end = Vec::new();
        let st = match cfg.method {
            Method::Rk4Fixed => {
                let step = cfg.step.expect("validated");
                super::rk4::run(sys, w[0], &y, &[w[1]], step, cfg.max_steps, |_, v| end = v.to_vec())?
            }
            _ => solver.run(sys, w[0], &y, w[1], &[w[1]], h, |_, v| end = v.to_vec())?,
        };
        h = Some(st.next_step);
        acc += st.accepted;
        rej += st.rejected;
        ev += st.evaluations;
        let phi = Matrix::from_column_slice(d, d, &end[m..m + d * d]);
        det *= phi.determinant();
        ell += end[m + d * d];
        if !det.is_finite() {
            return Err(IntegrationError::NonFinite(w[1]));
        }
        dets.push(det);
        traces.push(ell.exp());
        states.push(end[..m].to_vec());
        y.copy_from_slice(&end);
    }
    Ok((states, dets, traces, acc, rej, ev))
}

fn check_method(cfg: &IntegratorConfig) -> Result<(), IntegrationError> {
    match cfg.method {
        Method::Rk4Fixed | Method::Rk45Adaptive => Ok(()),
        m => Err(IntegrationError::Config(format!(
            "variational equations need rk4-fixed or rk45-adaptive, not {}",
            m.name()
        ))),
    }
}

/// Integrate a system together with its variational equations.
pub fn integrate_with_monodromy(
    sys: &SystemDefinition,
    ic: &State,
    cfg: &IntegratorConfig,
    opts: MonodromyOptions,
) -> Result<MonodromyTrajectory, IntegrationError> {
    sys.check_state(ic)?;
    cfg.validate(ic.t)?;
    check_method(cfg)?;
    let n = sys.dim();
    let analytic = sys.analytic_jacobian();
    if analytic.is_none() && !opts.allow_fd {
        return Err(IntegrationError::JacobianUnavailable);
    }
    let field = |_t: f64, z: &[f64]| {
        let q = Vector::from_column_slice(&z[..n]);
        let p = Vector::from_column_slice(&z[n..]);
        let (qd, pd) = sys.rates(&q, &p);
        let mut dz = qd.as_slice().to_vec();
        dz.extend_from_slice(pd.as_slice());
        let a = match &analytic {
            Some(j) => j.clone(),
            None => sys.fd_jacobian(&q, &p),
        };
        (dz, a)
    };
    let var = Variational { m: 2 * n, d: 2 * n, field: &field };
    let times = cfg.output_times(ic.t);
    let (states, jacobian_dets, trace_dets, acc, rej, ev) = propagate(&var, &ic.phase(), &times, cfg)?;
    let mut samples = Vec::with_capacity(states.len());
    let mut rates = Vec::with_capacity(states.len());
    for (k, (t, z)) in times.iter().zip(&states).enumerate() {
        let s = if k == 0 { ic.clone() } else { State::from_phase(*t, z) };
        let (qdot, pdot) = sys.rates(&s.q, &s.p);
        let qddot = sys.velocity(&pdot);
        rates.push(Rates { qdot, pdot, qddot });
        samples.push(s);
    }
    let meta = TrajectoryMeta {
        integrator: format!("{}+variational", cfg.method.name()),
        tolerance: cfg.rel_tol.max(cfg.abs_tol),
        accepted_steps: acc,
        rejected_steps: rej,
        rhs_evaluations: ev,
    };
    Ok(MonodromyTrajectory { base: Trajectory::new(samples, rates, meta)?, jacobian_dets, trace_dets })
}

/// Volume factors of a linearized flow `Φ' = A(t) Φ` along a prescribed
/// curve, sampled on `times`. Returns `(jacobian_dets, trace_dets)`.
pub fn monodromy_along_curve<A: Fn(f64) -> Matrix>(
    dim: usize,
    jacobian: A,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<(Vec<f64>, Vec<f64>), IntegrationError> {
    check_method(cfg)?;
    if times.len() < 2 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(IntegrationError::Config("times must be strictly increasing with at least 2 entries".into()));
    }
    let field = |t: f64, _z: &[f64]| (Vec::new(), jacobian(t));
    let var = Variational { m: 0, d: dim, field: &field };
    let (_, dets, traces, ..) = propagate(&var, &[], times, cfg)?;
    Ok((dets, traces))
}
