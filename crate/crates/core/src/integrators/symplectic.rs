use super::{IntegratorConfig, Method};
use crate::error::{DomainExit, IntegrationError};
use crate::model::{Matrix, Rates, State, SystemDefinition, Trajectory, TrajectoryMeta, Vector};

/// A separable Hamiltonian `½ pᵀM⁻¹p + U(q)` whose potential may be piecewise,
/// selected by a cursor that follows the motion across branches.
pub trait Hamiltonian {
    type Cursor: Clone + std::fmt::Debug;

    fn dim(&self) -> usize;
    fn mass_inverse(&self) -> &Matrix;
    /// Rejects systems that cannot be integrated as Hamiltonian.
    fn check(&self) -> Result<(), IntegrationError> {
        Ok(())
    }
    fn cursor_at(&self, state: &State) -> Result<Self::Cursor, DomainExit>;
    fn energy(&self, cursor: &Self::Cursor, q: &Vector, p: &Vector) -> Result<f64, DomainExit>;
    /// `∂H/∂q` for the branches selected by `cursor`.
    fn grad_q(&self, cursor: &Self::Cursor, q: &Vector) -> Result<Vector, DomainExit>;
    fn hessian_q(&self, cursor: &Self::Cursor, q: &Vector) -> Result<Matrix, DomainExit>;
    /// Moves the cursor after an accepted step ending at `(q, p)`.
    fn advance_cursor(&self, cursor: &mut Self::Cursor, q: &Vector, p: &Vector) -> Result<(), DomainExit>;

    fn grad_p(&self, p: &Vector) -> Vector {
        self.mass_inverse() * p
    }
}

impl Hamiltonian for SystemDefinition {
    type Cursor = ();

    fn dim(&self) -> usize {
        SystemDefinition::dim(self)
    }

    fn mass_inverse(&self) -> &Matrix {
        SystemDefinition::mass_inverse(self)
    }

    fn check(&self) -> Result<(), IntegrationError> {
        match self.force_law() {
            crate::model::ForceLaw::None => Ok(()),
            _ => Err(IntegrationError::Config(
                "system has a nonconservative force; integrate its conservative part or substitute".into(),
            )),
        }
    }

    fn cursor_at(&self, _state: &State) -> Result<(), DomainExit> {
        Ok(())
    }

    fn energy(&self, _c: &(), q: &Vector, p: &Vector) -> Result<f64, DomainExit> {
        Ok(SystemDefinition::energy(self, q, p))
    }

    fn grad_q(&self, _c: &(), q: &Vector) -> Result<Vector, DomainExit> {
        Ok(self.potential_gradient(q))
    }

    fn hessian_q(&self, _c: &(), q: &Vector) -> Result<Matrix, DomainExit> {
        Ok(self.potential_hessian(q))
    }

    fn advance_cursor(&self, _c: &mut (), _q: &Vector, _p: &Vector) -> Result<(), DomainExit> {
        Ok(())
    }
}

/// Kick–drift–kick leapfrog.
pub fn stormer_verlet_step<H: Hamiltonian>(
    h: &H,
    cursor: &H::Cursor,
    q: &Vector,
    p: &Vector,
    dt: f64,
) -> Result<(Vector, Vector), DomainExit> {
    let p_half = p - h.grad_q(cursor, q)? * (0.5 * dt);
    let q1 = q + h.grad_p(&p_half) * dt;
    let p1 = &p_half - h.grad_q(cursor, &q1)? * (0.5 * dt);
    Ok((q1, p1))
}

/// Butcher coefficients of a Gauss–Legendre collocation method.
struct Gauss {
    a: &'static [&'static [f64]],
    b: &'static [f64],
    c: &'static [f64],
}

const SQRT3_6: f64 = 0.288_675_134_594_812_9;
const MIDPOINT: Gauss = Gauss { a: &[&[0.5]], b: &[1.0], c: &[0.5] };
const GAUSS4: Gauss = Gauss {
    a: &[&[0.25, 0.25 - SQRT3_6], &[0.25 + SQRT3_6, 0.25]],
    b: &[0.5, 0.5],
    c: &[0.5 - SQRT3_6, 0.5 + SQRT3_6],
};

pub const IMPLICIT_TOL: f64 = 1e-12;
pub const IMPLICIT_MAX_ITER: usize = 50;

/// One step of a Gauss collocation method on a separable Hamiltonian.
///
/// Stage equations `Q_i = q + dt Σ a_ij M⁻¹P_j`, `P_i = p - dt Σ a_ij ∇U(Q_j)`
/// are solved by fixed-point iteration to `IMPLICIT_TOL` (relative) plus one
/// polishing sweep; if that fails, Newton's method takes over from the
/// explicit predictor. Stage times lie strictly inside the step.
fn gauss_step<H: Hamiltonian>(
    h: &H,
    cursor: &H::Cursor,
    q: &Vector,
    p: &Vector,
    dt: f64,
    t: f64,
    tab: &Gauss,
) -> Result<(Vector, Vector), IntegrationError> {
    let s = tab.b.len();
    let n = h.dim();
    let minv = h.mass_inverse();
    let g0 = h.grad_q(cursor, q)?;
    let v0 = minv * p;
    let predictor = || -> (Vec<Vector>, Vec<Vector>) {
        (tab.c.iter().map(|c| q + &v0 * (c * dt)).collect(), tab.c.iter().map(|c| p - &g0 * (c * dt)).collect())
    };
    let finish = |qs: &[Vector], ps: &[Vector]| -> Result<(Vector, Vector), IntegrationError> {
        let mut q1 = q.clone();
        let mut p1 = p.clone();
        for j in 0..s {
            q1 += minv * &ps[j] * (tab.b[j] * dt);
            p1 -= h.grad_q(cursor, &qs[j])? * (tab.b[j] * dt);
        }
        Ok((q1, p1))
    };
    let sweep = |qs: &[Vector], ps: &[Vector]| -> Result<(Vec<Vector>, Vec<Vector>, f64, f64), IntegrationError> {
        let gs = qs.iter().map(|x| h.grad_q(cursor, x)).collect::<Result<Vec<_>, _>>()?;
        let vs: Vec<Vector> = ps.iter().map(|x| minv * x).collect();
        let mut nq = Vec::with_capacity(s);
        let mut np = Vec::with_capacity(s);
        let (mut change, mut scale) = (0.0f64, 1.0f64);
        for i in 0..s {
            let mut qi = q.clone();
            let mut pi = p.clone();
            for j in 0..s {
                qi += &vs[j] * (tab.a[i][j] * dt);
                pi -= &gs[j] * (tab.a[i][j] * dt);
            }
            change = change.max((&qi - &qs[i]).amax()).max((&pi - &ps[i]).amax());
            scale = scale.max(qi.amax()).max(pi.amax());
            nq.push(qi);
            np.push(pi);
        }
        Ok((nq, np, change, scale))
    };

    let (mut qs, mut ps) = predictor();
    for _ in 0..IMPLICIT_MAX_ITER {
        let (nq, np, change, scale) = sweep(&qs, &ps)?;
        qs = nq;
        ps = np;
        if !change.is_finite() {
            break;
        }
        if change <= IMPLICIT_TOL * scale {
            let (nq, np, ..) = sweep(&qs, &ps)?;
            return finish(&nq, &np);
        }
    }

    // Newton on the stacked stage residual.
    let (mut qs, mut ps) = predictor();
    let m = 2 * s * n;
    for _ in 0..IMPLICIT_MAX_ITER {
        let gs = qs.iter().map(|x| h.grad_q(cursor, x)).collect::<Result<Vec<_>, _>>()?;
        let hs = qs.iter().map(|x| h.hessian_q(cursor, x)).collect::<Result<Vec<_>, _>>()?;
        let mut r = Vector::zeros(m);
        let mut jac = Matrix::identity(m, m);
        for i in 0..s {
            let mut rq = &qs[i] - q;
            let mut rp = &ps[i] - p;
            for j in 0..s {
                rq -= minv * &ps[j] * (tab.a[i][j] * dt);
                rp += &gs[j] * (tab.a[i][j] * dt);
                let (qi, pi, qj, pj) = (i * n, (s + i) * n, j * n, (s + j) * n);
                jac.view_mut((qi, pj), (n, n)).copy_from(&(-(minv * (tab.a[i][j] * dt))));
                jac.view_mut((pi, qj), (n, n)).copy_from(&(&hs[j] * (tab.a[i][j] * dt)));
            }
            r.rows_mut(i * n, n).copy_from(&rq);
            r.rows_mut((s + i) * n, n).copy_from(&rp);
        }
        let delta = jac.lu().solve(&r).ok_or(IntegrationError::NoConvergence { t, iterations: IMPLICIT_MAX_ITER })?;
        let mut scale = 1.0f64;
        for i in 0..s {
            qs[i] -= delta.rows(i * n, n);
            ps[i] -= delta.rows((s + i) * n, n);
            scale = scale.max(qs[i].amax()).max(ps[i].amax());
        }
        if delta.amax() <= IMPLICIT_TOL * scale {
            return finish(&qs, &ps);
        }
    }
    Err(IntegrationError::NoConvergence { t, iterations: 2 * IMPLICIT_MAX_ITER })
}

/// Implicit midpoint rule (one-stage Gauss).
pub fn implicit_midpoint_step<H: Hamiltonian>(
    h: &H,
    cursor: &H::Cursor,
    q: &Vector,
    p: &Vector,
    dt: f64,
    t: f64,
) -> Result<(Vector, Vector), IntegrationError> {
    gauss_step(h, cursor, q, p, dt, t, &MIDPOINT)
}

/// Two-stage Gauss–Legendre: fourth order, symplectic, symmetric.
pub fn gauss4_step<H: Hamiltonian>(
    h: &H,
    cursor: &H::Cursor,
    q: &Vector,
    p: &Vector,
    dt: f64,
    t: f64,
) -> Result<(Vector, Vector), IntegrationError> {
    gauss_step(h, cursor, q, p, dt, t, &GAUSS4)
}

/// Result of a run that may stop early when the motion leaves the domain
/// of a piecewise potential.
#[derive(Clone, Debug)]
pub struct HamiltonianRun {
    /// Samples up to the last output time reached.
    pub trajectory: Trajectory,
    pub exit: Option<DomainExit>,
}

/// Integrate `ṗ = -∂H/∂q, q̇ = ∂H/∂p` with a symplectic method. A domain exit
/// is an error.
pub fn integrate_hamiltonian<H: Hamiltonian>(
    h: &H,
    ic: &State,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegrationError> {
    let run = integrate_hamiltonian_until_exit(h, ic, None, cfg)?;
    match run.exit {
        Some(e) => Err(e.into()),
        None => Ok(run.trajectory),
    }
}

/// As [`integrate_hamiltonian`], but a domain exit ends the run and is
/// returned alongside the samples collected so far. `cursor` overrides the
/// branch selection inferred from `ic`.
pub fn integrate_hamiltonian_until_exit<H: Hamiltonian>(
    h: &H,
    ic: &State,
    cursor: Option<H::Cursor>,
    cfg: &IntegratorConfig,
) -> Result<HamiltonianRun, IntegrationError> {
    h.check()?;
    cfg.validate(ic.t)?;
    if !cfg.method.is_symplectic() {
        return Err(IntegrationError::Config(format!(
            "{} is not symplectic; use stormer-verlet, gauss4 or implicit-midpoint",
            cfg.method.name()
        )));
    }
    if ic.dim() != h.dim() || ic.p.len() != h.dim() {
        return Err(crate::error::ModelError::DimensionMismatch {
            what: "initial state",
            expected: h.dim(),
            got: ic.dim(),
        }
        .into());
    }
    if !ic.is_finite() {
        return Err(crate::error::ModelError::NonFinite("initial state").into());
    }
    let step = cfg.step.expect("validated");
    let times = cfg.output_times(ic.t);
    let mut cursor = match cursor {
        Some(c) => c,
        None => h.cursor_at(ic)?,
    };
    let rates_at = |c: &H::Cursor, s: &State| -> Result<Rates, DomainExit> {
        let qdot = h.grad_p(&s.p);
        let pdot = -h.grad_q(c, &s.q)?;
        let qddot = h.grad_p(&pdot);
        Ok(Rates { qdot, pdot, qddot })
    };
    let mut samples = vec![ic.clone()];
    let mut rates = vec![rates_at(&cursor, ic)?];
    let mut steps = 0usize;
    let mut evals = 0usize;
    let mut exit = None;
    let (mut q, mut p) = (ic.q.clone(), ic.p.clone());

    'outer: for w in times.windows(2) {
        let span = w[1] - w[0];
        let sub = ((span / step) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let dt = span / sub as f64;
        for k in 0..sub {
            if steps >= cfg.max_steps {
                return Err(IntegrationError::MaxSteps(cfg.max_steps));
            }
            let t = w[0] + dt * k as f64;
            let res = match cfg.method {
                Method::StormerVerlet => stormer_verlet_step(h, &cursor, &q, &p, dt).map_err(IntegrationError::from),
                Method::Gauss4 => gauss4_step(h, &cursor, &q, &p, dt, t),
                Method::ImplicitMidpoint => implicit_midpoint_step(h, &cursor, &q, &p, dt, t),
                _ => unreachable!(),
            };
            evals += if cfg.method == Method::StormerVerlet { 2 } else { 0 };
            let (q1, p1) = match res {
                Ok(v) => v,
                Err(IntegrationError::DomainExit(mut e)) => {
                    e.t = Some(t);
                    exit = Some(e);
                    break 'outer;
                }
                Err(e) => return Err(e),
            };
            steps += 1;
            if !(q1.iter().chain(p1.iter()).all(|v| v.is_finite())) {
                return Err(IntegrationError::NonFinite(t + dt));
            }
            if let Err(mut e) = h.advance_cursor(&mut cursor, &q1, &p1) {
                e.t = Some(t + dt);
                exit = Some(e);
                break 'outer;
            }
            q = q1;
            p = p1;
        }
        let s = State { t: w[1], q: q.clone(), p: p.clone() };
        match rates_at(&cursor, &s) {
            Ok(r) => {
                rates.push(r);
                samples.push(s);
            }
            Err(mut e) => {
                e.t = Some(w[1]);
                exit = Some(e);
                break;
            }
        }
    }
    let meta = TrajectoryMeta {
        integrator: cfg.method.name().to_string(),
        tolerance: step,
        accepted_steps: steps,
        rejected_steps: 0,
        rhs_evaluations: evals,
    };
    Ok(HamiltonianRun { trajectory: Trajectory::new(samples, rates, meta)?, exit })
}
