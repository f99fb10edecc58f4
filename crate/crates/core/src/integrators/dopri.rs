use super::{IntegratorConfig, OdeSystem};
use crate::error::IntegrationError;

// Dormand–Prince 5(4) tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// continuous extension (Hairer, Nørsett & Wanner)
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Step size proposed for continuing the integration.
    pub next_step: f64,
}

/// Adaptive Dormand–Prince 5(4) with fourth-order dense output.
#[derive(Clone, Debug)]
pub struct Dopri5 {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_steps: usize,
    pub max_step: f64,
}

impl Dopri5 {
    pub fn from_config(cfg: &IntegratorConfig) -> Self {
        Self {
            abs_tol: cfg.abs_tol,
            rel_tol: cfg.rel_tol,
            max_steps: cfg.max_steps,
            max_step: cfg.max_step.unwrap_or(f64::INFINITY),
        }
    }

    fn initial_step<S: OdeSystem>(
        &self,
        sys: &S,
        t0: f64,
        y0: &[f64],
        f0: &[f64],
        span: f64,
    ) -> Result<f64, IntegrationError> {
        let n = y0.len();
        let sc: Vec<f64> = y0.iter().map(|y| self.abs_tol + self.rel_tol * y.abs()).collect();
        let norm = |v: &[f64]| (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / n as f64).sqrt();
        let d0 = norm(y0);
        let d1 = norm(f0);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
        let mut f1 = vec![0.0; n];
        sys.rhs(t0 + h0, &y1, &mut f1)?;
        let df: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
        let d2 = norm(&df) / h0;
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
        Ok((100.0 * h0).min(h1).min(span).min(self.max_step))
    }

    /// Integrate from `t0` to `t_end`, calling `sample` at each requested
    /// output time (ascending, within `(t0, t_end]`).
    #[allow(clippy::too_many_arguments)]
    pub fn run<S: OdeSystem, F: FnMut(f64, &[f64])>(
        &self,
        sys: &S,
        t0: f64,
        y0: &[f64],
        t_end: f64,
        outputs: &[f64],
        h_init: Option<f64>,
        mut sample: F,
    ) -> Result<StepStats, IntegrationError> {
        let n = sys.dim();
        let mut stats = StepStats::default();
        let mut t = t0;
        let mut y = y0.to_vec();
        let mut k = vec![vec![0.0; n]; 7];
        sys.rhs(t, &y, &mut k[0])?;
        stats.evaluations += 1;
        let span = t_end - t0;
        let mut h = match h_init {
            Some(h) if h > 0.0 => h.min(span).min(self.max_step),
            _ => self.initial_step(sys, t, &y, &k[0].clone(), span)?,
        };
        stats.evaluations += 1;
        let mut next_out = 0usize;
        let mut ytmp = vec![0.0; n];
        let mut y1 = vec![0.0; n];
        let mut err = vec![0.0; n];
        let mut rej_last = false;

        while t < t_end {
            if stats.accepted + stats.rejected >= self.max_steps {
                return Err(IntegrationError::MaxSteps(self.max_steps));
            }
            let last = t_end - (t + h) < (1e-12 * h).max(64.0 * f64::EPSILON * t_end.abs().max(1.0));
            if last {
                h = t_end - t;
            }
            if h <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
                return Err(IntegrationError::StepUnderflow { t, h });
            }
            // stages
            for i in 0..n {
                ytmp[i] = y[i] + h * A21 * k[0][i];
            }
            sys.rhs(t + C2 * h, &ytmp, &mut k[1])?;
            for i in 0..n {
                ytmp[i] = y[i] + h * (A31 * k[0][i] + A32 * k[1][i]);
            }
            sys.rhs(t + C3 * h, &ytmp, &mut k[2])?;
            for i in 0..n {
                ytmp[i] = y[i] + h * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
            }
            sys.rhs(t + C4 * h, &ytmp, &mut k[3])?;
            for i in 0..n {
                ytmp[i] = y[i] + h * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
            }
            sys.rhs(t + C5 * h, &ytmp, &mut k[4])?;
            for i in 0..n {
                ytmp[i] = y[i] + h * (A61 * k[0][i] + A62 * k[1][i] + A63 * k[2][i] + A64 * k[3][i] + A65 * k[4][i]);
            }
            sys.rhs(t + h, &ytmp, &mut k[5])?;
            for i in 0..n {
                y1[i] = y[i] + h * (A71 * k[0][i] + A73 * k[2][i] + A74 * k[3][i] + A75 * k[4][i] + A76 * k[5][i]);
            }
            sys.rhs(t + h, &y1, &mut k[6])?;
            stats.evaluations += 6;

            let mut acc = 0.0;
            for i in 0..n {
                err[i] = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
                let sc = self.abs_tol + self.rel_tol * y[i].abs().max(y1[i].abs());
                acc += (err[i] / sc).powi(2);
            }
            let e = (acc / n as f64).sqrt();
            if !e.is_finite() {
                if y1.iter().any(|v| !v.is_finite()) && h < 1e-300 {
                    return Err(IntegrationError::NonFinite(t));
                }
                stats.rejected += 1;
                h *= 0.2;
                rej_last = true;
                continue;
            }
            if e <= 1.0 {
                stats.accepted += 1;
                let t_new = if last { t_end } else { t + h };
                // dense output between t and t_new
                while next_out < outputs.len() && outputs[next_out] <= t_new {
                    let to = outputs[next_out];
                    if to == t_new {
                        sample(to, &y1);
                    } else {
                        let s = (to - t) / h;
                        let s1 = 1.0 - s;
                        for i in 0..n {
                            let r2 = y1[i] - y[i];
                            let r3 = h * k[0][i] - r2;
                            let r4 = r2 - h * k[6][i] - r3;
                            let r5 = h
                                * (D1 * k[0][i]
                                    + D3 * k[2][i]
                                    + D4 * k[3][i]
                                    + D5 * k[4][i]
                                    + D6 * k[5][i]
                                    + D7 * k[6][i]);
                            ytmp[i] = y[i] + s * (r2 + s1 * (r3 + s * (r4 + s1 * r5)));
                        }
                        sample(to, &ytmp);
                    }
                    next_out += 1;
                }
                t = t_new;
                std::mem::swap(&mut y, &mut y1);
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(IntegrationError::NonFinite(t));
                }
                let first = std::mem::take(&mut k[6]);
                k[6] = std::mem::replace(&mut k[0], first);
                let mut fac = 0.9 * e.max(1e-10).powf(-0.2);
                fac = fac.clamp(0.2, 10.0);
                if rej_last {
                    fac = fac.min(1.0);
                }
                rej_last = false;
                stats.next_step = if last { h } else { (h * fac).min(self.max_step) };
                h = (h * fac).min(self.max_step);
            } else {
                stats.rejected += 1;
                rej_last = true;
                h *= (0.9 * e.powf(-0.2)).max(0.2);
            }
        }
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::IntegratorConfig;

    struct Exp;
    impl OdeSystem for Exp {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), IntegrationError> {
            dy[0] = y[1];
            dy[1] = -y[0];
            Ok(())
        }
    }

    #[test]
    fn dense_output_is_accurate_between_steps() {
        let solver = Dopri5::from_config(&IntegratorConfig::rk45(10.0, 1e-11));
        let outs: Vec<f64> = (1..=1000).map(|k| k as f64 * 0.01).collect();
        let mut worst: f64 = 0.0;
        let mut k = 0;
        let stats = solver
            .run(&Exp, 0.0, &[0.0, 1.0], 10.0, &outs, None, |t, y| {
                worst = worst.max((y[0] - t.sin()).abs()).max((y[1] - t.cos()).abs());
                k += 1;
            })
            .unwrap();
        assert_eq!(k, 1000);
        assert!(worst < 1e-9, "{worst}");
        // far fewer steps than outputs: the samples really are interpolated
        assert!(stats.accepted < 500, "{}", stats.accepted);
    }

    #[test]
    fn tolerance_controls_error() {
        let err = |tol: f64| {
            let solver = Dopri5::from_config(&IntegratorConfig::rk45(5.0, tol));
            let mut last = vec![];
            solver.run(&Exp, 0.0, &[0.0, 1.0], 5.0, &[5.0], None, |_, y| last = y.to_vec()).unwrap();
            (last[0] - 5f64.sin()).abs()
        };
        assert!(err(1e-12) < err(1e-7) / 100.0);
    }
}
