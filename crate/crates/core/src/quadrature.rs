//! Composite trapezoid quadrature with one Richardson refinement.

/// Trapezoid and half-step trapezoid on one panel, combined by Richardson
/// extrapolation: `(4 T(h/2) - T(h)) / 3`.
#[inline]
pub fn richardson_panel(h: f64, f0: f64, fmid: f64, f1: f64) -> f64 {
    let coarse = 0.5 * h * (f0 + f1);
    let fine = 0.25 * h * (f0 + 2.0 * fmid + f1);
    (4.0 * fine - coarse) / 3.0
}

/// Cumulative integral over nodes `x` with node values `f` and panel
/// midpoint values `fmid` (one per panel). The result starts at 0.
pub fn cumulative_richardson(x: &[f64], f: &[f64], fmid: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), f.len());
    assert_eq!(fmid.len() + 1, x.len().max(1));
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 0..x.len().saturating_sub(1) {
        acc += richardson_panel(x[k + 1] - x[k], f[k], fmid[k], f[k + 1]);
        out.push(acc);
    }
    out
}

/// Plain cumulative trapezoid, starting at 0.
pub fn cumulative_trapezoid(x: &[f64], f: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), f.len());
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 0..x.len().saturating_sub(1) {
        acc += 0.5 * (x[k + 1] - x[k]) * (f[k] + f[k + 1]);
        out.push(acc);
    }
    out
}

/// Integral of `f` over `[a, b]` with `panels` Richardson-refined trapezoid panels.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(1);
    let h = (b - a) / n as f64;
    let mut sum = 0.0;
    let mut f0 = f(a);
    for k in 0..n {
        let x0 = a + h * k as f64;
        let x1 = if k + 1 == n { b } else { a + h * (k + 1) as f64 };
        let f1 = f(x1);
        sum += richardson_panel(x1 - x0, f0, f(0.5 * (x0 + x1)), f1);
        f0 = f1;
    }
    sum
}
