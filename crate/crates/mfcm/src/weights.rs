//! The seven M-estimator rho/weight pairs used by the IRLS loop.
//!
//! Every implemented pair satisfies rho'(x) = x * w(x), so the weighted
//! least-squares sweep and the robust objective agree. The Fair weight is
//! the standard 1/(1 + x/beta); the increasing variant sometimes quoted
//! alongside its rho does not integrate back to that rho, which
//! [`rho_weight_residual`] makes checkable.

use crate::model::WeightKind;

/// IRLS weight w(x) for a nonnegative residual magnitude. Lies in (0, 1]
/// and is non-increasing for every kind.
pub fn weight(kind: WeightKind, x: f64) -> f64 {
    debug_assert!(x >= 0.0, "weights are defined on residual magnitudes");
    match kind {
        WeightKind::L2 => 1.0,
        WeightKind::L1L2 => (1.0 + x * x / 2.0).powf(-0.5),
        WeightKind::Huber { beta } => {
            if x <= beta {
                1.0
            } else {
                beta / x
            }
        }
        WeightKind::GemanMcClure => {
            let t = 1.0 + x * x;
            1.0 / (t * t)
        }
        WeightKind::Welsch { beta } => (-(x / beta).powi(2)).exp(),
        WeightKind::Cauchy { beta } => 1.0 / (1.0 + (x / beta).powi(2)),
        WeightKind::Fair { beta } => 1.0 / (1.0 + x / beta),
    }
}

/// Robust loss rho(x) for a nonnegative residual magnitude; rho(0) = 0.
pub fn rho(kind: WeightKind, x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    match kind {
        WeightKind::L2 => x * x / 2.0,
        WeightKind::L1L2 => 2.0 * ((1.0 + x * x / 2.0).sqrt() - 1.0),
        WeightKind::Huber { beta } => {
            if x <= beta {
                x * x / 2.0
            } else {
                beta * (x - beta / 2.0)
            }
        }
        WeightKind::GemanMcClure => x * x / (2.0 * (1.0 + x * x)),
        WeightKind::Welsch { beta } => beta * beta / 2.0 * (1.0 - (-(x / beta).powi(2)).exp()),
        WeightKind::Cauchy { beta } => beta * beta / 2.0 * (1.0 + (x / beta).powi(2)).ln(),
        WeightKind::Fair { beta } => beta * beta * (x / beta - (1.0 + x / beta).ln()),
    }
}

/// Consistency check between a rho and its weight: the largest deviation of
/// rho(x) from the quadrature of s*w(s) over [0, x], across the given grid.
///
/// The grid must be sorted ascending with nonnegative entries. A correct
/// pair keeps the residual at quadrature accuracy (~1e-8); a mismatched
/// pair leaves a visible gap.
pub fn rho_weight_residual(kind: WeightKind, grid: &[f64]) -> f64 {
    rho_residual_against(|s| weight(kind, s), |x| rho(kind, x), grid)
}

/// Same residual, but for an arbitrary weight function. Used to compare
/// alternative weight definitions against a fixed rho.
pub fn rho_residual_against<W, R>(w: W, rho_fn: R, grid: &[f64]) -> f64
where
    W: Fn(f64) -> f64,
    R: Fn(f64) -> f64,
{
    let mut max_err: f64 = 0.0;
    let mut integral = 0.0;
    let mut prev = 0.0;
    for &x in grid {
        debug_assert!(x >= prev && x >= 0.0, "grid must be sorted and nonnegative");
        if x > prev {
            integral += adaptive_simpson(&|s| s * w(s), prev, x, 1e-11, 30);
        }
        max_err = max_err.max((rho_fn(x) - integral).abs());
        prev = x;
    }
    max_err
}

fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, fa, b, fb, fm);
    adaptive_step(f, a, fa, b, fb, m, fm, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, fa, m, fm, flm);
    let right = simpson(m, fm, b, fb, frm);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive_step(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + adaptive_step(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
}
