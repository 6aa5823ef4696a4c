//! One-dimensional adaptive quadrature and expectations against the
//! standard normal density.

use thiserror::Error;

/// Integration range for normal-weighted integrands; phi(12) ~ 2e-32, far
/// below every tolerance used here.
pub const NORMAL_TAIL_CUTOFF: f64 = 12.0;

const MAX_DEPTH: u32 = 60;

#[derive(Debug, Error)]
pub enum QuadError {
    #[error("adaptive quadrature did not converge on [{a}, {b}] (requested tolerance {tol:e})")]
    NonConvergence { a: f64, b: f64, tol: f64 },
}

/// Standard normal density.
#[inline]
pub fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Adaptive Simpson quadrature of `f` over [a, b] to absolute tolerance.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64, QuadError>
where
    F: Fn(f64) -> f64,
{
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    recurse(&f, a, b, fa, fm, fb, whole, abs_tol, MAX_DEPTH)
}

/// Adaptive Simpson over panels split at the given interior points (for
/// integrands with kinks); `points` must be sorted and include the endpoints.
pub fn adaptive_simpson_panels<F>(f: F, points: &[f64], abs_tol: f64) -> Result<f64, QuadError>
where
    F: Fn(f64) -> f64,
{
    assert!(points.len() >= 2, "need at least the two endpoints");
    let panel_tol = abs_tol / (points.len() - 1) as f64;
    let mut total = 0.0;
    for w in points.windows(2) {
        total += adaptive_simpson(&f, w[0], w[1], panel_tol)?;
    }
    Ok(total)
}

/// E[f(Z)] for scalar standard normal Z, splitting at the given kink
/// locations of f.
pub fn normal_expectation<F>(f: F, kinks: &[f64], abs_tol: f64) -> Result<f64, QuadError>
where
    F: Fn(f64) -> f64,
{
    let mut points = vec![-NORMAL_TAIL_CUTOFF];
    for &k in kinks {
        if k > -NORMAL_TAIL_CUTOFF && k < NORMAL_TAIL_CUTOFF {
            points.push(k);
        }
    }
    points.push(NORMAL_TAIL_CUTOFF);
    points.sort_by(|x, y| x.partial_cmp(y).unwrap());
    adaptive_simpson_panels(|z| f(z) * phi(z), &points, abs_tol)
}

#[inline]
fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64, QuadError>
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(QuadError::NonConvergence { a, b, tol });
    }
    let half_tol = 0.5 * tol;
    Ok(recurse(f, a, m, fa, flm, fm, left, half_tol, depth - 1)?
        + recurse(f, m, b, fm, frm, fb, right, half_tol, depth - 1)?)
}
