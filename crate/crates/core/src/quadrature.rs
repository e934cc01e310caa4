//! Adaptive quadrature and the analytic constants of the standard bump.

use std::sync::OnceLock;

/// Unnormalized standard bump `exp(-1 / (1 - u^2))` on `(-1, 1)`, zero outside.
pub fn standard_bump(u: f64) -> f64 {
    if u.abs() < 1.0 {
        (-1.0 / (1.0 - u * u)).exp()
    } else {
        0.0
    }
}

/// Derivative of [`standard_bump`].
pub fn standard_bump_derivative(u: f64) -> f64 {
    if u.abs() < 1.0 {
        let s = 1.0 - u * u;
        standard_bump(u) * (-2.0 * u / (s * s))
    } else {
        0.0
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
///
/// The interval is first split into `min_panels` equal panels, each of which
/// is refined until the Richardson estimate drops below its share of `tol`.
pub fn adaptive_simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    min_panels: usize,
) -> f64 {
    let panels = min_panels.max(1);
    let h = (b - a) / panels as f64;
    let local_tol = tol / panels as f64;
    (0..panels)
        .map(|p| {
            let lo = a + p as f64 * h;
            let hi = if p + 1 == panels { b } else { lo + h };
            let (flo, fmid, fhi) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
            simpson_step(f, lo, hi, flo, fmid, fhi, whole, local_tol, 40)
        })
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

const PANELS: usize = 1 << 14;
const TOL: f64 = 1e-15;

/// `int_{-1}^{1} exp(-1/(1-u^2)) du`.
pub fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| adaptive_simpson(&standard_bump, -1.0, 1.0, TOL, PANELS))
}

/// The Ito constant `C = int rho^2` for the unit-mass standard bump `rho`.
///
/// The mollified noise has quadratic variation `C n t` at every point.
pub fn ito_constant() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| {
        let mass = bump_mass();
        adaptive_simpson(
            &|u| (standard_bump(u) / mass).powi(2),
            -1.0,
            1.0,
            TOL,
            PANELS,
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_on_polynomial_and_gaussian() {
        let v = adaptive_simpson(&|x| x * x * x - x, 0.0, 2.0, 1e-12, 4);
        assert!((v - 2.0).abs() < 1e-12);
        let g = adaptive_simpson(&|x: f64| (-x * x).exp(), -8.0, 8.0, 1e-13, 16);
        assert!((g - std::f64::consts::PI.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn bump_derivative_matches_finite_difference() {
        for &u in &[-0.7, -0.2, 0.0, 0.31, 0.9] {
            let h = 1e-6;
            let fd = (standard_bump(u + h) - standard_bump(u - h)) / (2.0 * h);
            assert!((fd - standard_bump_derivative(u)).abs() < 1e-7);
        }
    }
}
