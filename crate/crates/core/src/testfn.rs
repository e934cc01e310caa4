//! Zero-mean test functions `phi = d_x psi`.
//!
//! `phi` is the forward difference of sampled `psi`, so every time row sums to
//! zero up to rounding and any x-independent field pairs to zero against it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FieldPath, GridSpec};
use crate::quadrature::{standard_bump, standard_bump_derivative};
use crate::scalar::Real;
use crate::stencil::forward_diff;

/// Spatial bumps must keep this many cells between their support and the seam.
pub const SEAM_MARGIN_CELLS: usize = 4;

/// `amplitude * exp(-1/(1-u^2))` with `u = (s - center) / width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub width: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

impl Bump {
    pub fn new(center: f64, width: f64) -> Self {
        Bump {
            center,
            width,
            amplitude: 1.0,
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        self.amplitude * standard_bump((s - self.center) / self.width)
    }

    pub fn derivative(&self, s: f64) -> f64 {
        self.amplitude * standard_bump_derivative((s - self.center) / self.width) / self.width
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.width, self.center + self.width)
    }
}

/// Parameters of a separable test function `psi(t, x) = a(t) b(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionSpec {
    pub temporal: Bump,
    pub spatial: Bump,
}

impl TestFunctionSpec {
    pub fn new(a_center: f64, a_width: f64, b_center: f64, b_width: f64) -> Self {
        TestFunctionSpec {
            temporal: Bump::new(a_center, a_width),
            spatial: Bump::new(b_center, b_width),
        }
    }
}

/// A sampled member of the zero-mean test space on `[0, T) x torus`.
#[derive(Debug, Clone)]
pub struct SpaceTimeTestFunction<T> {
    spec: TestFunctionSpec,
    psi_x: Vec<T>,
    phi: FieldPath<T>,
    dphi_dt: FieldPath<T>,
}

fn check_spatial<T: Real>(grid: &GridSpec<T>, b: &Bump) -> Result<()> {
    if !(b.width > 0.0 && b.width.is_finite()) {
        return Err(Error::SupportViolation(format!(
            "spatial width must be positive, got {}",
            b.width
        )));
    }
    let margin = SEAM_MARGIN_CELLS as f64 * grid.dx().as_f64();
    let (lo, hi) = b.support();
    let length = grid.length().as_f64();
    if lo < margin || hi > length - margin {
        return Err(Error::SupportViolation(format!(
            "spatial support [{lo}, {hi}] must stay {margin} away from the seam of [0, {length})"
        )));
    }
    Ok(())
}

fn sample_spatial<T: Real>(grid: &GridSpec<T>, b: &Bump) -> (Vec<T>, Vec<T>) {
    let psi: Vec<T> = (0..grid.points())
        .map(|i| T::lit(b.value(grid.position(i).as_f64())))
        .collect();
    let mut db = vec![T::zero(); psi.len()];
    forward_diff(&psi, grid.dx(), &mut db);
    (psi, db)
}

/// Builds `phi = forward-difference of psi` and its analytic time derivative.
///
/// The temporal bump must vanish on a neighbourhood of `t = T`; it may be
/// nonzero at `t = 0`. The spatial bump must stay clear of the periodic seam.
pub fn make_test_function<T: Real>(
    grid: &GridSpec<T>,
    spec: &TestFunctionSpec,
) -> Result<SpaceTimeTestFunction<T>> {
    let a = &spec.temporal;
    if !(a.width > 0.0 && a.width.is_finite()) {
        return Err(Error::SupportViolation(format!(
            "temporal width must be positive, got {}",
            a.width
        )));
    }
    let horizon = grid.horizon().as_f64();
    let (lo, hi) = a.support();
    if hi >= horizon {
        return Err(Error::SupportViolation(format!(
            "temporal support [{lo}, {hi}] reaches the horizon T = {horizon}"
        )));
    }
    if hi <= 0.0 {
        return Err(Error::SupportViolation(format!(
            "temporal support [{lo}, {hi}] misses [0, T)"
        )));
    }
    check_spatial(grid, &spec.spatial)?;

    let (psi_x, db) = sample_spatial(grid, &spec.spatial);
    let times: Vec<f64> = (0..=grid.steps()).map(|k| grid.time(k).as_f64()).collect();
    let phi = FieldPath::from_rows(*grid, |k, row| {
        let ak = T::lit(a.value(times[k]));
        row.iter_mut().zip(&db).for_each(|(r, &d)| *r = ak * d);
    });
    let dphi_dt = FieldPath::from_rows(*grid, |k, row| {
        let ak = T::lit(a.derivative(times[k]));
        row.iter_mut().zip(&db).for_each(|(r, &d)| *r = ak * d);
    });
    Ok(SpaceTimeTestFunction {
        spec: *spec,
        psi_x,
        phi,
        dphi_dt,
    })
}

impl<T: Real> SpaceTimeTestFunction<T> {
    pub fn spec(&self) -> &TestFunctionSpec {
        &self.spec
    }

    pub fn phi(&self) -> &FieldPath<T> {
        &self.phi
    }

    pub fn dphi_dt(&self) -> &FieldPath<T> {
        &self.dphi_dt
    }

    /// Samples of the spatial generator `b(x_i)`.
    pub fn psi_x(&self) -> &[T] {
        &self.psi_x
    }

    /// True when `phi(0, .)` is identically zero.
    pub fn vanishes_at_origin(&self) -> bool {
        self.phi.row(0).iter().all(|v| *v == T::zero())
    }
}

/// A sampled member of the zero-mean test space on the torus.
#[derive(Debug, Clone)]
pub struct SpatialTestFunction<T> {
    bump: Bump,
    psi: Vec<T>,
    phi: Vec<T>,
}

pub fn make_spatial_test_function<T: Real>(
    grid: &GridSpec<T>,
    bump: Bump,
) -> Result<SpatialTestFunction<T>> {
    check_spatial(grid, &bump)?;
    let (psi, phi) = sample_spatial(grid, &bump);
    Ok(SpatialTestFunction { bump, psi, phi })
}

impl<T: Real> SpatialTestFunction<T> {
    pub fn bump(&self) -> &Bump {
        &self.bump
    }

    pub fn psi(&self) -> &[T] {
        &self.psi
    }

    pub fn phi(&self) -> &[T] {
        &self.phi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn grid() -> GridSpec<f64> {
        make_grid(1.0, 256, 1e-3, 250).unwrap()
    }

    #[test]
    fn rows_sum_to_zero() {
        let g = grid();
        let tf = make_test_function(&g, &TestFunctionSpec::new(0.1, 0.12, 0.4, 0.2)).unwrap();
        for k in 0..=g.steps() {
            let row = tf.phi().row(k);
            let s: f64 = row.iter().sum();
            let scale: f64 = row.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
            assert!(s.abs() <= 1e-14 * scale, "row {k}: {s}");
        }
        assert!(!tf.vanishes_at_origin());
    }

    #[test]
    fn rejects_support_reaching_horizon() {
        let g = grid();
        let err = make_test_function(&g, &TestFunctionSpec::new(0.2, 0.06, 0.5, 0.2)).unwrap_err();
        assert!(matches!(err, Error::SupportViolation(_)));
    }

    #[test]
    fn rejects_seam() {
        let g = grid();
        assert!(make_test_function(&g, &TestFunctionSpec::new(0.1, 0.05, 0.1, 0.1)).is_err());
        assert!(make_test_function(&g, &TestFunctionSpec::new(0.1, 0.05, 0.9, 0.11)).is_err());
        assert!(make_spatial_test_function(&g, Bump::new(0.99, 0.05)).is_err());
    }

    #[test]
    fn origin_vanishing_detected() {
        let g = grid();
        let tf = make_test_function(&g, &TestFunctionSpec::new(0.1, 0.08, 0.5, 0.2)).unwrap();
        assert!(tf.vanishes_at_origin());
    }

    #[test]
    fn time_derivative_matches_difference_quotient() {
        let g = grid();
        let tf = make_test_function(&g, &TestFunctionSpec::new(0.1, 0.09, 0.5, 0.2)).unwrap();
        let i = 140;
        let scale = (0..=g.steps())
            .map(|k| tf.dphi_dt().get(k, i).abs())
            .fold(0.0, f64::max);
        for k in 1..g.steps() {
            let fd = (tf.phi().get(k + 1, i) - tf.phi().get(k - 1, i)) / (2.0 * g.dt());
            let an = tf.dphi_dt().get(k, i);
            assert!((fd - an).abs() <= 2e-2 * scale, "k={k}: {fd} vs {an}");
        }
    }
}
