//! Semi-implicit solvers for the regularized stochastic heat equation and the
//! KPZ height equation, the Cole-Hopf map, and pathwise Ito residuals.

use std::f64::consts::TAU;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{pair, FieldPath, GridSpec, SpaceField};
use crate::noise::{
    lattice_noise_path, make_mollifier, mollify_noise, MollifiedNoisePath, WhiteNoiseLattice,
};
use crate::scalar::Real;
use crate::stencil::{central_diff, laplacian, PeriodicHelmholtz};
use crate::testfn::SpaceTimeTestFunction;

/// Upper limit on `dt * rate` for the explicit noise term.
pub const NOISE_PRECONDITION_LIMIT: f64 = 0.1;

/// Smooth bounded initial heights `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum InitialProfile {
    Constant {
        value: f64,
    },
    /// `mean + amplitude * sin(2 pi mode x / L)`.
    Sine {
        mean: f64,
        amplitude: f64,
        mode: u32,
    },
    /// `ln(1 + amplitude * sin(2 pi mode x / L))`, so `exp(f)` is a single heat mode.
    LogSine {
        amplitude: f64,
        mode: u32,
    },
    /// `offset + amplitude * exp(-1/(1-u^2))`, `u = (x - center) / width`.
    Bump {
        center: f64,
        width: f64,
        amplitude: f64,
        offset: f64,
    },
    /// Explicit samples, one per lattice point.
    Samples {
        values: Vec<f64>,
    },
}

impl InitialProfile {
    pub fn sample<T: Real>(&self, grid: &GridSpec<T>) -> Result<SpaceField<T>> {
        let length = grid.length().as_f64();
        let at = |g: &dyn Fn(f64) -> f64| -> Vec<T> {
            (0..grid.points())
                .map(|i| T::lit(g(grid.position(i).as_f64())))
                .collect()
        };
        let values = match *self {
            InitialProfile::Constant { value } => at(&|_| value),
            InitialProfile::Sine {
                mean,
                amplitude,
                mode,
            } => at(&|x| mean + amplitude * (TAU * f64::from(mode) * x / length).sin()),
            InitialProfile::LogSine { amplitude, mode } => {
                if !(amplitude.abs() < 1.0) {
                    return Err(Error::config(
                        "amplitude",
                        format!("must satisfy |a| < 1, got {amplitude}"),
                    ));
                }
                at(&|x| (1.0 + amplitude * (TAU * f64::from(mode) * x / length).sin()).ln())
            }
            InitialProfile::Bump {
                center,
                width,
                amplitude,
                offset,
            } => {
                if !(width > 0.0) {
                    return Err(Error::config(
                        "width",
                        format!("must be positive, got {width}"),
                    ));
                }
                let bump = crate::testfn::Bump {
                    center,
                    width,
                    amplitude,
                };
                at(&|x| offset + bump.value(x))
            }
            InitialProfile::Samples { ref values } => {
                if values.len() != grid.points() {
                    return Err(Error::shape(grid.points(), values.len()));
                }
                values.iter().map(|&v| T::lit(v)).collect()
            }
        };
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::config(
                "initial_profile",
                format!("non-finite value at index {i}"),
            ));
        }
        SpaceField::new(*grid, values)
    }
}

fn check_noise_scale<T: Real>(grid: &GridSpec<T>, noise: &MollifiedNoisePath<T>) -> Result<()> {
    if noise.increments().iter().all(|v| *v == T::zero()) {
        return Ok(());
    }
    let product = (grid.dt() * noise.ito_rate()).as_f64();
    if product > NOISE_PRECONDITION_LIMIT {
        return Err(Error::NoisePrecondition {
            product,
            limit: NOISE_PRECONDITION_LIMIT,
        });
    }
    Ok(())
}

fn check_inputs<T: Real>(
    f: &SpaceField<T>,
    noise: Option<&MollifiedNoisePath<T>>,
) -> Result<GridSpec<T>> {
    let grid = *f.grid();
    if let Some(p) = noise {
        if p.grid().points() != grid.points()
            || p.grid().steps() != grid.steps()
            || p.grid().dt() != grid.dt()
        {
            return Err(Error::GridMismatch(format!(
                "noise grid {}x{} (dt {}) vs profile grid {}x{} (dt {})",
                p.grid().steps(),
                p.grid().points(),
                p.grid().dt(),
                grid.steps(),
                grid.points(),
                grid.dt()
            )));
        }
        check_noise_scale(&grid, p)?;
    }
    Ok(grid)
}

/// Solves `(I - dt Lap_h) Z[k+1] = Z[k] (1 + dW^n[k])` from `Z[0] = exp(f)`.
///
/// `noise = None` is the deterministic heat flow. Every entry of the returned
/// path is positive; the first non-positive or non-finite value aborts.
pub fn solve_she<T: Real>(
    f: &SpaceField<T>,
    noise: Option<&MollifiedNoisePath<T>>,
) -> Result<FieldPath<T>> {
    let grid = check_inputs(f, noise)?;
    let m = grid.points();
    let mut solver = PeriodicHelmholtz::new(m, grid.dx(), grid.dt());
    let mut values = vec![T::zero(); grid.path_len()];
    for (z, &v) in values[..m].iter_mut().zip(f.values()) {
        *z = v.exp();
    }
    for k in 0..grid.steps() {
        let (done, rest) = values.split_at_mut((k + 1) * m);
        let prev = &done[k * m..];
        let next = &mut rest[..m];
        match noise {
            Some(p) => {
                for ((n, &z), &dw) in next.iter_mut().zip(prev).zip(p.increment_row(k)) {
                    *n = z + z * dw;
                }
            }
            None => next.copy_from_slice(prev),
        }
        solver.solve_in_place(next);
        if let Some(i) = next.iter().position(|&z| !(z > T::zero() && z.is_finite())) {
            return Err(Error::PositivityLoss {
                step: k + 1,
                index: i,
                value: next[i].as_f64(),
            });
        }
    }
    Ok(FieldPath::from_values_unchecked(grid, values))
}

/// Pointwise natural logarithm.
pub fn cole_hopf<T: Real>(z: &FieldPath<T>) -> Result<FieldPath<T>> {
    let m = z.grid().points();
    if let Some(pos) = z.values().iter().position(|&v| !(v > T::zero())) {
        return Err(Error::Domain {
            step: pos / m,
            index: pos % m,
            value: z.values()[pos].as_f64(),
        });
    }
    Ok(z.map(|v| v.ln()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KpzOptions<T> {
    /// Subtract `(rate/2) dt` each step.
    pub renormalized: bool,
    /// Diagnostic switch; `false` drops `(D_c h)^2`.
    pub nonlinearity: bool,
    /// Abort once `|h|` exceeds this.
    pub bound: T,
}

impl<T: Real> KpzOptions<T> {
    pub fn renormalized() -> Self {
        KpzOptions {
            renormalized: true,
            nonlinearity: true,
            bound: T::lit(1e6),
        }
    }

    pub fn naive() -> Self {
        KpzOptions {
            renormalized: false,
            ..Self::renormalized()
        }
    }
}

/// Solves `(I - dt Lap_h) h[k+1] = h[k] + dt (D_c h[k])^2 + dW^n[k] - c dt`
/// with `c = rate/2` when renormalized and `0` otherwise.
///
/// The counterterm is tied to the supplied noise path, so a zero-valued path
/// at level `n` still carries `(C/2) n`.
pub fn solve_kpz<T: Real>(
    f: &SpaceField<T>,
    noise: Option<&MollifiedNoisePath<T>>,
    opts: &KpzOptions<T>,
) -> Result<FieldPath<T>> {
    let grid = check_inputs(f, noise)?;
    let (m, dt, dx) = (grid.points(), grid.dt(), grid.dx());
    let shift = match noise {
        Some(p) if opts.renormalized => p.ito_rate() * dt / T::lit(2.0),
        _ => T::zero(),
    };
    let mut solver = PeriodicHelmholtz::new(m, dx, dt);
    let mut grad = vec![T::zero(); m];
    let mut values = vec![T::zero(); grid.path_len()];
    values[..m].copy_from_slice(f.values());
    for k in 0..grid.steps() {
        let (done, rest) = values.split_at_mut((k + 1) * m);
        let prev = &done[k * m..];
        let next = &mut rest[..m];
        next.copy_from_slice(prev);
        if opts.nonlinearity {
            central_diff(prev, dx, &mut grad);
            for (n, &g) in next.iter_mut().zip(&grad) {
                *n += dt * g * g;
            }
        }
        if let Some(p) = noise {
            for (n, &dw) in next.iter_mut().zip(p.increment_row(k)) {
                *n += dw;
            }
        }
        if shift != T::zero() {
            next.iter_mut().for_each(|n| *n -= shift);
        }
        solver.solve_in_place(next);
        if let Some(i) = next.iter().position(|&h| !(Float::abs(h) <= opts.bound)) {
            return Err(Error::Overflow {
                step: k + 1,
                index: i,
                value: next[i].as_f64(),
                bound: opts.bound.as_f64(),
            });
        }
    }
    Ok(FieldPath::from_values_unchecked(grid, values))
}

/// Which equation a [`SolverConfig`] integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "n", rename_all = "snake_case")]
pub enum Variant {
    SheMollified(u32),
    SheLattice,
    KpzRenormalized(u32),
    KpzNaive(u32),
}

impl Variant {
    pub fn level(&self) -> Option<u32> {
        match *self {
            Variant::SheMollified(n) | Variant::KpzRenormalized(n) | Variant::KpzNaive(n) => {
                Some(n)
            }
            Variant::SheLattice => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig<T> {
    pub variant: Variant,
    pub f: SpaceField<T>,
    pub overflow_bound: T,
}

impl<T: Real> SolverConfig<T> {
    pub fn new(variant: Variant, f: SpaceField<T>) -> Self {
        SolverConfig {
            variant,
            f,
            overflow_bound: T::lit(1e6),
        }
    }

    /// Drives the configured equation with one noise realization. SHE
    /// variants return `Z`, KPZ variants return `h`.
    pub fn solve(&self, noise: &WhiteNoiseLattice<T>) -> Result<FieldPath<T>> {
        let grid = self.f.grid();
        let path = match self.variant.level() {
            Some(n) => mollify_noise(noise, &make_mollifier(grid, n)?)?,
            None => lattice_noise_path(noise),
        };
        match self.variant {
            Variant::SheMollified(_) | Variant::SheLattice => solve_she(&self.f, Some(&path)),
            Variant::KpzRenormalized(_) | Variant::KpzNaive(_) => {
                let opts = KpzOptions {
                    renormalized: matches!(self.variant, Variant::KpzRenormalized(_)),
                    nonlinearity: true,
                    bound: self.overflow_bound,
                };
                solve_kpz(&self.f, Some(&path), &opts)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport<T> {
    pub sup_norm: T,
    /// `(test function index, pair(R, phi))`.
    pub weak_norms: Vec<(usize, T)>,
    pub dt_used: T,
    pub dx_used: T,
}

/// `R[k] = H[k] - f - sum_{j<k} (Lap_h H[j] + (D_c H[j])^2) dt - W^n_{t_k} + (rate/2) t_k`.
///
/// Without a noise path the last two terms are absent.
pub fn ito_residual_path<T: Real>(
    h: &FieldPath<T>,
    noise: Option<&MollifiedNoisePath<T>>,
    f: &SpaceField<T>,
) -> Result<FieldPath<T>> {
    let grid = *h.grid();
    let m = grid.points();
    if f.values().len() != m {
        return Err(Error::shape(m, f.values().len()));
    }
    if let Some(p) = noise {
        if p.grid().points() != m || p.grid().steps() != grid.steps() {
            return Err(Error::shape(
                format!("{}x{}", grid.steps() + 1, m),
                format!("{}x{}", p.grid().steps() + 1, p.grid().points()),
            ));
        }
    }
    let dt = grid.dt();
    let half_rate = noise.map_or(T::zero(), |p| p.ito_rate() / T::lit(2.0));
    let mut drift = vec![T::zero(); m];
    let mut lap = vec![T::zero(); m];
    let mut grad = vec![T::zero(); m];
    let mut values = vec![T::zero(); grid.path_len()];
    for k in 0..=grid.steps() {
        if k > 0 {
            let prev = h.row(k - 1);
            laplacian(prev, grid.dx(), &mut lap);
            central_diff(prev, grid.dx(), &mut grad);
            for ((d, &l), &g) in drift.iter_mut().zip(&lap).zip(&grad) {
                *d += (l + g * g) * dt;
            }
        }
        let t = grid.time(k);
        let row = &mut values[k * m..(k + 1) * m];
        for (i, r) in row.iter_mut().enumerate() {
            *r = h.get(k, i) - f.values()[i] - drift[i];
        }
        if let Some(p) = noise {
            let counter = half_rate * t;
            for (r, &w) in row.iter_mut().zip(p.cumulative().row(k)) {
                *r += counter - w;
            }
        }
    }
    Ok(FieldPath::from_values_unchecked(grid, values))
}

/// Sup norm and weak pairings of [`ito_residual_path`].
pub fn ito_residual<T: Real>(
    h: &FieldPath<T>,
    noise: Option<&MollifiedNoisePath<T>>,
    f: &SpaceField<T>,
    phis: &[SpaceTimeTestFunction<T>],
) -> Result<ResidualReport<T>> {
    let r = ito_residual_path(h, noise, f)?;
    let weak_norms = phis
        .iter()
        .enumerate()
        .map(|(j, phi)| Ok((j, pair(&r, phi.phi())?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ResidualReport {
        sup_norm: r.max_abs(),
        weak_norms,
        dt_used: h.grid().dt(),
        dx_used: h.grid().dx(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::noise::sample_white_noise;

    #[test]
    fn constant_profile_is_fixed_by_heat_flow() {
        let g = make_grid(1.0, 64, 1e-3, 50).unwrap();
        let f = InitialProfile::Constant { value: 0.3 }.sample(&g).unwrap();
        let z = solve_she(&f, None).unwrap();
        let c = 0.3f64.exp();
        assert!(z.values().iter().all(|v| (v - c).abs() <= 1e-13));
    }

    #[test]
    fn heat_mode_decays_like_the_semi_discrete_oracle() {
        let g = make_grid(1.0, 64, 1e-4, 1000).unwrap();
        let f = InitialProfile::LogSine {
            amplitude: 0.1,
            mode: 1,
        }
        .sample(&g)
        .unwrap();
        let z = solve_she(&f, None).unwrap();
        let lam = 4.0 * (std::f64::consts::PI * g.dx()).sin().powi(2) / (g.dx() * g.dx());
        let expected = 0.1 / (1.0 + g.dt() * lam).powi(g.steps() as i32);
        // amplitude of the surviving mode
        let amp = z
            .row(g.steps())
            .iter()
            .enumerate()
            .map(|(i, v)| (v - 1.0) * (TAU * g.position(i)).sin())
            .sum::<f64>()
            * 2.0
            / 64.0;
        assert!((amp - expected).abs() < 1e-12, "{amp} vs {expected}");
    }

    #[test]
    fn positivity_failure_is_reported() {
        let g = make_grid(1.0, 16, 1e-3, 4).unwrap();
        let f = InitialProfile::Constant { value: 0.0 }.sample(&g).unwrap();
        let mut inc = vec![0.0; 4 * 16];
        inc[16 + 5] = -50.0;
        let noise = WhiteNoiseLattice::from_increments(&g, 0, 0, inc).unwrap();
        let path = lattice_noise_path(&noise);
        // bypasses the scale check only through a tiny rate: build by hand
        let err = solve_she(&f, Some(&path)).unwrap_err();
        assert!(
            matches!(
                err,
                Error::PositivityLoss { step: 2, .. } | Error::NoisePrecondition { .. }
            ),
            "{err}"
        );
    }

    #[test]
    fn noise_precondition_enforced() {
        let g = make_grid(1.0, 64, 5e-3, 4).unwrap();
        let noise = sample_white_noise(&g, 1, 0);
        let f = InitialProfile::Constant { value: 0.0 }.sample(&g).unwrap();
        let err = solve_she(&f, Some(&lattice_noise_path(&noise))).unwrap_err();
        assert!(matches!(err, Error::NoisePrecondition { .. }));
    }

    #[test]
    fn cole_hopf_round_trip_and_domain() {
        let g = make_grid(1.0, 32, 1e-3, 3).unwrap();
        let z = FieldPath::from_fn(g, |t, x| 1.5 + (TAU * x).sin() * (1.0 - t));
        let h = cole_hopf(&z).unwrap();
        for (a, b) in h.map(f64::exp).values().iter().zip(z.values()) {
            assert!((a - b).abs() <= 4.0 * f64::EPSILON * b);
        }
        let bad = z.map(|v| v - 1.5);
        assert!(matches!(cole_hopf(&bad), Err(Error::Domain { .. })));
    }

    #[test]
    fn kpz_zero_data_stays_zero() {
        let g = make_grid(1.0, 64, 1e-3, 20).unwrap();
        let f = InitialProfile::Constant { value: 0.0 }.sample(&g).unwrap();
        let h = solve_kpz(&f, None, &KpzOptions::naive()).unwrap();
        assert!(h.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn kpz_overflow_reported() {
        let g = make_grid(1.0, 64, 1e-4, 200).unwrap();
        let noise = sample_white_noise(&g, 3, 0);
        let path = mollify_noise(&noise, &make_mollifier(&g, 8).unwrap()).unwrap();
        let f = InitialProfile::Constant { value: 0.0 }.sample(&g).unwrap();
        let opts = KpzOptions {
            bound: 1e-3,
            ..KpzOptions::naive()
        };
        assert!(matches!(
            solve_kpz(&f, Some(&path), &opts),
            Err(Error::Overflow { .. })
        ));
    }

    #[test]
    fn residual_vanishes_without_noise_for_constants() {
        let g = make_grid(1.0, 32, 1e-3, 10).unwrap();
        let f = InitialProfile::Constant { value: 0.7 }.sample(&g).unwrap();
        let h = FieldPath::from_fn(g, |_, _| 0.7);
        let r = ito_residual_path(&h, None, &f).unwrap();
        assert_eq!(r.max_abs(), 0.0);
    }

    #[test]
    fn residual_of_frozen_profile() {
        let g = make_grid(1.0, 32, 1e-3, 6).unwrap();
        let f = InitialProfile::Sine {
            mean: 0.0,
            amplitude: 0.4,
            mode: 2,
        }
        .sample(&g)
        .unwrap();
        let h = FieldPath::from_rows(g, |_, row| row.copy_from_slice(f.values()));
        let r = ito_residual_path(&h, None, &f).unwrap();
        let mut lap = vec![0.0; 32];
        let mut grad = vec![0.0; 32];
        laplacian(f.values(), g.dx(), &mut lap);
        central_diff(f.values(), g.dx(), &mut grad);
        for k in 0..=6 {
            for i in 0..32 {
                let direct = -(k as f64) * (lap[i] + grad[i] * grad[i]) * g.dt();
                assert!((r.get(k, i) - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
            }
        }
    }

    #[test]
    fn counterterm_bookkeeping_without_nonlinearity() {
        let g = make_grid(1.0, 64, 1e-4, 50).unwrap();
        let op = make_mollifier(&g, 8).unwrap();
        let path = mollify_noise(&WhiteNoiseLattice::zeros(&g), &op).unwrap();
        let f = InitialProfile::Constant { value: 0.0 }.sample(&g).unwrap();
        let lin = KpzOptions {
            nonlinearity: false,
            ..KpzOptions::renormalized()
        };
        let ren = solve_kpz(&f, Some(&path), &lin).unwrap();
        let naive = solve_kpz(
            &f,
            Some(&path),
            &KpzOptions {
                renormalized: false,
                ..lin
            },
        )
        .unwrap();
        let c = op.ito_rate() / 2.0;
        for k in 0..=g.steps() {
            for i in 0..64 {
                let d = ren.get(k, i) - naive.get(k, i);
                assert!((d + c * g.time(k)).abs() <= 1e-13, "k={k}: {d}");
            }
        }
    }
}
