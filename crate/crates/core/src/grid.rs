//! Periodic space-time lattice and the fields sampled on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Periodic lattice `[0, L) x {0, dt, .., K dt}`.
///
/// `M` is a power of two, so `dx = L / M` is exact and `dx * M == L` holds
/// in floating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    length: T,
    points: usize,
    dt: T,
    steps: usize,
    dx: T,
    horizon: T,
}

/// Validates and builds a grid. Errors name the offending field.
pub fn make_grid<T: Real>(length: T, points: usize, dt: T, steps: usize) -> Result<GridSpec<T>> {
    if !(length.is_finite() && length > T::zero()) {
        return Err(Error::config(
            "length",
            format!("must be positive, got {length}"),
        ));
    }
    if points < 8 {
        return Err(Error::config(
            "points",
            format!("must be at least 8, got {points}"),
        ));
    }
    if !points.is_power_of_two() {
        return Err(Error::config(
            "points",
            format!("must be a power of two, got {points}"),
        ));
    }
    if !(dt.is_finite() && dt > T::zero()) {
        return Err(Error::config("dt", format!("must be positive, got {dt}")));
    }
    if steps == 0 {
        return Err(Error::config("steps", "must be at least 1"));
    }
    let dx = length / T::from_count(points);
    let horizon = T::from_count(steps) * dt;
    debug_assert!(dx * T::from_count(points) == length);
    Ok(GridSpec {
        length,
        points,
        dt,
        steps,
        dx,
        horizon,
    })
}

impl<T: Real> GridSpec<T> {
    pub fn length(&self) -> T {
        self.length
    }

    /// Number of spatial points `M`.
    pub fn points(&self) -> usize {
        self.points
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// Number of time steps `K`; paths carry `K + 1` rows.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dx(&self) -> T {
        self.dx
    }

    /// `T = K dt`.
    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn time(&self, k: usize) -> T {
        T::from_count(k) * self.dt
    }

    pub fn position(&self, i: usize) -> T {
        T::from_count(i) * self.dx
    }

    /// Wraps a signed spatial index onto `0..M`.
    pub fn wrap(&self, i: isize) -> usize {
        i.rem_euclid(self.points as isize) as usize
    }

    /// Same spatial lattice with a different time discretization.
    pub fn with_time(&self, dt: T, steps: usize) -> Result<Self> {
        make_grid(self.length, self.points, dt, steps)
    }

    /// Same time discretization with a different number of points.
    pub fn with_points(&self, points: usize) -> Result<Self> {
        make_grid(self.length, points, self.dt, self.steps)
    }

    pub(crate) fn path_len(&self) -> usize {
        (self.steps + 1) * self.points
    }

    pub(crate) fn ensure_same(&self, other: &Self, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: {self:?} vs {other:?}"
            )))
        }
    }
}

/// One time slice of a field.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceField<T> {
    grid: GridSpec<T>,
    values: Vec<T>,
}

impl<T: Real> SpaceField<T> {
    pub fn new(grid: GridSpec<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.points() {
            return Err(Error::shape(grid.points(), values.len()));
        }
        Ok(SpaceField { grid, values })
    }

    pub fn from_fn(grid: GridSpec<T>, f: impl Fn(T) -> T) -> Self {
        let values = (0..grid.points()).map(|i| f(grid.position(i))).collect();
        SpaceField { grid, values }
    }

    pub fn constant(grid: GridSpec<T>, c: T) -> Self {
        SpaceField {
            grid,
            values: vec![c; grid.points()],
        }
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        SpaceField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// A field on the full lattice: `K + 1` rows of `M` values, row 0 at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPath<T> {
    grid: GridSpec<T>,
    values: Vec<T>,
}

impl<T: Real> FieldPath<T> {
    /// Wraps row-major samples; rejects wrong lengths and non-finite entries.
    pub fn from_values(grid: GridSpec<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.path_len() {
            return Err(Error::shape(
                format!("{}x{}", grid.steps() + 1, grid.points()),
                values.len(),
            ));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Config {
                field: "values",
                reason: format!(
                    "non-finite entry at step {}, index {}",
                    pos / grid.points(),
                    pos % grid.points()
                ),
            });
        }
        Ok(FieldPath { grid, values })
    }

    pub(crate) fn from_values_unchecked(grid: GridSpec<T>, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.path_len());
        FieldPath { grid, values }
    }

    pub fn zeros(grid: GridSpec<T>) -> Self {
        FieldPath {
            grid,
            values: vec![T::zero(); grid.path_len()],
        }
    }

    /// Samples `f(t, x)` at every lattice node.
    pub fn from_fn(grid: GridSpec<T>, f: impl Fn(T, T) -> T) -> Self {
        let mut values = Vec::with_capacity(grid.path_len());
        for k in 0..=grid.steps() {
            let t = grid.time(k);
            values.extend((0..grid.points()).map(|i| f(t, grid.position(i))));
        }
        FieldPath { grid, values }
    }

    /// Builds a path row by row; `fill(k, row)` writes row `k`.
    pub fn from_rows(grid: GridSpec<T>, mut fill: impl FnMut(usize, &mut [T])) -> Self {
        let mut values = vec![T::zero(); grid.path_len()];
        for (k, row) in values.chunks_exact_mut(grid.points()).enumerate() {
            fill(k, row);
        }
        FieldPath { grid, values }
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn row(&self, k: usize) -> &[T] {
        let m = self.grid.points();
        &self.values[k * m..(k + 1) * m]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, T> {
        self.values.chunks_exact(self.grid.points())
    }

    pub fn slice(&self, k: usize) -> SpaceField<T> {
        SpaceField {
            grid: self.grid,
            values: self.row(k).to_vec(),
        }
    }

    pub fn get(&self, k: usize, i: usize) -> T {
        self.values[k * self.grid.points() + i]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        FieldPath {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Applies a per-row operator `op(row_in, row_out)`.
    pub fn map_rows(&self, mut op: impl FnMut(&[T], &mut [T])) -> Self {
        let m = self.grid.points();
        let mut values = vec![T::zero(); self.values.len()];
        for (src, dst) in self.values.chunks_exact(m).zip(values.chunks_exact_mut(m)) {
            op(src, dst);
        }
        FieldPath {
            grid: self.grid,
            values,
        }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: T, other: &Self, b: T) -> Result<Self> {
        self.grid.ensure_same(&other.grid, "combine")?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&x, &y)| a * x + b * y)
            .collect();
        Ok(FieldPath {
            grid: self.grid,
            values,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(T::one(), other, -T::one())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(T::one(), other, T::one())
    }

    /// True when every row is constant in x (a member of the negligible ideal).
    pub fn is_x_independent(&self) -> bool {
        self.first_x_dependent_row().is_none()
    }

    pub(crate) fn first_x_dependent_row(&self) -> Option<usize> {
        self.rows().position(|row| row.iter().any(|&v| v != row[0]))
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |m, &v| m.max(num_traits::Float::abs(v)))
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

/// Rectangle-rule space-time pairing `sum_{k<K} sum_i F[k][i] phi[k][i] dt dx`.
///
/// Row `K` is excluded; test functions vanish there by construction.
pub fn pair<T: Real>(field: &FieldPath<T>, phi: &FieldPath<T>) -> Result<T> {
    field.grid.ensure_same(&phi.grid, "pair")?;
    let g = field.grid;
    let mut total = T::zero();
    for k in 0..g.steps() {
        let row: T = field
            .row(k)
            .iter()
            .zip(phi.row(k))
            .fold(T::zero(), |acc, (&f, &p)| acc + f * p);
        total += row;
    }
    Ok(total * g.dt() * g.dx())
}

/// Spatial pairing `sum_i a_i b_i dx` of two slices.
pub fn pair_spatial<T: Real>(a: &[T], b: &[T], dx: T) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::shape(a.len(), b.len()));
    }
    Ok(a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y) * dx)
}

/// Upper bound on the rounding error of [`pair`]: a few ulps of the
/// absolute-value pairing.
pub fn pair_rounding_bound<T: Real>(field: &FieldPath<T>, phi: &FieldPath<T>) -> T {
    let g = field.grid;
    let mut abs_total = T::zero();
    for k in 0..g.steps() {
        abs_total += field
            .row(k)
            .iter()
            .zip(phi.row(k))
            .fold(T::zero(), |acc, (&f, &p)| {
                acc + num_traits::Float::abs(f * p)
            });
    }
    let n = T::from_count(g.points() + g.steps());
    abs_total * g.dt() * g.dx() * T::epsilon() * n
}
