//! Lattice space-time white noise and its mollified cylindrical process.
//!
//! A [`WhiteNoiseLattice`] stores, for each cell `[t_k, t_{k+1}) x [x_i, x_{i+1})`,
//! the white-noise mass of the cell divided by `dx`. Entries are therefore
//! `N(0, dt/dx)` and `sum_i e[k][i] phi(x_i) dx` is the Ito increment of
//! `int phi dW` over step `k`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{FieldPath, GridSpec};
use crate::quadrature::{ito_constant, standard_bump};
use crate::rng::NoiseStream;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct WhiteNoiseLattice<T> {
    grid: GridSpec<T>,
    seed: u64,
    replica_id: u64,
    /// `(time, space)` aggregation factors relative to the sampled lattice.
    coarsening: (usize, usize),
    increments: Vec<T>,
}

/// Samples `K x M` independent `N(0, dt/dx)` cell increments.
///
/// A pure function of `(grid, seed, replica_id)`.
pub fn sample_white_noise<T: Real>(
    grid: &GridSpec<T>,
    seed: u64,
    replica_id: u64,
) -> WhiteNoiseLattice<T> {
    let n = grid.steps() * grid.points();
    let mut z = vec![0.0f64; n];
    NoiseStream::new(seed, replica_id).fill(0, &mut z);
    let scale = (grid.dt() / grid.dx()).as_f64().sqrt();
    WhiteNoiseLattice {
        grid: *grid,
        seed,
        replica_id,
        coarsening: (1, 1),
        increments: z.into_iter().map(|v| T::lit(v * scale)).collect(),
    }
}

impl<T: Real> WhiteNoiseLattice<T> {
    /// All-zero noise on `grid`.
    pub fn zeros(grid: &GridSpec<T>) -> Self {
        WhiteNoiseLattice {
            grid: *grid,
            seed: 0,
            replica_id: 0,
            coarsening: (1, 1),
            increments: vec![T::zero(); grid.steps() * grid.points()],
        }
    }

    /// Wraps externally produced increments (e.g. a loaded dump).
    pub fn from_increments(
        grid: &GridSpec<T>,
        seed: u64,
        replica_id: u64,
        increments: Vec<T>,
    ) -> Result<Self> {
        let expected = grid.steps() * grid.points();
        if increments.len() != expected {
            return Err(Error::shape(expected, increments.len()));
        }
        Ok(WhiteNoiseLattice {
            grid: *grid,
            seed,
            replica_id,
            coarsening: (1, 1),
            increments,
        })
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replica_id(&self) -> u64 {
        self.replica_id
    }

    pub fn coarsening(&self) -> (usize, usize) {
        self.coarsening
    }

    pub fn increments(&self) -> &[T] {
        &self.increments
    }

    pub fn row(&self, k: usize) -> &[T] {
        let m = self.grid.points();
        &self.increments[k * m..(k + 1) * m]
    }

    /// Identifies the underlying realization; coarsened views share it.
    pub fn realization(&self) -> (u64, u64) {
        (self.seed, self.replica_id)
    }

    /// Aggregates onto a coarser lattice driven by the same Brownian sheet.
    ///
    /// Time aggregation sums increments (Brownian increments add); space
    /// aggregation averages densities (cell masses add, `dx` grows).
    pub fn coarsen(&self, time_factor: usize, space_factor: usize) -> Result<Self> {
        let (k, m) = (self.grid.steps(), self.grid.points());
        if time_factor == 0 || k % time_factor != 0 {
            return Err(Error::config(
                "time_factor",
                format!("{time_factor} must divide K = {k}"),
            ));
        }
        if space_factor == 0 || m % space_factor != 0 {
            return Err(Error::config(
                "space_factor",
                format!("{space_factor} must divide M = {m}"),
            ));
        }
        let grid = crate::grid::make_grid(
            self.grid.length(),
            m / space_factor,
            self.grid.dt() * T::from_count(time_factor),
            k / time_factor,
        )?;
        let (kc, mc) = (grid.steps(), grid.points());
        let inv_space = T::one() / T::from_count(space_factor);
        let mut out = vec![T::zero(); kc * mc];
        for (kk, dst) in out.chunks_exact_mut(mc).enumerate() {
            for r in 0..time_factor {
                let src = self.row(kk * time_factor + r);
                for (ic, d) in dst.iter_mut().enumerate() {
                    let mut s = T::zero();
                    for j in 0..space_factor {
                        s += src[ic * space_factor + j];
                    }
                    *d += s * inv_space;
                }
            }
        }
        Ok(WhiteNoiseLattice {
            grid,
            seed: self.seed,
            replica_id: self.replica_id,
            coarsening: (
                self.coarsening.0 * time_factor,
                self.coarsening.1 * space_factor,
            ),
            increments: out,
        })
    }
}

/// Columns `start .. start + width` (wrapping) of the first `rows` rows of a
/// sampled lattice, generated without producing the rest of it.
#[derive(Debug, Clone)]
pub struct NoiseWindow<T> {
    grid: GridSpec<T>,
    col_start: usize,
    width: usize,
    rows: usize,
    values: Vec<T>,
}

/// Samples a column window; entries equal the corresponding entries of
/// [`sample_white_noise`] with the same `(grid, seed, replica_id)`.
pub fn sample_noise_window<T: Real>(
    grid: &GridSpec<T>,
    seed: u64,
    replica_id: u64,
    col_start: usize,
    width: usize,
    rows: usize,
) -> NoiseWindow<T> {
    let m = grid.points();
    let width = width.min(m);
    let rows = rows.min(grid.steps());
    let col_start = col_start % m;
    let scale = (grid.dt() / grid.dx()).as_f64().sqrt();
    let z = NoiseStream::new(seed, replica_id).block(m, rows, col_start, width);
    NoiseWindow {
        grid: *grid,
        col_start,
        width,
        rows,
        values: z.into_iter().map(|v| T::lit(v * scale)).collect(),
    }
}

impl<T: Real> NoiseWindow<T> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn col_start(&self) -> usize {
        self.col_start
    }

    pub fn row(&self, k: usize) -> &[T] {
        &self.values[k * self.width..(k + 1) * self.width]
    }

    /// Lattice column of window column `c`.
    pub fn column(&self, c: usize) -> usize {
        (self.col_start + c) % self.grid.points()
    }
}

/// Discrete mollification `delta_n(x) = n rho(n x)` on the lattice.
#[derive(Clone)]
pub struct MollifierOp<T: Real> {
    level: u32,
    grid: GridSpec<T>,
    kernel: Vec<T>,
    support_radius: usize,
    hat: Vec<Complex<T>>,
    ito_constant: T,
    cn_kernel: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> fmt::Debug for MollifierOp<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MollifierOp")
            .field("level", &self.level)
            .field("points", &self.grid.points())
            .field("support_radius", &self.support_radius)
            .field("ito_constant", &self.ito_constant)
            .finish()
    }
}

/// Largest level whose kernel spans at least 8 cells: `n <= M / (4 L)`.
pub fn max_level<T: Real>(grid: &GridSpec<T>) -> u32 {
    (grid.points() as f64 / (4.0 * grid.length().as_f64())).floor() as u32
}

/// Builds the level-`n` mollifier on `grid`.
///
/// The kernel is renormalized to unit lattice mass; `C` comes from adaptive
/// quadrature and does not depend on the grid.
pub fn make_mollifier<T: Real>(grid: &GridSpec<T>, level: u32) -> Result<MollifierOp<T>> {
    let length = grid.length().as_f64();
    let cap = max_level(grid);
    if level == 0 || level > cap {
        return Err(Error::Resolution(format!(
            "mollifier level n = {level} needs 1 <= n <= M/(4L) = {cap} (support 2/n must span >= 8 cells of dx = {})",
            grid.dx()
        )));
    }
    if 2.0 / f64::from(level) > length {
        return Err(Error::Resolution(format!(
            "mollifier support 2/n = {} exceeds the domain length {length}",
            2.0 / f64::from(level)
        )));
    }
    let m = grid.points();
    let n = f64::from(level);
    let dx = grid.dx().as_f64();
    let raw: Vec<f64> = (0..m)
        .map(|j| {
            let d = j.min(m - j) as f64 * dx;
            n * standard_bump(n * d)
        })
        .collect();
    let mass: f64 = raw.iter().sum::<f64>() * dx;
    let kernel: Vec<T> = raw.iter().map(|&v| T::lit(v / mass)).collect();
    let support_radius = (0..=m / 2)
        .rev()
        .find(|&j| kernel[j] != T::zero())
        .unwrap_or(0);

    let mut planner = FftPlanner::<T>::new();
    let forward = planner.plan_fft_forward(m);
    let inverse = planner.plan_fft_inverse(m);
    let mut hat: Vec<Complex<T>> = kernel.iter().map(|&v| Complex::new(v, T::zero())).collect();
    forward.process(&mut hat);

    // C_n[m] = sum_j k[m + j] k[j] dx over the kernel support.
    let dxt = grid.dx();
    let nonzero: Vec<usize> = (0..m).filter(|&j| kernel[j] != T::zero()).collect();
    let cn_kernel = (0..m)
        .map(|s| {
            nonzero
                .iter()
                .fold(T::zero(), |acc, &j| acc + kernel[(s + j) % m] * kernel[j])
                * dxt
        })
        .collect();

    Ok(MollifierOp {
        level,
        grid: *grid,
        kernel,
        support_radius,
        hat,
        ito_constant: T::lit(ito_constant()),
        cn_kernel,
        forward,
        inverse,
    })
}

impl<T: Real> MollifierOp<T> {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    /// `kernel[j] = delta_n(j dx)` with periodic offsets.
    pub fn kernel(&self) -> &[T] {
        &self.kernel
    }

    /// Largest offset (in cells) with a nonzero kernel value.
    pub fn support_radius(&self) -> usize {
        self.support_radius
    }

    /// `C = int rho^2`.
    pub fn ito_constant(&self) -> T {
        self.ito_constant
    }

    /// Quadratic-variation rate `n C`.
    pub fn ito_rate(&self) -> T {
        T::lit(f64::from(self.level)) * self.ito_constant
    }

    /// Lattice covariance kernel `C_n(j dx)`.
    pub fn cn_kernel(&self) -> &[T] {
        &self.cn_kernel
    }

    /// `C_n(x_a - x_b)` on the torus.
    pub fn cn_between(&self, a: usize, b: usize) -> T {
        let m = self.grid.points();
        self.cn_kernel[(a + m - b) % m]
    }

    fn apply_rows(&self, input: &[T], output: &mut [T], adjoint: bool) {
        let m = self.grid.points();
        let mut buf = vec![Complex::new(T::zero(), T::zero()); m];
        let mut scratch = vec![
            Complex::new(T::zero(), T::zero());
            self.forward
                .get_inplace_scratch_len()
                .max(self.inverse.get_inplace_scratch_len())
        ];
        let scale = self.grid.dx() / T::from_count(m);
        for (src, dst) in input.chunks_exact(m).zip(output.chunks_exact_mut(m)) {
            for (b, &v) in buf.iter_mut().zip(src) {
                *b = Complex::new(v, T::zero());
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            for (b, h) in buf.iter_mut().zip(&self.hat) {
                *b *= if adjoint { h.conj() } else { *h };
            }
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            for (d, b) in dst.iter_mut().zip(&buf) {
                *d = b.re * scale;
            }
        }
    }

    /// Periodic convolution `(delta_n * u)_i = sum_j kernel[i - j] u_j dx`, row by row.
    pub fn convolve_rows(&self, input: &[T], output: &mut [T]) {
        self.apply_rows(input, output, false);
    }

    /// Adjoint of [`convolve_rows`](Self::convolve_rows) with respect to the
    /// `sum_i a_i b_i dx` inner product: `sum_i kernel[i - j] u_i dx`.
    pub fn adjoint_rows(&self, input: &[T], output: &mut [T]) {
        self.apply_rows(input, output, true);
    }

    /// Mollified increment at lattice column `x` for every row of a window
    /// that covers the kernel support around `x`.
    pub fn point_increments(&self, window: &NoiseWindow<T>, x: usize) -> Result<Vec<T>> {
        let m = self.grid.points();
        let r = self.support_radius;
        let first = (x + m - r) % m;
        let offset = (first + m - window.col_start()) % m;
        if 2 * r + 1 > m || offset + 2 * r + 1 > window.width() {
            return Err(Error::GridMismatch(format!(
                "window [{}, +{}) does not cover the support of column {x}",
                window.col_start(),
                window.width()
            )));
        }
        let dx = self.grid.dx();
        let weights: Vec<T> = (0..=2 * r)
            .map(|c| self.kernel[(x + m - window.column(offset + c)) % m])
            .collect();
        Ok((0..window.rows())
            .map(|k| {
                let row = &window.row(k)[offset..offset + 2 * r + 1];
                row.iter()
                    .zip(&weights)
                    .fold(T::zero(), |acc, (&e, &w)| acc + e * w)
                    * dx
            })
            .collect())
    }
}

/// The mollified cylindrical Wiener process `W^n_t(x)` on the lattice, or the
/// unmollified lattice process when `level` is `None`.
#[derive(Debug, Clone)]
pub struct MollifiedNoisePath<T> {
    grid: GridSpec<T>,
    level: Option<u32>,
    ito_rate: T,
    realization: (u64, u64),
    increments: Vec<T>,
    cumulative: FieldPath<T>,
}

fn cumulate<T: Real>(grid: &GridSpec<T>, increments: &[T]) -> FieldPath<T> {
    let m = grid.points();
    let mut running = vec![T::zero(); m];
    FieldPath::from_rows(*grid, |k, row| {
        if k > 0 {
            for (r, &d) in running.iter_mut().zip(&increments[(k - 1) * m..k * m]) {
                *r += d;
            }
        }
        row.copy_from_slice(&running);
    })
}

/// Convolves every time row of the white noise with the level-`n` kernel.
pub fn mollify_noise<T: Real>(
    noise: &WhiteNoiseLattice<T>,
    moll: &MollifierOp<T>,
) -> Result<MollifiedNoisePath<T>> {
    noise.grid.ensure_same(&moll.grid, "mollify_noise")?;
    let mut increments = vec![T::zero(); noise.increments.len()];
    moll.convolve_rows(&noise.increments, &mut increments);
    let cumulative = cumulate(&noise.grid, &increments);
    Ok(MollifiedNoisePath {
        grid: noise.grid,
        level: Some(moll.level),
        ito_rate: moll.ito_rate(),
        realization: noise.realization(),
        increments,
        cumulative,
    })
}

/// The unmollified lattice process: increments `e[k][i]` with rate `1/dx`.
pub fn lattice_noise_path<T: Real>(noise: &WhiteNoiseLattice<T>) -> MollifiedNoisePath<T> {
    let cumulative = cumulate(&noise.grid, &noise.increments);
    MollifiedNoisePath {
        grid: noise.grid,
        level: None,
        ito_rate: T::one() / noise.grid.dx(),
        realization: noise.realization(),
        increments: noise.increments.clone(),
        cumulative,
    }
}

impl<T: Real> MollifiedNoisePath<T> {
    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    /// `Some(n)` for a mollified path, `None` for the raw lattice process.
    pub fn level(&self) -> Option<u32> {
        self.level
    }

    /// Expected quadratic variation per unit time at each point.
    pub fn ito_rate(&self) -> T {
        self.ito_rate
    }

    pub fn realization(&self) -> (u64, u64) {
        self.realization
    }

    /// `Delta W^n[k][i]`, `K x M`.
    pub fn increments(&self) -> &[T] {
        &self.increments
    }

    pub fn increment_row(&self, k: usize) -> &[T] {
        let m = self.grid.points();
        &self.increments[k * m..(k + 1) * m]
    }

    /// `W^n_{t_k}(x_i)`, `(K+1) x M`, row 0 zero.
    pub fn cumulative(&self) -> &FieldPath<T> {
        &self.cumulative
    }
}

/// `sum_k (Delta W^n[k][x])^2`.
pub fn empirical_quadratic_variation<T: Real>(
    path: &MollifiedNoisePath<T>,
    x_index: usize,
) -> Result<T> {
    let m = path.grid.points();
    if x_index >= m {
        return Err(Error::shape(format!("index < {m}"), x_index));
    }
    Ok(path
        .increments
        .iter()
        .skip(x_index)
        .step_by(m)
        .fold(T::zero(), |acc, &d| acc + d * d))
}

/// Ito integral `int phi dW` (or `int (phi * delta_n) dW` when `moll` is given)
/// with `phi` sampled at left endpoints.
///
/// The mollified case applies the exact adjoint of the discrete mollifier to
/// `phi`, so it equals the pairing of `phi` with the mollified increments for
/// every realization.
pub fn noise_pairing<T: Real>(
    noise: &WhiteNoiseLattice<T>,
    phi: &FieldPath<T>,
    moll: Option<&MollifierOp<T>>,
) -> Result<T> {
    let g = noise.grid;
    if phi.grid().points() != g.points() || phi.grid().steps() != g.steps() {
        return Err(Error::shape(
            format!("{}x{}", g.steps() + 1, g.points()),
            format!("{}x{}", phi.grid().steps() + 1, phi.grid().points()),
        ));
    }
    let m = g.points();
    let rows = &phi.values()[..g.steps() * m];
    let tilde;
    let weights: &[T] = match moll {
        Some(op) => {
            g.ensure_same(&op.grid, "noise_pairing")?;
            let mut out = vec![T::zero(); rows.len()];
            op.adjoint_rows(rows, &mut out);
            tilde = out;
            &tilde
        }
        None => rows,
    };
    Ok(weights
        .iter()
        .zip(&noise.increments)
        .fold(T::zero(), |acc, (&w, &e)| acc + w * e)
        * g.dx())
}

/// `sum_{k<K} sum_i phi[k][i] Delta W^n[k][i] dx`, the direct route to
/// `int phi dW^n`.
pub fn pair_increments<T: Real>(path: &MollifiedNoisePath<T>, phi: &FieldPath<T>) -> Result<T> {
    let g = path.grid;
    if phi.grid().points() != g.points() || phi.grid().steps() != g.steps() {
        return Err(Error::shape(g.points(), phi.grid().points()));
    }
    let m = g.points();
    let rows = &phi.values()[..g.steps() * m];
    Ok(rows
        .iter()
        .zip(&path.increments)
        .fold(T::zero(), |acc, (&w, &e)| acc + w * e)
        * g.dx())
}

/// Isometry prediction `sum_{k<K,i} phi[k][i]^2 dt dx` for the lattice noise,
/// or with `phi` replaced by its adjoint mollification.
pub fn isometry_variance<T: Real>(phi: &FieldPath<T>, moll: Option<&MollifierOp<T>>) -> T {
    let g = *phi.grid();
    let m = g.points();
    let rows = &phi.values()[..g.steps() * m];
    let sq = match moll {
        Some(op) => {
            let mut out = vec![T::zero(); rows.len()];
            op.adjoint_rows(rows, &mut out);
            out.iter().fold(T::zero(), |a, &v| a + v * v)
        }
        None => rows.iter().fold(T::zero(), |a, &v| a + v * v),
    };
    sq * g.dt() * g.dx()
}
