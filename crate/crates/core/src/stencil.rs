//! Periodic finite-difference stencils and the implicit diffusion solve.

use crate::grid::{FieldPath, SpaceField};
use crate::scalar::Real;

/// `(F[i+1] - F[i-1]) / (2 dx)`, periodic.
pub fn central_diff<T: Real>(f: &[T], dx: T, out: &mut [T]) {
    let m = f.len();
    let inv = T::one() / (dx + dx);
    for i in 0..m {
        let ip = if i + 1 == m { 0 } else { i + 1 };
        let im = if i == 0 { m - 1 } else { i - 1 };
        out[i] = (f[ip] - f[im]) * inv;
    }
}

/// `(F[i+1] - F[i]) / dx`, periodic.
pub fn forward_diff<T: Real>(f: &[T], dx: T, out: &mut [T]) {
    let m = f.len();
    for i in 0..m {
        let ip = if i + 1 == m { 0 } else { i + 1 };
        out[i] = (f[ip] - f[i]) / dx;
    }
}

/// `(F[i] - F[i-1]) / dx`, periodic. The adjoint of [`forward_diff`] is
/// `-backward_diff`.
pub fn backward_diff<T: Real>(f: &[T], dx: T, out: &mut [T]) {
    let m = f.len();
    for i in 0..m {
        let im = if i == 0 { m - 1 } else { i - 1 };
        out[i] = (f[i] - f[im]) / dx;
    }
}

/// `(F[i+1] - 2 F[i] + F[i-1]) / dx^2`, periodic.
pub fn laplacian<T: Real>(f: &[T], dx: T, out: &mut [T]) {
    let m = f.len();
    let inv = T::one() / (dx * dx);
    let two = T::lit(2.0);
    for i in 0..m {
        let ip = if i + 1 == m { 0 } else { i + 1 };
        let im = if i == 0 { m - 1 } else { i - 1 };
        out[i] = (f[ip] - two * f[i] + f[im]) * inv;
    }
}

/// Central gradient and 3-point Laplacian of one slice.
pub fn spatial_stencils<T: Real>(field: &SpaceField<T>) -> (SpaceField<T>, SpaceField<T>) {
    let dx = field.grid().dx();
    let m = field.values().len();
    let mut grad = vec![T::zero(); m];
    let mut lap = vec![T::zero(); m];
    central_diff(field.values(), dx, &mut grad);
    laplacian(field.values(), dx, &mut lap);
    let g = *field.grid();
    (
        SpaceField::new(g, grad).expect("same length"),
        SpaceField::new(g, lap).expect("same length"),
    )
}

/// Row-wise central gradient of a path.
pub fn grad_path<T: Real>(path: &FieldPath<T>) -> FieldPath<T> {
    let dx = path.grid().dx();
    path.map_rows(|src, dst| central_diff(src, dx, dst))
}

/// Row-wise Laplacian of a path.
pub fn laplacian_path<T: Real>(path: &FieldPath<T>) -> FieldPath<T> {
    let dx = path.grid().dx();
    path.map_rows(|src, dst| laplacian(src, dx, dst))
}

/// Row-wise squared central gradient, the discrete `(d_x H)^2`.
pub fn squared_gradient_path<T: Real>(path: &FieldPath<T>) -> FieldPath<T> {
    let dx = path.grid().dx();
    path.map_rows(|src, dst| {
        central_diff(src, dx, dst);
        dst.iter_mut().for_each(|v| *v = *v * *v);
    })
}

/// Solver for `(I - dt Lap_h) u = rhs` on the periodic lattice.
///
/// The matrix is tridiagonal with two corner entries. It is factored once
/// (Thomas sweep on the Sherman-Morrison reduced system) and reused for every
/// right-hand side.
#[derive(Debug, Clone)]
pub struct PeriodicHelmholtz<T> {
    off: T,
    /// Forward-sweep denominators of the reduced tridiagonal system.
    denom: Vec<T>,
    /// Modified super-diagonal coefficients.
    cprime: Vec<T>,
    /// Solution of the reduced system against the rank-one correction vector.
    z: Vec<T>,
    gamma: T,
    z_factor: T,
    scratch: Vec<T>,
}

impl<T: Real> PeriodicHelmholtz<T> {
    /// Factors `I - dt Lap_h` for spacing `dx` and `m` points.
    pub fn new(m: usize, dx: T, dt: T) -> Self {
        assert!(m >= 3, "periodic solve needs at least 3 points");
        let r = dt / (dx * dx);
        let diag = T::one() + r + r;
        let off = -r;
        // Sherman-Morrison: A = B + u v^T with u = (gamma, 0.., off), v = (1, 0.., off/gamma).
        let gamma = -diag;
        let mut b = vec![diag; m];
        b[0] = diag - gamma;
        b[m - 1] = diag - off * off / gamma;

        let mut denom = vec![T::zero(); m];
        let mut cprime = vec![T::zero(); m];
        denom[0] = b[0];
        cprime[0] = off / denom[0];
        for i in 1..m {
            denom[i] = b[i] - off * cprime[i - 1];
            cprime[i] = off / denom[i];
        }

        let mut solver = PeriodicHelmholtz {
            off,
            denom,
            cprime,
            z: vec![T::zero(); m],
            gamma,
            z_factor: T::zero(),
            scratch: vec![T::zero(); m],
        };
        let mut z = vec![T::zero(); m];
        z[0] = gamma;
        z[m - 1] = off;
        solver.thomas(&mut z);
        solver.z_factor = T::one() + z[0] + off * z[m - 1] / gamma;
        solver.z = z;
        solver
    }

    fn thomas(&mut self, u: &mut [T]) {
        let m = u.len();
        let d = &mut self.scratch;
        d[0] = u[0] / self.denom[0];
        for i in 1..m {
            d[i] = (u[i] - self.off * d[i - 1]) / self.denom[i];
        }
        u[m - 1] = d[m - 1];
        for i in (0..m - 1).rev() {
            u[i] = d[i] - self.cprime[i] * u[i + 1];
        }
    }

    /// Solves in place: `u <- (I - dt Lap_h)^{-1} u`.
    pub fn solve_in_place(&mut self, u: &mut [T]) {
        let m = u.len();
        assert_eq!(m, self.z.len(), "solver size mismatch");
        self.thomas(u);
        let fact = (u[0] + self.off * u[m - 1] / self.gamma) / self.z_factor;
        for (ui, &zi) in u.iter_mut().zip(&self.z) {
            *ui -= fact * zi;
        }
    }
}
