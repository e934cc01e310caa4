//! Sequence representatives, the negligible ideal, association trends, weak
//! residuals, and sections at `t = 0`.

use num_traits::Float;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{pair, pair_rounding_bound, FieldPath, GridSpec, SpaceField};
use crate::noise::{
    noise_pairing, pair_increments, MollifiedNoisePath, MollifierOp, WhiteNoiseLattice,
};
use crate::quadrature::standard_bump;
use crate::scalar::Real;
use crate::stats::{log_log_slope, rms};
use crate::stencil::{backward_diff, forward_diff, laplacian_path};
use crate::testfn::{SpaceTimeTestFunction, SpatialTestFunction};

/// Coupled representatives `(F_n)` at increasing levels.
#[derive(Debug, Clone)]
pub struct SequenceField<T> {
    levels: Vec<u32>,
    paths: Vec<FieldPath<T>>,
    realization: (u64, u64),
    label: String,
}

impl<T: Real> SequenceField<T> {
    /// Needs at least three strictly increasing levels on one grid.
    pub fn new(
        levels: Vec<u32>,
        paths: Vec<FieldPath<T>>,
        realization: (u64, u64),
        label: impl Into<String>,
    ) -> Result<Self> {
        if levels.len() != paths.len() {
            return Err(Error::Sequence(format!(
                "{} levels for {} paths",
                levels.len(),
                paths.len()
            )));
        }
        if levels.len() < 3 {
            return Err(Error::Sequence(format!(
                "need at least 3 levels, got {}",
                levels.len()
            )));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Sequence(format!(
                "levels must be strictly increasing: {levels:?}"
            )));
        }
        for p in &paths[1..] {
            paths[0].grid().ensure_same(p.grid(), "sequence field")?;
        }
        Ok(SequenceField {
            levels,
            paths,
            realization,
            label: label.into(),
        })
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn paths(&self) -> &[FieldPath<T>] {
        &self.paths
    }

    pub fn realization(&self) -> (u64, u64) {
        self.realization
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn grid(&self) -> &GridSpec<T> {
        self.paths[0].grid()
    }

    /// Level-wise sum; both sides must share levels and grid.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.levels != other.levels {
            return Err(Error::Sequence(format!(
                "levels differ: {:?} vs {:?}",
                self.levels, other.levels
            )));
        }
        let paths = self
            .paths
            .iter()
            .zip(&other.paths)
            .map(|(a, b)| a.add(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(SequenceField {
            levels: self.levels.clone(),
            paths,
            realization: self.realization,
            label: format!("{}+{}", self.label, other.label),
        })
    }

    /// Applies the same map to every representative.
    pub fn map_paths(
        &self,
        label: impl Into<String>,
        f: impl Fn(&FieldPath<T>) -> FieldPath<T>,
    ) -> Self {
        SequenceField {
            levels: self.levels.clone(),
            paths: self.paths.iter().map(f).collect(),
            realization: self.realization,
            label: label.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuotientReport {
    pub max_abs_pairing: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Tolerance for a pairing that vanishes in exact arithmetic.
pub const QUOTIENT_TOLERANCE: f64 = 1e-12;

/// Pairs x-independent representatives against the battery; every pairing
/// must vanish to machine precision.
pub fn quotient_check<T: Real>(
    seq: &SequenceField<T>,
    phis: &[SpaceTimeTestFunction<T>],
) -> Result<QuotientReport> {
    for (j, p) in seq.paths.iter().enumerate() {
        if let Some(step) = p.first_x_dependent_row() {
            return Err(Error::NotXIndependent { path: j, step });
        }
    }
    let mut max_abs = 0.0f64;
    for p in &seq.paths {
        for phi in phis {
            max_abs = max_abs.max(Float::abs(pair(p, phi.phi())?.as_f64()));
        }
    }
    Ok(QuotientReport {
        max_abs_pairing: max_abs,
        tolerance: QUOTIENT_TOLERANCE,
        pass: max_abs < QUOTIENT_TOLERANCE,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Associated,
    NotAssociated,
    Inconclusive,
}

/// Trend of `|e_n|` for one test function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestAssociation {
    pub testfn_id: usize,
    pub errors: Vec<f64>,
    /// Least-squares slope of `ln |e_n|` against `ln n`.
    pub slope: f64,
    /// `|e_{n_max}| / |e_{n_min}|`.
    pub ratio: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssociationReport {
    pub levels: Vec<u32>,
    /// `|e|` at or below this counts as an exact zero.
    pub floor: f64,
    pub max_ratio: f64,
    pub tests: Vec<TestAssociation>,
    pub verdict: Verdict,
}

impl AssociationReport {
    /// Applies the trend rule to error sequences `errors[test][level]`.
    ///
    /// A test associates when `|e_max| <= max_ratio |e_min|` with a negative
    /// log-log slope, or when every error is within `floor`. It fails to
    /// associate when the errors do not shrink at all.
    pub fn from_errors(levels: &[u32], errors: Vec<Vec<f64>>, floor: f64, max_ratio: f64) -> Self {
        let xs: Vec<f64> = levels.iter().map(|&n| f64::from(n)).collect();
        let tests: Vec<TestAssociation> = errors
            .into_iter()
            .enumerate()
            .map(|(testfn_id, e)| {
                let mags: Vec<f64> = e.iter().map(|v| v.abs()).collect();
                let tiny = floor.max(f64::MIN_POSITIVE);
                let clamped: Vec<f64> = mags.iter().map(|&v| v.max(tiny)).collect();
                let slope = log_log_slope(&xs, &clamped);
                let (first, last) = (mags[0], mags[mags.len() - 1]);
                let ratio = if first > 0.0 {
                    last / first
                } else if last > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                };
                let exact = mags.iter().all(|&v| v <= floor);
                let shrinking = first > floor && ratio <= max_ratio && slope < 0.0;
                let verdict = if exact || shrinking {
                    Verdict::Associated
                } else if ratio >= 1.0 && slope >= 0.0 {
                    Verdict::NotAssociated
                } else {
                    Verdict::Inconclusive
                };
                TestAssociation {
                    testfn_id,
                    errors: e,
                    slope,
                    ratio,
                    verdict,
                }
            })
            .collect();
        let verdict = if tests.iter().all(|t| t.verdict == Verdict::Associated) {
            Verdict::Associated
        } else if tests.iter().any(|t| t.verdict == Verdict::NotAssociated) {
            Verdict::NotAssociated
        } else {
            Verdict::Inconclusive
        };
        AssociationReport {
            levels: levels.to_vec(),
            floor,
            max_ratio,
            tests,
            verdict,
        }
    }

    /// Aggregates per-realization errors `runs[replica][test][level]` into
    /// root-mean-square errors before applying the trend rule.
    pub fn from_replicas(
        levels: &[u32],
        runs: &[Vec<Vec<f64>>],
        floor: f64,
        max_ratio: f64,
    ) -> Self {
        let tests = runs.first().map_or(0, Vec::len);
        let errors = (0..tests)
            .map(|t| {
                (0..levels.len())
                    .map(|l| rms(&runs.iter().map(|r| r[t][l]).collect::<Vec<_>>()))
                    .collect()
            })
            .collect();
        Self::from_errors(levels, errors, floor, max_ratio)
    }
}

/// Default ratio `|e_{n_max}| / |e_{n_min}|` required for association.
pub const ASSOCIATION_RATIO: f64 = 0.5;

/// The second argument of [`associated`].
#[derive(Debug, Clone, Copy)]
pub enum Reference<'a, T> {
    Sequence(&'a SequenceField<T>),
    Path(&'a FieldPath<T>),
}

/// `e_n(phi) = pair(F_n - G_n, phi)` (or `pair(F_n - G, phi)`), one row per test
/// function.
pub fn association_errors<T: Real>(
    f: &SequenceField<T>,
    reference: Reference<'_, T>,
    phis: &[SpaceTimeTestFunction<T>],
) -> Result<(Vec<Vec<f64>>, f64)> {
    let mut floor = 0.0f64;
    let refs: Vec<&FieldPath<T>> = match reference {
        Reference::Sequence(g) => {
            if g.levels != f.levels {
                return Err(Error::CouplingMismatch(format!(
                    "levels {:?} vs {:?}",
                    f.levels, g.levels
                )));
            }
            if g.realization != f.realization {
                return Err(Error::CouplingMismatch(format!(
                    "noise realization {:?} vs {:?}",
                    f.realization, g.realization
                )));
            }
            g.paths.iter().collect()
        }
        Reference::Path(p) => vec![p; f.levels.len()],
    };
    let mut errors = vec![Vec::with_capacity(f.levels.len()); phis.len()];
    for (fp, gp) in f.paths.iter().zip(refs) {
        fp.grid().ensure_same(gp.grid(), "associated")?;
        for (row, phi) in errors.iter_mut().zip(phis) {
            let a = pair(fp, phi.phi())?;
            let b = pair(gp, phi.phi())?;
            floor = floor.max(
                (pair_rounding_bound(fp, phi.phi()) + pair_rounding_bound(gp, phi.phi())).as_f64(),
            );
            row.push((a - b).as_f64());
        }
    }
    Ok((errors, floor))
}

/// Finite-level association test of `F` against a coupled sequence or a limit path.
pub fn associated<T: Real>(
    f: &SequenceField<T>,
    reference: Reference<'_, T>,
    phis: &[SpaceTimeTestFunction<T>],
) -> Result<AssociationReport> {
    let (errors, floor) = association_errors(f, reference, phis)?;
    Ok(AssociationReport::from_errors(
        &f.levels,
        errors,
        floor,
        ASSOCIATION_RATIO,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeReport {
    /// `sup |D(F_n + c_n) - D F_n|` over levels and lattice points.
    pub representative_difference: f64,
    pub representative_tolerance: f64,
    /// Largest `|pair(D F, phi) + pair(F, D^+ phi)|` over levels and tests.
    pub transfer_discrepancy: f64,
    pub transfer_tolerance: f64,
    /// Association of the derivative classes, from direct pairings.
    pub direct: AssociationReport,
    /// The same, with pairings moved onto the test function.
    pub transferred: AssociationReport,
    pub pass: bool,
}

fn backward_path<T: Real>(p: &FieldPath<T>) -> FieldPath<T> {
    let dx = p.grid().dx();
    p.map_rows(|s, d| backward_diff(s, dx, d))
}

/// Representative independence of `D = backward difference` on classes, and
/// transfer of the derivative association onto the test functions by
/// summation by parts.
pub fn derivative_class_check<T: Real>(
    f: &SequenceField<T>,
    offsets: &SequenceField<T>,
    g: &SequenceField<T>,
    phis: &[SpaceTimeTestFunction<T>],
) -> Result<DerivativeReport> {
    for (j, p) in offsets.paths.iter().enumerate() {
        if let Some(step) = p.first_x_dependent_row() {
            return Err(Error::NotXIndependent { path: j, step });
        }
    }
    let shifted = f.add(offsets)?;
    let df = f.map_paths("dF", backward_path);
    let dshift = shifted.map_paths("d(F+c)", backward_path);
    let mut rep_diff = 0.0f64;
    let mut rep_tol = 0.0f64;
    let inv_dx = (T::one() / f.grid().dx()).as_f64();
    for ((a, b), base) in df.paths.iter().zip(&dshift.paths).zip(&shifted.paths) {
        for (x, y) in a.values().iter().zip(b.values()) {
            rep_diff = rep_diff.max(Float::abs((*x - *y).as_f64()));
        }
        rep_tol = rep_tol.max(4.0 * T::epsilon().as_f64() * base.max_abs().as_f64() * inv_dx);
    }

    let dg = g.map_paths("dG", backward_path);
    let (direct_err, direct_floor) = association_errors(&df, Reference::Sequence(&dg), phis)?;

    // pair(D^- F, phi) = -pair(F, D^+ phi) on the periodic lattice.
    let dx = f.grid().dx();
    let dphis: Vec<FieldPath<T>> = phis
        .iter()
        .map(|p| p.phi().map_rows(|s, d| forward_diff(s, dx, d)))
        .collect();
    let mut transfer_err = vec![Vec::new(); phis.len()];
    let mut discrepancy = 0.0f64;
    let mut transfer_tol = 0.0f64;
    for (l, (fp, gp)) in f.paths.iter().zip(&g.paths).enumerate() {
        for (t, dphi) in dphis.iter().enumerate() {
            let e = -(pair(fp, dphi)? - pair(gp, dphi)?).as_f64();
            discrepancy = discrepancy.max((e - direct_err[t][l]).abs());
            let bound = pair_rounding_bound(fp, dphi) + pair_rounding_bound(gp, dphi);
            let bound_direct = pair_rounding_bound(&df.paths[l], phis[t].phi())
                + pair_rounding_bound(&dg.paths[l], phis[t].phi());
            transfer_tol = transfer_tol.max(4.0 * (bound + bound_direct).as_f64());
            transfer_err[t].push(e);
        }
    }
    let direct =
        AssociationReport::from_errors(&f.levels, direct_err, direct_floor, ASSOCIATION_RATIO);
    let transferred = AssociationReport::from_errors(
        &f.levels,
        transfer_err,
        transfer_tol.max(direct_floor),
        ASSOCIATION_RATIO,
    );
    let pass =
        rep_diff <= rep_tol && discrepancy <= transfer_tol && direct.verdict == transferred.verdict;
    Ok(DerivativeReport {
        representative_difference: rep_diff,
        representative_tolerance: rep_tol,
        transfer_discrepancy: discrepancy,
        transfer_tolerance: transfer_tol,
        direct,
        transferred,
        pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeakResidual<T> {
    /// Includes the initial-data term `sum_i f_i phi(0, x_i) dx`.
    pub corrected: T,
    /// Omits the initial-data term.
    pub literal: T,
}

/// `pair(H, d_t phi) + sum f phi(0) dx + pair(Lap_h H, phi) + pair(N, phi) + int phi dW^n`.
///
/// `noise = None` drops the stochastic integral; otherwise the mollifier
/// selects `W^n` (or the lattice process when absent).
pub fn weak_residual<T: Real>(
    h: &FieldPath<T>,
    noise: Option<(&WhiteNoiseLattice<T>, Option<&MollifierOp<T>>)>,
    f: &SpaceField<T>,
    nonlinearity: &FieldPath<T>,
    phi: &SpaceTimeTestFunction<T>,
) -> Result<WeakResidual<T>> {
    let grid = *h.grid();
    let dx = grid.dx();
    let lap = laplacian_path(h);
    let mut literal =
        pair(h, phi.dphi_dt())? + pair(&lap, phi.phi())? + pair(nonlinearity, phi.phi())?;
    if let Some((w, moll)) = noise {
        literal += noise_pairing(w, phi.phi(), moll)?;
    }
    let initial = crate::grid::pair_spatial(f.values(), phi.phi().row(0), dx)?;
    Ok(WeakResidual {
        corrected: literal + initial,
        literal,
    })
}

/// [`weak_residual`] for a whole battery, with `int phi dW^n` taken from the
/// mollified increments (equal to the adjoint route by the adjoint identity).
pub fn weak_residuals<T: Real>(
    h: &FieldPath<T>,
    noise: Option<&MollifiedNoisePath<T>>,
    f: &SpaceField<T>,
    nonlinearity: &FieldPath<T>,
    phis: &[SpaceTimeTestFunction<T>],
) -> Result<Vec<WeakResidual<T>>> {
    let dx = h.grid().dx();
    let lap = laplacian_path(h);
    phis.iter()
        .map(|phi| {
            let mut literal =
                pair(h, phi.dphi_dt())? + pair(&lap, phi.phi())? + pair(nonlinearity, phi.phi())?;
            if let Some(p) = noise {
                literal += pair_increments(p, phi.phi())?;
            }
            let initial = crate::grid::pair_spatial(f.values(), phi.phi().row(0), dx)?;
            Ok(WeakResidual {
                corrected: literal + initial,
                literal,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonlinearityTest {
    pub testfn_id: usize,
    pub pairings: Vec<f64>,
    /// `|q_{n_m} - q_{n_{m-1}}| / |q_{n_2} - q_{n_1}|`.
    pub cauchy_ratio: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonlinearityReport {
    pub levels: Vec<u32>,
    pub tests: Vec<NonlinearityTest>,
    pub converged: bool,
}

/// `q_n(phi) = pair((D_c H_n)^2, phi)` with a Cauchy criterion on successive levels.
pub fn nonlinearity_limit<T: Real>(
    h_seq: &SequenceField<T>,
    phis: &[SpaceTimeTestFunction<T>],
) -> Result<NonlinearityReport> {
    let squares: Vec<FieldPath<T>> = h_seq
        .paths
        .iter()
        .map(crate::stencil::squared_gradient_path)
        .collect();
    let mut tests = Vec::with_capacity(phis.len());
    for (testfn_id, phi) in phis.iter().enumerate() {
        let pairings = squares
            .iter()
            .map(|s| Ok(pair(s, phi.phi())?.as_f64()))
            .collect::<Result<Vec<_>>>()?;
        let m = pairings.len();
        let first = (pairings[1] - pairings[0]).abs();
        let last = (pairings[m - 1] - pairings[m - 2]).abs();
        let scale = pairings.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let settled = first <= 1e-12 * scale.max(f64::MIN_POSITIVE)
            && last <= 1e-12 * scale.max(f64::MIN_POSITIVE);
        let cauchy_ratio = if first > 0.0 {
            last / first
        } else if last > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        let converged = settled || last <= 0.5 * first;
        tests.push(NonlinearityTest {
            testfn_id,
            pairings,
            cauchy_ratio,
            converged,
        });
    }
    let converged = tests.iter().all(|t| t.converged);
    Ok(NonlinearityReport {
        levels: h_seq.levels.clone(),
        tests,
        converged,
    })
}

/// One-sided delta net `rho_eps(t) = rho_hat(t / eps) / eps` on the time lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct StrictDeltaNet<T> {
    epsilons: Vec<T>,
    /// `weights[e][k] = rho_eps(t_k)`, unit `dt`-weighted mass.
    weights: Vec<Vec<T>>,
    dt: T,
}

/// `rho_hat(s) = c exp(-1/(1 - (2s-1)^2))` on `(0, 1)`.
pub fn one_sided_profile(s: f64) -> f64 {
    standard_bump(2.0 * s - 1.0) * 2.0 / crate::quadrature::bump_mass()
}

/// Minimum number of time steps per `eps`.
pub const DELTA_NET_MIN_STEPS: usize = 4;

/// Samples the net at each `eps` (strictly decreasing, `eps >= 4 dt`,
/// `eps <= T`).
pub fn make_delta_net<T: Real>(grid: &GridSpec<T>, epsilons: &[T]) -> Result<StrictDeltaNet<T>> {
    if epsilons.is_empty() {
        return Err(Error::config("epsilons", "must not be empty"));
    }
    if epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config("epsilons", "must be strictly decreasing"));
    }
    let dt = grid.dt();
    let min = T::from_count(DELTA_NET_MIN_STEPS) * dt;
    let mut weights = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        // relative slack so that eps = 4 dt computed in floating point passes
        if eps < min * (T::one() - T::lit(1e-9)) {
            return Err(Error::Resolution(format!(
                "delta net eps = {eps} is below {DELTA_NET_MIN_STEPS} dt = {min}"
            )));
        }
        if eps > grid.horizon() {
            return Err(Error::config(
                "epsilons",
                format!("eps = {eps} exceeds the horizon {}", grid.horizon()),
            ));
        }
        let e = eps.as_f64();
        let raw: Vec<f64> = (0..grid.steps())
            .map(|k| {
                let t = grid.time(k).as_f64();
                if t < e {
                    one_sided_profile(t / e) / e
                } else {
                    0.0
                }
            })
            .collect();
        let mass: f64 = raw.iter().sum::<f64>() * dt.as_f64();
        weights.push(raw.into_iter().map(|v| T::lit(v / mass)).collect());
    }
    Ok(StrictDeltaNet {
        epsilons: epsilons.to_vec(),
        weights,
        dt,
    })
}

impl<T: Real> StrictDeltaNet<T> {
    pub fn epsilons(&self) -> &[T] {
        &self.epsilons
    }

    pub fn weights(&self, j: usize) -> &[T] {
        &self.weights[j]
    }

    /// `sum_k rho_eps(t_k) dt` for the `j`-th epsilon.
    pub fn mass(&self, j: usize) -> T {
        self.weights[j].iter().fold(T::zero(), |a, &w| a + w) * self.dt
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionReport {
    pub epsilons: Vec<f64>,
    pub values: Vec<f64>,
    /// `sum_i f_i phi_x_i dx`.
    pub target: f64,
    pub errors: Vec<f64>,
    /// `|err_{j+1}| / |err_j|` for successive epsilons.
    pub ratios: Vec<f64>,
    pub floor: f64,
    pub pass: bool,
}

impl SectionReport {
    /// True when every successive error ratio lies in `[0.5 (1 - tol), 0.5 (1 + tol)]`.
    pub fn halves_within(&self, tol: f64) -> bool {
        self.ratios.iter().all(|&r| (r - 0.5).abs() <= 0.5 * tol)
    }
}

/// `s_eps = sum_k sum_i H[k][i] rho_eps(t_k) phi_x[i] dt dx` per epsilon.
///
/// Passes when the error at the smallest epsilon is at most half the error at
/// the largest, or both are within `floor`.
pub fn section_at_zero<T: Real>(
    h: &FieldPath<T>,
    net: &StrictDeltaNet<T>,
    phi_x: &SpatialTestFunction<T>,
    f: &SpaceField<T>,
    floor: f64,
) -> Result<SectionReport> {
    let grid = *h.grid();
    if net.dt != grid.dt() || net.weights[0].len() != grid.steps() {
        return Err(Error::GridMismatch(
            "delta net sampled on a different time lattice".into(),
        ));
    }
    let dx = grid.dx();
    let row_pairings: Vec<T> = (0..grid.steps())
        .map(|k| crate::grid::pair_spatial(h.row(k), phi_x.phi(), dx))
        .collect::<Result<_>>()?;
    let target = crate::grid::pair_spatial(f.values(), phi_x.phi(), dx)?.as_f64();
    let values: Vec<f64> = net
        .weights
        .iter()
        .map(|w| {
            (w.iter()
                .zip(&row_pairings)
                .fold(T::zero(), |a, (&wk, &p)| a + wk * p)
                * grid.dt())
            .as_f64()
        })
        .collect();
    let errors: Vec<f64> = values.iter().map(|v| v - target).collect();
    let ratios = errors.windows(2).map(|w| (w[1] / w[0]).abs()).collect();
    let (first, last) = (errors[0].abs(), errors[errors.len() - 1].abs());
    let pass = last <= 0.5 * first || (first <= floor && last <= floor);
    Ok(SectionReport {
        epsilons: net.epsilons.iter().map(|e| e.as_f64()).collect(),
        values,
        target,
        errors,
        ratios,
        floor,
        pass,
    })
}
