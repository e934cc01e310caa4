//! Naive (unrenormalized) KPZ: a spatial average that drifts linearly in `n`
//! against zero-mean pairings that stay bounded.

use anyhow::Result;
use kpz_core::dynamics::{solve_kpz, KpzOptions};
use kpz_core::stats::{linear_fit, mean, rms, standard_error};
use kpz_core::{
    ito_constant, make_mollifier, make_spatial_test_function, mollify_noise, pair, pair_spatial,
    sample_white_noise,
};

use super::per_replica;
use crate::config::ExperimentConfig;
use crate::report::{cell, Criterion, Diagnostic, ExperimentResult, Table};

/// Height bound for the naive solver; far above the expected `(C/2) n T`.
const OVERFLOW_BOUND: f64 = 1e4;

pub fn diverge(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let g = cfg.grid_spec();
    let seed = cfg.stream_seed("diverge");
    let f = cfg.initial_profile.resolve()?.sample(&g)?;
    let chi = make_spatial_test_function(&g, cfg.diverge.weight)?;
    let phis = cfg.battery();
    let ops = cfg
        .levels
        .iter()
        .map(|&n| make_mollifier(&g, n))
        .collect::<Result<Vec<_>, _>>()?;
    let opts = KpzOptions {
        renormalized: false,
        nonlinearity: true,
        bound: OVERFLOW_BOUND,
    };

    // runs[replica][level] = (pair(h(T), chi), [pair(h, phi_j)])
    let runs = per_replica("diverge", seed, cfg.diverge.replicas, |rep| {
        let noise = sample_white_noise(&g, seed, rep);
        ops.iter()
            .map(|op| {
                let h = solve_kpz(&f, Some(&mollify_noise(&noise, op)?), &opts)?;
                let avg = pair_spatial(h.row(g.steps()), chi.psi(), g.dx())?;
                let d0 = phis
                    .iter()
                    .map(|phi| pair(&h, phi.phi()))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((avg, d0))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mass: f64 = chi.psi().iter().sum::<f64>() * g.dx();
    let ns: Vec<f64> = cfg.levels.iter().map(|&n| f64::from(n)).collect();
    let mut out = ExperimentResult::new("diverge");
    let mut table = Table::new(
        "diverge.csv",
        &["n", "mean_weighted_height", "standard_error", "counterterm"],
    );
    let mut means = Vec::new();
    for (l, &n) in ns.iter().enumerate() {
        let xs: Vec<f64> = runs.iter().map(|r| r[l].0).collect();
        let counter = 0.5 * ito_constant() * n * g.horizon() * mass;
        table.push(vec![
            cell(cfg.levels[l]),
            cell(mean(&xs)),
            cell(standard_error(&xs)),
            cell(counter),
        ]);
        means.push(mean(&xs));
    }
    let (slope, intercept) = linear_fit(&ns, &means);
    let predicted = 0.5 * ito_constant() * g.horizon() * mass;
    out.criteria.push(Criterion::at_most(
        "drift_slope_rel_error",
        (slope / predicted - 1.0).abs(),
        cfg.thresholds.drift_slope_rel_tol,
    ));
    out.diagnostics.push(Diagnostic::new("drift_slope", slope));
    out.diagnostics
        .push(Diagnostic::new("drift_slope_predicted", predicted));
    out.diagnostics
        .push(Diagnostic::new("drift_intercept", intercept));

    let mut d0 = Table::new("diverge_d0.csv", &["n", "testfn_id", "rms_pairing"]);
    for j in 0..phis.len() {
        let by_level: Vec<f64> = (0..ns.len())
            .map(|l| rms(&runs.iter().map(|r| r[l].1[j]).collect::<Vec<_>>()))
            .collect();
        for (l, v) in by_level.iter().enumerate() {
            d0.push(vec![cell(cfg.levels[l]), cell(j), cell(v)]);
        }
        let growth = by_level.iter().fold(0.0f64, |a, &v| a.max(v)) / by_level[0];
        out.criteria.push(Criterion::at_most(
            format!("d0_bounded_tf{j}"),
            growth,
            cfg.thresholds.bounded_factor,
        ));
    }
    out.tables.push(table);
    out.tables.push(d0);
    Ok(out)
}
