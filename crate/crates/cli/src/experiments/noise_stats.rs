//! Quadratic variation and covariance of the mollified noise.

use std::collections::BTreeMap;

use anyhow::Result;
use kpz_core::stats::{covariance_with_error, mean, standard_error};
use kpz_core::{ito_constant, make_mollifier, sample_noise_window, MollifierF64};

use super::per_replica;
use crate::config::ExperimentConfig;
use crate::report::{cell, Criterion, Diagnostic, ExperimentResult, Table};

/// QV of `W^n(x)` over `[0, T]` against `C n T`.
pub fn qv(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let g = cfg.grid_spec();
    let seed = cfg.stream_seed("qv");
    let m = g.points();
    let ops = cfg
        .qv
        .levels
        .iter()
        .map(|&n| make_mollifier(&g, n))
        .collect::<Result<Vec<MollifierF64>, _>>()?;
    let radius = ops
        .iter()
        .map(MollifierF64::support_radius)
        .max()
        .unwrap_or(0);
    let cols = cfg.qv_columns();

    // samples[replica][column][level]
    let samples = per_replica("qv", seed, cfg.qv.replicas, |rep| {
        cols.iter()
            .map(|&x| {
                let w = sample_noise_window(
                    &g,
                    seed,
                    rep,
                    (x + m - radius) % m,
                    2 * radius + 1,
                    g.steps(),
                );
                ops.iter()
                    .map(|op| {
                        Ok(op
                            .point_increments(&w, x)?
                            .iter()
                            .map(|d| d * d)
                            .sum::<f64>())
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut out = ExperimentResult::new("qv");
    let tol = cfg.thresholds.qv_rel_tol;
    let mut means = Vec::new();
    for (l, &n) in cfg.qv.levels.iter().enumerate() {
        let predicted = ito_constant() * f64::from(n) * g.horizon();
        let mut table = Table::new(
            format!("qv_n{n}.csv"),
            &["replica_id", "x_index", "qv_observed", "qv_predicted"],
        );
        let mut all = Vec::new();
        for (rep, per_col) in samples.iter().enumerate() {
            for (c, &x) in cols.iter().enumerate() {
                let v = per_col[c][l];
                all.push(v);
                table.push(vec![cell(rep), cell(x), cell(v), cell(predicted)]);
            }
        }
        let (mu, se) = (mean(&all), standard_error(&all));
        out.criteria.push(Criterion::at_most(
            format!("qv_rel_error_n{n}"),
            (mu - predicted).abs() / predicted,
            tol,
        ));
        out.diagnostics
            .push(Diagnostic::new(format!("qv_mean_n{n}"), mu));
        out.diagnostics.push(Diagnostic::new(
            format!("qv_ci95_halfwidth_n{n}"),
            1.96 * se,
        ));
        out.diagnostics
            .push(Diagnostic::new(format!("qv_predicted_n{n}"), predicted));
        out.tables.push(table);
        means.push(mu);
    }
    for (w, mw) in cfg.qv.levels.windows(2).zip(means.windows(2)) {
        let expected = f64::from(w[1]) / f64::from(w[0]);
        let observed = mw[1] / mw[0];
        out.criteria.push(Criterion::at_most(
            format!("qv_scaling_n{}_n{}", w[0], w[1]),
            (observed / expected - 1.0).abs(),
            tol,
        ));
    }
    Ok(out)
}

/// `E[W^n_t(x) W^n_s(y)]` against `(s ^ t) C_n(x - y)` for each quadruple.
pub fn cov(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let g = cfg.grid_spec();
    let seed = cfg.stream_seed("cov");
    let m = g.points();
    let op = make_mollifier(&g, cfg.cov.level)?;
    let r = op.support_radius();
    let step = |t: f64| ((t / g.dt()).round() as usize).min(g.steps());
    let column = |x: f64| ((x / g.dx()).round() as usize) % m;
    let quads: Vec<(usize, usize, usize, usize)> = cfg
        .cov
        .quadruples
        .iter()
        .map(|q| (step(q.t), step(q.s), column(q.x), column(q.y)))
        .collect();

    let columns: Vec<usize> = {
        let mut c: Vec<usize> = quads.iter().flat_map(|q| [q.2, q.3]).collect();
        c.sort_unstable();
        c.dedup();
        c
    };
    let rows = quads.iter().map(|q| q.0.max(q.1)).max().unwrap_or(0);
    let (lo, hi) = (columns[0], columns[columns.len() - 1]);
    let (start, width) = if hi - lo + 2 * r + 1 >= m {
        (0, m)
    } else {
        ((lo + m - r) % m, hi - lo + 2 * r + 1)
    };

    // samples[replica][quad] = (W_t(x), W_s(y))
    let samples = per_replica("cov", seed, cfg.cov.replicas, |rep| {
        let w = sample_noise_window(&g, seed, rep, start, width, rows);
        let mut cumulative = BTreeMap::new();
        for &x in &columns {
            let inc = op.point_increments(&w, x)?;
            let mut acc = vec![0.0; rows + 1];
            for k in 0..rows {
                acc[k + 1] = acc[k] + inc[k];
            }
            cumulative.insert(x, acc);
        }
        Ok(quads
            .iter()
            .map(|q| (cumulative[&q.2][q.0], cumulative[&q.3][q.1]))
            .collect::<Vec<_>>())
    })?;

    let mut out = ExperimentResult::new("cov");
    let mut table = Table::new(
        "cov.csv",
        &[
            "quad_id",
            "t",
            "s",
            "x",
            "y",
            "cov_observed",
            "standard_error",
            "cov_predicted",
            "z_score",
        ],
    );
    for (j, q) in quads.iter().enumerate() {
        let xs: Vec<f64> = samples.iter().map(|s| s[j].0).collect();
        let ys: Vec<f64> = samples.iter().map(|s| s[j].1).collect();
        let (c, se) = covariance_with_error(&xs, &ys);
        let predicted = g.time(q.0.min(q.1)) * op.cn_between(q.2, q.3);
        let z = (c - predicted).abs() / se;
        table.push(vec![
            cell(j),
            cell(g.time(q.0)),
            cell(g.time(q.1)),
            cell(g.position(q.2)),
            cell(g.position(q.3)),
            cell(c),
            cell(se),
            cell(predicted),
            cell(z),
        ]);
        out.criteria.push(Criterion::at_most(
            format!("cov_z_quad{j}"),
            z,
            cfg.thresholds.mc_sigmas,
        ));
    }
    out.tables.push(table);
    Ok(out)
}
