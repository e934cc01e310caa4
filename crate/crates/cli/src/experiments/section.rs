//! Section of `H` at `t = 0` through a one-sided delta net: the error
//! against `f` should halve with `eps`.

use anyhow::Result;
use kpz_core::stats::{mean, standard_error};
use kpz_core::{
    cole_hopf, make_delta_net, make_mollifier, make_spatial_test_function, mollify_noise,
    pair_spatial, sample_white_noise, section_at_zero, solve_she,
};

use super::per_replica;
use crate::config::ExperimentConfig;
use crate::report::{cell, Criterion, Diagnostic, ExperimentResult, Table};

pub fn section(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let sc = &cfg.section;
    let g = sc.grid.build("section.grid")?;
    let seed = cfg.stream_seed("section");
    let f = sc.initial_profile.sample(&g)?;
    let phi_x = make_spatial_test_function(&g, sc.phi_x)?;
    let op = make_mollifier(&g, sc.level)?;
    let eps: Vec<f64> = sc
        .delta_net
        .eps_steps
        .iter()
        .map(|&s| s as f64 * g.dt())
        .collect();
    let net = make_delta_net(&g, &eps)?;

    // values[replica][eps]
    let values = per_replica("section", seed, sc.replicas, |rep| {
        let noise = sample_white_noise(&g, seed, rep);
        let h = cole_hopf(&solve_she(&f, Some(&mollify_noise(&noise, &op)?))?)?;
        Ok(section_at_zero(&h, &net, &phi_x, &f, 0.0)?.values)
    })?;

    let target = pair_spatial(f.values(), phi_x.phi(), g.dx())?;
    let mut out = ExperimentResult::new("section");
    let mut table = Table::new(
        "section.csv",
        &[
            "eps_steps",
            "eps",
            "value",
            "standard_error",
            "target",
            "error",
            "ratio",
        ],
    );
    let mut errors: Vec<f64> = Vec::new();
    for (j, (&steps, &e)) in sc.delta_net.eps_steps.iter().zip(&eps).enumerate() {
        let xs: Vec<f64> = values.iter().map(|v| v[j]).collect();
        let (v, se) = (mean(&xs), standard_error(&xs));
        let err = v - target;
        let ratio = if j == 0 {
            f64::NAN
        } else {
            (err / errors[j - 1]).abs()
        };
        table.push(vec![
            cell(steps),
            cell(e),
            cell(v),
            cell(se),
            cell(target),
            cell(err),
            cell(ratio),
        ]);
        if j > 0 {
            out.criteria.push(Criterion::at_most(
                format!(
                    "section_ratio_{}dt_to_{}dt",
                    sc.delta_net.eps_steps[j - 1],
                    steps
                ),
                (ratio / 0.5 - 1.0).abs(),
                cfg.thresholds.section_ratio_tol,
            ));
            out.diagnostics.push(Diagnostic::new(
                format!("ratio_{}dt_to_{}dt", sc.delta_net.eps_steps[j - 1], steps),
                ratio,
            ));
        }
        // error differences share the replicas, so their spread is what matters
        let spread: Vec<f64> = values.iter().map(|r| r[j] - r[0]).collect();
        out.diagnostics
            .push(Diagnostic::new(format!("error_{steps}dt"), err));
        out.diagnostics
            .push(Diagnostic::new(format!("standard_error_{steps}dt"), se));
        out.diagnostics.push(Diagnostic::new(
            format!("paired_standard_error_{steps}dt"),
            standard_error(&spread),
        ));
        errors.push(err);
    }
    out.tables.push(table);
    Ok(out)
}
