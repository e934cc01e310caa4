//! Refinement in `dt` of the Ito and weak-form residuals of `H = log Z`.
//!
//! Every replica draws one noise field on the finest grid and coarsens it in
//! time, so all rungs of the ladder see the same realization.

use anyhow::Result;
use kpz_core::dump::{write_noise_dump, write_path_dump};
use kpz_core::renorm::weak_residuals;
use kpz_core::stats::rms;
use kpz_core::stencil::squared_gradient_path;
use kpz_core::{
    cole_hopf, ito_residual_path, make_mollifier, make_test_function, mollify_noise, pair,
    sample_white_noise, solve_she, GridSpecF64, MollifierF64, TestFunctionF64,
};

use super::{dump_dir, halving_ratio, per_replica};
use crate::config::ExperimentConfig;
use crate::report::{cell, Criterion, Diagnostic, ExperimentResult, Table};

struct Rung {
    grid: GridSpecF64,
    factor: usize,
    op: MollifierF64,
    phis: Vec<TestFunctionF64>,
}

#[derive(Default)]
struct RungOut {
    ito: Vec<f64>,
    corrected: Vec<f64>,
    literal: Vec<f64>,
    sup: f64,
}

pub fn ito(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    Ok(ladder(cfg)?.0)
}

pub fn weak(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    Ok(ladder(cfg)?.1)
}

/// Both residual studies from one set of solves.
pub fn ladder(cfg: &ExperimentConfig) -> Result<(ExperimentResult, ExperimentResult)> {
    let fine = cfg.grid_spec();
    let seed = cfg.stream_seed("ladder");
    let profile = cfg.initial_profile.resolve()?;
    let rungs = cfg
        .ladder
        .dt_factors
        .iter()
        .map(|&factor| {
            let grid = fine.with_time(fine.dt() * factor as f64, fine.steps() / factor)?;
            let op = make_mollifier(&grid, cfg.ladder.level)?;
            let phis = cfg
                .test_functions
                .iter()
                .map(|s| make_test_function(&grid, s))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Rung {
                grid,
                factor,
                op,
                phis,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let dumps = dump_dir(cfg)?;

    // runs[replica][rung]
    let runs = per_replica("ladder", seed, cfg.ladder.replicas, |rep| {
        let noise = sample_white_noise(&fine, seed, rep);
        let mut outs = Vec::with_capacity(rungs.len());
        for rung in &rungs {
            let coarse = noise.coarsen(rung.factor, 1)?;
            let path = mollify_noise(&coarse, &rung.op)?;
            let f = profile.sample(&rung.grid)?;
            let h = cole_hopf(&solve_she(&f, Some(&path))?)?;
            let residual = ito_residual_path(&h, Some(&path), &f)?;
            let counter = path.ito_rate() / 2.0;
            let nonlinearity = squared_gradient_path(&h).map(|v| v - counter);
            let mut out = RungOut {
                sup: residual.max_abs(),
                ..RungOut::default()
            };
            for phi in &rung.phis {
                out.ito.push(pair(&residual, phi.phi())?);
            }
            for w in weak_residuals(&h, Some(&path), &f, &nonlinearity, &rung.phis)? {
                out.corrected.push(w.corrected);
                out.literal.push(w.literal);
            }
            if rep == 0 && rung.factor == 1 {
                if let Some(dir) = &dumps {
                    let extra = serde_json::json!({ "variant": "she_mollified", "n": cfg.ladder.level, "field": "log Z" });
                    write_noise_dump(&dir.join("ladder_noise_r0.bin"), &noise)?;
                    write_path_dump(&dir.join("ladder_h_r0.bin"), &h, seed, 0, extra)?;
                }
            }
            outs.push(out);
        }
        Ok(outs)
    })?;

    let dts: Vec<f64> = rungs.iter().map(|r| r.grid.dt()).collect();
    let collect = |get: &dyn Fn(&RungOut) -> f64, l: usize| -> Vec<f64> {
        runs.iter().map(|r| get(&r[l])).collect()
    };
    let tol = cfg.thresholds.halving_ratio;

    let mut ito = ExperimentResult::new("ito");
    let mut ito_table = Table::new(
        "ito.csv",
        &["dt", "testfn_id", "rms_pairing", "mean_sup_norm"],
    );
    let mut weak = ExperimentResult::new("weak");
    let mut weak_table = Table::new(
        "weak.csv",
        &[
            "dt",
            "testfn_id",
            "rms_corrected",
            "rms_literal",
            "phi_zero_at_t0",
        ],
    );
    let mut agreement = 0.0f64;
    let mut any_vanishing = false;
    for j in 0..cfg.test_functions.len() {
        let vanishes = rungs[0].phis[j].vanishes_at_origin();
        let mut ito_rms = Vec::new();
        let mut weak_rms = Vec::new();
        for (l, &dt) in dts.iter().enumerate() {
            let e = rms(&collect(&|o| o.ito[j], l));
            let c = rms(&collect(&|o| o.corrected[j], l));
            let lit = rms(&collect(&|o| o.literal[j], l));
            let sup = collect(&|o| o.sup, l).iter().sum::<f64>() / runs.len() as f64;
            ito_table.push(vec![cell(dt), cell(j), cell(e), cell(sup)]);
            weak_table.push(vec![cell(dt), cell(j), cell(c), cell(lit), cell(vanishes)]);
            if vanishes {
                any_vanishing = true;
                for r in &runs {
                    agreement = agreement.max((r[l].corrected[j] - r[l].literal[j]).abs());
                }
            }
            ito_rms.push(e);
            weak_rms.push(c);
        }
        ito.criteria.push(Criterion::at_most(
            format!("ito_halving_ratio_tf{j}"),
            halving_ratio(&dts, &ito_rms),
            tol,
        ));
        weak.criteria.push(Criterion::at_most(
            format!("weak_halving_ratio_tf{j}"),
            halving_ratio(&dts, &weak_rms),
            tol,
        ));
        for (w, e) in [(&mut ito, &ito_rms), (&mut weak, &weak_rms)] {
            for (k, pair) in e.windows(2).enumerate() {
                w.diagnostics.push(Diagnostic::new(
                    format!("step_ratio_tf{j}_rung{k}"),
                    pair[1] / pair[0],
                ));
            }
        }
    }
    if any_vanishing {
        weak.criteria.push(Criterion::at_most(
            "literal_agreement",
            agreement,
            cfg.thresholds.literal_agreement_tol,
        ));
    }
    ito.tables.push(ito_table);
    weak.tables.push(weak_table);
    Ok((ito, weak))
}
