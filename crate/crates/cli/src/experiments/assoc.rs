//! Association of `H_n = log Z_n` with the lattice-noise solution, exactness
//! of the quotient by x-independent paths, and non-gating diagnostics.

use anyhow::Result;
use kpz_core::dynamics::solve_she;
use kpz_core::renorm::association_errors;
use kpz_core::stats::mean;
use kpz_core::{
    cole_hopf, derivative_class_check, ito_constant, lattice_noise_path, make_mollifier,
    mollify_noise, nonlinearity_limit, pair, quotient_check, sample_white_noise, AssociationReport,
    FieldPathF64, Reference, SequenceFieldF64, Verdict,
};

use super::per_replica;
use crate::config::ExperimentConfig;
use crate::report::{cell, Criterion, Diagnostic, ExperimentResult, Table};

struct ReplicaOut {
    /// `[test][level]`
    pairings: Vec<Vec<f64>>,
    reference: Vec<f64>,
    errors: Vec<Vec<f64>>,
    floor: f64,
    /// `q_n(phi)`, `[test][level]`
    nonlinearity: Vec<Vec<f64>>,
    derivative_pass: Option<bool>,
}

fn counterterm_paths(cfg: &ExperimentConfig, scale: f64, label: &str) -> Result<SequenceFieldF64> {
    let g = cfg.grid_spec();
    let paths = cfg
        .levels
        .iter()
        .map(|&n| FieldPathF64::from_fn(g, |t, _| scale * f64::from(n) * t))
        .collect();
    Ok(SequenceFieldF64::new(
        cfg.levels.clone(),
        paths,
        (0, 0),
        label,
    )?)
}

pub fn assoc(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let g = cfg.grid_spec();
    let seed = cfg.stream_seed("assoc");
    let f = cfg.initial_profile.resolve()?.sample(&g)?;
    let phis = cfg.battery();
    let ops = cfg
        .levels
        .iter()
        .map(|&n| make_mollifier(&g, n))
        .collect::<Result<Vec<_>, _>>()?;
    let counter = counterterm_paths(cfg, -0.5 * ito_constant(), "-(C/2) n t")?;

    let runs = per_replica("assoc", seed, cfg.assoc.replicas, |rep| {
        let noise = sample_white_noise(&g, seed, rep);
        let reference = cole_hopf(&solve_she(&f, Some(&lattice_noise_path(&noise)))?)?;
        let paths = ops
            .iter()
            .map(|op| {
                Ok(cole_hopf(&solve_she(
                    &f,
                    Some(&mollify_noise(&noise, op)?),
                )?)?)
            })
            .collect::<Result<Vec<_>>>()?;
        let seq = SequenceFieldF64::new(cfg.levels.clone(), paths, noise.realization(), "log Z_n")?;
        let (errors, floor) = association_errors(&seq, Reference::Path(&reference), &phis)?;
        let pairings = phis
            .iter()
            .map(|phi| {
                seq.paths()
                    .iter()
                    .map(|p| Ok(pair(p, phi.phi())?))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let reference_pairings = phis
            .iter()
            .map(|phi| pair(&reference, phi.phi()))
            .collect::<Result<Vec<_>, _>>()?;
        let nonlinearity = nonlinearity_limit(&seq, &phis)?
            .tests
            .into_iter()
            .map(|t| t.pairings)
            .collect();
        let derivative_pass = if rep == 0 {
            let offsets = SequenceFieldF64::new(
                cfg.levels.clone(),
                counter.paths().to_vec(),
                seq.realization(),
                "c_n",
            )?;
            let limit = SequenceFieldF64::new(
                cfg.levels.clone(),
                vec![reference.clone(); cfg.levels.len()],
                seq.realization(),
                "H",
            )?;
            Some(derivative_class_check(&seq, &offsets, &limit, &phis)?.pass)
        } else {
            None
        };
        Ok(ReplicaOut {
            pairings,
            reference: reference_pairings,
            errors,
            floor,
            nonlinearity,
            derivative_pass,
        })
    })?;

    let mut out = ExperimentResult::new("assoc");

    // x-independent paths, including the counterterm itself, pair to zero
    let ramp = counterterm_paths(cfg, 1.0, "n t")?;
    let flat = SequenceFieldF64::new(
        cfg.levels.clone(),
        cfg.levels
            .iter()
            .map(|&n| FieldPathF64::from_fn(g, |_, _| 7.5 * f64::from(n)))
            .collect(),
        (0, 0),
        "const",
    )?;
    let mut quotient = 0.0f64;
    for s in [&counter, &ramp, &flat] {
        quotient = quotient.max(quotient_check(s, &phis)?.max_abs_pairing);
    }
    out.criteria.push(Criterion::at_most(
        "quotient_exactness",
        quotient,
        cfg.thresholds.quotient_tol,
    ));

    let floor = runs.iter().fold(0.0f64, |a, r| a.max(r.floor));
    let errors: Vec<Vec<Vec<f64>>> = runs.iter().map(|r| r.errors.clone()).collect();
    let report =
        AssociationReport::from_replicas(&cfg.levels, &errors, floor, cfg.thresholds.assoc_ratio);
    for t in &report.tests {
        let mut c = Criterion::at_most(
            format!("assoc_ratio_tf{}", t.testfn_id),
            t.ratio,
            cfg.thresholds.assoc_ratio,
        );
        c.pass = t.verdict == Verdict::Associated;
        out.criteria.push(c);
        out.diagnostics.push(Diagnostic::new(
            format!("assoc_slope_tf{}", t.testfn_id),
            t.slope,
        ));
    }

    let mut table = Table::new(
        "assoc.csv",
        &[
            "n",
            "testfn_id",
            "pairing",
            "reference_pairing",
            "abs_error",
        ],
    );
    let mut per_rep = Table::new(
        "assoc_replicas.csv",
        &[
            "replica_id",
            "n",
            "testfn_id",
            "pairing",
            "reference_pairing",
            "abs_error",
        ],
    );
    for (j, t) in report.tests.iter().enumerate() {
        let reference = mean(&runs.iter().map(|r| r.reference[j]).collect::<Vec<_>>());
        for (l, &n) in cfg.levels.iter().enumerate() {
            let p = mean(&runs.iter().map(|r| r.pairings[j][l]).collect::<Vec<_>>());
            table.push(vec![
                cell(n),
                cell(j),
                cell(p),
                cell(reference),
                cell(t.errors[l].abs()),
            ]);
        }
    }
    for (rep, r) in runs.iter().enumerate() {
        for (l, &n) in cfg.levels.iter().enumerate() {
            for j in 0..phis.len() {
                per_rep.push(vec![
                    cell(rep),
                    cell(n),
                    cell(j),
                    cell(r.pairings[j][l]),
                    cell(r.reference[j]),
                    cell(r.errors[j][l].abs()),
                ]);
            }
        }
    }

    for j in 0..phis.len() {
        let q: Vec<f64> = (0..cfg.levels.len())
            .map(|l| {
                mean(
                    &runs
                        .iter()
                        .map(|r| r.nonlinearity[j][l])
                        .collect::<Vec<_>>(),
                )
            })
            .collect();
        let m = q.len();
        out.diagnostics.push(Diagnostic::new(
            format!("nonlinearity_cauchy_ratio_tf{j}"),
            (q[m - 1] - q[m - 2]).abs() / (q[1] - q[0]).abs(),
        ));
    }
    if let Some(pass) = runs[0].derivative_pass {
        out.diagnostics.push(Diagnostic::new(
            "derivative_class_check",
            if pass { 1.0 } else { 0.0 },
        ));
    }
    out.tables.push(table);
    out.tables.push(per_rep);
    Ok(out)
}
