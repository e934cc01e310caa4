//! Acceptance suite: one PASS/FAIL line per criterion, at full scale.
//!
//! Runs without the libtest harness so the lines reach the terminal.

mod common;

use std::f64::consts::TAU;
use std::time::Instant;

use anyhow::{ensure, Result};
use kpz_core::stats::{linear_fit, mean, sample_variance, standard_error, variance_standard_error};
use kpz_core::*;
use kpz_renorm::config::ExperimentConfig;
use kpz_renorm::experiments;
use kpz_renorm::report::ExperimentResult;

struct Line {
    id: &'static str,
    title: &'static str,
    pass: bool,
    detail: String,
    seconds: f64,
    budget: f64,
}

fn summarize(r: &ExperimentResult, filter: impl Fn(&str) -> bool) -> (bool, String) {
    let picked: Vec<_> = r.criteria.iter().filter(|c| filter(&c.name)).collect();
    let pass = !picked.is_empty() && picked.iter().all(|c| c.pass);
    let detail = picked
        .iter()
        .map(|c| {
            format!(
                "{}={:.4e}{}{:.3e}",
                c.name,
                c.observed,
                if c.pass { "<=" } else { ">" },
                c.threshold
            )
        })
        .collect::<Vec<_>>()
        .join(", ");
    (pass, detail)
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> (Result<T>, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

fn line(
    id: &'static str,
    title: &'static str,
    budget: f64,
    seconds: f64,
    outcome: Result<(bool, String)>,
) -> Line {
    let (pass, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e:#}")));
    Line {
        id,
        title,
        pass,
        detail,
        seconds,
        budget,
    }
}

fn experiment(
    id: &'static str,
    title: &'static str,
    budget: f64,
    run: impl FnOnce() -> Result<ExperimentResult>,
    filter: impl Fn(&str) -> bool,
) -> Line {
    let (r, s) = timed(run);
    line(id, title, budget, s, r.map(|r| summarize(&r, filter)))
}

fn quotient_exactness(cfg: &ExperimentConfig) -> Result<(bool, String)> {
    let g = cfg.grid_spec();
    let phis = cfg.battery();
    let levels = cfg.levels.clone();
    let c = ito_constant();
    let families: Vec<(&str, Box<dyn Fn(f64, f64) -> f64>)> = vec![
        ("-(C/2) n t", Box::new(move |n, t| -0.5 * c * n * t)),
        ("n t", Box::new(|n, t| n * t)),
        ("n^2 cos(40 t)", Box::new(|n, t| n * n * (40.0 * t).cos())),
        ("constant", Box::new(|n, _| 1e3 * n)),
    ];
    let mut worst = 0.0f64;
    for (label, fam) in &families {
        let paths = levels
            .iter()
            .map(|&n| FieldPath::from_fn(g, |t, _| fam(f64::from(n), t)))
            .collect();
        let seq = SequenceField::new(levels.clone(), paths, (0, 0), *label)?;
        worst = worst.max(quotient_check(&seq, &phis)?.max_abs_pairing);
    }
    Ok((
        worst < cfg.thresholds.quotient_tol,
        format!(
            "max |pairing| = {worst:.3e} < {:.0e}",
            cfg.thresholds.quotient_tol
        ),
    ))
}

fn reproducible() -> Result<String> {
    let (a, b) = (tempfile::tempdir()?, tempfile::tempdir()?);
    kpz_renorm::execute(&common::tiny_config(a.path()))?;
    kpz_renorm::execute(&common::tiny_config(b.path()))?;
    let (sa, sb) = (common::snapshot(a.path()), common::snapshot(b.path()));
    ensure!(sa.len() > 10, "only {} output files", sa.len());
    ensure!(sa == sb, "outputs differ between identical runs");
    Ok(format!("{} files identical", sa.len()))
}

fn isometry() -> Result<String> {
    let g = make_grid(1.0, 64, 1e-3, 100)?;
    let tf = make_test_function(&g, &TestFunctionSpec::new(0.05, 0.04, 0.5, 0.2))?;
    let samples: Vec<f64> = (0..2000)
        .map(|r| {
            noise_pairing(
                &sample_white_noise(&g, derive_seed(7, "isometry"), r),
                tf.phi(),
                None,
            )
        })
        .collect::<Result<_, _>>()?;
    // sum phi^2 dt dx computed here, independently of the library
    let target: f64 = tf.phi().values()[..g.steps() * g.points()]
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        * g.dt()
        * g.dx();
    let (v, se) = (sample_variance(&samples), variance_standard_error(&samples));
    let z_var = (v - target).abs() / se;
    let z_mean = mean(&samples).abs() / standard_error(&samples);
    ensure!(
        z_var <= 3.0 && z_mean <= 3.0,
        "variance {v} vs {target} ({z_var:.2} se), mean {z_mean:.2} se"
    );
    Ok(format!("variance within {z_var:.2} se"))
}

fn heat_order() -> Result<String> {
    let horizon = 0.25;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (m, k) in [(32usize, 40usize), (64, 160), (128, 640), (256, 2560)] {
        let g = make_grid(1.0, m, horizon / k as f64, k)?;
        let f = InitialProfile::LogSine {
            amplitude: 0.1,
            mode: 1,
        }
        .sample(&g)?;
        let z = solve_she(&f, None)?;
        let decay = (-TAU * TAU * horizon).exp();
        let err = (0..m)
            .map(|i| (z.get(k, i) - 1.0 - 0.1 * decay * (TAU * g.position(i)).sin()).abs())
            .fold(0.0, f64::max);
        xs.push(g.dt().ln());
        ys.push(err.ln());
    }
    let (order, _) = linear_fit(&xs, &ys);
    ensure!(order >= 1.0, "observed order {order:.4}");
    Ok(format!("heat-decay order {order:.3}"))
}

fn main() {
    let out = tempfile::tempdir().expect("temp dir");
    let cfg = ExperimentConfig {
        output_dir: out.path().to_path_buf(),
        ..ExperimentConfig::default()
    };
    cfg.validate().expect("default configuration is valid");
    let mut lines = Vec::new();

    lines.push(experiment(
        "A1",
        "quadratic variation",
        60.0,
        || experiments::qv(&cfg),
        |_| true,
    ));
    lines.push(experiment(
        "A2",
        "covariance",
        120.0,
        || experiments::cov(&cfg),
        |_| true,
    ));
    let (q, s) = timed(|| quotient_exactness(&cfg));
    lines.push(line("A3", "quotient exactness", 10.0, s, q));

    let (ladder, s) = timed(|| experiments::ladder(&cfg));
    match ladder {
        Ok((ito, weak)) => {
            let (p, d) = summarize(&ito, |_| true);
            lines.push(line("A4", "Ito residual halving", 180.0, s, Ok((p, d))));
            let (p, d) = summarize(&weak, |_| true);
            lines.push(line(
                "A5",
                "weak-form residual halving (shared solves)",
                180.0,
                s,
                Ok((p, d)),
            ));
        }
        Err(e) => {
            let msg = format!("{e:#}");
            lines.push(line(
                "A4",
                "Ito residual halving",
                180.0,
                s,
                Err(anyhow::anyhow!(msg.clone())),
            ));
            lines.push(line(
                "A5",
                "weak-form residual halving",
                180.0,
                s,
                Err(anyhow::anyhow!(msg)),
            ));
        }
    }
    lines.push(experiment(
        "A6",
        "naive drift and bounded pairings",
        240.0,
        || experiments::diverge(&cfg),
        |_| true,
    ));
    lines.push(experiment(
        "A7",
        "association with the lattice solution",
        240.0,
        || experiments::assoc(&cfg),
        |n| n.starts_with("assoc_ratio"),
    ));
    lines.push(experiment(
        "A8",
        "section at zero",
        60.0,
        || experiments::section(&cfg),
        |_| true,
    ));

    let (infra, s) = timed(|| -> Result<(bool, String)> {
        let parts = [reproducible(), isometry(), heat_order()];
        let pass = parts.iter().all(Result::is_ok);
        let detail = parts
            .iter()
            .map(|p| {
                p.as_ref()
                    .map_or_else(|e| format!("error: {e:#}"), Clone::clone)
            })
            .collect::<Vec<_>>();
        Ok((pass, detail.join("; ")))
    });
    lines.push(line(
        "A9",
        "reproducibility, isometry, heat decay",
        120.0,
        s,
        infra,
    ));

    println!();
    for l in &lines {
        let mark = if l.pass { "PASS" } else { "FAIL" };
        let over = if l.seconds > l.budget {
            " over budget"
        } else {
            ""
        };
        println!(
            "{mark} {} {} [{:.1} s of {:.0} s{over}]: {}",
            l.id, l.title, l.seconds, l.budget, l.detail
        );
    }
    let failed = lines.iter().filter(|l| !l.pass).count();
    println!(
        "\nacceptance: {} passed, {failed} failed",
        lines.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
