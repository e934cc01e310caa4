//! The seven numerical studies. Each returns criteria, diagnostics and
//! tables; nothing is written here except optional raw dumps.

mod assoc;
mod diverge;
mod ladder;
mod noise_stats;
mod section;

use std::path::PathBuf;

use anyhow::{Context, Result};
use kpz_core::stats::linear_fit;
use rayon::prelude::*;

use crate::config::{Experiment, ExperimentConfig};
use crate::report::ExperimentResult;

pub use assoc::assoc;
pub use diverge::diverge;
pub use ladder::{ito, ladder, weak};
pub use noise_stats::{cov, qv};
pub use section::section;

/// Runs the configured experiment (or all of them).
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<ExperimentResult>> {
    cfg.validate()?;
    Ok(match cfg.experiment {
        Experiment::Qv => vec![qv(cfg)?],
        Experiment::Cov => vec![cov(cfg)?],
        Experiment::Ito => vec![ito(cfg)?],
        Experiment::Weak => vec![weak(cfg)?],
        Experiment::Diverge => vec![diverge(cfg)?],
        Experiment::Assoc => vec![assoc(cfg)?],
        Experiment::Section => vec![section(cfg)?],
        Experiment::All => {
            let (ito, weak) = ladder(cfg)?;
            vec![
                qv(cfg)?,
                cov(cfg)?,
                ito,
                weak,
                diverge(cfg)?,
                assoc(cfg)?,
                section(cfg)?,
            ]
        }
    })
}

/// Replica loop; results come back in replica order whatever the scheduling.
pub(crate) fn per_replica<T, F>(what: &str, seed: u64, count: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..count)
        .into_par_iter()
        .map(|r| f(r).with_context(|| format!("{what}: replica {r}, stream seed {seed}")))
        .collect()
}

/// Ratio by which the error shrinks per halving of `h`, from a log-log fit.
pub(crate) fn halving_ratio(h: &[f64], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = errors
        .iter()
        .map(|v| v.max(f64::MIN_POSITIVE).ln())
        .collect();
    let (slope, _) = linear_fit(&xs, &ys);
    0.5f64.powf(slope)
}

pub(crate) fn dump_dir(cfg: &ExperimentConfig) -> Result<Option<PathBuf>> {
    if !cfg.dump {
        return Ok(None);
    }
    let dir = cfg.output_dir.join("dumps");
    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(Some(dir))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halving_ratio_of_power_laws() {
        let h = [8.0, 4.0, 2.0, 1.0];
        let sqrt: Vec<f64> = h.iter().map(|v: &f64| 3.0 * v.sqrt()).collect();
        assert!((halving_ratio(&h, &sqrt) - 0.5f64.sqrt()).abs() < 1e-12);
        let lin: Vec<f64> = h.iter().map(|v| 0.1 * v).collect();
        assert!((halving_ratio(&h, &lin) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn replicas_keep_order() {
        let v = per_replica("t", 0, 100, |r| Ok(r * r)).unwrap();
        assert_eq!(v, (0..100).map(|r| r * r).collect::<Vec<_>>());
        let e = per_replica("study", 9, 5, |r| {
            if r == 3 {
                anyhow::bail!("boom")
            } else {
                Ok(r)
            }
        })
        .unwrap_err();
        assert!(format!("{e:#}").contains("replica 3, stream seed 9"));
    }
}
