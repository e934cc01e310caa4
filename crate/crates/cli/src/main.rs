use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use kpz_renorm::config::{Experiment, ExperimentConfig};

/// Renormalized KPZ experiments on a periodic lattice.
///
/// Exit status: 0 when every criterion passes, 1 when one fails, 2 on error.
#[derive(Debug, Parser)]
#[command(name = "kpz-renorm", version)]
struct Cli {
    #[arg(value_enum)]
    experiment: Experiment,
    /// TOML configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "KPZ_RENORM_SEED")]
    seed: Option<u64>,
    /// Mollification level(s) for the selected experiment.
    #[arg(long = "n")]
    levels: Vec<u32>,
    #[arg(long)]
    replicas: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    length: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Write raw binary dumps of replica 0.
    #[arg(long)]
    dump: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

impl Cli {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_toml_file(p)?,
            None => ExperimentConfig::default(),
        };
        cfg.experiment = self.experiment;
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        cfg.dump |= self.dump;

        let grid = if self.experiment == Experiment::Section {
            &mut cfg.section.grid
        } else {
            &mut cfg.grid
        };
        if let Some(v) = self.length {
            grid.length = v;
        }
        if let Some(v) = self.points {
            grid.points = v;
        }
        if let Some(v) = self.dt {
            grid.dt = v;
        }
        if let Some(v) = self.steps {
            grid.steps = v;
        }

        if !self.levels.is_empty() {
            let first = self.levels[0];
            match self.experiment {
                Experiment::Qv => cfg.qv.levels = self.levels.clone(),
                Experiment::Cov => cfg.cov.level = first,
                Experiment::Ito | Experiment::Weak => cfg.ladder.level = first,
                Experiment::Section => cfg.section.level = first,
                Experiment::Diverge | Experiment::Assoc | Experiment::All => {
                    cfg.levels = self.levels.clone()
                }
            }
        }
        if let Some(r) = self.replicas {
            let e = self.experiment;
            if matches!(e, Experiment::Qv | Experiment::All) {
                cfg.qv.replicas = r;
            }
            if matches!(e, Experiment::Cov | Experiment::All) {
                cfg.cov.replicas = r;
            }
            if matches!(e, Experiment::Ito | Experiment::Weak | Experiment::All) {
                cfg.ladder.replicas = r;
            }
            if matches!(e, Experiment::Diverge | Experiment::All) {
                cfg.diverge.replicas = r;
            }
            if matches!(e, Experiment::Assoc | Experiment::All) {
                cfg.assoc.replicas = r;
            }
            if matches!(e, Experiment::Section | Experiment::All) {
                cfg.section.replicas = r;
            }
        }
        Ok(cfg)
    }
}

fn run(cli: &Cli) -> Result<bool> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring worker threads")?;
    }
    let cfg = cli.config()?;
    cfg.validate()?;
    let outcome = kpz_renorm::execute(&cfg)?;
    for r in &outcome.results {
        for c in &r.criteria {
            let mark = if c.pass { "PASS" } else { "FAIL" };
            println!(
                "{mark} {}.{}: observed {:.6e}, threshold {:.6e}",
                r.experiment, c.name, c.observed, c.threshold
            );
        }
    }
    println!("summary: {}", outcome.summary.display());
    Ok(outcome.pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
