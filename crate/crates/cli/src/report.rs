//! CSV tables and JSON summaries.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Criterion {
    pub name: String,
    pub observed: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Criterion {
    /// Passes when `observed <= threshold`.
    pub fn at_most(name: impl Into<String>, observed: f64, threshold: f64) -> Self {
        Criterion {
            name: name.into(),
            observed,
            threshold,
            pass: observed <= threshold,
        }
    }

    /// Passes when `observed >= threshold`.
    pub fn at_least(name: impl Into<String>, observed: f64, threshold: f64) -> Self {
        Criterion {
            name: name.into(),
            observed,
            threshold,
            pass: observed >= threshold,
        }
    }
}

/// Reported but not gating.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub name: String,
    pub value: f64,
}

impl Diagnostic {
    pub fn new(name: impl Into<String>, value: f64) -> Self {
        Diagnostic {
            name: name.into(),
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: impl Into<String>, header: &[&'static str]) -> Self {
        Table {
            file: file.into(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(&self.file);
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .with_context(|| format!("cannot create {}", path.display()))?;
        w.write_record(&self.header)
            .with_context(|| format!("writing {}", path.display()))?;
        for row in &self.rows {
            w.write_record(row)
                .with_context(|| format!("writing {}", path.display()))?;
        }
        w.flush()
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// Formats a cell; the shortest representation that round-trips.
pub fn cell<V: ToString>(v: V) -> String {
    v.to_string()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub experiment: &'static str,
    pub criteria: Vec<Criterion>,
    pub diagnostics: Vec<Diagnostic>,
    pub tables: Vec<Table>,
}

impl ExperimentResult {
    pub fn new(experiment: &'static str) -> Self {
        ExperimentResult {
            experiment,
            criteria: Vec::new(),
            diagnostics: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn pass(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Serialize)]
struct Verdict<'a> {
    experiment: &'a str,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    experiment: &'a str,
    config_hash: String,
    seed: u64,
    pass: bool,
    criteria: Vec<Criterion>,
    diagnostics: Vec<Diagnostic>,
    #[serde(skip_serializing_if = "Option::is_none")]
    experiments: Option<Vec<Verdict<'a>>>,
    wall_time: f64,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).context("serializing summary")?;
    fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

/// Writes every table, one `<experiment>.json` per result and, for several
/// results, a combined `summary.json`. Returns the path of the top summary.
pub fn write_report(
    dir: &Path,
    cfg: &ExperimentConfig,
    results: &[ExperimentResult],
    wall_time: f64,
) -> Result<PathBuf> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let hash = cfg.hash();
    let mut last = PathBuf::new();
    for r in results {
        for t in &r.tables {
            t.write(dir)?;
        }
        let summary = Summary {
            experiment: r.experiment,
            config_hash: hash.clone(),
            seed: cfg.master_seed,
            pass: r.pass(),
            criteria: r.criteria.clone(),
            diagnostics: r.diagnostics.clone(),
            experiments: None,
            wall_time: if results.len() == 1 { wall_time } else { 0.0 },
        };
        last = dir.join(format!("{}.json", r.experiment));
        write_json(&last, &summary)?;
    }
    if results.len() > 1 {
        let criteria = results
            .iter()
            .flat_map(|r| {
                r.criteria.iter().map(move |c| Criterion {
                    name: format!("{}.{}", r.experiment, c.name),
                    ..c.clone()
                })
            })
            .collect();
        let diagnostics = results
            .iter()
            .flat_map(|r| {
                r.diagnostics.iter().map(move |d| Diagnostic {
                    name: format!("{}.{}", r.experiment, d.name),
                    ..d.clone()
                })
            })
            .collect();
        let summary = Summary {
            experiment: "all",
            config_hash: hash,
            seed: cfg.master_seed,
            pass: results.iter().all(ExperimentResult::pass),
            criteria,
            diagnostics,
            experiments: Some(
                results
                    .iter()
                    .map(|r| Verdict {
                        experiment: r.experiment,
                        pass: r.pass(),
                    })
                    .collect(),
            ),
            wall_time,
        };
        last = dir.join("summary.json");
        write_json(&last, &summary)?;
    }
    Ok(last)
}
