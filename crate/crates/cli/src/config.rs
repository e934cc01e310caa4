//! TOML experiment configuration with desk-scale defaults.

use std::path::{Path, PathBuf};

use kpz_core::dynamics::InitialProfile;
use kpz_core::noise::max_level;
use kpz_core::renorm::DELTA_NET_MIN_STEPS;
use kpz_core::{make_grid, Bump, GridSpecF64, TestFunctionSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Qv,
    Cov,
    Ito,
    Weak,
    Diverge,
    Assoc,
    Section,
    All,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Qv => "qv",
            Experiment::Cov => "cov",
            Experiment::Ito => "ito",
            Experiment::Weak => "weak",
            Experiment::Diverge => "diverge",
            Experiment::Assoc => "assoc",
            Experiment::Section => "section",
            Experiment::All => "all",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub length: f64,
    pub points: usize,
    pub dt: f64,
    pub steps: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            length: 1.0,
            points: 512,
            dt: 2.5e-5,
            steps: 10_000,
        }
    }
}

impl GridConfig {
    pub fn build(&self, field: &str) -> Result<GridSpecF64, ConfigError> {
        make_grid(self.length, self.points, self.dt, self.steps)
            .map_err(|e| invalid(field, e.to_string()))
    }
}

/// Acceptance thresholds; changing them is a data change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Relative tolerance of the replica-mean QV.
    pub qv_rel_tol: f64,
    /// Allowed deviation in Monte Carlo standard errors.
    pub mc_sigmas: f64,
    /// Largest admissible per-halving residual ratio.
    pub halving_ratio: f64,
    /// Relative tolerance of the naive drift slope.
    pub drift_slope_rel_tol: f64,
    /// Largest `max_n / n_min` growth of D_0 pairings.
    pub bounded_factor: f64,
    /// `|e_{n_max}| <= ratio * |e_{n_min}|`.
    pub assoc_ratio: f64,
    /// Section error ratios must lie within `0.5 * (1 +- tol)`.
    pub section_ratio_tol: f64,
    /// Pairings of x-independent paths must stay below this.
    pub quotient_tol: f64,
    /// Literal and corrected weak residuals when `phi(0) = 0`.
    pub literal_agreement_tol: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            qv_rel_tol: 0.05,
            mc_sigmas: 3.0,
            halving_ratio: 0.75,
            drift_slope_rel_tol: 0.10,
            bounded_factor: 2.0,
            assoc_ratio: 0.5,
            section_ratio_tol: 0.2,
            quotient_tol: 1e-12,
            literal_agreement_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QvConfig {
    pub levels: Vec<u32>,
    pub replicas: u64,
    /// Lattice columns at which the QV is recorded; empty means `M/2`.
    pub x_indices: Vec<usize>,
}

impl Default for QvConfig {
    fn default() -> Self {
        QvConfig {
            levels: vec![4, 8, 16],
            replicas: 200,
            x_indices: Vec::new(),
        }
    }
}

/// One covariance probe `E[W^n_t(x) W^n_s(y)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quadruple {
    pub t: f64,
    pub s: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovConfig {
    pub level: u32,
    pub replicas: u64,
    pub quadruples: Vec<Quadruple>,
}

impl Default for CovConfig {
    fn default() -> Self {
        let q = |t, s, x, y| Quadruple { t, s, x, y };
        CovConfig {
            level: 8,
            replicas: 1000,
            quadruples: vec![
                q(0.1, 0.1, 0.5, 0.5),
                q(0.05, 0.1, 0.5, 0.53125),
                q(0.1, 0.03, 0.4375, 0.5625),
                q(0.08, 0.08, 0.421875, 0.578125),
                q(0.02, 0.1, 0.40625, 0.65625),
            ],
        }
    }
}

/// Shared by the Ito-residual and weak-form refinement studies: the finest
/// grid is the main grid, coarser ones aggregate its noise in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderConfig {
    pub level: u32,
    pub replicas: u64,
    /// Time-step multipliers of the main `dt`, coarsest first.
    pub dt_factors: Vec<usize>,
}

impl Default for LadderConfig {
    fn default() -> Self {
        LadderConfig {
            level: 8,
            replicas: 110,
            dt_factors: vec![16, 8, 4, 2, 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DivergeConfig {
    pub replicas: u64,
    /// Nonzero-mean spatial weight `chi`.
    pub weight: Bump,
}

impl Default for DivergeConfig {
    fn default() -> Self {
        DivergeConfig {
            replicas: 50,
            weight: Bump::new(0.5, 0.25),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssocConfig {
    pub replicas: u64,
}

impl Default for AssocConfig {
    fn default() -> Self {
        AssocConfig { replicas: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeltaNetConfig {
    /// Profile of the one-sided net; only the smooth bump on `[0, 1)` exists.
    pub profile: String,
    /// `eps` in units of the section grid's `dt`, strictly decreasing.
    pub eps_steps: Vec<usize>,
}

impl Default for DeltaNetConfig {
    fn default() -> Self {
        DeltaNetConfig {
            profile: "one_sided_bump".into(),
            eps_steps: vec![64, 32, 16, 8],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SectionConfig {
    pub grid: GridConfig,
    pub level: u32,
    pub replicas: u64,
    pub initial_profile: InitialProfile,
    pub phi_x: Bump,
    pub delta_net: DeltaNetConfig,
}

impl Default for SectionConfig {
    fn default() -> Self {
        SectionConfig {
            grid: GridConfig {
                length: 1.0,
                points: 256,
                dt: 1e-4,
                steps: 128,
            },
            level: 8,
            replicas: 10_000,
            initial_profile: InitialProfile::Sine {
                mean: 0.0,
                amplitude: 0.8,
                mode: 1,
            },
            phi_x: Bump::new(0.5, 0.25),
            delta_net: DeltaNetConfig::default(),
        }
    }
}

/// Where `f` comes from: a preset, or a file of whitespace-separated samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSource {
    File { file: PathBuf },
    Preset(InitialProfile),
}

impl ProfileSource {
    pub fn resolve(&self) -> Result<InitialProfile, ConfigError> {
        match self {
            ProfileSource::Preset(p) => Ok(p.clone()),
            ProfileSource::File { file } => {
                let text = std::fs::read_to_string(file).map_err(|source| ConfigError::Read {
                    path: file.clone(),
                    source,
                })?;
                let values = text
                    .split_whitespace()
                    .map(|w| {
                        w.parse::<f64>().map_err(|e| {
                            invalid("initial_profile.file", format!("{}: {e}", file.display()))
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(InitialProfile::Samples { values })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub grid: GridConfig,
    /// Levels of the coupled studies (drift, association).
    pub levels: Vec<u32>,
    pub initial_profile: ProfileSource,
    pub test_functions: Vec<TestFunctionSpec>,
    pub thresholds: Thresholds,
    /// Also write raw binary dumps of replica 0.
    pub dump: bool,
    pub qv: QvConfig,
    pub cov: CovConfig,
    pub ladder: LadderConfig,
    pub diverge: DivergeConfig,
    pub assoc: AssocConfig,
    pub section: SectionConfig,
}

pub fn default_battery() -> Vec<TestFunctionSpec> {
    vec![
        TestFunctionSpec::new(0.12, 0.1, 0.5, 0.2),
        TestFunctionSpec::new(0.125, 0.12, 0.3, 0.15),
        TestFunctionSpec::new(0.05, 0.15, 0.6, 0.25),
        TestFunctionSpec::new(0.0, 0.2, 0.45, 0.1),
    ]
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: Experiment::All,
            master_seed: 42,
            output_dir: PathBuf::from("kpz-out"),
            grid: GridConfig::default(),
            levels: vec![4, 8, 16, 32],
            initial_profile: ProfileSource::Preset(InitialProfile::Sine {
                mean: 0.0,
                amplitude: 0.5,
                mode: 1,
            }),
            test_functions: default_battery(),
            thresholds: Thresholds::default(),
            dump: false,
            qv: QvConfig::default(),
            cov: CovConfig::default(),
            ladder: LadderConfig::default(),
            diverge: DivergeConfig::default(),
            assoc: AssocConfig::default(),
            section: SectionConfig::default(),
        }
    }
}

fn check_levels(field: &str, levels: &[u32], grid: &GridSpecF64) -> Result<(), ConfigError> {
    let cap = max_level(grid);
    if levels.is_empty() {
        return Err(invalid(field, "must list at least one level"));
    }
    for &n in levels {
        if n == 0 || n > cap {
            return Err(invalid(
                field,
                format!(
                    "level n = {n} violates the mollifier resolution constraint n <= M/(4L) = {cap} (M = {}, L = {})",
                    grid.points(),
                    grid.length()
                ),
            ));
        }
    }
    Ok(())
}

fn check_replicas(field: &str, r: u64) -> Result<(), ConfigError> {
    if r == 0 {
        return Err(invalid(field, "must be at least 1"));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Checks every constraint an experiment relies on; errors name the field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let grid = self.grid.build("grid")?;
        let strictly_increasing = |v: &[u32]| v.windows(2).all(|w| w[0] < w[1]);
        check_levels("levels", &self.levels, &grid)?;
        if self.levels.len() < 3 || !strictly_increasing(&self.levels) {
            return Err(invalid(
                "levels",
                "need at least 3 strictly increasing levels",
            ));
        }
        check_levels("qv.levels", &self.qv.levels, &grid)?;
        check_levels("cov.level", &[self.cov.level], &grid)?;
        check_levels("ladder.level", &[self.ladder.level], &grid)?;
        for (f, r) in [
            ("qv.replicas", self.qv.replicas),
            ("cov.replicas", self.cov.replicas),
            ("ladder.replicas", self.ladder.replicas),
            ("diverge.replicas", self.diverge.replicas),
            ("assoc.replicas", self.assoc.replicas),
            ("section.replicas", self.section.replicas),
        ] {
            check_replicas(f, r)?;
        }
        for &x in &self.qv.x_indices {
            if x >= grid.points() {
                return Err(invalid(
                    "qv.x_indices",
                    format!("index {x} outside 0..{}", grid.points()),
                ));
            }
        }
        for (j, q) in self.cov.quadruples.iter().enumerate() {
            if !(q.t > 0.0 && q.s > 0.0 && q.t <= grid.horizon() && q.s <= grid.horizon()) {
                return Err(invalid(
                    format!("cov.quadruples[{j}]"),
                    "times must lie in (0, T]",
                ));
            }
        }
        let fs = &self.ladder.dt_factors;
        if fs.len() < 2
            || fs.windows(2).any(|w| w[0] <= w[1])
            || fs
                .iter()
                .any(|&f| f == 0 || !self.grid.steps.is_multiple_of(f))
        {
            return Err(invalid(
                "ladder.dt_factors",
                "need >= 2 strictly decreasing factors dividing grid.steps",
            ));
        }
        if self.test_functions.is_empty() {
            return Err(invalid("test_functions", "battery must not be empty"));
        }
        for (j, spec) in self.test_functions.iter().enumerate() {
            kpz_core::make_test_function(&grid, spec)
                .map_err(|e| invalid(format!("test_functions[{j}]"), e.to_string()))?;
            let coarsest = grid
                .with_time(self.grid.dt * fs[0] as f64, self.grid.steps / fs[0])
                .map_err(|e| invalid("ladder.dt_factors", e.to_string()))?;
            kpz_core::make_test_function(&coarsest, spec)
                .map_err(|e| invalid(format!("test_functions[{j}]"), e.to_string()))?;
        }
        kpz_core::make_spatial_test_function(&grid, self.diverge.weight)
            .map_err(|e| invalid("diverge.weight", e.to_string()))?;
        self.initial_profile
            .resolve()?
            .sample(&grid)
            .map_err(|e| invalid("initial_profile", e.to_string()))?;

        let sgrid = self.section.grid.build("section.grid")?;
        check_levels("section.level", &[self.section.level], &sgrid)?;
        if self.section.delta_net.profile != "one_sided_bump" {
            return Err(invalid(
                "section.delta_net.profile",
                "only `one_sided_bump` is available",
            ));
        }
        let eps = &self.section.delta_net.eps_steps;
        if eps.len() < 2 || eps.windows(2).any(|w| w[0] <= w[1]) {
            return Err(invalid(
                "section.delta_net.eps_steps",
                "need >= 2 strictly decreasing entries",
            ));
        }
        if eps[eps.len() - 1] < DELTA_NET_MIN_STEPS {
            return Err(invalid(
                "section.delta_net.eps_steps",
                format!("eps_min must be at least {DELTA_NET_MIN_STEPS} dt"),
            ));
        }
        if eps[0] > self.section.grid.steps {
            return Err(invalid(
                "section.delta_net.eps_steps",
                "eps_max exceeds the section horizon",
            ));
        }
        kpz_core::make_spatial_test_function(&sgrid, self.section.phi_x)
            .map_err(|e| invalid("section.phi_x", e.to_string()))?;
        self.section
            .initial_profile
            .sample(&sgrid)
            .map_err(|e| invalid("section.initial_profile", e.to_string()))?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, without `output_dir` and `experiment`.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("output_dir");
            map.remove("experiment");
        }
        hex::encode(Sha256::digest(
            serde_json::to_string(&v).expect("json").as_bytes(),
        ))
    }

    pub fn qv_columns(&self) -> Vec<usize> {
        if self.qv.x_indices.is_empty() {
            vec![self.grid.points / 2]
        } else {
            self.qv.x_indices.clone()
        }
    }

    pub fn grid_spec(&self) -> GridSpecF64 {
        self.grid.build("grid").expect("validated")
    }

    pub fn battery(&self) -> Vec<kpz_core::TestFunctionF64> {
        let g = self.grid_spec();
        self.test_functions
            .iter()
            .map(|s| kpz_core::make_test_function(&g, s).expect("validated"))
            .collect()
    }

    /// Stream seed for an experiment: experiments never share noise.
    pub fn stream_seed(&self, tag: &str) -> u64 {
        kpz_core::derive_seed(self.master_seed, tag)
    }
}
