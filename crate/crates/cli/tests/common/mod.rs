use std::fs;
use std::path::Path;

use kpz_core::TestFunctionSpec;
use kpz_renorm::config::{
    AssocConfig, CovConfig, DeltaNetConfig, DivergeConfig, ExperimentConfig, GridConfig,
    LadderConfig, Quadruple, QvConfig, SectionConfig,
};

/// Every experiment on a 64-point grid; runs in a few seconds.
pub fn tiny_config(out: &Path) -> ExperimentConfig {
    let d = ExperimentConfig::default();
    ExperimentConfig {
        output_dir: out.to_path_buf(),
        grid: GridConfig {
            length: 1.0,
            points: 64,
            dt: 1e-4,
            steps: 800,
        },
        levels: vec![2, 4, 8],
        test_functions: vec![
            TestFunctionSpec::new(0.04, 0.03, 0.5, 0.2),
            TestFunctionSpec::new(0.0, 0.05, 0.3, 0.15),
        ],
        qv: QvConfig {
            levels: vec![2, 4],
            replicas: 8,
            x_indices: Vec::new(),
        },
        cov: CovConfig {
            level: 4,
            replicas: 20,
            quadruples: vec![
                Quadruple {
                    t: 0.05,
                    s: 0.05,
                    x: 0.5,
                    y: 0.5,
                },
                Quadruple {
                    t: 0.02,
                    s: 0.04,
                    x: 0.4,
                    y: 0.6,
                },
            ],
        },
        ladder: LadderConfig {
            level: 4,
            replicas: 3,
            dt_factors: vec![4, 2, 1],
        },
        diverge: DivergeConfig {
            replicas: 3,
            ..d.diverge.clone()
        },
        assoc: AssocConfig { replicas: 2 },
        section: SectionConfig {
            grid: GridConfig {
                length: 1.0,
                points: 64,
                dt: 1e-4,
                steps: 64,
            },
            level: 4,
            replicas: 20,
            delta_net: DeltaNetConfig {
                eps_steps: vec![32, 16, 8],
                ..DeltaNetConfig::default()
            },
            ..d.section.clone()
        },
        ..d
    }
}

/// Output files by name, with `wall_time` dropped from the JSON summaries.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            let bytes = fs::read(&p).unwrap();
            let bytes = if name.ends_with(".json") {
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                v.as_object_mut().unwrap().remove("wall_time");
                serde_json::to_vec(&v).unwrap()
            } else {
                bytes
            };
            (name, bytes)
        })
        .collect();
    files.sort();
    files
}
