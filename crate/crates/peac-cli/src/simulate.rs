//! `simulate`: synthetic multi-channel datasets on a T or θ grid.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use peac::dataset::{self, ShotPlan};
use peac::signal::{MixtureModel, ScanConfig, SignalParams};

use crate::config::{self, SimulateConfig};
use crate::manifest::RunManifest;
use crate::CliError;

/// Path of the manifest sidecar for a data file.
pub fn meta_path(data: &Path) -> PathBuf {
    let mut name = data.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    data.with_file_name(name)
}

/// Writes a manifest sidecar next to `data`.
pub fn write_sidecar(data: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let path = meta_path(data);
    let file = File::create(&path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::to_writer_pretty(BufWriter::new(file), manifest)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn run(config_path: &Path, out: &Path, seed_override: Option<u64>) -> Result<(), CliError> {
    let mut cfg: SimulateConfig = config::load_json(config_path)?;
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    let manifest = RunManifest::begin(
        "simulate",
        serde_json::to_value(&cfg).expect("config serializes"),
        cfg.seed,
    );

    let grid = cfg.grid.resolve(&cfg.pulse)?;
    let plan = ShotPlan {
        mixture: MixtureModel {
            lambda_0: cfg.mixture.lambda_0,
            lambda_plus: cfg.mixture.lambda_plus,
            lambda_minus: cfg.mixture.lambda_minus,
            a0: cfg.mixture.a0,
            theta: 0.0,
        },
        noise: SignalParams {
            amplitude: cfg.mixture.a0,
            baseline_mean: cfg.noise.baseline_mean,
            baseline_sigma: cfg.noise.baseline_sigma,
        },
        scan: ScanConfig::evenly_spaced(
            cfg.scan.phase_settings,
            cfg.scan.repetitions,
            cfg.scan.phase_stable,
            cfg.seed,
        ),
        channels: cfg.channels.clone(),
    };
    let ds = dataset::simulate_shots(&plan, &grid)
        .map_err(|e| CliError::Config(e.to_string()))?;

    let file =
        File::create(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    ds.write_csv(BufWriter::new(file))
        .map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    write_sidecar(out, &manifest.finish(&[out]))
}
