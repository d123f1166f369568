//! `gamma-fit`: reproduce the finite-pulse correction coefficient from the
//! full phase-response integral.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;

use peac::pulse;

use crate::config::{self, GammaConfig};
use crate::manifest::RunManifest;
use crate::CliError;

#[derive(Serialize)]
struct GammaOutput {
    manifest: RunManifest,
    tau_s: f64,
    t_grid_s: Vec<f64>,
    gamma: f64,
}

pub fn run(config_path: Option<&Path>, out: Option<&Path>) -> Result<(), CliError> {
    let cfg: GammaConfig = match config_path {
        Some(p) => config::load_json(p)?,
        None => GammaConfig::default(),
    };
    let manifest = RunManifest::begin(
        "gamma-fit",
        serde_json::to_value(&cfg).expect("config serializes"),
        0,
    );
    let lin = &cfg.t_linspace_s;
    if lin.steps < 2 {
        return Err(CliError::Config("t_linspace_s.steps < 2".into()));
    }
    let grid = pulse::linspace(lin.start_s, lin.stop_s, lin.steps);
    let gamma = pulse::fit_gamma(cfg.tau_s, &grid)
        .map_err(|e| CliError::Numerical(e.to_string()))?;

    let outputs: Vec<&Path> = out.into_iter().collect();
    let payload = GammaOutput {
        manifest: manifest.finish(&outputs),
        tau_s: cfg.tau_s,
        t_grid_s: grid,
        gamma,
    };
    match out {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            serde_json::to_writer_pretty(BufWriter::new(file), &payload)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
        }
        None => {
            println!(
                "{}",
                serde_json::to_string_pretty(&payload).expect("payload serializes")
            );
            Ok(())
        }
    }
}
