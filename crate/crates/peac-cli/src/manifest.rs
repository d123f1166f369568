//! Run provenance. Every output file either embeds a manifest (JSON
//! payloads) or gets a `<file>.meta.json` sidecar (CSV tables), so any
//! artifact can be traced to the command, configuration, and seed that
//! produced it and regenerated bit-identically.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    /// Subcommand that produced the outputs.
    pub command: String,
    /// Full invocation, for reproduction.
    pub argv: Vec<String>,
    /// Effective configuration snapshot: defaults filled, overrides applied.
    pub config: serde_json::Value,
    /// RNG seed in effect.
    pub seed: u64,
    pub version: String,
    pub started_utc: String,
    pub finished_utc: String,
    /// Data files written by this run.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn begin(command: &str, config: serde_json::Value, seed: u64) -> Self {
        RunManifest {
            command: command.to_string(),
            argv: std::env::args().collect(),
            config,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_utc: timestamp_utc(),
            finished_utc: String::new(),
            outputs: Vec::new(),
        }
    }

    /// Stamps the completion time and the list of files about to be written.
    pub fn finish(mut self, outputs: &[&Path]) -> Self {
        self.outputs = outputs.iter().map(|p| p.display().to_string()).collect();
        self.finished_utc = timestamp_utc();
        self
    }
}

/// Current UTC time as `YYYY-MM-DDThh:mm:ssZ`.
pub fn timestamp_utc() -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let (y, m, d) = civil_from_days((secs / 86_400) as i64);
    let rem = secs % 86_400;
    format!(
        "{y:04}-{m:02}-{d:02}T{:02}:{:02}:{:02}Z",
        rem / 3600,
        rem % 3600 / 60,
        rem % 60
    )
}

/// Gregorian date from days since 1970-01-01, via the era decomposition of
/// the 146097-day 400-year cycle.
fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719_468;
    let era = if z >= 0 { z } else { z - 146_096 } / 146_097;
    let doe = (z - era * 146_097) as u64;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe as i64 + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    (if m <= 2 { y + 1 } else { y }, m, d)
}
