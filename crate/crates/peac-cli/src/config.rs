//! JSON run configurations. Field names carry their units (`_s`, `_rad`,
//! `_m_per_s2`); unknown fields are rejected so typos surface as config
//! errors with line positions instead of silently keeping defaults.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use peac::dataset::Channel;
use peac::pulse::{self, PulseConfig, GAMMA_DEFAULT, K_EFF_DEFAULT};

use crate::CliError;

/// Reads and parses a JSON config; parse errors carry line/column.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

// ── Pulse section ────────────────────────────────────────────────────

fn default_a_ext() -> f64 {
    0.0322
}
fn default_tau() -> f64 {
    1.0e-4
}
fn default_gamma() -> f64 {
    GAMMA_DEFAULT
}
fn default_k_eff() -> f64 {
    K_EFF_DEFAULT
}

/// Interferometer pulse and laser constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    #[serde(default = "default_a_ext")]
    pub a_ext_m_per_s2: f64,
    #[serde(default = "default_tau")]
    pub tau_s: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_k_eff")]
    pub k_eff_rad_per_m: f64,
}

impl Default for PulseSection {
    fn default() -> Self {
        PulseSection {
            a_ext_m_per_s2: default_a_ext(),
            tau_s: default_tau(),
            gamma: default_gamma(),
            k_eff_rad_per_m: default_k_eff(),
        }
    }
}

impl PulseSection {
    /// Pulse config at interrogation time `t_sep_s`.
    pub fn pulse_config(&self, t_sep_s: f64) -> PulseConfig<f64> {
        PulseConfig {
            k_eff: self.k_eff_rad_per_m,
            a_ext: self.a_ext_m_per_s2,
            tau: self.tau_s,
            t_sep: t_sep_s,
            gamma: self.gamma,
        }
    }
}

// ── Grid section ─────────────────────────────────────────────────────

/// Evenly spaced interrogation times.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TLinspace {
    pub start_s: f64,
    pub stop_s: f64,
    pub steps: usize,
}

/// Simulation grid: exactly one of the three forms. θ grids are mapped to
/// interrogation times through the closed-form phase law.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_linspace_s: Option<TLinspace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_values_s: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_values_rad: Option<Vec<f64>>,
}

impl GridSection {
    /// Resolves to `(T_s, θ_rad)` pairs. An empty section takes the default
    /// span `T ∈ [1, 3] ms in 21 steps`.
    pub fn resolve(&self, pulse: &PulseSection) -> Result<Vec<(f64, f64)>, CliError> {
        let forms = [
            self.t_linspace_s.is_some(),
            self.t_values_s.is_some(),
            self.theta_values_rad.is_some(),
        ];
        if forms.iter().filter(|&&f| f).count() > 1 {
            return Err(CliError::Config(
                "grid: t_linspace_s, t_values_s, and theta_values_rad are mutually exclusive"
                    .into(),
            ));
        }
        let bad = |e: pulse::PulseError| CliError::Config(format!("grid: {e}"));
        if let Some(thetas) = &self.theta_values_rad {
            if thetas.is_empty() {
                return Err(CliError::Config("grid: theta_values_rad is empty".into()));
            }
            let cfg = pulse.pulse_config(1.0);
            return thetas
                .iter()
                .map(|&theta| Ok((cfg.interrogation_time_for(theta).map_err(bad)?, theta)))
                .collect();
        }
        let times: Vec<f64> = if let Some(ts) = &self.t_values_s {
            ts.clone()
        } else {
            let lin = self.t_linspace_s.clone().unwrap_or(TLinspace {
                start_s: 1.0e-3,
                stop_s: 3.0e-3,
                steps: 21,
            });
            if lin.steps == 0 {
                return Err(CliError::Config("grid: steps = 0".into()));
            }
            pulse::linspace(lin.start_s, lin.stop_s, lin.steps)
        };
        if times.is_empty() {
            return Err(CliError::Config("grid: t_values_s is empty".into()));
        }
        let cfg = pulse.pulse_config(times.iter().cloned().fold(1.0, f64::max));
        times
            .into_iter()
            .map(|t| Ok((t, cfg.theta_at(t).map_err(bad)?)))
            .collect()
    }
}

// ── Simulation config ────────────────────────────────────────────────

/// Three-component weights and single-channel amplitude.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSection {
    pub lambda_0: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub a0: f64,
}

impl Default for MixtureSection {
    fn default() -> Self {
        MixtureSection {
            lambda_0: 0.42,
            lambda_plus: 0.38,
            lambda_minus: 0.20,
            a0: 0.79,
        }
    }
}

/// Gaussian baseline statistics shared by all channels.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default)]
    pub baseline_mean: f64,
    #[serde(default = "default_noise_sigma")]
    pub baseline_sigma: f64,
}

fn default_noise_sigma() -> f64 {
    0.063
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            baseline_mean: 0.0,
            baseline_sigma: default_noise_sigma(),
        }
    }
}

/// Laser-phase scan protocol.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub phase_settings: usize,
    pub repetitions: usize,
    #[serde(default = "default_true")]
    pub phase_stable: bool,
}

fn default_true() -> bool {
    true
}

impl Default for ScanSection {
    fn default() -> Self {
        ScanSection {
            phase_settings: 20,
            repetitions: 15,
            phase_stable: true,
        }
    }
}

fn default_channels() -> Vec<Channel> {
    vec![Channel::Plus, Channel::Minus, Channel::Zero, Channel::All]
}
fn default_seed() -> u64 {
    1
}

/// `simulate` run configuration. An empty object `{}` reproduces the
/// reference protocol: T ∈ [1, 3] ms in 21 steps, 20 phase settings × 15
/// repetitions, λ₀ = 0.42, Δλ = 0.18, A₀ = 0.79, σ = 0.063.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default)]
    pub pulse: PulseSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub mixture: MixtureSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default = "default_channels")]
    pub channels: Vec<Channel>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

// ── Estimation config ────────────────────────────────────────────────

fn default_bootstrap() -> usize {
    1000
}

/// `estimate` run configuration; everything has a default, so the config
/// file is optional.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    /// Pulse constants used to map T to phase. `a_ext` is the quantity
    /// being estimated, so its value in this section is ignored.
    #[serde(default)]
    pub pulse: PulseSection,
    /// Bootstrap resamples per channel per interrogation time (first is
    /// always the original sample); 0 disables uncertainty estimation.
    #[serde(default = "default_bootstrap")]
    pub bootstrap_resamples: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            pulse: PulseSection::default(),
            bootstrap_resamples: default_bootstrap(),
            seed: 0,
        }
    }
}

// ── Gamma-fit config ─────────────────────────────────────────────────

fn default_gamma_grid() -> TLinspace {
    TLinspace {
        start_s: 1.0e-3,
        stop_s: 3.0e-3,
        steps: 21,
    }
}

/// `gamma-fit` run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaConfig {
    #[serde(default = "default_tau")]
    pub tau_s: f64,
    #[serde(default = "default_gamma_grid")]
    pub t_linspace_s: TLinspace,
}

impl Default for GammaConfig {
    fn default() -> Self {
        GammaConfig {
            tau_s: default_tau(),
            t_linspace_s: default_gamma_grid(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_simulate_config_is_the_reference_protocol() {
        let cfg: SimulateConfig = serde_json::from_str("{}").unwrap();
        let grid = cfg.grid.resolve(&cfg.pulse).unwrap();
        assert_eq!(grid.len(), 21);
        assert!((grid[0].0 - 1.0e-3).abs() < 1e-15);
        assert!((grid[20].0 - 3.0e-3).abs() < 1e-15);
        assert_eq!(cfg.scan.phase_settings * cfg.scan.repetitions, 300);
        assert_eq!(cfg.seed, 1);
    }

    #[test]
    fn theta_grids_map_through_the_phase_law() {
        let cfg: SimulateConfig = serde_json::from_str(
            r#"{ "grid": { "theta_values_rad": [1.0, 3.0, 9.0] } }"#,
        )
        .unwrap();
        let grid = cfg.grid.resolve(&cfg.pulse).unwrap();
        assert_eq!(grid.len(), 3);
        let pc = cfg.pulse.pulse_config(1.0);
        for &(t, theta) in &grid {
            assert!((pc.theta_at(t).unwrap() - theta).abs() < 1e-9);
        }
        assert!(grid.windows(2).all(|w| w[1].0 > w[0].0));
    }

    #[test]
    fn conflicting_grid_forms_are_a_config_error() {
        let cfg: SimulateConfig = serde_json::from_str(
            r#"{ "grid": { "t_values_s": [1e-3], "theta_values_rad": [1.0] } }"#,
        )
        .unwrap();
        assert!(matches!(
            cfg.grid.resolve(&cfg.pulse),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn unknown_fields_are_rejected_with_position() {
        let err = serde_json::from_str::<SimulateConfig>(r#"{ "sseed": 3 }"#).unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
    }
}
