//! Tabular measurement records, their CSV schema, and the multi-channel
//! shot simulator.
//!
//! A dataset is a flat record table `(T, scan index, repetition, channel,
//! value)`. All channels of one shot share the interferometer phase φ₀ and
//! carry independent Gaussian baselines; the rotated `sum`/`diff` channels
//! are derived from the ports of the same shot, so the rotation identity
//! `sum = (plus+minus)/√2`, `diff = (plus−minus)/√2` holds row by row.

use std::fmt;
use std::io::{Read as IoRead, Write as IoWrite};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::float::Real;
use crate::signal::{self, MixtureModel, ScanConfig, SignalParams};

/// Errors from dataset handling and serialization.
#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    /// A row violates the schema; `line` is 1-based and counts the header.
    #[error("schema violation at line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("missing channel: {0}")]
    MissingChannel(Channel),
    #[error("inconsistent dataset: {0}")]
    Inconsistent(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Signal channel of a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    /// mf = +1 port.
    Plus,
    /// mf = −1 port.
    Minus,
    /// mf = 0 port.
    Zero,
    /// Non-state-selective weighted average.
    All,
    /// Rotated `(plus + minus)/√2`.
    Sum,
    /// Rotated `(plus − minus)/√2`.
    Diff,
}

impl Channel {
    pub const ALL_CHANNELS: [Channel; 6] = [
        Channel::Plus,
        Channel::Minus,
        Channel::Zero,
        Channel::All,
        Channel::Sum,
        Channel::Diff,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Plus => "plus",
            Channel::Minus => "minus",
            Channel::Zero => "zero",
            Channel::All => "all",
            Channel::Sum => "sum",
            Channel::Diff => "diff",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Channel::ALL_CHANNELS
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown channel {s:?}"))
    }
}

/// One measurement record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record<F> {
    /// Interrogation time, seconds.
    #[serde(rename = "T_s")]
    pub t_s: F,
    pub scan_index: u32,
    pub repetition: u32,
    pub channel: Channel,
    pub value: F,
}

/// Flat record table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset<F> {
    pub records: Vec<Record<F>>,
}

impl<F: Real> Dataset<F> {
    /// Distinct interrogation times in ascending order (exact-value
    /// grouping; grid times survive the CSV round trip bit-exactly).
    pub fn times(&self) -> Vec<F> {
        let mut ts: Vec<F> = self.records.iter().map(|r| r.t_s).collect();
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ts.dedup();
        ts
    }

    /// Channels present anywhere in the dataset.
    pub fn channels(&self) -> Vec<Channel> {
        Channel::ALL_CHANNELS
            .into_iter()
            .filter(|&c| self.records.iter().any(|r| r.channel == c))
            .collect()
    }

    /// Values of one channel at one interrogation time, in record order.
    pub fn values(&self, t: F, channel: Channel) -> Vec<F> {
        self.records
            .iter()
            .filter(|r| r.t_s == t && r.channel == channel)
            .map(|r| r.value)
            .collect()
    }

    /// Like [`values`](Self::values) but an absent channel is an error.
    pub fn require_values(&self, t: F, channel: Channel) -> Result<Vec<F>, DatasetError> {
        let v = self.values(t, channel);
        if v.is_empty() {
            return Err(DatasetError::MissingChannel(channel));
        }
        Ok(v)
    }

    /// Shot-aligned `(s_minus, s_plus)` pairs at one interrogation time,
    /// matched by `(scan_index, repetition)`.
    pub fn port_pairs(&self, t: F) -> Result<Vec<(F, F)>, DatasetError> {
        let collect = |channel: Channel| -> Result<Vec<(u32, u32, F)>, DatasetError> {
            let mut v: Vec<(u32, u32, F)> = self
                .records
                .iter()
                .filter(|r| r.t_s == t && r.channel == channel)
                .map(|r| (r.scan_index, r.repetition, r.value))
                .collect();
            if v.is_empty() {
                return Err(DatasetError::MissingChannel(channel));
            }
            v.sort_by_key(|&(s, r, _)| (s, r));
            Ok(v)
        };
        let minus = collect(Channel::Minus)?;
        let plus = collect(Channel::Plus)?;
        if minus.len() != plus.len() {
            return Err(DatasetError::Inconsistent(format!(
                "port shot counts differ at T = {t}: {} minus vs {} plus",
                minus.len(),
                plus.len()
            )));
        }
        minus
            .into_iter()
            .zip(plus)
            .map(|((sm, rm, vm), (sp, rp, vp))| {
                if (sm, rm) != (sp, rp) {
                    return Err(DatasetError::Inconsistent(format!(
                        "unmatched shots at T = {t}: minus ({sm},{rm}) vs plus ({sp},{rp})"
                    )));
                }
                Ok((vm, vp))
            })
            .collect()
    }

    /// Checks the per-(T, channel) record-count invariant.
    pub fn validate_counts(&self, shots: usize) -> Result<(), DatasetError> {
        for t in self.times() {
            for channel in self.channels() {
                let n = self.values(t, channel).len();
                if n != shots {
                    return Err(DatasetError::Inconsistent(format!(
                        "channel {channel} at T = {t} has {n} records, expected {shots}"
                    )));
                }
            }
        }
        Ok(())
    }

    // ── CSV schema ───────────────────────────────────────────────────

    /// Writes the pinned CSV schema
    /// (`T_s,scan_index,repetition,channel,value`, ≥ 15 significant
    /// digits — 17 are written, so `f64` values round-trip exactly).
    pub fn write_csv<W: IoWrite>(&self, writer: W) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["T_s", "scan_index", "repetition", "channel", "value"])?;
        for r in &self.records {
            w.write_record([
                format!("{:.16e}", r.t_s.as_f64()),
                r.scan_index.to_string(),
                r.repetition.to_string(),
                r.channel.as_str().to_string(),
                format!("{:.16e}", r.value.as_f64()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the pinned CSV schema, reporting the first offending line on
    /// any violation.
    pub fn read_csv<R: IoRead>(reader: R) -> Result<Self, DatasetError> {
        let mut rd = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let expected = ["T_s", "scan_index", "repetition", "channel", "value"];
        {
            let headers = rd.headers()?;
            if headers.iter().ne(expected) {
                return Err(DatasetError::Schema {
                    line: 1,
                    message: format!(
                        "header mismatch: expected {:?}, got {:?}",
                        expected.join(","),
                        headers.iter().collect::<Vec<_>>().join(",")
                    ),
                });
            }
        }
        let mut records = Vec::new();
        for (i, row) in rd.records().enumerate() {
            let line = i + 2;
            let row = row?;
            if row.len() != 5 {
                return Err(DatasetError::Schema {
                    line,
                    message: format!("expected 5 fields, got {}", row.len()),
                });
            }
            let field = |idx: usize| row.get(idx).unwrap().trim();
            let parse_float = |idx: usize, name: &str| -> Result<F, DatasetError> {
                field(idx)
                    .parse::<f64>()
                    .map(F::of)
                    .map_err(|e| DatasetError::Schema {
                        line,
                        message: format!("bad {name} {:?}: {e}", field(idx)),
                    })
            };
            let parse_int = |idx: usize, name: &str| -> Result<u32, DatasetError> {
                field(idx).parse::<u32>().map_err(|e| DatasetError::Schema {
                    line,
                    message: format!("bad {name} {:?}: {e}", field(idx)),
                })
            };
            let channel =
                Channel::from_str(field(3)).map_err(|message| DatasetError::Schema {
                    line,
                    message,
                })?;
            let t_s = parse_float(0, "T_s")?;
            let value = parse_float(4, "value")?;
            if !t_s.is_finite() || !value.is_finite() {
                return Err(DatasetError::Schema {
                    line,
                    message: "non-finite numeric field".to_string(),
                });
            }
            records.push(Record {
                t_s,
                scan_index: parse_int(1, "scan_index")?,
                repetition: parse_int(2, "repetition")?,
                channel,
                value,
            });
        }
        Ok(Dataset { records })
    }
}

// ── Shot simulation ──────────────────────────────────────────────────

/// What to simulate: the mixture fixes the channel amplitudes and phase
/// offsets, the noise parameters fix every channel's Gaussian baseline, and
/// the scan fixes the φ₀ draws.
#[derive(Debug, Clone)]
pub struct ShotPlan<F> {
    /// Component weights and single-channel amplitude; `theta` is
    /// overridden per (T, θ) pair during simulation.
    pub mixture: MixtureModel<F>,
    /// Baseline mean and σ applied to every channel (`amplitude` unused).
    pub noise: SignalParams<F>,
    /// φ₀ scan; `shots()` records per channel per interrogation time.
    pub scan: ScanConfig<F>,
    /// Channels to emit.
    pub channels: Vec<Channel>,
}

/// Simulates all requested channels over `(T, θ)` pairs.
///
/// Per shot, one φ₀ draw is shared across channels; each physical channel
/// adds an independent Gaussian baseline. Ports ride at the single-channel
/// amplitude with offsets ±θ/2 (zero port at offset 0); the `all` channel
/// carries the superposed three-component amplitude and offset; `sum` and
/// `diff` are derived from the same shot's ports. The RNG substream index
/// is the T index, so prefixes of a T grid are reproducible.
pub fn simulate_shots<F: Real>(
    plan: &ShotPlan<F>,
    t_and_theta: &[(F, F)],
) -> Result<Dataset<F>, DatasetError> {
    let invalid = |e: signal::SignalError| DatasetError::InvalidParameter(e.to_string());
    plan.scan.validate().map_err(invalid)?;
    plan.noise.validate().map_err(invalid)?;
    if plan.channels.is_empty() {
        return Err(DatasetError::InvalidParameter("no channels requested".into()));
    }
    let mut seen = Vec::new();
    for &c in &plan.channels {
        if seen.contains(&c) {
            return Err(DatasetError::InvalidParameter(format!(
                "channel {c} requested twice"
            )));
        }
        seen.push(c);
    }
    let derived = plan.channels.iter().any(|&c| matches!(c, Channel::Sum | Channel::Diff));
    let shots = plan.scan.shots();
    let mut records = Vec::with_capacity(t_and_theta.len() * shots * plan.channels.len());
    let sqrt_half = F::of(std::f64::consts::FRAC_1_SQRT_2);

    for (t_index, &(t_s, theta)) in t_and_theta.iter().enumerate() {
        if !t_s.is_finite() || !theta.is_finite() {
            return Err(DatasetError::InvalidParameter(format!(
                "non-finite grid point (T = {t_s}, theta = {theta})"
            )));
        }
        let mut model = plan.mixture;
        model.theta = theta;
        model.validate().map_err(invalid)?;
        let a_all = signal::amplitude_three_state(&model).map_err(invalid)?;
        let off_all = signal::theta_offset_three_state(&model).map_err(invalid)?;
        let half = theta * F::of(0.5);

        let mut rng = ChaCha8Rng::seed_from_u64(plan.scan.seed);
        rng.set_stream(t_index as u64);
        for shot in 0..shots {
            let phi0 = signal::draw_phase(&plan.scan, shot, &mut rng);
            let scan_index = (shot / plan.scan.repetitions) as u32;
            let repetition = (shot % plan.scan.repetitions) as u32;
            let mut port_plus = None;
            let mut port_minus = None;
            let emit = |records: &mut Vec<Record<F>>, channel: Channel, value: F| {
                records.push(Record {
                    t_s,
                    scan_index,
                    repetition,
                    channel,
                    value,
                });
            };
            // Physical channels draw baselines in a fixed order so the
            // stream layout does not depend on the requested subset order.
            for channel in [Channel::Plus, Channel::Minus, Channel::Zero, Channel::All] {
                let wanted = plan.channels.contains(&channel);
                let needed = wanted
                    || (derived && matches!(channel, Channel::Plus | Channel::Minus));
                if !needed {
                    continue;
                }
                let (amp, offset) = match channel {
                    Channel::Plus => (model.a0, half),
                    Channel::Minus => (model.a0, -half),
                    Channel::Zero => (model.a0, F::zero()),
                    Channel::All => (a_all, off_all),
                    _ => unreachable!(),
                };
                let baseline = signal::draw_baseline(
                    plan.noise.baseline_mean,
                    plan.noise.baseline_sigma,
                    &mut rng,
                );
                let value = baseline + amp * (phi0 + offset).cos();
                match channel {
                    Channel::Plus => port_plus = Some(value),
                    Channel::Minus => port_minus = Some(value),
                    _ => {}
                }
                if wanted {
                    emit(&mut records, channel, value);
                }
            }
            if derived {
                let (p, m) = (port_plus.unwrap(), port_minus.unwrap());
                if plan.channels.contains(&Channel::Sum) {
                    emit(&mut records, Channel::Sum, (p + m) * sqrt_half);
                }
                if plan.channels.contains(&Channel::Diff) {
                    emit(&mut records, Channel::Diff, (p - m) * sqrt_half);
                }
            }
        }
    }
    Ok(Dataset { records })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_plan() -> ShotPlan<f64> {
        ShotPlan {
            mixture: MixtureModel {
                lambda_0: 0.42,
                lambda_plus: (1.0 - 0.42 + 0.18) / 2.0,
                lambda_minus: (1.0 - 0.42 - 0.18) / 2.0,
                a0: 0.79,
                theta: 0.0,
            },
            noise: SignalParams {
                amplitude: 0.0,
                baseline_mean: 0.0,
                baseline_sigma: 0.05,
            },
            scan: ScanConfig::evenly_spaced(4, 3, true, 99),
            channels: vec![
                Channel::Plus,
                Channel::Minus,
                Channel::All,
                Channel::Sum,
                Channel::Diff,
            ],
        }
    }

    #[test]
    fn record_counts_match_the_scan() {
        let ds = simulate_shots(&small_plan(), &[(1e-3, 0.7), (2e-3, 2.1)]).unwrap();
        assert_eq!(ds.times(), vec![1e-3, 2e-3]);
        ds.validate_counts(12).unwrap();
        assert_eq!(ds.records.len(), 2 * 12 * 5);
    }

    #[test]
    fn rotation_identity_holds_row_by_row() {
        let ds = simulate_shots(&small_plan(), &[(1e-3, 0.7)]).unwrap();
        let plus = ds.values(1e-3, Channel::Plus);
        let minus = ds.values(1e-3, Channel::Minus);
        let sum = ds.values(1e-3, Channel::Sum);
        let diff = ds.values(1e-3, Channel::Diff);
        for i in 0..plus.len() {
            assert!((sum[i] - (plus[i] + minus[i]) / 2f64.sqrt()).abs() < 1e-12);
            assert!((diff[i] - (plus[i] - minus[i]) / 2f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let ds = simulate_shots(&small_plan(), &[(1e-3, 0.7)]).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("T_s,scan_index,repetition,channel,value\n"));
        let back = Dataset::<f64>::read_csv(buf.as_slice()).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn schema_violations_carry_line_numbers() {
        let bad_header = "T_s,scan,repetition,channel,value\n1.0,0,0,plus,0.5\n";
        match Dataset::<f64>::read_csv(bad_header.as_bytes()) {
            Err(DatasetError::Schema { line: 1, .. }) => {}
            other => panic!("expected header schema error, got {other:?}"),
        }
        let bad_channel = "T_s,scan_index,repetition,channel,value\n1.0,0,0,plus,0.5\n1.0,0,1,sideways,0.5\n";
        match Dataset::<f64>::read_csv(bad_channel.as_bytes()) {
            Err(DatasetError::Schema { line: 3, message }) => {
                assert!(message.contains("sideways"));
            }
            other => panic!("expected channel schema error, got {other:?}"),
        }
        let bad_value = "T_s,scan_index,repetition,channel,value\n1.0,0,0,plus,half\n";
        match Dataset::<f64>::read_csv(bad_value.as_bytes()) {
            Err(DatasetError::Schema { line: 2, message }) => {
                assert!(message.contains("half"));
            }
            other => panic!("expected value schema error, got {other:?}"),
        }
    }

    #[test]
    fn port_pairs_align_shots() {
        let mut ds = simulate_shots(&small_plan(), &[(1e-3, 0.7)]).unwrap();
        let pairs = ds.port_pairs(1e-3).unwrap();
        assert_eq!(pairs.len(), 12);
        let plus = ds.values(1e-3, Channel::Plus);
        let minus = ds.values(1e-3, Channel::Minus);
        for (i, &(m, p)) in pairs.iter().enumerate() {
            assert_eq!(m, minus[i]);
            assert_eq!(p, plus[i]);
        }
        // Pairing survives record shuffling because it sorts by shot keys.
        ds.records.reverse();
        assert_eq!(ds.port_pairs(1e-3).unwrap(), pairs);
    }

    #[test]
    fn missing_channel_is_reported() {
        let mut plan = small_plan();
        plan.channels = vec![Channel::Plus];
        let ds = simulate_shots(&plan, &[(1e-3, 0.7)]).unwrap();
        match ds.port_pairs(1e-3) {
            Err(DatasetError::MissingChannel(Channel::Minus)) => {}
            other => panic!("expected missing minus channel, got {other:?}"),
        }
    }

    #[test]
    fn identical_seeds_are_bit_identical_and_prefix_stable() {
        let plan = small_plan();
        let grid = [(1e-3, 0.7), (2e-3, 2.1), (3e-3, 4.0)];
        let a = simulate_shots(&plan, &grid).unwrap();
        let b = simulate_shots(&plan, &grid).unwrap();
        assert_eq!(a, b);
        // Leading T blocks do not depend on the rest of the grid.
        let prefix = simulate_shots(&plan, &grid[..2]).unwrap();
        assert_eq!(&a.records[..prefix.records.len()], &prefix.records[..]);
    }

    #[test]
    fn phase_unstable_mode_differs_from_stepped() {
        let mut plan = small_plan();
        plan.scan = ScanConfig::evenly_spaced(4, 3, false, 99);
        let a = simulate_shots(&plan, &[(1e-3, 0.7)]).unwrap();
        let b = simulate_shots(&small_plan(), &[(1e-3, 0.7)]).unwrap();
        assert_ne!(a, b);
    }
}
