//! `estimate`: per-T density fits, reconstructed θ(T) with bootstrap
//! uncertainties, and acceleration recovery by the collapse-curve fit and
//! by pointwise inversion.

use std::f64::consts::SQRT_2;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use clap::ValueEnum;
use rayon::prelude::*;
use serde::Serialize;

use peac::collapse::{self, CollapseFitResult, PointwiseFit};
use peac::dataset::{Channel, Dataset};
use peac::ellipse;
use peac::estimator::{self, EstimatorError, PdfFit};
use peac::histogram;
use peac::pdf::PdfParams;
use peac::replication;

use crate::config::{self, EstimateConfig};
use crate::manifest::RunManifest;
use crate::CliError;

/// Estimation route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    /// Amplitude-collapse estimation on the rotated channels.
    Peac,
    /// Conic fit to the port scatter.
    Ellipse,
    /// Both routes side by side.
    Both,
}

/// One interrogation time: density fits per channel and reconstructed
/// phases. Bootstrap stds resample shots with replacement; wrapped-phase
/// stds carry over to the unwrapped series unchanged (the unwrap is a
/// unit-slope relabeling).
#[derive(Serialize)]
struct TimeRow {
    t_s: f64,
    n_shots: usize,
    plus: Option<PdfParams<f64>>,
    minus: Option<PdfParams<f64>>,
    zero: Option<PdfParams<f64>>,
    all: Option<PdfParams<f64>>,
    sum: Option<PdfParams<f64>>,
    diff: Option<PdfParams<f64>>,
    /// Reference single-channel amplitude `(A₊+A₋)/2` from the port fits.
    a0: Option<f64>,
    theta_sum_rad: Option<f64>,
    theta_sum_std_rad: Option<f64>,
    theta_diff_rad: Option<f64>,
    theta_diff_std_rad: Option<f64>,
    theta_ellipse_rad: Option<f64>,
    theta_ellipse_std_rad: Option<f64>,
    /// Bootstrap resamples on which a refit or inversion failed.
    bootstrap_failures: usize,
}

#[derive(Serialize)]
struct EstimateOutput {
    manifest: RunManifest,
    method: Route,
    per_time: Vec<TimeRow>,
    /// Unwrapped θ(T) in ascending T order: sum-channel phases for the
    /// collapse route, conic phases otherwise. Present only when every
    /// interrogation time produced one.
    theta_unwrapped_rad: Option<Vec<f64>>,
    /// Collapse-curve fit over the amplitude series (`all` channel when
    /// present, rotated sum otherwise); requires at least 4 times.
    collapse: Option<CollapseFitResult<f64>>,
    /// Pointwise re-estimation seeded by the collapse fit.
    pointwise: Option<PointwiseFit<f64>>,
}

fn numerical(e: EstimatorError) -> CliError {
    CliError::Numerical(e.to_string())
}

fn fit_unconstrained(values: &[f64]) -> Result<PdfFit<f64>, EstimatorError> {
    let h = histogram::bin(values, None)?;
    let guess = estimator::initial_guesses(&h)?;
    estimator::fit_pdf_multistart(&h, &guess.params, None)
}

/// Bootstrap std of a wrapped phase reconstructed from one rotated channel,
/// refitting the amplitude (a0 held at the full-sample estimate) per
/// resample. Returns `(std, failures)`; `None` when the bootstrap itself
/// could not produce moments.
fn bootstrap_theta_std(
    values: &[f64],
    guess: PdfParams<f64>,
    a0: f64,
    invert: fn(f64, f64) -> Result<f64, EstimatorError>,
    b: usize,
    seed: u64,
) -> (Option<f64>, usize) {
    let stat = |vals: &[f64]| -> Option<f64> {
        let h = histogram::bin(vals, None).ok()?;
        let fit = estimator::fit_pdf_multistart(&h, &guess, Some((0.0, SQRT_2 * a0))).ok()?;
        invert(fit.params.amplitude, a0).ok()
    };
    match replication::bootstrap(values, b, seed, stat) {
        Ok(s) => (Some(s.std), s.n_failures),
        Err(_) => (None, b),
    }
}

fn analyze_time(
    ds: &Dataset<f64>,
    t: f64,
    t_index: usize,
    route: Route,
    b: usize,
    seed: u64,
) -> Result<TimeRow, CliError> {
    let channel_values = |c: Channel| -> Vec<f64> { ds.values(t, c) };
    let present: Vec<(Channel, usize)> = Channel::ALL_CHANNELS
        .into_iter()
        .map(|c| (c, channel_values(c).len()))
        .filter(|&(_, n)| n > 0)
        .collect();
    let n_shots = present.first().map(|&(_, n)| n).unwrap_or(0);
    if present.iter().any(|&(_, n)| n != n_shots) {
        return Err(CliError::Data(format!(
            "unequal channel record counts at T = {t}: {present:?}"
        )));
    }

    let mut row = TimeRow {
        t_s: t,
        n_shots,
        plus: None,
        minus: None,
        zero: None,
        all: None,
        sum: None,
        diff: None,
        a0: None,
        theta_sum_rad: None,
        theta_sum_std_rad: None,
        theta_diff_rad: None,
        theta_diff_std_rad: None,
        theta_ellipse_rad: None,
        theta_ellipse_std_rad: None,
        bootstrap_failures: 0,
    };
    let want_peac = route != Route::Ellipse;
    let want_ellipse = route != Route::Peac;
    let bootstrap_on = b >= 2;

    if want_peac {
        let plus = channel_values(Channel::Plus);
        let minus = channel_values(Channel::Minus);
        if !plus.is_empty() && !minus.is_empty() {
            let suite = estimator::fit_channel_suite(&plus, &minus).map_err(numerical)?;
            row.plus = Some(suite.plus.params);
            row.minus = Some(suite.minus.params);
            row.sum = Some(suite.sum.params);
            row.diff = Some(suite.diff.params);
            row.a0 = Some(suite.a0);
            row.theta_sum_rad = Some(
                estimator::reconstruct_theta_two_state(suite.sum.params.amplitude, suite.a0)
                    .map_err(numerical)?,
            );
            row.theta_diff_rad = Some(
                estimator::reconstruct_theta_diff(suite.diff.params.amplitude, suite.a0)
                    .map_err(numerical)?,
            );
            if bootstrap_on {
                let rotate = |sign: f64| -> Vec<f64> {
                    plus.iter()
                        .zip(&minus)
                        .map(|(&p, &m)| (p + sign * m) / SQRT_2)
                        .collect()
                };
                let (std, failures) = bootstrap_theta_std(
                    &rotate(1.0),
                    suite.sum.params,
                    suite.a0,
                    estimator::reconstruct_theta_two_state,
                    b,
                    seed.wrapping_add(2 * t_index as u64),
                );
                row.theta_sum_std_rad = std;
                row.bootstrap_failures += failures;
                let (std, failures) = bootstrap_theta_std(
                    &rotate(-1.0),
                    suite.diff.params,
                    suite.a0,
                    estimator::reconstruct_theta_diff,
                    b,
                    seed.wrapping_add(2 * t_index as u64 + 1),
                );
                row.theta_diff_std_rad = std;
                row.bootstrap_failures += failures;
            }
        } else {
            // No port pair: fit whatever rotated channels exist directly
            // (amplitudes only; phase inversion needs the port reference).
            for (channel, slot) in [(Channel::Sum, 0), (Channel::Diff, 1)] {
                let values = channel_values(channel);
                if !values.is_empty() {
                    let fit = fit_unconstrained(&values).map_err(numerical)?;
                    match slot {
                        0 => row.sum = Some(fit.params),
                        _ => row.diff = Some(fit.params),
                    }
                }
            }
        }
        let zero = channel_values(Channel::Zero);
        if !zero.is_empty() {
            row.zero = Some(fit_unconstrained(&zero).map_err(numerical)?.params);
        }
        let all = channel_values(Channel::All);
        if !all.is_empty() {
            row.all = Some(fit_unconstrained(&all).map_err(numerical)?.params);
        }
    }

    if want_ellipse {
        let pairs = ds.port_pairs(t).map_err(|e| CliError::Data(e.to_string()))?;
        let conic = ellipse::fit_conic(&pairs)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        row.theta_ellipse_rad = Some(
            ellipse::theta_from_conic(&conic).map_err(|e| CliError::Numerical(e.to_string()))?,
        );
        if bootstrap_on {
            let indices: Vec<f64> = (0..pairs.len()).map(|i| i as f64).collect();
            let stat = |ids: &[f64]| -> Option<f64> {
                let pts: Vec<(f64, f64)> =
                    ids.iter().map(|&i| pairs[i as usize]).collect();
                ellipse::theta_from_conic(&ellipse::fit_conic(&pts).ok()?).ok()
            };
            match replication::bootstrap(&indices, b, seed.wrapping_mul(31).wrapping_add(t_index as u64), stat) {
                Ok(s) => {
                    row.theta_ellipse_std_rad = Some(s.std);
                    row.bootstrap_failures += s.n_failures;
                }
                Err(_) => row.bootstrap_failures += b,
            }
        }
    }
    Ok(row)
}

/// Amplitude series for the collapse fit: the `all` channel when every
/// time has it, else the rotated sum, else nothing.
fn amplitude_series(rows: &[TimeRow]) -> Option<Vec<(f64, f64)>> {
    for pick in [
        (|r: &TimeRow| r.all) as fn(&TimeRow) -> Option<PdfParams<f64>>,
        |r: &TimeRow| r.sum,
    ] {
        let series: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| pick(r).map(|p| (r.t_s, p.amplitude)))
            .collect();
        if series.len() == rows.len() && series.len() >= 4 {
            return Some(series);
        }
    }
    None
}

pub fn run(
    dataset_path: &Path,
    route: Route,
    config_path: Option<&Path>,
    out: &Path,
    seed_override: Option<u64>,
) -> Result<(), CliError> {
    let mut cfg: EstimateConfig = match config_path {
        Some(p) => config::load_json(p)?,
        None => EstimateConfig::default(),
    };
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    let manifest = RunManifest::begin(
        "estimate",
        serde_json::to_value(&cfg).expect("config serializes"),
        cfg.seed,
    );

    let file = File::open(dataset_path)
        .map_err(|e| CliError::Data(format!("{}: {e}", dataset_path.display())))?;
    let ds = Dataset::<f64>::read_csv(file).map_err(|e| CliError::Data(e.to_string()))?;
    let times = ds.times();
    if times.is_empty() {
        return Err(CliError::Data("dataset has no records".into()));
    }

    let rows: Vec<TimeRow> = times
        .par_iter()
        .enumerate()
        .map(|(i, &t)| analyze_time(&ds, t, i, route, cfg.bootstrap_resamples, cfg.seed))
        .collect::<Result<_, _>>()?;

    let wrapped: Option<Vec<f64>> = match route {
        Route::Peac | Route::Both => rows.iter().map(|r| r.theta_sum_rad).collect(),
        Route::Ellipse => rows.iter().map(|r| r.theta_ellipse_rad).collect(),
    };
    let theta_unwrapped_rad = wrapped.map(|w| estimator::unwrap(&w));

    let mut collapse_fit = None;
    let mut pointwise = None;
    if route != Route::Ellipse {
        if let Some(series) = amplitude_series(&rows) {
            let t_max = series.iter().map(|&(t, _)| t).fold(f64::MIN, f64::max);
            let template = cfg.pulse.pulse_config(t_max);
            let fit = collapse::fit_collapse_curve(&series, &template).map_err(numerical)?;
            if fit.converged {
                pointwise = Some(
                    collapse::fit_acceleration_pointwise(
                        &series,
                        fit.lambda0,
                        fit.delta_lambda,
                        fit.a0,
                        fit.a_ext_m_per_s2,
                        &template,
                    )
                    .map_err(numerical)?,
                );
            }
            collapse_fit = Some(fit);
        }
    }

    let payload = EstimateOutput {
        manifest: manifest.finish(&[out]),
        method: route,
        per_time: rows,
        theta_unwrapped_rad,
        collapse: collapse_fit,
        pointwise,
    };
    let out_file =
        File::create(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    serde_json::to_writer_pretty(BufWriter::new(out_file), &payload)
        .map_err(|e| CliError::Io(format!("{}: {e}", out.display())))
}
