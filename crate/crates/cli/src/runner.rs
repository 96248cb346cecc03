//! The experiment loops behind the subcommands. Everything is sequential
//! and deterministic: per-replication seeds are derived from content, so
//! no cell's numbers depend on the order anything is listed in.

use std::path::Path;

use symloc::onestep::{self, FisherVariant, OneStepConfig};
use symloc::refdist::RefDensity;
use symloc::symmle::{self, MleConfig};
use symloc::Error;

use crate::config::{Estimator, ExperimentConfig};
use crate::CliError;

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

/// Seed for one replication, derived from what the cell *is* rather than
/// where it sits in the loop. Estimators are deliberately not part of the
/// derivation: every estimator in a cell sees the same samples, so
/// efficiency comparisons between them are paired.
pub fn cell_seed(master: u64, density: &str, n: usize, rep: usize) -> u64 {
    fnv1a64(format!("{master}:{density}:{n}:{rep}").as_bytes())
}

/// Run one estimator on one sample.
pub fn apply_estimator(est: &Estimator, sample: &[f64], eta: f64) -> symloc::Result<f64> {
    match *est {
        Estimator::Preliminary(kind) => onestep::preliminary(sample, kind),
        Estimator::Mle => symmle::fit_mle(sample, &MleConfig::default()).map(|m| m.theta),
        Estimator::OneStep {
            preliminary,
            density,
            truncated,
        } => {
            let cfg = OneStepConfig {
                preliminary,
                density,
                eta,
                truncated,
                fisher: if truncated {
                    FisherVariant::Empirical
                } else {
                    FisherVariant::Untruncated
                },
                ..OneStepConfig::default()
            };
            onestep::one_step(sample, &cfg).map(|(theta, _)| theta)
        }
    }
}

/// Unbiased sample variance; NaN when there are fewer than two values.
fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

#[derive(Debug, Clone)]
pub struct EfficiencyRow {
    pub density: String,
    pub estimator: String,
    pub n: usize,
    /// Replications attempted.
    pub reps: usize,
    /// Replications whose estimator returned an error; excluded from the
    /// variance but kept on the books.
    pub failures: usize,
    /// Monte-Carlo variance of the estimate over the successful
    /// replications.
    pub mc_variance: f64,
    /// `(1/(n I)) / mc_variance`; `None` when the reference Fisher
    /// information `I` is infinite.
    pub efficiency: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EfficiencyTable {
    pub rows: Vec<EfficiencyRow>,
}

/// The Monte-Carlo efficiency study: for every (density, size) cell, draw
/// `replications` samples and run every configured estimator on each.
pub fn run_efficiency(cfg: &ExperimentConfig) -> Result<EfficiencyTable, CliError> {
    let mut rows = Vec::new();
    for density in &cfg.densities {
        let tag = density.to_string();
        let info = density.fisher_info();
        for &n in &cfg.sizes {
            let mut estimates: Vec<Vec<f64>> =
                vec![Vec::with_capacity(cfg.replications); cfg.estimators.len()];
            let mut failures = vec![0usize; cfg.estimators.len()];
            for rep in 0..cfg.replications {
                let sample = density.sample(n, cell_seed(cfg.seed, &tag, n, rep));
                for (e, est) in cfg.estimators.iter().enumerate() {
                    match apply_estimator(est, &sample, cfg.eta) {
                        Ok(theta) => estimates[e].push(theta),
                        Err(_) => failures[e] += 1,
                    }
                }
            }
            for (e, est) in cfg.estimators.iter().enumerate() {
                let mc_variance = sample_variance(&estimates[e]);
                let efficiency = info
                    .is_finite()
                    .then(|| 1.0 / (n as f64 * info) / mc_variance);
                rows.push(EfficiencyRow {
                    density: tag.clone(),
                    estimator: est.to_string(),
                    n,
                    reps: cfg.replications,
                    failures: failures[e],
                    mc_variance,
                    efficiency,
                });
            }
        }
    }
    Ok(EfficiencyTable { rows })
}

#[derive(Debug, Clone)]
pub struct InfoRow {
    pub density: String,
    pub eta: f64,
    /// Fisher information truncated between the `eta` and `1-eta`
    /// quantiles.
    pub info_eta: f64,
    /// `info_eta / I`, or 0 when `I` is infinite.
    pub ratio: f64,
    /// The reference Fisher information is infinite, so the ratio column
    /// is a conventional 0 rather than a quotient.
    pub infinite_info: bool,
}

/// Truncated-information ratio curves over an eta grid.
pub fn run_info_curves(densities: &[RefDensity], etas: &[f64]) -> Result<Vec<InfoRow>, CliError> {
    if let Some(&eta) = etas.iter().find(|&&e| !(e > 0.0 && e < 0.5)) {
        return Err(CliError::Config(format!(
            "eta grid must lie inside (0, 0.5), got {eta}"
        )));
    }
    let mut rows = Vec::new();
    for density in densities {
        if !density.is_log_concave() {
            return Err(CliError::Config(format!(
                "truncated information needs a log-concave reference; {density} is not"
            )));
        }
        let tag = density.to_string();
        let info = density.fisher_info();
        for &eta in etas {
            let info_eta = density
                .truncated_info(eta)
                .map_err(|e| CliError::Internal(e.to_string()))?;
            let (ratio, infinite_info) = if info.is_finite() {
                (info_eta / info, false)
            } else {
                (0.0, true)
            };
            rows.push(InfoRow {
                density: tag.clone(),
                eta,
                info_eta,
                ratio,
                infinite_info,
            });
        }
    }
    Ok(rows)
}

/// Log-spaced default grid for the ratio curves, from 1e-6 up to 0.25.
pub fn default_eta_grid() -> Vec<f64> {
    let (lo, hi, points) = (1e-6f64.log10(), 0.25f64.log10(), 25);
    (0..points)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (points - 1) as f64))
        .collect()
}

/// Points on the characterization-function grid written by `diagnose`.
const DIAG_GRID: usize = 401;

#[derive(Debug)]
pub struct DiagnosticsReport {
    pub theta: f64,
    /// Largest folded distance `|x_i - theta|`; the grid spans `[0, radius]`.
    pub radius: f64,
    /// `(t, h(t))` pairs; `h >= 0` everywhere certifies the fit.
    pub grid: Vec<(f64, f64)>,
    pub min_h: f64,
    pub checks: symmle::Diagnostics,
}

/// Fit the joint MLE on one sample and evaluate the certificate function
/// and the structural checks.
pub fn run_diagnostics(sample: &[f64]) -> Result<DiagnosticsReport, CliError> {
    let mle = symmle::fit_mle(sample, &MleConfig::default())
        .map_err(|e| CliError::Internal(format!("fit failed: {e}")))?;
    let radius = mle.fit.radius();
    let mut grid = Vec::with_capacity(DIAG_GRID);
    let mut min_h = f64::INFINITY;
    for i in 0..DIAG_GRID {
        let t = radius * i as f64 / (DIAG_GRID - 1) as f64;
        let h = mle
            .fit
            .characterization_h(t)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        min_h = min_h.min(h);
        grid.push((t, h));
    }
    Ok(DiagnosticsReport {
        theta: mle.theta,
        radius,
        grid,
        min_h,
        checks: symmle::diagnostics(&mle.fit),
    })
}

/// Read a data file: one numeric value per line, `#` starts a comment,
/// blank lines are skipped. Rejects anything an estimator could not work
/// with, so failures here are bad *data*, not internal errors.
pub fn read_sample(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read data file {}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let value: f64 = body.parse().map_err(|_| {
            CliError::Data(format!(
                "{}: line {}: not a number: {body:?}",
                path.display(),
                idx + 1
            ))
        })?;
        if !value.is_finite() {
            return Err(CliError::Data(format!(
                "{}: line {}: non-finite value {value}",
                path.display(),
                idx + 1
            )));
        }
        values.push(value);
    }
    if values.len() < 2 {
        return Err(CliError::Data(format!(
            "{}: need at least 2 data points, got {}",
            path.display(),
            values.len()
        )));
    }
    if values.iter().all(|&v| v == values[0]) {
        return Err(CliError::Data(format!(
            "{}: degenerate sample: every value equals {}",
            path.display(),
            values[0]
        )));
    }
    Ok(values)
}

#[derive(Debug)]
pub struct EstimateOutcome {
    /// `(estimator label, estimate)` for the estimators that succeeded.
    pub rows: Vec<(String, f64)>,
    /// `(estimator label, error message)` for the ones that failed.
    pub failed: Vec<(String, String)>,
}

/// One-shot estimation on user data. Individual estimator failures are
/// reported, not fatal; only all of them failing is an error.
pub fn estimate_sample(
    sample: &[f64],
    estimators: &[Estimator],
    eta: f64,
) -> Result<EstimateOutcome, CliError> {
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for est in estimators {
        match apply_estimator(est, sample, eta) {
            Ok(theta) => rows.push((est.to_string(), theta)),
            Err(e @ (Error::InvalidSample(_) | Error::DegenerateSample(_))) => {
                return Err(CliError::Data(e.to_string()))
            }
            Err(e) => failed.push((est.to_string(), e.to_string())),
        }
    }
    if rows.is_empty() {
        let detail = failed
            .iter()
            .map(|(name, msg)| format!("{name}: {msg}"))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(CliError::Internal(format!(
            "every estimator failed: {detail}"
        )));
    }
    Ok(EstimateOutcome { rows, failed })
}
