//! Run configuration: estimator tokens, defaults, the flat `key=value`
//! config file, and the flag > file > default precedence rule.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use symloc::onestep::{DensityEstimatorKind, PreliminaryKind};
use symloc::refdist::RefDensity;

use crate::CliError;

pub const DEFAULT_SIZES: &[usize] = &[30, 100, 200, 500];
/// Desk-scale replication count; the full-scale study uses
/// [`FULL_SCALE_REPS`] (pass `--reps 3000`).
pub const DEFAULT_REPS: usize = 300;
pub const FULL_SCALE_REPS: usize = 3000;
pub const DEFAULT_ETA: f64 = 0.002;
pub const DEFAULT_SEED: u64 = 17;
pub const DEFAULT_DENSITIES: &str = "normal,logistic,laplace,symbeta(2.1)";
pub const DEFAULT_ESTIMATORS: &str = "mean,median,trimmed,os-mean-partial,os-mean-smooth";
/// `estimate` runs once on one file, so it defaults to the headline
/// estimators even though one of them (the joint MLE) is too slow to be a
/// Monte-Carlo default.
pub const DEFAULT_ESTIMATE_ESTIMATORS: &str = "mle,os-mean-partial,os-mean-smooth";

/// An estimator of the center, as named on the command line and in the
/// `estimator` column of the efficiency table.
///
/// Tokens: `mean`, `median`, `trimmed` (12.5% from each tail),
/// `trimmed(F)`, `logistic`, `mle`, and
/// `os-<preliminary>-<density>[-untrunc]` for the one-step estimators,
/// where `<density>` is one of `sym`, `smooth`, `partial`, `geo`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    /// A preliminary estimator used on its own, as a baseline.
    Preliminary(PreliminaryKind),
    /// The joint maximum-likelihood estimate of the center.
    Mle,
    /// A one-step correction of a preliminary estimate. `truncated`
    /// selects between the windowed Fisher plug-in and the untruncated
    /// one that drops unbounded scores.
    OneStep {
        preliminary: PreliminaryKind,
        density: DensityEstimatorKind,
        truncated: bool,
    },
}

fn prelim_token(kind: PreliminaryKind, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match kind {
        PreliminaryKind::Mean => write!(f, "mean"),
        PreliminaryKind::Median => write!(f, "median"),
        PreliminaryKind::LogisticMle => write!(f, "logistic"),
        PreliminaryKind::TrimmedMean(alpha) => {
            if alpha == PreliminaryKind::DEFAULT_TRIM {
                write!(f, "trimmed")
            } else {
                write!(f, "trimmed({alpha})")
            }
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Estimator::Preliminary(kind) => prelim_token(kind, f),
            Estimator::Mle => write!(f, "mle"),
            Estimator::OneStep {
                preliminary,
                density,
                truncated,
            } => {
                write!(f, "os-")?;
                prelim_token(preliminary, f)?;
                let d = match density {
                    DensityEstimatorKind::Sym => "sym",
                    DensityEstimatorKind::SmoothedSym => "smooth",
                    DensityEstimatorKind::PartialMle => "partial",
                    DensityEstimatorKind::GeoSym => "geo",
                };
                write!(f, "-{d}")?;
                if !truncated {
                    write!(f, "-untrunc")?;
                }
                Ok(())
            }
        }
    }
}

fn parse_prelim(s: &str) -> Option<PreliminaryKind> {
    match s {
        "mean" => Some(PreliminaryKind::Mean),
        "median" => Some(PreliminaryKind::Median),
        "logistic" => Some(PreliminaryKind::LogisticMle),
        "trimmed" => Some(PreliminaryKind::TrimmedMean(PreliminaryKind::DEFAULT_TRIM)),
        _ => {
            let body = s.strip_prefix("trimmed(")?.strip_suffix(')')?;
            let alpha: f64 = body.trim().parse().ok()?;
            if alpha.is_finite() && (0.0..0.5).contains(&alpha) {
                Some(PreliminaryKind::TrimmedMean(alpha))
            } else {
                None
            }
        }
    }
}

impl FromStr for Estimator {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let s = s.trim();
        if s == "mle" {
            return Ok(Estimator::Mle);
        }
        if let Some(kind) = parse_prelim(s) {
            return Ok(Estimator::Preliminary(kind));
        }
        if let Some(rest) = s.strip_prefix("os-") {
            let (rest, truncated) = match rest.strip_suffix("-untrunc") {
                Some(r) => (r, false),
                None => (rest, true),
            };
            if let Some((prelim, density)) = rest.rsplit_once('-') {
                let density = match density {
                    "sym" => Some(DensityEstimatorKind::Sym),
                    "smooth" => Some(DensityEstimatorKind::SmoothedSym),
                    "partial" => Some(DensityEstimatorKind::PartialMle),
                    "geo" => Some(DensityEstimatorKind::GeoSym),
                    _ => None,
                };
                if let (Some(preliminary), Some(density)) = (parse_prelim(prelim), density) {
                    return Ok(Estimator::OneStep {
                        preliminary,
                        density,
                        truncated,
                    });
                }
            }
        }
        Err(CliError::Config(format!(
            "unknown estimator {s:?}; expected mean, median, trimmed, trimmed(F), \
             logistic, mle, or os-<preliminary>-<density>[-untrunc] with density \
             one of sym, smooth, partial, geo"
        )))
    }
}

/// Everything a run needs. Subcommands ignore the fields they have no use
/// for (`estimate` never draws samples, so `sizes` and `seed` are unused
/// there).
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub densities: Vec<RefDensity>,
    pub sizes: Vec<usize>,
    pub replications: usize,
    pub estimators: Vec<Estimator>,
    /// Tail mass excluded on each side by the one-step truncation window.
    pub eta: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            densities: parse_densities(DEFAULT_DENSITIES).unwrap(),
            sizes: DEFAULT_SIZES.to_vec(),
            replications: DEFAULT_REPS,
            estimators: parse_estimators(DEFAULT_ESTIMATORS).unwrap(),
            eta: DEFAULT_ETA,
            seed: DEFAULT_SEED,
            out_dir: PathBuf::from("."),
        }
    }
}

/// Raw flag values. `None` means the flag was not given, so the config
/// file (then the default) decides.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub eta: Option<f64>,
    pub out: Option<PathBuf>,
    pub densities: Option<String>,
    pub sizes: Option<String>,
    pub estimators: Option<String>,
}

#[derive(Debug, Default)]
struct FileValues {
    seed: Option<u64>,
    reps: Option<usize>,
    eta: Option<f64>,
    out: Option<PathBuf>,
    densities: Option<String>,
    sizes: Option<String>,
    estimators: Option<String>,
}

fn parse_config_file(path: &Path) -> Result<FileValues, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config file {}: {e}", path.display())))?;
    let mut out = FileValues::default();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |what: &str| {
            CliError::Config(format!(
                "config file {}: line {}: {what}",
                path.display(),
                idx + 1
            ))
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad("expected key=value"))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "seed" => out.seed = Some(value.parse().map_err(|_| bad("seed must be an integer"))?),
            "reps" => out.reps = Some(value.parse().map_err(|_| bad("reps must be an integer"))?),
            "eta" => out.eta = Some(value.parse().map_err(|_| bad("eta must be a number"))?),
            "out" => out.out = Some(PathBuf::from(value)),
            "densities" => out.densities = Some(value.to_string()),
            "sizes" => out.sizes = Some(value.to_string()),
            "estimators" => out.estimators = Some(value.to_string()),
            other => {
                return Err(bad(&format!(
                    "unknown key {other:?} (valid: seed, reps, eta, out, densities, sizes, estimators)"
                )))
            }
        }
    }
    Ok(out)
}

pub fn parse_densities(s: &str) -> Result<Vec<RefDensity>, CliError> {
    let list: Vec<RefDensity> = s
        .split(',')
        .map(|tok| {
            RefDensity::from_str(tok).map_err(|e| CliError::Config(format!("bad density list: {e}")))
        })
        .collect::<Result<_, _>>()?;
    if list.is_empty() {
        return Err(CliError::Config("empty density list".into()));
    }
    Ok(list)
}

pub fn parse_sizes(s: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Config(format!("bad sample size {:?}", tok.trim())))
        })
        .collect()
}

pub fn parse_estimators(s: &str) -> Result<Vec<Estimator>, CliError> {
    s.split(',').map(|tok| tok.parse()).collect()
}

impl ExperimentConfig {
    /// Merge flags over the config file over the defaults, then validate.
    pub fn resolve(config_file: Option<&Path>, ov: &Overrides) -> Result<Self, CliError> {
        Self::resolve_with(config_file, ov, DEFAULT_ESTIMATORS)
    }

    /// [`resolve`](Self::resolve) with the `estimate` subcommand's
    /// estimator default.
    pub fn resolve_for_estimate(
        config_file: Option<&Path>,
        ov: &Overrides,
    ) -> Result<Self, CliError> {
        Self::resolve_with(config_file, ov, DEFAULT_ESTIMATE_ESTIMATORS)
    }

    fn resolve_with(
        config_file: Option<&Path>,
        ov: &Overrides,
        default_estimators: &str,
    ) -> Result<Self, CliError> {
        let file = match config_file {
            Some(path) => parse_config_file(path)?,
            None => FileValues::default(),
        };
        let defaults = ExperimentConfig::default();
        let cfg = ExperimentConfig {
            densities: match ov.densities.as_deref().or(file.densities.as_deref()) {
                Some(s) => parse_densities(s)?,
                None => defaults.densities,
            },
            sizes: match ov.sizes.as_deref().or(file.sizes.as_deref()) {
                Some(s) => parse_sizes(s)?,
                None => defaults.sizes,
            },
            replications: ov.reps.or(file.reps).unwrap_or(defaults.replications),
            estimators: parse_estimators(
                ov.estimators
                    .as_deref()
                    .or(file.estimators.as_deref())
                    .unwrap_or(default_estimators),
            )?,
            eta: ov.eta.or(file.eta).unwrap_or(defaults.eta),
            seed: ov.seed.or(file.seed).unwrap_or(defaults.seed),
            out_dir: ov
                .out
                .clone()
                .or(file.out)
                .unwrap_or(defaults.out_dir),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.replications < 2 {
            return Err(CliError::Config(format!(
                "replications must be at least 2, got {}",
                self.replications
            )));
        }
        if self.sizes.is_empty() {
            return Err(CliError::Config("empty size list".into()));
        }
        if let Some(&n) = self.sizes.iter().find(|&&n| n < 5) {
            return Err(CliError::Config(format!(
                "sample sizes must be at least 5, got {n}"
            )));
        }
        if !(self.eta > 0.0 && self.eta < 0.5) {
            return Err(CliError::Config(format!(
                "eta must lie in (0, 0.5), got {}",
                self.eta
            )));
        }
        if self.estimators.is_empty() {
            return Err(CliError::Config("empty estimator list".into()));
        }
        Ok(())
    }
}
