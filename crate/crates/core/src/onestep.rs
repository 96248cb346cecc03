//! One-step location estimators.
//!
//! The pipeline runs in three stages: a cheap preliminary location estimate
//! ([`preliminary`]), a symmetric density estimate centered there
//! ([`estimate_density`], four flavors derived from the unconstrained
//! log-concave MLE), and a single Newton-type update ([`one_step`]) whose
//! step is the mean score over a truncation window divided by a plug-in
//! Fisher information ([`fisher_hat`]).
//!
//! All model evaluators work in the centered coordinate `z = x - theta_bar`.
//! Densities are even and scores odd by construction — evaluation goes
//! through `|z|` or through expressions symmetric in the two reflected
//! halves, so the symmetry is exact rather than up to fitting error.

use crate::lcmle::{self, FitConfig};
use crate::numeric::quad::integrate_segmented;
use crate::numeric::solve::bisect_root;
use crate::numeric::special::normal_cdf;
use crate::plcurve::{seg_mass, ExpLinearDensity, PLConcave, WeightedSample};
use crate::symmle::{self, SymFit};
use crate::{Error, Result};

/// Preliminary location estimate the one-step correction starts from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PreliminaryKind {
    Mean,
    Median,
    /// Drops `floor(n * alpha)` points from each tail, then averages.
    TrimmedMean(f64),
    /// Root of the logistic location estimating equation
    /// `Σ tanh((x_i - θ)/2) = 0`.
    LogisticMle,
}

impl PreliminaryKind {
    /// Conventional trimming fraction (12.5% from each tail).
    pub const DEFAULT_TRIM: f64 = 0.125;
}

/// Which of the four symmetric density estimates to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityEstimatorKind {
    /// Plain average of the fitted density and its reflection about the
    /// center.
    Sym,
    /// Gaussian-smoothed symmetrization with the variance-matching
    /// bandwidth.
    SmoothedSym,
    /// Symmetric log-concave MLE with the center pinned at `theta_bar`.
    PartialMle,
    /// Normalized geometric mean of the fitted density and its reflection,
    /// supported on the shorter side of the sample range.
    GeoSym,
}

/// Plug-in Fisher information flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FisherVariant {
    /// Mean of the squared score over the sample points inside the
    /// truncation window.
    Empirical,
    /// Integral of the squared score against the model itself over the
    /// window.
    ModelWeighted,
    /// Mean of the squared score over the whole sample; points with an
    /// unbounded score are dropped and counted.
    Untruncated,
}

pub fn preliminary(sample: &[f64], kind: PreliminaryKind) -> Result<f64> {
    if sample.len() < 2 {
        return Err(Error::Argument(format!(
            "preliminary estimate needs at least 2 points, got {}",
            sample.len()
        )));
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidSample(
            "sample contains non-finite values".into(),
        ));
    }
    let n = sample.len();
    match kind {
        PreliminaryKind::Mean => Ok(sample.iter().sum::<f64>() / n as f64),
        PreliminaryKind::Median => {
            let s = sorted(sample);
            Ok(if n % 2 == 1 {
                s[n / 2]
            } else {
                0.5 * (s[n / 2 - 1] + s[n / 2])
            })
        }
        PreliminaryKind::TrimmedMean(alpha) => {
            if !(0.0..0.5).contains(&alpha) {
                return Err(Error::Argument(format!(
                    "trimming fraction must lie in [0, 0.5), got {alpha}"
                )));
            }
            let k = (n as f64 * alpha).floor() as usize;
            if 2 * k >= n {
                return Err(Error::Argument(format!(
                    "trimming {k} points per tail empties a sample of {n}"
                )));
            }
            let s = sorted(sample);
            let kept = &s[k..n - k];
            Ok(kept.iter().sum::<f64>() / kept.len() as f64)
        }
        PreliminaryKind::LogisticMle => Ok(logistic_root(sample)),
    }
}

fn sorted(sample: &[f64]) -> Vec<f64> {
    let mut s = sample.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    s
}

/// The estimating function is strictly decreasing in theta, so bisect to a
/// rough root and let Newton finish.
fn logistic_root(sample: &[f64]) -> f64 {
    let g = |theta: f64| -> f64 { sample.iter().map(|x| ((x - theta) / 2.0).tanh()).sum() };
    let (mut lo, mut hi) = sample.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    });
    if lo == hi {
        return lo;
    }
    for _ in 0..20 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut theta = 0.5 * (lo + hi);
    for _ in 0..12 {
        let gv = g(theta);
        let dv: f64 = sample
            .iter()
            .map(|x| {
                let t = ((x - theta) / 2.0).tanh();
                -0.5 * (1.0 - t * t)
            })
            .sum();
        if dv.is_nan() || dv >= 0.0 {
            break;
        }
        let step = gv / dv;
        theta = (theta - step).clamp(lo, hi);
        if step.abs() <= 1e-10 * (1.0 + theta.abs()) {
            break;
        }
    }
    theta
}

/// A symmetric density estimate centered at the preliminary location.
///
/// Evaluators take the centered coordinate `z = x - theta_bar`; `density`
/// is even, `score` odd (the log-density derivative, right-sided at kinks,
/// left-sided at the right support endpoint), and `cdf`/`quantile` satisfy
/// `F(z) + F(-z) = 1`.
#[derive(Debug, Clone)]
pub struct SymmetricDensityModel {
    theta_bar: f64,
    inner: Inner,
}

#[derive(Debug, Clone)]
enum Inner {
    Sym {
        fit: ExpLinearDensity,
    },
    Smoothed {
        fit: ExpLinearDensity,
        bandwidth: f64,
        clamped: bool,
    },
    Partial {
        fit: SymFit,
    },
    Geo {
        fit: ExpLinearDensity,
        normalizer: f64,
    },
}

pub fn estimate_density(
    sample: &[f64],
    theta_bar: f64,
    kind: DensityEstimatorKind,
    cfg: &FitConfig,
) -> Result<SymmetricDensityModel> {
    if !theta_bar.is_finite() {
        return Err(Error::Argument(format!(
            "center must be finite, got {theta_bar}"
        )));
    }
    let inner = match kind {
        DensityEstimatorKind::Sym => Inner::Sym {
            fit: raw_fit(sample, cfg)?,
        },
        DensityEstimatorKind::SmoothedSym => {
            let fit = raw_fit(sample, cfg)?;
            let n = sample.len() as f64;
            let mean = sample.iter().sum::<f64>() / n;
            let sample_var =
                sample.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
            let (bandwidth, clamped) = clamp_bandwidth(sample_var - fit.variance());
            Inner::Smoothed {
                fit,
                bandwidth,
                clamped,
            }
        }
        DensityEstimatorKind::PartialMle => Inner::Partial {
            fit: symmle::fit_fixed_theta(sample, theta_bar, cfg)?,
        },
        DensityEstimatorKind::GeoSym => {
            let fit = raw_fit(sample, cfg)?;
            let (fit, normalizer) = geometric_symmetrization(&fit, theta_bar)?;
            Inner::Geo { fit, normalizer }
        }
    };
    Ok(SymmetricDensityModel { theta_bar, inner })
}

fn raw_fit(sample: &[f64], cfg: &FitConfig) -> Result<ExpLinearDensity> {
    let ws = WeightedSample::uniform(sample)?;
    Ok(lcmle::fit(&ws, cfg)?.density)
}

/// The plug-in bandwidth squared is nonnegative in exact arithmetic (the
/// fitted variance never exceeds the sample variance) but can come out a
/// hair negative in floating point; truncate and record.
fn clamp_bandwidth(b2: f64) -> (f64, bool) {
    if b2 > 0.0 {
        (b2.sqrt(), false)
    } else {
        (0.0, true)
    }
}

/// Average the log-density with its reflection about `center` on the common
/// support, then renormalize. The averaged log-curve is piecewise linear on
/// the union of the two reflected knot grids, so the normalizer is a finite
/// sum of segment masses.
///
/// Slopes are taken from exact segment lookups at midpoints and values built
/// by cumulative sums; evaluating the curve at both reflections instead
/// would let roundoff break concavity across short merged segments.
fn geometric_symmetrization(
    fit: &ExpLinearDensity,
    center: f64,
) -> Result<(ExpLinearDensity, f64)> {
    let (lo, hi) = fit.support();
    if !(lo < center && center < hi) {
        return Err(Error::SupportEmpty(format!(
            "center {center} must lie strictly inside the fitted support [{lo}, {hi}]"
        )));
    }
    let m = (hi - center).min(center - lo);
    let curve = fit.log_density();
    let mut ts = vec![0.0, m];
    for &k in curve.knots() {
        for t in [k - center, center - k] {
            if t > 0.0 && t < m {
                ts.push(t);
            }
        }
    }
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + m));
    *ts.last_mut().unwrap() = m;

    let mut half_vals = Vec::with_capacity(ts.len());
    half_vals.push(curve.eval(center));
    for j in 0..ts.len() - 1 {
        let mid = 0.5 * (ts[j] + ts[j + 1]);
        let s = 0.5
            * (curve
                .right_derivative(center + mid)
                .expect("midpoint strictly inside support")
                - curve
                    .right_derivative(center - mid)
                    .expect("midpoint strictly inside support"));
        half_vals.push(half_vals[j] + s * (ts[j + 1] - ts[j]));
    }

    let mut knots = Vec::with_capacity(2 * ts.len() - 1);
    let mut values = Vec::with_capacity(2 * ts.len() - 1);
    for j in (1..ts.len()).rev() {
        knots.push(-ts[j]);
        values.push(half_vals[j]);
    }
    for (j, &t) in ts.iter().enumerate() {
        knots.push(t);
        values.push(half_vals[j]);
    }
    let mass: f64 = (0..knots.len() - 1)
        .map(|i| seg_mass(values[i], values[i + 1], knots[i + 1] - knots[i]))
        .sum();
    let sym = PLConcave::new(knots, values)?;
    Ok((ExpLinearDensity::new(sym)?, 1.0 / mass))
}

impl SymmetricDensityModel {
    /// Wrap an externally fitted (unconstrained) density as a plain
    /// symmetrization about `theta_bar`; useful for analytic plug-ins.
    pub fn from_unconstrained(theta_bar: f64, fit: ExpLinearDensity) -> Self {
        Self {
            theta_bar,
            inner: Inner::Sym { fit },
        }
    }

    pub fn kind(&self) -> DensityEstimatorKind {
        match self.inner {
            Inner::Sym { .. } => DensityEstimatorKind::Sym,
            Inner::Smoothed { .. } => DensityEstimatorKind::SmoothedSym,
            Inner::Partial { .. } => DensityEstimatorKind::PartialMle,
            Inner::Geo { .. } => DensityEstimatorKind::GeoSym,
        }
    }

    pub fn theta_bar(&self) -> f64 {
        self.theta_bar
    }

    /// Smoothing bandwidth (smoothed variant only).
    pub fn bandwidth(&self) -> Option<f64> {
        match &self.inner {
            Inner::Smoothed { bandwidth, .. } => Some(*bandwidth),
            _ => None,
        }
    }

    /// True when the bandwidth formula went numerically nonpositive and the
    /// model fell back to the unsmoothed symmetrization.
    pub fn bandwidth_clamped(&self) -> bool {
        matches!(self.inner, Inner::Smoothed { clamped: true, .. })
    }

    /// Geometric-mean normalizing constant (that variant only).
    pub fn normalizer(&self) -> Option<f64> {
        match &self.inner {
            Inner::Geo { normalizer, .. } => Some(*normalizer),
            _ => None,
        }
    }

    /// Interval where the density is positive, in centered coordinates.
    pub fn support(&self) -> (f64, f64) {
        match &self.inner {
            Inner::Sym { fit } => sym_halfwidth(fit, self.theta_bar),
            Inner::Smoothed { fit, bandwidth, .. } => {
                if *bandwidth > 0.0 {
                    (f64::NEG_INFINITY, f64::INFINITY)
                } else {
                    sym_halfwidth(fit, self.theta_bar)
                }
            }
            Inner::Partial { fit } => (-fit.radius(), fit.radius()),
            Inner::Geo { fit, .. } => fit.support(),
        }
    }

    pub fn density(&self, z: f64) -> f64 {
        let th = self.theta_bar;
        match &self.inner {
            Inner::Sym { fit } => sym_density(fit, th, z),
            Inner::Smoothed { fit, bandwidth, .. } => {
                if *bandwidth > 0.0 {
                    let (dp, _) = smooth_pair(fit, *bandwidth, th + z);
                    let (dm, _) = smooth_pair(fit, *bandwidth, th - z);
                    0.5 * (dp + dm)
                } else {
                    sym_density(fit, th, z)
                }
            }
            Inner::Partial { fit } => fit.density(z),
            Inner::Geo { fit, .. } => fit.pdf(z.abs()),
        }
    }

    pub fn score(&self, z: f64) -> f64 {
        let th = self.theta_bar;
        match &self.inner {
            Inner::Sym { fit } => sym_score(fit, th, z),
            Inner::Smoothed { fit, bandwidth, .. } => {
                if *bandwidth > 0.0 {
                    let (dp, sp) = smooth_pair(fit, *bandwidth, th + z);
                    let (dm, sm) = smooth_pair(fit, *bandwidth, th - z);
                    if dp + dm == 0.0 {
                        return f64::NEG_INFINITY * z.signum();
                    }
                    let np = if dp > 0.0 { dp * sp } else { 0.0 };
                    let nm = if dm > 0.0 { dm * sm } else { 0.0 };
                    (np - nm) / (dp + dm)
                } else {
                    sym_score(fit, th, z)
                }
            }
            Inner::Partial { fit } => fit.score(z),
            Inner::Geo { fit, .. } => geo_score(fit, z),
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        let th = self.theta_bar;
        match &self.inner {
            Inner::Sym { fit } => sym_cdf(fit, th, z),
            Inner::Smoothed { fit, bandwidth, .. } => {
                if *bandwidth > 0.0 {
                    0.5 * (smooth_cdf(fit, *bandwidth, th + z) + 1.0
                        - smooth_cdf(fit, *bandwidth, th - z))
                } else {
                    sym_cdf(fit, th, z)
                }
            }
            Inner::Partial { fit } => fit.cdf(z),
            Inner::Geo { fit, .. } => geo_cdf(fit, z),
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Argument(format!(
                "quantile level must lie in (0, 1), got {p}"
            )));
        }
        match &self.inner {
            Inner::Partial { fit } => fit.quantile(p),
            Inner::Geo { fit, .. } => fit.quantile(p),
            Inner::Sym { .. } | Inner::Smoothed { .. } => {
                let (lo, hi) = self.bracket();
                let xtol = 1e-11 * (1.0 + hi - lo);
                bisect_root(|z| self.cdf(z) - p, lo, hi, xtol)
            }
        }
    }

    /// Finite interval that surely brackets every quantile of interest.
    fn bracket(&self) -> (f64, f64) {
        match &self.inner {
            Inner::Smoothed { fit, bandwidth, .. } if *bandwidth > 0.0 => {
                let (lo, hi) = sym_halfwidth(fit, self.theta_bar);
                (lo - 40.0 * bandwidth, hi + 40.0 * bandwidth)
            }
            _ => self.support(),
        }
    }

    /// Positive centered points where the score can kink; quadrature cuts
    /// for the model-weighted information.
    fn score_kinks(&self) -> Vec<f64> {
        let th = self.theta_bar;
        let mut ks: Vec<f64> = match &self.inner {
            Inner::Smoothed { bandwidth, .. } if *bandwidth > 0.0 => Vec::new(),
            Inner::Sym { fit } | Inner::Smoothed { fit, .. } => {
                let (_, d) = sym_halfwidth(fit, th);
                fit.log_density()
                    .knots()
                    .iter()
                    .map(|&k| (k - th).abs())
                    .filter(|&t| t > 0.0 && t < d)
                    .collect()
            }
            Inner::Partial { fit } => {
                let r = fit.radius();
                fit.full()
                    .log_density()
                    .knots()
                    .iter()
                    .copied()
                    .filter(|&t| t > 0.0 && t < r)
                    .collect()
            }
            Inner::Geo { fit, .. } => {
                let (_, m) = fit.support();
                fit.log_density()
                    .knots()
                    .iter()
                    .copied()
                    .filter(|&t| t > 0.0 && t < m)
                    .collect()
            }
        };
        ks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ks.dedup();
        ks
    }
}

fn sym_halfwidth(fit: &ExpLinearDensity, th: f64) -> (f64, f64) {
    let (lo, hi) = fit.support();
    let d = (hi - th).max(th - lo);
    (-d, d)
}

fn sym_density(fit: &ExpLinearDensity, th: f64, z: f64) -> f64 {
    0.5 * (fit.pdf(th + z) + fit.pdf(th - z))
}

fn sym_score(fit: &ExpLinearDensity, th: f64, z: f64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    let t = z.abs();
    let (xp, xm) = (th + t, th - t);
    let a = fit.pdf(xp);
    let b = fit.pdf(xm);
    if a + b == 0.0 {
        return f64::NEG_INFINITY * z.signum();
    }
    // Right-derivative in t; the reflected half contributes its left
    // derivative in x, negated. The curve's one-sided derivatives already
    // fall back to the interior slope at the support endpoints, which is
    // exactly the convention wanted there.
    let curve = fit.log_density();
    let mut num = 0.0;
    if a > 0.0 {
        num += curve.right_derivative(xp).expect("xp inside support") * a;
    }
    if b > 0.0 {
        num -= curve.left_derivative(xm).expect("xm inside support") * b;
    }
    z.signum() * num / (a + b)
}

fn sym_cdf(fit: &ExpLinearDensity, th: f64, z: f64) -> f64 {
    0.5 * (fit.cdf(th + z) + 1.0 - fit.cdf(th - z))
}

fn smooth_pair(fit: &ExpLinearDensity, b: f64, x: f64) -> (f64, f64) {
    fit.convolve_gaussian(b, x).expect("positive bandwidth")
}

/// Distribution function of the smoothed fit: the base density has compact
/// support, so `∫ f̂(t) Φ((x-t)/b) dt` over that support is exact.
fn smooth_cdf(fit: &ExpLinearDensity, b: f64, x: f64) -> f64 {
    let cuts = fit.log_density().knots().to_vec();
    integrate_segmented(
        |t| fit.pdf(t) * normal_cdf((x - t) / b),
        &cuts,
        1e-12,
        1e-10,
    )
    .expect("smooth bounded integrand on a finite window")
}

fn geo_score(fit: &ExpLinearDensity, z: f64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    let t = z.abs();
    let (_, hi) = fit.support();
    if t > hi {
        return f64::NEG_INFINITY * z.signum();
    }
    z.signum()
        * fit
            .log_density()
            .right_derivative(t)
            .expect("|z| inside support")
}

fn geo_cdf(fit: &ExpLinearDensity, z: f64) -> f64 {
    let half = fit.cdf(0.0);
    let g = fit.cdf(z.abs()) - half;
    (0.5 + z.signum() * g).clamp(0.0, 1.0)
}

/// Configuration of the full one-step pipeline.
#[derive(Debug, Clone)]
pub struct OneStepConfig {
    pub preliminary: PreliminaryKind,
    pub density: DensityEstimatorKind,
    /// Tail mass excluded on each side by the truncation window.
    pub eta: f64,
    /// Restrict the correction sum to the truncation window.
    pub truncated: bool,
    pub fisher: FisherVariant,
    /// Controls for the inner maximum-likelihood fits.
    pub fit: FitConfig,
}

impl Default for OneStepConfig {
    fn default() -> Self {
        Self {
            preliminary: PreliminaryKind::Mean,
            density: DensityEstimatorKind::PartialMle,
            eta: 0.002,
            truncated: true,
            fisher: FisherVariant::Empirical,
            fit: FitConfig::default(),
        }
    }
}

/// What a one-step update actually used.
#[derive(Debug, Clone)]
pub struct OneStepReport {
    pub theta_bar: f64,
    /// Truncation radius, when one was computed.
    pub xi: Option<f64>,
    /// Plugged-in Fisher information.
    pub fisher: f64,
    /// Sample points that entered the correction sum.
    pub window_count: usize,
    /// Points dropped for an unbounded score (untruncated variants only).
    pub dropped: usize,
    /// The smoothing bandwidth fell back to zero.
    pub bandwidth_clamped: bool,
}

struct FisherPieces {
    value: f64,
    xi: Option<f64>,
    dropped: usize,
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta < 0.5) {
        return Err(Error::Argument(format!(
            "truncation fraction must lie in (0, 0.5), got {eta}"
        )));
    }
    Ok(())
}

fn fisher_pieces(
    sample: &[f64],
    model: &SymmetricDensityModel,
    eta: f64,
    variant: FisherVariant,
) -> Result<FisherPieces> {
    let n = sample.len() as f64;
    let th = model.theta_bar();
    match variant {
        FisherVariant::Empirical => {
            check_eta(eta)?;
            let xi = model.quantile(1.0 - eta)?;
            let mut acc = 0.0;
            for &x in sample {
                let z = x - th;
                if z.abs() <= xi {
                    let s = model.score(z);
                    acc += s * s;
                }
            }
            Ok(FisherPieces {
                value: acc / n,
                xi: Some(xi),
                dropped: 0,
            })
        }
        FisherVariant::ModelWeighted => {
            check_eta(eta)?;
            let xi = model.quantile(1.0 - eta)?;
            let mut cuts = vec![0.0];
            cuts.extend(model.score_kinks().into_iter().filter(|&t| t < xi));
            cuts.push(xi);
            let value = 2.0
                * integrate_segmented(
                    |z| {
                        let s = model.score(z);
                        s * s * model.density(z)
                    },
                    &cuts,
                    1e-12,
                    1e-9,
                )?;
            Ok(FisherPieces {
                value,
                xi: Some(xi),
                dropped: 0,
            })
        }
        FisherVariant::Untruncated => {
            let mut acc = 0.0;
            let mut dropped = 0usize;
            for &x in sample {
                let s = model.score(x - th);
                if s.is_finite() {
                    acc += s * s;
                } else {
                    dropped += 1;
                }
            }
            Ok(FisherPieces {
                value: acc / n,
                xi: None,
                dropped,
            })
        }
    }
}

fn check_information(value: f64) -> Result<f64> {
    if value <= 1e-12 {
        return Err(Error::DegenerateInformation(format!(
            "plug-in information {value:.3e} is numerically zero"
        )));
    }
    Ok(value)
}

/// Plug-in Fisher information for a fitted model; `eta` is ignored by the
/// untruncated variant.
pub fn fisher_hat(
    sample: &[f64],
    model: &SymmetricDensityModel,
    eta: f64,
    variant: FisherVariant,
) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::Argument(
            "information plug-in needs a non-empty sample".into(),
        ));
    }
    check_information(fisher_pieces(sample, model, eta, variant)?.value)
}

/// One-step update from an already-built model. `cfg.preliminary`,
/// `cfg.density`, and `cfg.fit` are ignored — the model stands in for them.
pub fn one_step_with(
    sample: &[f64],
    model: &SymmetricDensityModel,
    cfg: &OneStepConfig,
) -> Result<(f64, OneStepReport)> {
    if sample.is_empty() {
        return Err(Error::Argument(
            "one-step update needs a non-empty sample".into(),
        ));
    }
    let th = model.theta_bar();
    let n = sample.len() as f64;
    let info = fisher_pieces(sample, model, cfg.eta, cfg.fisher)?;
    let fisher = check_information(info.value)?;

    let (sum, window_count, dropped, xi) = if cfg.truncated {
        check_eta(cfg.eta)?;
        let xi = match info.xi {
            Some(x) => x,
            None => model.quantile(1.0 - cfg.eta)?,
        };
        let mut sum = 0.0;
        let mut count = 0usize;
        for &x in sample {
            let z = x - th;
            if z.abs() <= xi {
                sum += model.score(z);
                count += 1;
            }
        }
        (sum, count, info.dropped, Some(xi))
    } else {
        let mut sum = 0.0;
        let mut count = 0usize;
        let mut dropped = 0usize;
        for &x in sample {
            let s = model.score(x - th);
            if s.is_finite() {
                sum += s;
                count += 1;
            } else {
                dropped += 1;
            }
        }
        (sum, count, dropped.max(info.dropped), info.xi)
    };

    let theta = th - sum / (n * fisher);
    Ok((
        theta,
        OneStepReport {
            theta_bar: th,
            xi,
            fisher,
            window_count,
            dropped,
            bandwidth_clamped: model.bandwidth_clamped(),
        },
    ))
}

/// Full pipeline: preliminary estimate, symmetric density fit, one Newton
/// step.
pub fn one_step(sample: &[f64], cfg: &OneStepConfig) -> Result<(f64, OneStepReport)> {
    let theta_bar = preliminary(sample, cfg.preliminary)?;
    let model = estimate_density(sample, theta_bar, cfg.density, &cfg.fit)?;
    one_step_with(sample, &model, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::quad::integrate_segmented;
    use crate::numeric::special::normal_pdf;
    use crate::refdist::RefDensity;
    use std::f64::consts::LN_2;

    fn fit_cfg() -> FitConfig {
        FitConfig::default()
    }

    /// Wide analytic Laplace density as an exp-linear curve; the missing
    /// tail mass beyond ±w is ~e^{-w}, far below every tolerance used here.
    fn laplace_plug(w: f64) -> SymmetricDensityModel {
        let curve = PLConcave::new(vec![-w, 0.0, w], vec![-w - LN_2, -LN_2, -w - LN_2]).unwrap();
        SymmetricDensityModel::from_unconstrained(0.0, ExpLinearDensity::new(curve).unwrap())
    }

    #[test]
    fn preliminary_estimates() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(preliminary(&s, PreliminaryKind::Mean).unwrap(), 2.5);
        assert_eq!(preliminary(&s, PreliminaryKind::Median).unwrap(), 2.5);
        assert_eq!(
            preliminary(&[3.0, -3.0, 0.0], PreliminaryKind::Median).unwrap(),
            0.0
        );

        let eight: Vec<f64> = (1..=8).map(|i| i as f64).collect();
        assert_eq!(
            preliminary(&eight, PreliminaryKind::TrimmedMean(0.125)).unwrap(),
            4.5
        );
        // Zero trimming is the plain mean.
        assert_eq!(
            preliminary(&s, PreliminaryKind::TrimmedMean(0.0)).unwrap(),
            2.5
        );

        // The logistic estimating equation is odd about the symmetry
        // center, so symmetric samples pin the root there.
        let sym = [0.0, 1.0, 2.0, 3.0];
        let root = preliminary(&sym, PreliminaryKind::LogisticMle).unwrap();
        assert!((root - 1.5).abs() < 1e-9, "logistic root {root}");
        let shifted: Vec<f64> = sym.iter().map(|x| x + 10.25).collect();
        let root2 = preliminary(&shifted, PreliminaryKind::LogisticMle).unwrap();
        assert!((root2 - 11.75).abs() < 1e-9);

        assert!(preliminary(&[1.0], PreliminaryKind::Mean).is_err());
        assert!(preliminary(&s, PreliminaryKind::TrimmedMean(0.5)).is_err());
        assert!(preliminary(&s, PreliminaryKind::TrimmedMean(-0.1)).is_err());
        assert!(preliminary(&[1.0, f64::NAN], PreliminaryKind::Mean).is_err());
    }

    #[test]
    fn sym_model_reflects_the_raw_fit() {
        // For an exactly symmetric sample the unconstrained MLE is itself
        // symmetric, so averaging it with its reflection changes nothing.
        let sample = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];
        let raw = raw_fit(&sample, &fit_cfg()).unwrap();
        let model =
            estimate_density(&sample, 0.0, DensityEstimatorKind::Sym, &fit_cfg()).unwrap();
        assert_eq!(model.support(), (-2.0, 2.0));
        for z in [0.1, 0.6, 1.3, 1.9] {
            assert!(
                (model.density(z) - raw.pdf(z)).abs() < 1e-6,
                "density mismatch at {z}: {} vs {}",
                model.density(z),
                raw.pdf(z)
            );
            // Evenness is structural, not a fitting property.
            assert_eq!(model.density(z), model.density(-z));
            assert!((model.cdf(z) + model.cdf(-z) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn partial_model_on_two_points_is_uniform() {
        let sample = [0.0, 2.0];
        let model =
            estimate_density(&sample, 1.0, DensityEstimatorKind::PartialMle, &fit_cfg()).unwrap();
        for z in [-0.9, -0.3, 0.4, 0.8] {
            assert!((model.density(z) - 0.5).abs() < 1e-9);
            assert!(model.score(z).abs() < 1e-12);
        }
        assert!((model.quantile(0.75).unwrap() - 0.5).abs() < 1e-8);

        // A flat score carries no information.
        let err = fisher_hat(&sample, &model, 0.002, FisherVariant::Empirical).unwrap_err();
        assert!(matches!(err, Error::DegenerateInformation(_)));
        let err = one_step(&sample, &OneStepConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateInformation(_)));
    }

    #[test]
    fn geo_model_support_and_uniform_case() {
        // The fit of {0, 10} is uniform; centered at 2 the geometric mean
        // lives on [-2, 2] and stays uniform, so C = 1/0.4.
        let sample = [0.0, 10.0];
        let model =
            estimate_density(&sample, 2.0, DensityEstimatorKind::GeoSym, &fit_cfg()).unwrap();
        assert_eq!(model.support(), (-2.0, 2.0));
        assert!((model.density(0.7) - 0.25).abs() < 1e-9);
        assert!((model.normalizer().unwrap() - 2.5).abs() < 1e-8);

        for bad in [-0.5, 0.0, 10.0, 11.0] {
            let err =
                estimate_density(&sample, bad, DensityEstimatorKind::GeoSym, &fit_cfg())
                    .unwrap_err();
            assert!(matches!(err, Error::SupportEmpty(_)), "center {bad}");
        }
    }

    #[test]
    fn bandwidth_clamp_truncates_at_zero() {
        assert_eq!(clamp_bandwidth(4.0), (2.0, false));
        assert_eq!(clamp_bandwidth(0.0), (0.0, true));
        assert_eq!(clamp_bandwidth(-1e-17), (0.0, true));
    }

    #[test]
    fn smoothed_bandwidth_and_representation() {
        let base = RefDensity::Normal.sample(25, 505);
        let theta = preliminary(&base, PreliminaryKind::Mean).unwrap();
        let model =
            estimate_density(&base, theta, DensityEstimatorKind::SmoothedSym, &fit_cfg()).unwrap();
        let b = model.bandwidth().unwrap();
        assert!(!model.bandwidth_clamped());

        // The bandwidth squares to sample variance minus fitted variance.
        let raw = raw_fit(&base, &fit_cfg()).unwrap();
        let n = base.len() as f64;
        let mean = base.iter().sum::<f64>() / n;
        let sv = base.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        assert!((b * b - (sv - raw.variance())).abs() < 1e-13);

        // Smoothing and symmetrizing commute: the model (which smooths the
        // two reflected halves) must match a direct numerical convolution
        // of the symmetrized density.
        let plain =
            estimate_density(&base, theta, DensityEstimatorKind::Sym, &fit_cfg()).unwrap();
        let (_, d) = plain.support();
        let mut cuts: Vec<f64> = plain.score_kinks();
        let mut all = vec![0.0, d];
        for t in cuts.drain(..) {
            all.push(t);
            all.push(-t);
        }
        all.push(-d);
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for z in [-1.3, 0.4, 2.0] {
            let direct = integrate_segmented(
                |t| plain.density(t) * normal_pdf((z - t) / b) / b,
                &all,
                1e-12,
                1e-10,
            )
            .unwrap();
            assert!(
                (model.density(z) - direct).abs() < 1e-10,
                "two smoothing paths disagree at {z}: {} vs {direct}",
                model.density(z)
            );
        }

        // Exact complement symmetry and a quantile roundtrip.
        assert!((model.cdf(0.9) + model.cdf(-0.9) - 1.0).abs() < 1e-15);
        let q = model.quantile(0.9).unwrap();
        assert!((model.cdf(q) - 0.9).abs() < 1e-9);
    }

    #[test]
    fn laplace_plug_fisher_and_window() {
        let model = laplace_plug(30.0);
        assert!((model.score(2.0) + 1.0).abs() < 1e-12);
        assert!((model.score(-2.0) - 1.0).abs() < 1e-12);

        // (1-eta)-quantile of the Laplace distribution is -ln(2 eta).
        let xi = model.quantile(0.998).unwrap();
        assert!((xi - 5.521460917862246).abs() < 1e-6, "xi {xi}");

        // Scores square to one, so the empirical plug-in counts window
        // coverage: everything inside at eta = 0.002, three of four points
        // inside when the window shrinks to 2.5.
        let sample = [-3.0, -1.0, 0.5, 2.0];
        let all = fisher_hat(&sample, &model, 0.002, FisherVariant::Empirical).unwrap();
        assert!((all - 1.0).abs() < 1e-10);
        let eta25 = 0.5 * (-2.5f64).exp();
        let part = fisher_hat(&sample, &model, eta25, FisherVariant::Empirical).unwrap();
        assert!((part - 0.75).abs() < 1e-9);

        // Model-weighted version integrates score² dH = 1 - 2 eta.
        let mw = fisher_hat(&sample, &model, 0.002, FisherVariant::ModelWeighted).unwrap();
        assert!((mw - 0.996).abs() < 1e-6, "model-weighted {mw}");

        // Hand-checkable correction: mean score of {-2,-1,3} is 1/3.
        let cfg = OneStepConfig {
            truncated: false,
            fisher: FisherVariant::Untruncated,
            ..OneStepConfig::default()
        };
        let data = [-2.0, -1.0, 3.0];
        let (theta, report) = one_step_with(&data, &model, &cfg).unwrap();
        assert!((theta + 1.0 / 3.0).abs() < 1e-12, "theta {theta}");
        assert!((report.fisher - 1.0).abs() < 1e-12);
        assert_eq!(report.window_count, 3);
        assert_eq!(report.dropped, 0);
        assert_eq!(report.xi, None);

        let cfg = OneStepConfig {
            truncated: true,
            ..OneStepConfig::default()
        };
        let (_, report) = one_step_with(&data, &model, &cfg).unwrap();
        assert!((report.xi.unwrap() - 5.5214609).abs() < 1e-5);
        assert_eq!(report.window_count, 3);
    }

    #[test]
    fn models_are_even_normalized_and_odd_scored() {
        let base: Vec<f64> = RefDensity::Logistic
            .sample(60, 1234)
            .iter()
            .map(|x| x + 0.7)
            .collect();
        let theta = preliminary(
            &base,
            PreliminaryKind::TrimmedMean(PreliminaryKind::DEFAULT_TRIM),
        )
        .unwrap();

        for kind in [
            DensityEstimatorKind::Sym,
            DensityEstimatorKind::SmoothedSym,
            DensityEstimatorKind::PartialMle,
            DensityEstimatorKind::GeoSym,
        ] {
            let model = estimate_density(&base, theta, kind, &fit_cfg()).unwrap();
            let (_, hi) = model.support();
            let probes: Vec<f64> = [0.137, 0.491, 0.953, 1.611, 2.93]
                .iter()
                .copied()
                .filter(|z| *z < hi.min(1e300))
                .collect();
            let scale = model.density(0.0).max(1.0);
            for &z in &probes {
                assert!(
                    (model.density(z) - model.density(-z)).abs() <= 1e-12 * scale,
                    "{kind:?} density uneven at {z}"
                );
                let (sp, sm) = (model.score(z), model.score(-z));
                assert!((sp + sm).abs() <= 1e-10, "{kind:?} score not odd at {z}");
                assert!(
                    (model.cdf(z) + model.cdf(-z) - 1.0).abs() <= 1e-12,
                    "{kind:?} cdf complement at {z}"
                );
            }

            // Scores of the log-concave variants cannot increase.
            if matches!(
                kind,
                DensityEstimatorKind::PartialMle | DensityEstimatorKind::GeoSym
            ) {
                let mut last = f64::INFINITY;
                for &z in &probes {
                    let s = model.score(z);
                    assert!(s <= last + 1e-12, "{kind:?} score rises at {z}");
                    last = s;
                }
            }

            // Unit mass, integrating across the score kinks.
            let mut cuts = vec![0.0];
            cuts.extend(model.score_kinks());
            let edge = if model.bandwidth().unwrap_or(0.0) > 0.0 {
                let (_, d) = model.bracket();
                d
            } else {
                hi
            };
            cuts.push(edge);
            let half = integrate_segmented(|z| model.density(z), &cuts, 1e-11, 1e-9).unwrap();
            assert!(
                (2.0 * half - 1.0).abs() < 1e-8,
                "{kind:?} mass {}",
                2.0 * half
            );

            for p in [0.2, 0.5, 0.9] {
                let q = model.quantile(p).unwrap();
                assert!(
                    (model.cdf(q) - p).abs() < 1e-8,
                    "{kind:?} quantile roundtrip at {p}"
                );
            }
        }
    }

    #[test]
    fn truncation_monotonicity() {
        let base = RefDensity::Normal.sample(40, 77);
        let theta = preliminary(&base, PreliminaryKind::Mean).unwrap();
        let model =
            estimate_density(&base, theta, DensityEstimatorKind::PartialMle, &fit_cfg()).unwrap();

        // Growing eta shrinks the window, which can only remove terms from
        // the empirical sum; the untruncated value dominates them all.
        let untrunc = fisher_hat(&base, &model, 0.1, FisherVariant::Untruncated).unwrap();
        let mut last = untrunc + 1e-12;
        for eta in [0.002, 0.02, 0.1] {
            let f = fisher_hat(&base, &model, eta, FisherVariant::Empirical).unwrap();
            assert!(f <= last + 1e-12, "information rose at eta {eta}");
            assert!(untrunc + 1e-12 >= f);
            last = f;
        }

        // Truncating hard enough that the window sinks into the flat top
        // of the fitted log-density leaves a zero score everywhere inside.
        let err = fisher_hat(&base, &model, 0.3, FisherVariant::Empirical).unwrap_err();
        assert!(matches!(err, Error::DegenerateInformation(_)));

        let mw = fisher_hat(&base, &model, 0.002, FisherVariant::ModelWeighted).unwrap();
        assert!(mw > 0.0 && mw.is_finite());
    }

    #[test]
    fn one_step_is_shift_equivariant() {
        let base = RefDensity::Normal.sample(40, 9090);
        let shift = 3.25;
        let shifted: Vec<f64> = base.iter().map(|x| x + shift).collect();
        let cases = [
            (PreliminaryKind::Mean, DensityEstimatorKind::PartialMle),
            (PreliminaryKind::Median, DensityEstimatorKind::Sym),
            (
                PreliminaryKind::TrimmedMean(0.125),
                DensityEstimatorKind::GeoSym,
            ),
            (
                PreliminaryKind::LogisticMle,
                DensityEstimatorKind::SmoothedSym,
            ),
        ];
        for (pre, dens) in cases {
            let cfg = OneStepConfig {
                preliminary: pre,
                density: dens,
                ..OneStepConfig::default()
            };
            let (a, _) = one_step(&base, &cfg).unwrap();
            let (b, _) = one_step(&shifted, &cfg).unwrap();
            assert!(
                (b - a - shift).abs() < 1e-7,
                "{pre:?}/{dens:?}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn symmetric_sample_is_a_fixed_point() {
        // Mean zero exactly, scores odd exactly: the correction vanishes.
        let sample = [-2.5, -1.0, -0.25, 0.25, 1.0, 2.5];
        for dens in [
            DensityEstimatorKind::Sym,
            DensityEstimatorKind::SmoothedSym,
            DensityEstimatorKind::PartialMle,
            DensityEstimatorKind::GeoSym,
        ] {
            let cfg = OneStepConfig {
                density: dens,
                ..OneStepConfig::default()
            };
            let (theta, report) = one_step(&sample, &cfg).unwrap();
            assert_eq!(report.theta_bar, 0.0);
            assert!(theta.abs() < 1e-12, "{dens:?} moved to {theta}");
        }
    }

    #[test]
    fn untruncated_drops_unbounded_scores() {
        // The geometric-mean model lives on the shorter side of the range,
        // so the far point at 10 falls outside its support and carries an
        // unbounded score.
        let sample = [0.0, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 10.0];
        let cfg = OneStepConfig {
            density: DensityEstimatorKind::GeoSym,
            truncated: false,
            fisher: FisherVariant::Untruncated,
            ..OneStepConfig::default()
        };
        let (theta, report) = one_step(&sample, &cfg).unwrap();
        assert_eq!(report.theta_bar, 3.0);
        assert_eq!(report.dropped, 1);
        assert_eq!(report.window_count, 7);
        assert!(theta.is_finite());
    }
}
