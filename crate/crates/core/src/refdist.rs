//! Analytic reference distributions for experiments and calibration: exact
//! densities, scores, Fisher information (plain and truncated), closed-form
//! log-concave projections of the heavy-tailed and bimodal cases, the
//! truncated-information functionals those projections induce, and seeded
//! samplers.
//!
//! Everything is standardized to center 0. The log-concave members (normal,
//! logistic, Laplace, symmetrized beta) are their own projections; the
//! rescaled t₂ projects onto the standard Laplace, and the two bimodal
//! mixtures project onto flat-top densities that match the source outside a
//! plateau `[-z, z]`.

use std::f64::consts::{LN_2, PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::numeric::quad::{integrate, integrate_segmented};
use crate::numeric::solve::bisect_root;
use crate::numeric::special::{ln_gamma, normal_cdf, normal_pdf};
use crate::{Error, Result};

/// A reference distribution, standardized to center 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RefDensity {
    Normal,
    Logistic,
    Laplace,
    /// Symmetrized beta on `[-√r, √r]` with density proportional to
    /// `(1 - x²/r)^(r/2)`. Log-concave for every `r > 0`, but its Fisher
    /// information is finite only for `r > 2`.
    SymBeta(f64),
    /// Student t with 2 degrees of freedom, rescaled so the density is
    /// `(1/2)(1 + x²)^(-3/2)`. Heavy-tailed: no finite variance.
    StudentT2Rescaled,
    /// Equal-weight mixture of two standard normals centered at ±2.
    GaussMixture,
    /// Equal-weight mixture of two standard Laplace densities centered at ±2.
    LaplaceMixture,
}

impl fmt::Display for RefDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            RefDensity::Normal => write!(f, "normal"),
            RefDensity::Logistic => write!(f, "logistic"),
            RefDensity::Laplace => write!(f, "laplace"),
            RefDensity::SymBeta(r) => write!(f, "symbeta({r})"),
            RefDensity::StudentT2Rescaled => write!(f, "t2"),
            RefDensity::GaussMixture => write!(f, "gauss-mixture"),
            RefDensity::LaplaceMixture => write!(f, "laplace-mixture"),
        }
    }
}

impl FromStr for RefDensity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(body) = s.strip_prefix("symbeta(").and_then(|t| t.strip_suffix(')')) {
            let r: f64 = body
                .trim()
                .parse()
                .map_err(|_| Error::Argument(format!("bad symbeta parameter {body:?}")))?;
            if !r.is_finite() || r <= 0.0 {
                return Err(Error::Argument(format!(
                    "symbeta parameter must be positive, got {r}"
                )));
            }
            return Ok(RefDensity::SymBeta(r));
        }
        match s {
            "normal" => Ok(RefDensity::Normal),
            "logistic" => Ok(RefDensity::Logistic),
            "laplace" => Ok(RefDensity::Laplace),
            "t2" => Ok(RefDensity::StudentT2Rescaled),
            "gauss-mixture" => Ok(RefDensity::GaussMixture),
            "laplace-mixture" => Ok(RefDensity::LaplaceMixture),
            _ => Err(Error::Argument(format!("unknown density {s:?}"))),
        }
    }
}

fn laplace_cdf(x: f64) -> f64 {
    if x < 0.0 {
        0.5 * x.exp()
    } else {
        1.0 - 0.5 * (-x).exp()
    }
}

impl RefDensity {
    /// Log of the symmetrized-beta normalizer Γ((3+r)/2) / (√(πr) Γ(1+r/2)).
    fn symbeta_ln_norm(r: f64) -> f64 {
        ln_gamma(0.5 * (3.0 + r)) - 0.5 * (PI * r).ln() - ln_gamma(1.0 + 0.5 * r)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            RefDensity::Normal => normal_pdf(x),
            RefDensity::Logistic => {
                let e = (-x.abs()).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
            RefDensity::Laplace => 0.5 * (-x.abs()).exp(),
            RefDensity::SymBeta(r) => {
                if x * x >= r {
                    0.0
                } else {
                    (Self::symbeta_ln_norm(r) + 0.5 * r * (-x * x / r).ln_1p()).exp()
                }
            }
            RefDensity::StudentT2Rescaled => 0.5 / (1.0 + x * x).powf(1.5),
            RefDensity::GaussMixture => 0.5 * (normal_pdf(x - 2.0) + normal_pdf(x + 2.0)),
            RefDensity::LaplaceMixture => {
                0.25 * ((-(x - 2.0).abs()).exp() + (-(x + 2.0).abs()).exp())
            }
        }
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        const LN_SQRT_TAU: f64 = 0.918_938_533_204_672_7;
        match *self {
            RefDensity::Normal => -0.5 * x * x - LN_SQRT_TAU,
            RefDensity::Logistic => -x.abs() - 2.0 * (-x.abs()).exp().ln_1p(),
            RefDensity::Laplace => -x.abs() - LN_2,
            RefDensity::SymBeta(r) => {
                if x * x >= r {
                    f64::NEG_INFINITY
                } else {
                    Self::symbeta_ln_norm(r) + 0.5 * r * (-x * x / r).ln_1p()
                }
            }
            RefDensity::StudentT2Rescaled => -LN_2 - 1.5 * (x * x).ln_1p(),
            RefDensity::GaussMixture => {
                // φ(x-2) + φ(x+2) = 2 φ(x) e⁻² cosh(2x), and
                // ln cosh(u) = |u| - ln 2 + ln(1 + e^(-2|u|)).
                let a = 2.0 * x.abs();
                -0.5 * x * x - LN_SQRT_TAU - 2.0 + a - LN_2 + (-2.0 * a).exp().ln_1p()
            }
            RefDensity::LaplaceMixture => {
                let ax = x.abs();
                if ax <= 2.0 {
                    // e⁻² cosh(x) / 2 between the modes.
                    -2.0 + (ax - LN_2 + (-2.0 * ax).exp().ln_1p()) - LN_2
                } else {
                    // e^(-|x|) (e² + e⁻²) / 4 outside.
                    -ax + (2.0f64.exp() + (-2.0f64).exp()).ln() - 2.0 * LN_2
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            RefDensity::Normal => normal_cdf(x),
            RefDensity::Logistic => 1.0 / (1.0 + (-x).exp()),
            RefDensity::Laplace => laplace_cdf(x),
            RefDensity::SymBeta(r) => {
                let w = r.sqrt();
                if x <= -w {
                    0.0
                } else if x >= w {
                    1.0
                } else {
                    // Anchor at the center so the result is exactly symmetric.
                    let half = integrate(|t| self.pdf(t), 0.0, x.abs(), 1e-13, 1e-12)
                        .expect("bounded density on a finite interval");
                    if x >= 0.0 {
                        0.5 + half
                    } else {
                        0.5 - half
                    }
                }
            }
            RefDensity::StudentT2Rescaled => 0.5 + 0.5 * x / (1.0 + x * x).sqrt(),
            RefDensity::GaussMixture => 0.5 * (normal_cdf(x - 2.0) + normal_cdf(x + 2.0)),
            RefDensity::LaplaceMixture => 0.5 * (laplace_cdf(x - 2.0) + laplace_cdf(x + 2.0)),
        }
    }

    /// Inverse CDF; closed form where available, monotone bisection to
    /// absolute tolerance 1e-12 otherwise.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Argument(format!(
                "quantile needs p in (0, 1), got {p}"
            )));
        }
        let bisected = |half_width: f64| -> Result<f64> {
            bisect_root(|x| self.cdf(x) - p, -half_width, half_width, 1e-12)
        };
        match *self {
            RefDensity::Normal => bisected(45.0),
            RefDensity::Logistic => Ok((p / (1.0 - p)).ln()),
            RefDensity::Laplace => Ok(if p < 0.5 {
                (2.0 * p).ln()
            } else {
                -(2.0 * (1.0 - p)).ln()
            }),
            RefDensity::SymBeta(r) => bisected(r.sqrt()),
            RefDensity::StudentT2Rescaled => {
                let u = 2.0 * p - 1.0;
                Ok(u / (1.0 - u * u).sqrt())
            }
            RefDensity::GaussMixture => bisected(60.0),
            RefDensity::LaplaceMixture => bisected(800.0),
        }
    }

    /// Location score `(log f)'(x)`. Odd by construction; the symmetrized
    /// beta returns ∓∞ at and beyond its support edges.
    pub fn score(&self, x: f64) -> f64 {
        match *self {
            RefDensity::Normal => -x,
            RefDensity::Logistic => -(0.5 * x).tanh(),
            RefDensity::Laplace => {
                if x == 0.0 {
                    0.0
                } else {
                    -x.signum()
                }
            }
            RefDensity::SymBeta(r) => {
                if x >= r.sqrt() {
                    f64::NEG_INFINITY
                } else if x <= -r.sqrt() {
                    f64::INFINITY
                } else {
                    -x / (1.0 - x * x / r)
                }
            }
            RefDensity::StudentT2Rescaled => -3.0 * x / (1.0 + x * x),
            RefDensity::GaussMixture => -x + 2.0 * (2.0 * x).tanh(),
            RefDensity::LaplaceMixture => {
                if x.abs() >= 2.0 {
                    -x.signum()
                } else {
                    x.tanh()
                }
            }
        }
    }

    /// Whether the density itself is log-concave (and hence equal to its own
    /// log-concave projection).
    pub fn is_log_concave(&self) -> bool {
        matches!(
            *self,
            RefDensity::Normal
                | RefDensity::Logistic
                | RefDensity::Laplace
                | RefDensity::SymBeta(_)
        )
    }

    /// Points where the log-density or score has a kink (used as quadrature
    /// cuts); support edges for the symmetrized beta.
    fn kinks(&self) -> Vec<f64> {
        match *self {
            RefDensity::Laplace => vec![0.0],
            RefDensity::SymBeta(r) => vec![-r.sqrt(), r.sqrt()],
            RefDensity::LaplaceMixture => vec![-2.0, 2.0],
            _ => Vec::new(),
        }
    }

    /// Fisher information for location, `∫ (f'/f)² f`; `+∞` for the
    /// symmetrized beta with `r ≤ 2`.
    pub fn fisher_info(&self) -> f64 {
        match *self {
            RefDensity::Normal => 1.0,
            RefDensity::Logistic => 1.0 / 3.0,
            RefDensity::Laplace => 1.0,
            RefDensity::SymBeta(r) => {
                if r <= 2.0 {
                    f64::INFINITY
                } else {
                    // r Γ(r/2 - 1) Γ((3+r)/2) / (2 Γ(r/2 + 1) Γ((1+r)/2))
                    (r.ln() + ln_gamma(0.5 * r - 1.0) + ln_gamma(0.5 * (3.0 + r))
                        - LN_2
                        - ln_gamma(0.5 * r + 1.0)
                        - ln_gamma(0.5 * (1.0 + r)))
                    .exp()
                }
            }
            RefDensity::StudentT2Rescaled => 1.2,
            RefDensity::GaussMixture => self.info_by_quadrature(&[-40.0, 0.0, 40.0]),
            RefDensity::LaplaceMixture => {
                self.info_by_quadrature(&[-60.0, -2.0, 0.0, 2.0, 60.0])
            }
        }
    }

    fn info_by_quadrature(&self, cuts: &[f64]) -> f64 {
        integrate_segmented(
            |x| {
                let s = self.score(x);
                s * s * self.pdf(x)
            },
            cuts,
            1e-12,
            1e-10,
        )
        .expect("smooth bounded integrand on a finite window")
    }

    /// Fisher information restricted between the `eta` and `1 - eta`
    /// quantiles. Defined for the log-concave variants; always finite for
    /// `eta > 0`, even when the full information is not.
    pub fn truncated_info(&self, eta: f64) -> Result<f64> {
        if !(eta > 0.0 && eta < 0.5) {
            return Err(Error::Argument(format!(
                "truncation level must be in (0, 0.5), got {eta}"
            )));
        }
        if !self.is_log_concave() {
            return Err(Error::Argument(format!(
                "truncated information is defined for the log-concave references, not {self}"
            )));
        }
        let xi = self.quantile(1.0 - eta)?;
        // The integrand is even, so integrate the right half and double.
        let half = integrate(
            |x| {
                let s = self.score(x);
                s * s * self.pdf(x)
            },
            0.0,
            xi,
            1e-13,
            1e-9,
        )?;
        Ok(2.0 * half)
    }

    /// The log-concave density closest to this one in Kullback-Leibler
    /// divergence: the density itself when log-concave, the standard Laplace
    /// for the rescaled t₂, and a flat-top density for the bimodal mixtures.
    pub fn project(&self) -> ProjectionResult {
        let kind = match *self {
            RefDensity::StudentT2Rescaled => ProjectionKind::Laplace,
            RefDensity::GaussMixture | RefDensity::LaplaceMixture => {
                // The plateau half-width solves 1 = 2 z f(z) + 2 (1 - F(z)):
                // total mass of the flattened density stays 1.
                let z = bisect_root(
                    |z| 2.0 * z * self.pdf(z) + 2.0 * (1.0 - self.cdf(z)) - 1.0,
                    2.0,
                    10.0,
                    1e-10,
                )
                .expect("plateau equation brackets a root on [2, 10]");
                ProjectionKind::FlatTop { z }
            }
            _ => ProjectionKind::Identity,
        };
        ProjectionResult {
            kind,
            source: *self,
        }
    }

    /// Truncated information `Ig(eta)` of the projection score under this
    /// (true) density, together with the preliminary-estimator coefficient
    /// `gamma`: the window is `[-xi, xi]` with `xi` the projection's
    /// `(1 - eta)`-quantile, and
    /// `gamma = 1 - ∫ s̃ (s̃ - s₀) f₀ / Ig(eta)` with `s̃` the projection
    /// score and `s₀` the source score.
    pub fn misspec_info(&self, eta: f64) -> Result<(f64, f64)> {
        if !(eta > 0.0 && eta < 0.5) {
            return Err(Error::Argument(format!(
                "truncation level must be in (0, 0.5), got {eta}"
            )));
        }
        if self.is_log_concave() {
            // The projection is the density itself, so the gamma numerator's
            // second factor vanishes identically.
            return Ok((self.truncated_info(eta)?, 1.0));
        }
        let proj = self.project();
        let xi = proj.quantile(1.0 - eta)?;
        let cuts = half_line_cuts(xi, &[self.kinks(), proj.kinks()]);
        let ig_half = integrate_segmented(
            |x| {
                let s = proj.score(x);
                s * s * self.pdf(x)
            },
            &cuts,
            1e-13,
            1e-9,
        )?;
        let num_half = integrate_segmented(
            |x| {
                let s = proj.score(x);
                s * (s - self.score(x)) * self.pdf(x)
            },
            &cuts,
            1e-13,
            1e-9,
        )?;
        let ig = 2.0 * ig_half;
        Ok((ig, 1.0 - 2.0 * num_half / ig))
    }

    /// Same functionals for the Gaussian-smoothed projection: the projection
    /// convolved with a centered normal whose variance is the second-moment
    /// gap `b̃² = ∫ x² (f₀ - p̃₀)`. Returns `(Ig_sm, gamma_sm, b̃)`.
    pub fn smoothed_misspec_info(&self, eta: f64) -> Result<(f64, f64, f64)> {
        if !(eta > 0.0 && eta < 0.5) {
            return Err(Error::Argument(format!(
                "truncation level must be in (0, 0.5), got {eta}"
            )));
        }
        if *self == RefDensity::StudentT2Rescaled {
            return Err(Error::InfiniteMoment(
                "the rescaled t2 has no finite second moment, so the smoothing \
                 bandwidth has no limit"
                    .into(),
            ));
        }
        if self.is_log_concave() {
            return Ok((self.truncated_info(eta)?, 1.0, 0.0));
        }
        let proj = self.project();
        let z = match proj.kind {
            ProjectionKind::FlatTop { z } => z,
            _ => unreachable!("non-log-concave references project to a flat top"),
        };
        // The density and its projection agree outside the plateau, so the
        // second-moment gap reduces to a bounded window.
        let level = self.pdf(z);
        let b2 = 2.0
            * integrate_segmented(
                |x| x * x * (self.pdf(x) - level),
                &half_line_cuts(z, &[self.kinks()]),
                1e-12,
                1e-10,
            )?;
        let b = b2.max(0.0).sqrt();
        if b < 1e-10 {
            let (ig, gamma) = self.misspec_info(eta)?;
            return Ok((ig, gamma, 0.0));
        }
        let sm = SmoothedProjection { proj: &proj, b };
        let xi = sm.quantile(1.0 - eta)?;
        let cuts = half_line_cuts(xi, &[self.kinks()]);
        let ig_half = integrate_segmented(
            |x| {
                let s = sm.score(x);
                s * s * self.pdf(x)
            },
            &cuts,
            1e-9,
            1e-5,
        )?;
        let num_half = integrate_segmented(
            |x| {
                let s = sm.score(x);
                s * (s - self.score(x)) * self.pdf(x)
            },
            &cuts,
            1e-9,
            1e-5,
        )?;
        let ig = 2.0 * ig_half;
        Ok((ig, 1.0 - 2.0 * num_half / ig, b))
    }

    /// Draw `n` points, deterministically in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut normals = NormalSource::new();
        (0..n).map(|_| self.draw_one(&mut rng, &mut normals)).collect()
    }

    fn draw_one(&self, rng: &mut ChaCha8Rng, normals: &mut NormalSource) -> f64 {
        match *self {
            RefDensity::Normal => normals.draw(rng),
            RefDensity::Logistic => {
                let u = uniform_open(rng);
                (u / (1.0 - u)).ln()
            }
            RefDensity::Laplace => laplace_draw(rng),
            RefDensity::SymBeta(r) => {
                // X = √r (2B - 1) with B ~ Beta(r/2 + 1, r/2 + 1).
                let shape = 0.5 * r + 1.0;
                let g1 = gamma_draw(shape, rng, normals);
                let g2 = gamma_draw(shape, rng, normals);
                r.sqrt() * (2.0 * g1 / (g1 + g2) - 1.0)
            }
            RefDensity::StudentT2Rescaled => {
                let u = 2.0 * uniform_open(rng) - 1.0;
                u / (1.0 - u * u).sqrt()
            }
            RefDensity::GaussMixture => {
                let center = if rng.random::<f64>() < 0.5 { -2.0 } else { 2.0 };
                center + normals.draw(rng)
            }
            RefDensity::LaplaceMixture => {
                let center = if rng.random::<f64>() < 0.5 { -2.0 } else { 2.0 };
                center + laplace_draw(rng)
            }
        }
    }
}

/// Quadrature cut list for an even integrand's right half `[0, hi]`,
/// splitting at any listed kink that falls inside.
fn half_line_cuts(hi: f64, kink_lists: &[Vec<f64>]) -> Vec<f64> {
    let mut cuts = vec![0.0, hi];
    for ks in kink_lists {
        for &k in ks {
            if k > 0.0 && k < hi {
                cuts.push(k);
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    cuts
}

/// Shape of a log-concave projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProjectionKind {
    /// The source is already log-concave.
    Identity,
    /// Heavy tails collapse onto the standard Laplace log-density `-|x| - ln 2`.
    Laplace,
    /// Bimodal sources flatten onto a constant plateau on `[-z, z]` and keep
    /// the source density outside.
    FlatTop { z: f64 },
}

/// A log-concave projection with exact evaluators.
#[derive(Debug, Clone, Copy)]
pub struct ProjectionResult {
    pub kind: ProjectionKind,
    source: RefDensity,
}

impl ProjectionResult {
    pub fn source(&self) -> RefDensity {
        self.source
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self.kind {
            ProjectionKind::Identity => self.source.pdf(x),
            ProjectionKind::Laplace => RefDensity::Laplace.pdf(x),
            ProjectionKind::FlatTop { z } => {
                if x.abs() <= z {
                    self.source.pdf(z)
                } else {
                    self.source.pdf(x)
                }
            }
        }
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        match self.kind {
            ProjectionKind::Identity => self.source.log_pdf(x),
            ProjectionKind::Laplace => RefDensity::Laplace.log_pdf(x),
            ProjectionKind::FlatTop { z } => {
                if x.abs() <= z {
                    self.source.log_pdf(z)
                } else {
                    self.source.log_pdf(x)
                }
            }
        }
    }

    pub fn score(&self, x: f64) -> f64 {
        match self.kind {
            ProjectionKind::Identity => self.source.score(x),
            ProjectionKind::Laplace => RefDensity::Laplace.score(x),
            ProjectionKind::FlatTop { z } => {
                if x.abs() <= z {
                    0.0
                } else {
                    self.source.score(x)
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.kind {
            ProjectionKind::Identity => self.source.cdf(x),
            ProjectionKind::Laplace => RefDensity::Laplace.cdf(x),
            ProjectionKind::FlatTop { z } => {
                if x.abs() > z {
                    self.source.cdf(x)
                } else {
                    self.source.cdf(-z) + (x + z) * self.source.pdf(z)
                }
            }
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        match self.kind {
            ProjectionKind::Identity => self.source.quantile(p),
            ProjectionKind::Laplace => RefDensity::Laplace.quantile(p),
            ProjectionKind::FlatTop { z } => {
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::Argument(format!(
                        "quantile needs p in (0, 1), got {p}"
                    )));
                }
                let below = self.source.cdf(-z);
                if p < below || p > 1.0 - below {
                    self.source.quantile(p)
                } else {
                    Ok(-z + (p - below) / self.source.pdf(z))
                }
            }
        }
    }

    fn kinks(&self) -> Vec<f64> {
        match self.kind {
            ProjectionKind::Identity => self.source.kinks(),
            ProjectionKind::Laplace => vec![0.0],
            ProjectionKind::FlatTop { z } => vec![-z, z],
        }
    }
}

/// The projection convolved with a centered Gaussian of standard deviation
/// `b`; evaluators by quadrature over the 12-sigma window that carries all
/// the Gaussian's mass.
struct SmoothedProjection<'a> {
    proj: &'a ProjectionResult,
    b: f64,
}

impl SmoothedProjection<'_> {
    fn cuts(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut cuts = vec![lo, hi];
        for k in self
            .proj
            .kinks()
            .into_iter()
            .chain(self.proj.source().kinks())
        {
            if k > lo && k < hi {
                cuts.push(k);
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        cuts
    }

    fn density(&self, x: f64) -> f64 {
        let (lo, hi) = (x - 12.0 * self.b, x + 12.0 * self.b);
        integrate_segmented(
            |t| self.proj.pdf(t) * normal_pdf((x - t) / self.b),
            &self.cuts(lo, hi),
            1e-13,
            1e-8,
        )
        .expect("smooth bounded integrand on a finite window")
            / self.b
    }

    fn density_slope(&self, x: f64) -> f64 {
        let (lo, hi) = (x - 12.0 * self.b, x + 12.0 * self.b);
        integrate_segmented(
            |t| self.proj.pdf(t) * (t - x) * normal_pdf((x - t) / self.b),
            &self.cuts(lo, hi),
            1e-13,
            1e-8,
        )
        .expect("smooth bounded integrand on a finite window")
            / (self.b * self.b * self.b)
    }

    fn score(&self, x: f64) -> f64 {
        self.density_slope(x) / self.density(x)
    }

    fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = (x - 12.0 * self.b, x + 12.0 * self.b);
        let window = integrate_segmented(
            |t| self.proj.pdf(t) * normal_cdf((x - t) / self.b),
            &self.cuts(lo, hi),
            1e-12,
            1e-8,
        )
        .expect("smooth bounded integrand on a finite window");
        self.proj.cdf(lo) + window
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        let mut hi = self.proj.quantile(p)? + self.b;
        for _ in 0..100 {
            if self.cdf(hi) > p {
                break;
            }
            hi += 4.0 * (1.0 + self.b);
        }
        bisect_root(|x| self.cdf(x) - p, 0.0, hi, 1e-9)
    }
}

/// Standard-normal stream: Box-Muller pairs with the spare value cached.
struct NormalSource {
    spare: Option<f64>,
}

impl NormalSource {
    fn new() -> Self {
        NormalSource { spare: None }
    }

    fn draw(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - rng.random::<f64>(); // in (0, 1], so the log is finite
        let u2: f64 = rng.random();
        let radius = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        self.spare = Some(radius * s);
        radius * c
    }
}

/// Uniform draw from the open interval (0, 1).
fn uniform_open(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

fn laplace_draw(rng: &mut ChaCha8Rng) -> f64 {
    let u = uniform_open(rng);
    if u < 0.5 {
        (2.0 * u).ln()
    } else {
        -(2.0 * (1.0 - u)).ln()
    }
}

/// Marsaglia-Tsang gamma sampler; valid for shape ≥ 1 (always the case here:
/// the beta transform uses shape r/2 + 1).
fn gamma_draw(shape: f64, rng: &mut ChaCha8Rng, normals: &mut NormalSource) -> f64 {
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (3.0 * d.sqrt());
    loop {
        let x = normals.draw(rng);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u = uniform_open(rng);
        if u < 1.0 - 0.0331 * x * x * x * x {
            return d * v;
        }
        if u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}
