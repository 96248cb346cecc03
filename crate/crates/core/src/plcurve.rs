//! Piecewise-linear concave log-densities and the distributions they induce.
//!
//! A [`PLConcave`] is a concave function that is linear between knots and
//! minus infinity outside its domain; exponentiating one gives an
//! [`ExpLinearDensity`], for which mass, moments, CDF, quantiles, and
//! Gaussian convolutions all have closed forms built from the per-segment
//! integrals `∫ s^k e^{z s} ds`. [`WeightedSample`] and [`StepCDF`] are the
//! empirical-side counterparts used by the fitting code.

use crate::numeric::quad;
use crate::numeric::special::{ln_gaussian_window, FRAC_1_SQRT_2PI};
use crate::{Error, Result};

/// Relative slack allowed when checking that slopes are non-increasing.
const CONCAVITY_RTOL: f64 = 1e-12;

// --- stable exponential moments -------------------------------------------
//
// e_k(z) = ∫₀¹ s^k e^{z s} ds. The closed forms divide by powers of z and
// cancel catastrophically near z = 0, so small arguments switch to the
// series Σ_j z^j / (j! (j+k+1)), truncated where the next term is < 1e-18.

pub(crate) fn exp_m0(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        z.exp_m1() / z
    }
}

pub(crate) fn exp_m1(z: f64) -> f64 {
    if z.abs() < 1e-2 {
        // 1/2 + z/3 + z²/8 + z³/30 + z⁴/144 + z⁵/840 + z⁶/5760 + z⁷/45360
        let z2 = z * z;
        0.5 + z / 3.0
            + z2 / 8.0
            + z2 * z / 30.0
            + z2 * z2 / 144.0
            + z2 * z2 * z / 840.0
            + z2 * z2 * z2 / 5760.0
            + z2 * z2 * z2 * z / 45360.0
    } else {
        (z.exp() - exp_m0(z)) / z
    }
}

pub(crate) fn exp_m2(z: f64) -> f64 {
    if z.abs() < 1e-2 {
        // 1/3 + z/4 + z²/10 + z³/36 + z⁴/168 + z⁵/960 + z⁶/6480 + z⁷/50400
        let z2 = z * z;
        1.0 / 3.0
            + z / 4.0
            + z2 / 10.0
            + z2 * z / 36.0
            + z2 * z2 / 168.0
            + z2 * z2 * z / 960.0
            + z2 * z2 * z2 / 6480.0
            + z2 * z2 * z2 * z / 50400.0
    } else {
        (z.exp() - 2.0 * exp_m1(z)) / z
    }
}

/// Mass of one exp-linear segment: ∫₀^len e^{a + (b-a) t/len} dt.
pub(crate) fn seg_mass(a: f64, b: f64, len: f64) -> f64 {
    len * a.exp() * exp_m0(b - a)
}

/// A concave piecewise-linear function, minus infinity outside its domain.
///
/// Knots are strictly increasing, values finite, and consecutive slopes
/// non-increasing (up to a relative tolerance of 1e-12, so curves assembled
/// from floating-point arithmetic validate).
#[derive(Debug, Clone)]
pub struct PLConcave {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl PLConcave {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidCurve(format!(
                "need at least 2 knots, got {}",
                knots.len()
            )));
        }
        if knots.len() != values.len() {
            return Err(Error::InvalidCurve(format!(
                "{} knots but {} values",
                knots.len(),
                values.len()
            )));
        }
        if knots.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidCurve(
                "knots and values must be finite".into(),
            ));
        }
        let mut slopes = Vec::with_capacity(knots.len() - 1);
        for i in 0..knots.len() - 1 {
            if knots[i + 1] <= knots[i] {
                return Err(Error::InvalidCurve(format!(
                    "knots must be strictly increasing: knot[{i}] = {}, knot[{}] = {}",
                    knots[i],
                    i + 1,
                    knots[i + 1]
                )));
            }
            slopes.push((values[i + 1] - values[i]) / (knots[i + 1] - knots[i]));
        }
        for i in 0..slopes.len().saturating_sub(1) {
            let tol = CONCAVITY_RTOL * (1.0 + slopes[i].abs().max(slopes[i + 1].abs()));
            // Values straddling a short segment cannot pin its slope more
            // tightly than roundoff allows; widen the check accordingly.
            let vmax = values[i]
                .abs()
                .max(values[i + 1].abs())
                .max(values[i + 2].abs());
            let noise = 4.0 * f64::EPSILON
                * vmax
                * (1.0 / (knots[i + 1] - knots[i]) + 1.0 / (knots[i + 2] - knots[i + 1]));
            if slopes[i + 1] > slopes[i] + tol + noise {
                return Err(Error::InvalidCurve(format!(
                    "slopes increase at knot {} ({} -> {})",
                    i + 1,
                    slopes[i],
                    slopes[i + 1]
                )));
            }
        }
        Ok(Self {
            knots,
            values,
            slopes,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    /// Index of the segment containing x, i.e. the largest i with
    /// knots[i] <= x, clamped to a valid segment. Caller guarantees x is
    /// inside the domain.
    fn segment_index(&self, x: f64) -> usize {
        let i = self.knots.partition_point(|&k| k <= x);
        i.saturating_sub(1).min(self.knots.len() - 2)
    }

    /// Evaluate the function; minus infinity outside the domain.
    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.domain();
        if x < lo || x > hi {
            return f64::NEG_INFINITY;
        }
        let i = self.segment_index(x);
        if x == self.knots[i] {
            return self.values[i];
        }
        if x == self.knots[i + 1] {
            return self.values[i + 1];
        }
        self.values[i] + self.slopes[i] * (x - self.knots[i])
    }

    /// One-sided slope from the right; at the right domain endpoint the
    /// left slope is returned instead so the result is always defined.
    pub fn right_derivative(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        if x < lo || x > hi {
            return Err(Error::Argument(format!(
                "derivative requested at {x} outside domain [{lo}, {hi}]"
            )));
        }
        if x == hi {
            return Ok(*self.slopes.last().unwrap());
        }
        // Segment i has knots[i] <= x < knots[i+1]; x >= lo, so i >= 0.
        let i = self.knots.partition_point(|&k| k <= x) - 1;
        Ok(self.slopes[i.min(self.slopes.len() - 1)])
    }

    /// One-sided slope from the left; at the left domain endpoint the right
    /// slope is returned.
    pub fn left_derivative(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        if x < lo || x > hi {
            return Err(Error::Argument(format!(
                "derivative requested at {x} outside domain [{lo}, {hi}]"
            )));
        }
        if x == lo {
            return Ok(self.slopes[0]);
        }
        let i = self.knots.partition_point(|&k| k < x);
        Ok(self.slopes[(i - 1).min(self.slopes.len() - 1)])
    }

    /// The reflected curve x -> f(-x).
    pub fn reflect(&self) -> PLConcave {
        let knots: Vec<f64> = self.knots.iter().rev().map(|k| -k).collect();
        let values: Vec<f64> = self.values.iter().rev().copied().collect();
        PLConcave::new(knots, values).expect("reflection preserves validity")
    }

    /// The translated curve x -> f(x - dx).
    pub fn translate(&self, dx: f64) -> PLConcave {
        let knots: Vec<f64> = self.knots.iter().map(|k| k + dx).collect();
        PLConcave::new(knots, self.values.clone()).expect("translation preserves validity")
    }

    /// The curve plus a constant.
    pub fn add_constant(&self, c: f64) -> PLConcave {
        let values: Vec<f64> = self.values.iter().map(|v| v + c).collect();
        PLConcave::new(self.knots.clone(), values).expect("adding a constant preserves validity")
    }

    /// Drop interior knots where the slope change is below `bend_tol`
    /// (absolute, on the slope scale), merging collinear segments.
    pub fn simplify(&self, bend_tol: f64) -> PLConcave {
        let mut knots = vec![self.knots[0]];
        let mut values = vec![self.values[0]];
        for i in 1..self.knots.len() - 1 {
            if (self.slopes[i] - self.slopes[i - 1]).abs() > bend_tol {
                knots.push(self.knots[i]);
                values.push(self.values[i]);
            }
        }
        knots.push(*self.knots.last().unwrap());
        values.push(*self.values.last().unwrap());
        PLConcave::new(knots, values).expect("dropping collinear knots preserves validity")
    }
}

/// A probability density of the form e^{phi} with phi piecewise-linear
/// concave; construction renormalizes so the total mass is exactly one.
#[derive(Debug, Clone)]
pub struct ExpLinearDensity {
    log_density: PLConcave,
    /// Per-segment masses after normalization.
    seg_mass: Vec<f64>,
    /// Cumulative mass at each knot; first entry 0, last entry exactly 1.
    cum: Vec<f64>,
}

impl ExpLinearDensity {
    pub fn new(curve: PLConcave) -> Result<Self> {
        let raw_mass: f64 = segment_masses(&curve).iter().sum();
        if !raw_mass.is_finite() || raw_mass <= 0.0 {
            return Err(Error::InvalidCurve(format!(
                "curve mass {raw_mass} is not normalizable"
            )));
        }
        let log_density = curve.add_constant(-raw_mass.ln());
        let seg_mass = segment_masses(&log_density);
        let mut cum = Vec::with_capacity(seg_mass.len() + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        for m in &seg_mass {
            acc += m;
            cum.push(acc);
        }
        // Pin the last entry so cdf/quantile see a total mass of exactly 1.
        *cum.last_mut().unwrap() = 1.0;
        Ok(Self {
            log_density,
            seg_mass,
            cum,
        })
    }

    pub fn log_density(&self) -> &PLConcave {
        &self.log_density
    }

    pub fn support(&self) -> (f64, f64) {
        self.log_density.domain()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.log_density.eval(x).exp()
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        self.log_density.eval(x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let i = self.log_density.segment_index(x);
        let k = self.log_density.knots();
        let v = self.log_density.values();
        let t = x - k[i];
        let beta = self.log_density.slopes()[i];
        let partial = v[i].exp() * t * exp_m0(beta * t);
        (self.cum[i] + partial).clamp(0.0, 1.0)
    }

    /// Inverse CDF by closed-form inversion of the segment integral;
    /// satisfies |cdf(quantile(p)) - p| <= 1e-10.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Argument(format!("quantile level {p} not in [0, 1]")));
        }
        let (lo, hi) = self.support();
        if p == 0.0 {
            return Ok(lo);
        }
        if p == 1.0 {
            return Ok(hi);
        }
        // Last segment index i with cum[i] <= p.
        let i = (self.cum.partition_point(|&c| c <= p) - 1).min(self.seg_mass.len() - 1);
        let k = self.log_density.knots();
        let v = self.log_density.values();
        let beta = self.log_density.slopes()[i];
        let target = p - self.cum[i];
        let len = k[i + 1] - k[i];
        let t = if (beta * len).abs() < 1e-12 {
            target / v[i].exp()
        } else {
            // Solve e^{v} (e^{beta t} - 1) / beta = target for t.
            (target * beta / v[i].exp()).ln_1p() / beta
        };
        Ok((k[i] + t.clamp(0.0, len)).clamp(lo, hi))
    }

    pub fn mean(&self) -> f64 {
        let k = self.log_density.knots();
        let v = self.log_density.values();
        let s = self.log_density.slopes();
        let mut acc = 0.0;
        for i in 0..s.len() {
            let len = k[i + 1] - k[i];
            let z = v[i + 1] - v[i];
            let ea = v[i].exp();
            acc += k[i] * self.seg_mass[i] + len * len * ea * exp_m1(z);
        }
        acc
    }

    /// Central second moment, accumulated about the mean so no large-offset
    /// cancellation occurs.
    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        let k = self.log_density.knots();
        let v = self.log_density.values();
        let s = self.log_density.slopes();
        let mut acc = 0.0;
        for i in 0..s.len() {
            let len = k[i + 1] - k[i];
            let z = v[i + 1] - v[i];
            let ea = v[i].exp();
            let c = k[i] - mu;
            acc += c * c * self.seg_mass[i]
                + 2.0 * c * len * len * ea * exp_m1(z)
                + len * len * len * ea * exp_m2(z);
        }
        acc.max(0.0)
    }

    /// Density and log-derivative of the convolution with a centered
    /// Gaussian of standard deviation `sigma`, evaluated at `x`.
    ///
    /// Each segment contributes a closed-form term
    /// e^{v + s(x-k) + s²σ²/2} [Φ(u₂) - Φ(u₁)]; terms are assembled in log
    /// space because the exponential prefactor and the Gaussian tail
    /// difference can individually overflow/underflow while their product
    /// stays moderate.
    pub fn convolve_gaussian(&self, sigma: f64, x: f64) -> Result<(f64, f64)> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Argument(format!(
                "convolution bandwidth must be positive, got {sigma}"
            )));
        }
        let k = self.log_density.knots();
        let v = self.log_density.values();
        let slopes = self.log_density.slopes();
        let mut density = 0.0;
        let mut deriv = 0.0;
        for i in 0..slopes.len() {
            let s = slopes[i];
            let log_pre = v[i] + s * (x - k[i]) + 0.5 * s * s * sigma * sigma;
            let c = x + s * sigma * sigma;
            let u1 = (k[i] - c) / sigma;
            let u2 = (k[i + 1] - c) / sigma;
            let ln_term = log_pre + ln_gaussian_window(u1, u2);
            if ln_term > -745.0 {
                let term = ln_term.exp();
                density += term;
                deriv += s * term;
            }
            // Boundary correction: (φ(u1) - φ(u2)) e^{log_pre} / σ.
            let b1 = log_pre - 0.5 * u1 * u1;
            let b2 = log_pre - 0.5 * u2 * u2;
            if b1 > -745.0 || b2 > -745.0 {
                deriv += (b1.exp() - b2.exp()) * FRAC_1_SQRT_2PI / sigma;
            }
        }
        Ok((density, deriv / density))
    }
}

fn segment_masses(curve: &PLConcave) -> Vec<f64> {
    let k = curve.knots();
    let v = curve.values();
    (0..k.len() - 1)
        .map(|i| seg_mass(v[i], v[i + 1], k[i + 1] - k[i]))
        .collect()
}

/// A finite weighted sample: sorted distinct points with strictly positive
/// weights summing to one.
///
/// Construction canonicalizes: zero-weight atoms are dropped, duplicate
/// points merged (weights summed), points sorted ascending, and weights
/// normalized to unit total.
#[derive(Debug, Clone)]
pub struct WeightedSample {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedSample {
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::InvalidSample(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidSample("points must be finite".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidSample(
                "weights must be finite and non-negative".into(),
            ));
        }
        let mut pairs: Vec<(f64, f64)> = points
            .into_iter()
            .zip(weights)
            .filter(|&(_, w)| w > 0.0)
            // Normalize -0.0 so the duplicate merge treats it as 0.0.
            .map(|(p, w)| (if p == 0.0 { 0.0 } else { p }, w))
            .collect();
        if pairs.is_empty() {
            return Err(Error::InvalidSample("total weight is zero".into()));
        }
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        // Merge points closer than roundoff can meaningfully separate
        // (weighted mean position); sub-1e-11 gaps otherwise create
        // segments downstream whose slopes are pure cancellation noise.
        struct Run {
            last: f64,
            first: f64,
            w: f64,
            wp: f64,
        }
        let mut merged: Vec<Run> = Vec::with_capacity(pairs.len());
        for (p, w) in pairs {
            match merged.last_mut() {
                Some(run) if p - run.last <= 1e-11 * (1.0 + p.abs()) => {
                    run.last = p;
                    run.w += w;
                    run.wp += w * p;
                }
                _ => merged.push(Run {
                    last: p,
                    first: p,
                    w,
                    wp: w * p,
                }),
            }
        }
        let total: f64 = merged.iter().map(|r| r.w).sum();
        let (points, weights) = merged
            .into_iter()
            .map(|r| {
                // A run of identical points keeps its exact position.
                let p = if r.first == r.last { r.first } else { r.wp / r.w };
                (p, r.w / total)
            })
            .unzip();
        Ok(Self { points, weights })
    }

    /// Equal weights on the given points (duplicates merge as usual).
    pub fn uniform(points: &[f64]) -> Result<Self> {
        Self::new(points.to_vec(), vec![1.0; points.len()])
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        *self.points.last().unwrap()
    }

    pub fn mean(&self) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| p * w)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * (p - mu) * (p - mu))
            .sum()
    }

    pub fn step_cdf(&self) -> StepCDF {
        let mut cum = Vec::with_capacity(self.points.len());
        let mut acc = 0.0;
        for w in &self.weights {
            acc += w;
            cum.push(acc);
        }
        *cum.last_mut().unwrap() = 1.0;
        StepCDF {
            points: self.points.clone(),
            cum,
        }
    }
}

/// A right-continuous step CDF with jumps at sorted points.
#[derive(Debug, Clone)]
pub struct StepCDF {
    points: Vec<f64>,
    cum: Vec<f64>,
}

impl StepCDF {
    pub fn cdf(&self, x: f64) -> f64 {
        let i = self.points.partition_point(|&p| p <= x);
        if i == 0 {
            0.0
        } else {
            self.cum[i - 1]
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }
}

/// Anything with a CDF and a finite set of breakpoints outside of which the
/// CDF is constant 0 / 1; used by [`wasserstein`].
pub trait CdfCurve {
    fn cdf(&self, x: f64) -> f64;
    fn breakpoints(&self) -> Vec<f64>;
    /// True when the CDF is constant between breakpoints, so integration
    /// between them is exact.
    fn piecewise_constant(&self) -> bool;
}

impl CdfCurve for StepCDF {
    fn cdf(&self, x: f64) -> f64 {
        StepCDF::cdf(self, x)
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.points.clone()
    }
    fn piecewise_constant(&self) -> bool {
        true
    }
}

impl CdfCurve for ExpLinearDensity {
    fn cdf(&self, x: f64) -> f64 {
        ExpLinearDensity::cdf(self, x)
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.log_density.knots().to_vec()
    }
    fn piecewise_constant(&self) -> bool {
        false
    }
}

/// First Wasserstein distance ∫ |F - G| between two distributions with
/// bounded support, integrated piecewise between the merged breakpoints.
/// Exact for two step CDFs; adaptive quadrature otherwise.
pub fn wasserstein<A: CdfCurve + ?Sized, B: CdfCurve + ?Sized>(f: &A, g: &B) -> Result<f64> {
    let mut cuts = f.breakpoints();
    cuts.extend(g.breakpoints());
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    if cuts.len() < 2 {
        return Ok(0.0);
    }
    let exact = f.piecewise_constant() && g.piecewise_constant();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if exact {
            let mid = 0.5 * (a + b);
            total += (f.cdf(mid) - g.cdf(mid)).abs() * (b - a);
        } else {
            total += quad::integrate(
                |x| (f.cdf(x) - g.cdf(x)).abs(),
                a,
                b,
                1e-12 * (b - a).max(1.0),
                1e-10,
            )?;
        }
    }
    Ok(total)
}

/// Hellinger distance between two densities on a window that must carry at
/// least 1 - 1e-8 of each one's mass (otherwise a coverage error).
pub fn hellinger(
    f: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    window: (f64, f64),
) -> Result<f64> {
    let (lo, hi) = window;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Argument(format!("bad window [{lo}, {hi}]")));
    }
    let mass_f = quad::integrate(&f, lo, hi, 1e-10, 1e-9)?;
    let mass_g = quad::integrate(&g, lo, hi, 1e-10, 1e-9)?;
    for (name, mass) in [("first", mass_f), ("second", mass_g)] {
        if mass < 1.0 - 1e-8 {
            return Err(Error::Coverage(format!(
                "{name} density has mass {mass} on [{lo}, {hi}], below 1 - 1e-8"
            )));
        }
    }
    let h2 = 0.5
        * quad::integrate(
            |x| {
                let d = f(x).max(0.0).sqrt() - g(x).max(0.0).sqrt();
                d * d
            },
            lo,
            hi,
            1e-13,
            1e-9,
        )?;
    Ok(h2.clamp(0.0, 1.0).sqrt())
}
