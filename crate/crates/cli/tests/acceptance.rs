//! Workspace acceptance gate: ten go/no-go checks, one test per item, every
//! bound pinned as a literal in this file. A passing check prints one
//! summary line with the measured quantities next to the bounds they are
//! held to; a failing check aborts with the measurement that missed.
//!
//! The checks exercise the stack end to end: the optimality certificate and
//! the structural invariants of the fitted symmetric density, the
//! truncated-information curves, closed-form Fisher constants against
//! frozen high-precision quadrature, the log-concave projections, the
//! shrink rate of the fit as samples grow, the dispersion of the one-step
//! estimator, the qualitative efficiency orderings from the experiment
//! runner, center recovery under a bimodal (non-log-concave) truth, and a
//! brute-force oracle for the smallest nontrivial fit.

use std::sync::LazyLock;

use symloc::lcmle::{self, FitConfig};
use symloc::onestep::{one_step, OneStepConfig};
use symloc::plcurve::WeightedSample;
use symloc::refdist::{ProjectionKind, ProjectionResult, RefDensity};
use symloc::symmle::{diagnostics, fit_mle, MleConfig, MleFit};
use symloc_cli::config::{parse_densities, parse_estimators, ExperimentConfig};
use symloc_cli::runner::{cell_seed, run_efficiency};

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

/// Composite Simpson with `2 * half_panels` panels.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, half_panels: usize) -> f64 {
    let n = 2 * half_panels;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// Simpson on every interval between consecutive cuts; the integrands here
/// are smooth between cuts and merely kinked at them.
fn integrate_piecewise(f: &dyn Fn(f64) -> f64, cuts: &[f64], half_panels: usize) -> f64 {
    cuts.windows(2)
        .map(|w| if w[1] > w[0] { simpson(f, w[0], w[1], half_panels) } else { 0.0 })
        .sum()
}

/// Fifty seeded joint fits at n = 100, cycling through the three classical
/// shapes. Criteria 1 and 2 both run over this fixture, so it is computed
/// once and shared.
static FIFTY_FITS: LazyLock<Vec<(String, MleFit)>> = LazyLock::new(|| {
    let shapes = [RefDensity::Normal, RefDensity::Laplace, RefDensity::Logistic];
    (0..50)
        .map(|i| {
            let d = shapes[i % 3];
            let tag = d.to_string();
            let sample = d.sample(100, cell_seed(4101, &tag, 100, i));
            let fit = fit_mle(&sample, &MleConfig::default())
                .unwrap_or_else(|e| panic!("fixture fit {i} ({tag}) failed: {e}"));
            (tag, fit)
        })
        .collect()
});

#[test]
fn criterion_01_certificate_holds_on_every_seeded_fit() {
    let mut min_grid_h = f64::INFINITY;
    let mut max_knot_h = 0.0f64;
    for (tag, mle) in FIFTY_FITS.iter() {
        let sym = &mle.fit;
        let d = sym.radius();
        for k in 0..1000 {
            let t = d * k as f64 / 999.0;
            let h = sym.characterization_h(t).unwrap();
            min_grid_h = min_grid_h.min(h);
            assert!(h >= -1e-7, "h({t:.6}) = {h:.3e} under {tag} dips below -1e-7");
        }
        for &q in sym.full().log_density().knots() {
            if q > 0.0 {
                let h = sym.characterization_h(q).unwrap();
                max_knot_h = max_knot_h.max(h.abs());
                assert!(
                    h.abs() <= 1e-6,
                    "|h| = {:.3e} at knot {q:.6} of a {tag} fit exceeds 1e-6",
                    h.abs()
                );
            }
        }
    }
    println!(
        "criterion 1: PASS - 50/50 fits certified; min grid h = {min_grid_h:.3e} \
         (floor -1e-7), max knot |h| = {max_knot_h:.3e} (cap 1e-6)"
    );
}

#[test]
fn criterion_02_fit_structure_invariants_hold() {
    let mut failures = Vec::new();
    let mut worst_knot = 0.0f64;
    let mut worst_sandwich = f64::NEG_INFINITY;
    let mut worst_margin = f64::INFINITY;
    let mut worst_envelope = f64::NEG_INFINITY;
    for (i, (tag, mle)) in FIFTY_FITS.iter().enumerate() {
        let diag = diagnostics(&mle.fit);
        worst_knot = worst_knot.max(diag.knot_match_worst);
        worst_sandwich = worst_sandwich.max(diag.sandwich_worst);
        worst_margin = worst_margin.min(diag.variance_margin);
        worst_envelope = worst_envelope.max(diag.envelope_worst);
        let ok = diag.knot_match_worst <= 1e-9
            && diag.sandwich_worst <= 1e-7
            && diag.variance_margin >= -1e-9
            && diag.envelope_worst <= 1e-7;
        if !ok {
            failures.push(format!("fit {i} ({tag}): {diag:?}"));
        }
    }
    assert!(
        failures.is_empty(),
        "criterion 2: {}/50 fits broke an invariant:\n{}",
        failures.len(),
        failures.join("\n")
    );
    println!(
        "criterion 2: PASS - 50/50 fits structural; worst knot mismatch {worst_knot:.2e} \
         (cap 1e-9), worst sandwich violation {worst_sandwich:.2e} (cap 1e-7), \
         variance margin {worst_margin:.2e} (floor -1e-9), \
         envelope excess {worst_envelope:.2e} (cap 1e-7)"
    );
}

#[test]
fn criterion_03_truncated_information_ratios() {
    let mut misses = Vec::new();

    let sb = RefDensity::SymBeta(2.1);
    let full = sb.fisher_info();
    let r_mid = sb.truncated_info(0.01).unwrap() / full;
    let r_tiny = sb.truncated_info(1e-6).unwrap() / full;
    println!(
        "criterion 3: symbeta(2.1) ratio at eta = 1e-2 is {r_mid:.5} (target 0.050 +- 0.005), \
         at eta = 1e-6 is {r_tiny:.5} (target 0.233 +- 0.005)"
    );
    if (r_mid - 0.05).abs() > 0.005 {
        misses.push(format!("symbeta(2.1) ratio at 1e-2 = {r_mid:.6}"));
    }
    if (r_tiny - 0.233).abs() > 0.005 {
        misses.push(format!("symbeta(2.1) ratio at 1e-6 = {r_tiny:.6}"));
    }

    // Floor pinned at 0.98 for the three classical shapes at eta = 1e-3.
    // Measured: logistic 0.994 and laplace 0.998 clear it; the normal
    // computes to 0.977190 -- its window [-3.0902, 3.0902] already sheds
    // 2.3% of the information, and a 0.98 floor would only hold for eta
    // below roughly 8.4e-4 -- so that clause fails. The floor stays as
    // pinned rather than being loosened to fit the measurement.
    for d in [RefDensity::Normal, RefDensity::Logistic, RefDensity::Laplace] {
        let ratio = d.truncated_info(1e-3).unwrap() / d.fisher_info();
        println!("criterion 3: {d} ratio at eta = 1e-3 is {ratio:.6} (floor 0.98)");
        if ratio <= 0.98 {
            misses.push(format!("{d} ratio at 1e-3 = {ratio:.6} <= 0.98"));
        }
    }

    assert!(misses.is_empty(), "criterion 3 missed: {}", misses.join("; "));
    println!("criterion 3: PASS");
}

#[test]
fn criterion_04_fisher_constants_match_frozen_quadrature() {
    assert_eq!(RefDensity::Normal.fisher_info(), 1.0);
    assert_eq!(RefDensity::Logistic.fisher_info(), 1.0 / 3.0);
    assert_eq!(RefDensity::Laplace.fisher_info(), 1.0);
    // Frozen 25-digit quadrature of `int (g'/g)^2 g` for the bounded-support
    // family; the gamma-function closed form lands on the same rationals.
    for (r, oracle) in [(2.5, 7.0), (3.5, 3.0), (4.5, 2.2)] {
        let got = RefDensity::SymBeta(r).fisher_info();
        assert!(
            (got - oracle).abs() <= 1e-6,
            "info of symbeta({r}) = {got:.9}, quadrature oracle {oracle}"
        );
    }
    println!(
        "criterion 4: PASS - normal/logistic/laplace informations are 1, 1/3, 1 exactly; \
         symbeta matches frozen quadrature at r = 2.5/3.5/4.5 to 1e-6"
    );
}

#[test]
fn criterion_05_projection_geometry() {
    let g = RefDensity::GaussMixture.project();
    let ProjectionKind::FlatTop { z: zg } = g.kind else {
        panic!("the gaussian mixture should project to a flat-top, got {:?}", g.kind)
    };
    assert!((zg - 2.83).abs() <= 0.01, "flat-top edge {zg:.5} outside 2.83 +- 0.01");

    let l = RefDensity::LaplaceMixture.project();
    let ProjectionKind::FlatTop { z: zl } = l.kind else {
        panic!("the laplace mixture should project to a flat-top, got {:?}", l.kind)
    };
    assert!((zl - 2.61).abs() <= 0.01, "flat-top edge {zl:.5} outside 2.61 +- 0.01");

    let t = RefDensity::StudentT2Rescaled.project();
    assert_eq!(t.kind, ProjectionKind::Laplace);
    let mut worst = 0.0f64;
    for x in [-7.0, -2.5, -1.0, -0.3, 0.0, 0.3, 1.0, 2.5, 7.0] {
        let gap = (t.log_pdf(x) - (-x.abs() - std::f64::consts::LN_2)).abs();
        worst = worst.max(gap);
    }
    assert!(worst <= 1e-12, "t2 projection deviates from -|x| - ln 2 by {worst:.3e}");

    println!(
        "criterion 5: PASS - flat-top edges {zg:.4} and {zl:.4} (targets 2.83 and 2.61 \
         +- 0.01); t2 projection equals the standard laplace to {worst:.1e}"
    );
}

/// Squared Hellinger distance between the recentred fit and the standard
/// normal, by Simpson between the fitted knots (the integrand vanishes
/// outside the fitted support).
fn hellinger_sq_to_normal(mle: &MleFit) -> f64 {
    let full = mle.fit.full();
    let theta = mle.theta;
    let f = |z: f64| (full.pdf(z) * RefDensity::Normal.pdf(z + theta)).sqrt();
    let overlap = integrate_piecewise(&f, full.log_density().knots(), 32);
    (1.0 - overlap).max(0.0)
}

#[test]
fn criterion_06_fit_error_shrinks_with_sample_size() {
    let d = RefDensity::Normal;
    let mut med_h2 = Vec::new();
    let mut med_th = Vec::new();
    for &n in &[50usize, 200, 800] {
        let mut h2s = Vec::with_capacity(100);
        let mut ths = Vec::with_capacity(100);
        for rep in 0..100 {
            let sample = d.sample(n, cell_seed(4106, "normal", n, rep));
            let mle = fit_mle(&sample, &MleConfig::default())
                .unwrap_or_else(|e| panic!("fit at n = {n}, rep {rep} failed: {e}"));
            ths.push(mle.theta.abs());
            h2s.push(hellinger_sq_to_normal(&mle));
        }
        med_h2.push(median(&mut h2s));
        med_th.push(median(&mut ths));
    }
    println!(
        "criterion 6: median H^2 = {:.5}/{:.5}/{:.5} and median |theta| = \
         {:.5}/{:.5}/{:.5} at n = 50/200/800",
        med_h2[0], med_h2[1], med_h2[2], med_th[0], med_th[1], med_th[2]
    );
    assert!(
        med_h2[0] > med_h2[1] && med_h2[1] > med_h2[2],
        "median H^2 {med_h2:?} is not strictly decreasing in n"
    );
    assert!(
        med_th[0] > med_th[1] && med_th[1] > med_th[2],
        "median |theta| {med_th:?} is not strictly decreasing in n"
    );
    let shrink = med_h2[0] / med_h2[2];
    assert!(shrink >= 2.2, "H^2 shrink factor {shrink:.3} from n = 50 to 800 is below 2.2");
    println!("criterion 6: PASS - H^2 shrink factor {shrink:.2} (floor 2.2)");
}

#[test]
fn criterion_07_one_step_dispersion_tracks_the_window_information() {
    let d = RefDensity::Normal;
    let info_eta = d.truncated_info(0.002).unwrap();
    let cfg = OneStepConfig::default();
    for &n in &[200usize, 500] {
        let mut estimates = Vec::with_capacity(300);
        for rep in 0..300 {
            let sample = d.sample(n, cell_seed(4107, "normal", n, rep));
            let (theta, _) = one_step(&sample, &cfg)
                .unwrap_or_else(|e| panic!("one-step at n = {n}, rep {rep} failed: {e}"));
            estimates.push(theta);
        }
        let scaled = n as f64 * sample_variance(&estimates) * info_eta;
        println!("criterion 7: n = {n} gives n * var * I(0.002) = {scaled:.3} (band 0.75..1.35)");
        assert!(
            (0.75..=1.35).contains(&scaled),
            "n = {n}: scaled one-step variance {scaled:.4} left the band [0.75, 1.35]"
        );
    }
    println!("criterion 7: PASS");
}

#[test]
fn criterion_08_efficiency_orderings() {
    let cfg = ExperimentConfig {
        densities: parse_densities("normal,laplace,symbeta(2.1)").unwrap(),
        sizes: vec![500],
        replications: 300,
        estimators: parse_estimators("mean,median,trimmed,os-mean-partial,os-mean-smooth")
            .unwrap(),
        eta: 0.002,
        seed: 4108,
        out_dir: std::env::temp_dir(),
    };
    let table = run_efficiency(&cfg).expect("efficiency study");
    let eff = |density: &str, estimator: &str| -> f64 {
        let row = table
            .rows
            .iter()
            .find(|r| r.density == density && r.estimator == estimator && r.n == 500)
            .unwrap_or_else(|| panic!("missing cell {density}/{estimator}"));
        assert_eq!(row.failures, 0, "{density}/{estimator} had estimator failures");
        row.efficiency
            .unwrap_or_else(|| panic!("no efficiency for {density}/{estimator}"))
    };

    let mean_normal = eff("normal", "mean");
    for os in ["os-mean-partial", "os-mean-smooth"] {
        let e = eff("normal", os);
        println!("criterion 8: normal mean {mean_normal:.3} vs {os} {e:.3}");
        assert!(
            mean_normal > e,
            "under the normal the mean ({mean_normal:.4}) must strictly beat {os} ({e:.4})"
        );
    }

    let median_laplace = eff("laplace", "median");
    let mean_laplace = eff("laplace", "mean");
    println!("criterion 8: laplace median {median_laplace:.3} vs mean {mean_laplace:.3}");
    assert!(
        median_laplace > mean_laplace,
        "under the laplace the median ({median_laplace:.4}) must strictly beat the mean \
         ({mean_laplace:.4})"
    );

    for est in ["mean", "median", "trimmed", "os-mean-partial", "os-mean-smooth"] {
        let e = eff("symbeta(2.1)", est);
        println!("criterion 8: symbeta(2.1) {est} efficiency {e:.3} (cap 0.4)");
        assert!(e < 0.4, "under symbeta(2.1) {est} reached efficiency {e:.4} >= 0.4");
    }
    println!("criterion 8: PASS");
}

/// L1 distance between the recentred fit and a projection density: Simpson
/// between kinks over the fitted support, plus the projection mass outside.
fn l1_to_projection(mle: &MleFit, proj: &ProjectionResult) -> f64 {
    let full = mle.fit.full();
    let theta = mle.theta;
    let (lo, hi) = (theta - mle.fit.radius(), theta + mle.fit.radius());
    let mut cuts: Vec<f64> = full.log_density().knots().iter().map(|k| k + theta).collect();
    if let ProjectionKind::FlatTop { z } = proj.kind {
        for edge in [-z, z] {
            if edge > lo && edge < hi {
                cuts.push(edge);
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let f = |x: f64| (full.pdf(x - theta) - proj.pdf(x)).abs();
    let inside = integrate_piecewise(&f, &cuts, 64);
    inside + (1.0 - (proj.cdf(hi) - proj.cdf(lo)))
}

#[test]
fn criterion_09_bimodal_truth_center_recovery() {
    let d = RefDensity::GaussMixture;
    let tag = d.to_string();
    let cfg = OneStepConfig::default();
    let mut os = Vec::with_capacity(50);
    let mut ml = Vec::with_capacity(50);
    for rep in 0..50 {
        let sample = d.sample(800, cell_seed(4109, &tag, 800, rep));
        let (theta, _) = one_step(&sample, &cfg)
            .unwrap_or_else(|e| panic!("one-step on rep {rep} failed: {e}"));
        os.push(theta.abs());
        let mle = fit_mle(&sample, &MleConfig::default())
            .unwrap_or_else(|e| panic!("fit on rep {rep} failed: {e}"));
        ml.push(mle.theta.abs());
    }
    let med_os = median(&mut os);
    let med_ml = median(&mut ml);
    println!(
        "criterion 9: median |one-step| = {med_os:.4} and median |mle| = {med_ml:.4} \
         over 50 bimodal samples at n = 800 (caps 0.15)"
    );
    assert!(med_os < 0.15, "median one-step drift {med_os:.4} reached 0.15");
    assert!(med_ml < 0.15, "median mle drift {med_ml:.4} reached 0.15");

    let sample = d.sample(2000, cell_seed(4109, &tag, 2000, 0));
    let mle = fit_mle(&sample, &MleConfig::default()).expect("fit at n = 2000");
    let l1 = l1_to_projection(&mle, &d.project());
    println!("criterion 9: L1 gap of the n = 2000 fit to the flat-top projection = {l1:.4} (cap 0.12)");
    assert!(l1 < 0.12, "L1 gap {l1:.4} to the projection reached 0.12");
    println!("criterion 9: PASS");
}

/// Golden-section maximum of a concave function on `[lo, hi]`.
fn golden_max(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..90 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    let xm = 0.5 * (lo + hi);
    (xm, f(xm))
}

#[test]
fn criterion_10_two_point_fits_match_brute_force() {
    let mut worst = 0.0f64;
    for &x1 in &[-3.0, -0.75, 0.0, 1.5] {
        for &gap in &[0.1, 0.7, 1.0, 2.5, 10.0] {
            let x2 = x1 + gap;
            let sample = WeightedSample::uniform(&[x1, x2]).expect("two points");
            let fit = lcmle::fit(&sample, &FitConfig::default())
                .unwrap_or_else(|e| panic!("fit of {{{x1}, {x2}}} failed: {e}"));

            // Brute force: the log-density of any maximizer is linear
            // between the two observations and -inf outside, so optimize
            // the two endpoint values directly: nested golden-section
            // searches of the criterion (mean log-density minus total mass)
            // to get close, then finite-difference Newton to polish. The
            // mass term uses exp_m1 because the optimum sits exactly on the
            // diagonal a = b, where (e^b - e^a)/(b - a) cancels.
            let objective = |a: f64, b: f64| {
                let d = b - a;
                let ratio = if d == 0.0 { 1.0 } else { d.exp_m1() / d };
                0.5 * (a + b) - gap * a.exp() * ratio
            };
            let (mut a_star, _) =
                golden_max(-6.0, 4.0, |a| golden_max(-6.0, 4.0, |b| objective(a, b)).1);
            let (mut b_star, _) = golden_max(-6.0, 4.0, |b| objective(a_star, b));
            for _ in 0..4 {
                let h = 1e-4;
                let ga = (objective(a_star + h, b_star) - objective(a_star - h, b_star)) / (2.0 * h);
                let gb = (objective(a_star, b_star + h) - objective(a_star, b_star - h)) / (2.0 * h);
                let w0 = objective(a_star, b_star);
                let haa = (objective(a_star + h, b_star) - 2.0 * w0 + objective(a_star - h, b_star))
                    / (h * h);
                let hbb = (objective(a_star, b_star + h) - 2.0 * w0 + objective(a_star, b_star - h))
                    / (h * h);
                let hab = (objective(a_star + h, b_star + h) - objective(a_star + h, b_star - h)
                    - objective(a_star - h, b_star + h)
                    + objective(a_star - h, b_star - h))
                    / (4.0 * h * h);
                let det = haa * hbb - hab * hab;
                a_star -= (hbb * ga - hab * gb) / det;
                b_star -= (haa * gb - hab * ga) / det;
            }
            // The oracle itself must land on the flat profile at -ln(gap);
            // if it does not, the comparison below would be meaningless.
            assert!(
                (a_star - b_star).abs() <= 1e-8 && (a_star + gap.ln()).abs() <= 1e-8,
                "oracle sanity: a = {a_star}, b = {b_star}, -ln gap = {}",
                -gap.ln()
            );

            for k in 0..=500 {
                let x = x1 + gap * k as f64 / 500.0;
                let oracle = a_star + (b_star - a_star) * (x - x1) / gap;
                worst = worst.max((fit.log_density().eval(x) - oracle).abs());
            }
        }
    }
    assert!(
        worst <= 1e-6,
        "sup log-density gap to the brute-force optimum = {worst:.3e} exceeds 1e-6"
    );
    println!(
        "criterion 10: PASS - 20/20 two-point fits within {worst:.3e} of the brute-force \
         optimum (cap 1e-6)"
    );
}
