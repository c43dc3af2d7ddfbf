use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use statrs::function::gamma::gamma;

use crate::path_simulation::SampleGrid;

fn samples(theta0: f64, n: usize, seed: u64) -> (DensityProcess, DensitySamples) {
    let d = DensityProcess::new(ThetaProcess::constant(theta0));
    let g = Arc::new(SampleGrid::uniform(1.0, 8).unwrap());
    let s = DensitySamples::draw(&d, g, n, seed).unwrap();
    (d, s)
}

fn solved(u: UtilityFunction, w: f64, theta0: f64, n: usize, restricted: bool) -> UtilityProblem {
    let (d, s) = samples(theta0, n, 7);
    let mut p = UtilityProblem::new(u, w, d, s, restricted).unwrap();
    solve_budget_constant(&mut p).unwrap();
    p
}

#[test]
fn inverse_marginal_examples() {
    let e = UtilityFunction::exponential(1.0).unwrap();
    assert!(e.inverse_marginal(1.0, false).unwrap().abs() < 1e-15);
    let p = UtilityFunction::power(0.5).unwrap();
    assert!((p.inverse_marginal(4.0, true).unwrap() - 1.0 / 16.0).abs() < 1e-15);
    assert!(e.inverse_marginal(0.0, false).is_err());
    assert!(UtilityFunction::Log.inverse_marginal(-1.0, false).is_err());
    // Bounded marginal: π₂ = e.du(0) = 1, so y ≥ 1 clips to zero.
    assert_eq!(e.inverse_marginal(1.5, true).unwrap(), 0.0);
    assert_eq!(e.inverse_marginal(1.0, true).unwrap(), 0.0);
}

#[test]
fn custom_utility_matches_closed_form() {
    let c = UtilityFunction::custom("log", |x: f64| x.ln(), |x: f64| 1.0 / x, 0.0).unwrap();
    for y in [0.01, 0.5, 1.0, 3.0, 250.0] {
        let x = c.inverse_marginal(y, false).unwrap();
        assert!((x - 1.0 / y).abs() <= 1e-12 * (1.0 / y), "{y}: {x}");
    }
    let bounded =
        UtilityFunction::custom("log1p", |x: f64| x.ln_1p(), |x: f64| 1.0 / (1.0 + x), -1.0)
            .unwrap();
    assert!((bounded.pi2() - 1.0).abs() < 1e-12);
    assert!((bounded.inverse_marginal(0.25, true).unwrap() - 3.0).abs() < 1e-12);
    assert_eq!(bounded.inverse_marginal(1.2, true).unwrap(), 0.0);
}

#[test]
fn shape_check_rejects_convex() {
    assert!(UtilityFunction::custom("convex", |x: f64| x * x, |x: f64| 2.0 * x, 0.0).is_err());
    assert!(UtilityFunction::custom("linear", |x: f64| x, |_| 1.0, f64::NEG_INFINITY).is_err());
    assert!(UtilityFunction::power(1.0).is_err());
    assert!(UtilityFunction::exponential(0.0).is_err());
}

#[test]
fn log_utility_budget_constant_is_exact() {
    let p = solved(UtilityFunction::Log, 2.0, 1.0, 4000, false);
    let c = p.c.unwrap();
    assert!((c - 0.5).abs() <= 1e-12, "{c}");
    let s = optimal_profile(&p).unwrap();
    assert!(
        s.expected_utility.within(2f64.ln() + 0.5, 3.0),
        "{:?}",
        s.expected_utility
    );
    assert!(s.budget_residual.abs() <= 3.0 * s.budget.se.max(1e-12));
}

#[test]
fn exponential_expected_utility_and_routes_agree() {
    let p = solved(
        UtilityFunction::exponential(1.0).unwrap(),
        0.0,
        1.0,
        8000,
        false,
    );
    let s = optimal_profile(&p).unwrap();
    let target = 1.0 - (-0.5f64).exp();
    assert!((target - 0.39347).abs() < 1e-5);
    assert!(
        s.expected_utility.within(target, 3.0),
        "{:?}",
        s.expected_utility
    );
    assert!(s.budget_residual.abs() <= 3.0 * s.budget.se);

    // Closed-form route with the Monte Carlo entropy from the same samples.
    let h = relative_entropy(&p.samples.phi);
    let g = Arc::new(SampleGrid::uniform(1.0, 8).unwrap());
    let model = CovarianceModel::fbm(0.5, 1.0).unwrap();
    let sampler = PathSampler::new(&model, g, SamplingMethod::Circulant).unwrap();
    let closed: Vec<f64> = (0..8000)
        .map(|k| {
            exponential_profile_closed_form(
                &p.density.theta,
                1.0,
                0.0,
                h.mean,
                &sampler.sample(7, k),
            )
            .unwrap()
        })
        .collect();
    let diff: Vec<f64> = closed.iter().zip(&s.profile).map(|(a, b)| a - b).collect();
    let spread = diff.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    // The profiles differ by the constant H + log c = H(1 − 1/mean φ) on the samples.
    let phi_bar = estimate(&p.samples.phi);
    assert!(
        spread <= 3.0 * (h.se + h.mean * phi_bar.se) + 1e-9,
        "{spread} vs {}",
        h.se
    );
    let eu = estimate(&closed.iter().map(|&x| 1.0 - (-x).exp()).collect::<Vec<_>>());
    assert!((eu.mean - s.expected_utility.mean).abs() <= 3.0 * (eu.se + s.expected_utility.se));
    let budget = estimate(
        &closed
            .iter()
            .zip(&p.samples.phi)
            .map(|(x, f)| x * f)
            .collect::<Vec<_>>(),
    );
    assert!(budget.within(0.0, 3.0), "{budget:?}");
}

#[test]
fn closed_form_rejects_infinite_entropy() {
    let (d, _) = samples(1.0, 1, 1);
    let g = Arc::new(SampleGrid::uniform(1.0, 8).unwrap());
    let sampler = PathSampler::new(
        &CovarianceModel::fbm(0.5, 1.0).unwrap(),
        g,
        SamplingMethod::Circulant,
    )
    .unwrap();
    assert!(exponential_profile_closed_form(
        &d.theta,
        1.0,
        0.0,
        f64::INFINITY,
        &sampler.sample(1, 0)
    )
    .is_err());
}

#[test]
fn degenerate_density_gives_the_budget() {
    let p = solved(
        UtilityFunction::exponential(2.0).unwrap(),
        1.5,
        0.0,
        50,
        false,
    );
    let s = optimal_profile(&p).unwrap();
    assert!(s.profile.iter().all(|x| (x - 1.5).abs() < 1e-12));
    assert!((s.expected_utility.mean - (1.0 - (-3.0f64).exp())).abs() < 1e-12);
    assert_eq!(relative_entropy(&p.samples.phi).mean, 0.0);
}

#[test]
fn entropy_of_constant_integrands() {
    for theta0 in [0.5, 1.0, 2.0] {
        let (_, s) = samples(theta0, 20000, 11);
        let h = relative_entropy(&s.phi);
        assert!(h.mean >= 0.0);
        assert!(h.within(0.5 * theta0 * theta0, 3.0), "{theta0}: {h:?}");
    }
}

#[test]
fn power_utility_constant() {
    let gamma = 0.5;
    let p = solved(
        UtilityFunction::power(gamma).unwrap(),
        1.0,
        1.0,
        20000,
        false,
    );
    let d = power_profile_constant(&p.samples.phi, gamma);
    assert!(
        d.within((gamma / (2.0 * (1.0 - gamma) * (1.0 - gamma))).exp(), 3.0),
        "{d:?}"
    );
    let c = p.c.unwrap();
    // X* = (cφ)^{−1/(1−γ)} equals (w/d)φ^{−1/(1−γ)} when c^{−1/(1−γ)} = w/d.
    let implied = c.powf(-1.0 / (1.0 - gamma));
    assert!(
        (implied - 1.0 / d.mean).abs() <= 1e-9 * implied,
        "{implied} vs {}",
        1.0 / d.mean
    );
}

#[test]
fn restricted_profiles_are_nonnegative() {
    let p = solved(
        UtilityFunction::exponential(1.0).unwrap(),
        0.3,
        1.0,
        4000,
        true,
    );
    let s = optimal_profile(&p).unwrap();
    assert!(s.profile.iter().all(|&x| x >= 0.0));
    assert!(s.profile.contains(&0.0));
    assert_eq!(s.infeasible, 0);
    assert!(s.budget_residual.abs() <= 3.0 * s.budget.se);
}

#[test]
fn restricted_problem_needs_positive_budget() {
    let (d, s) = samples(1.0, 10, 1);
    assert!(UtilityProblem::new(UtilityFunction::Log, 0.0, d, s, true).is_err());
}

#[test]
fn budget_bracket_failure_is_reported() {
    // Log utility with a negative budget has no positive profile.
    let (d, s) = samples(1.0, 10, 1);
    let mut p = UtilityProblem::new(UtilityFunction::Log, -1.0, d, s, false).unwrap();
    assert!(matches!(
        solve_budget_constant(&mut p),
        Err(Error::Bracket(_))
    ));
}

#[test]
fn budget_preserving_perturbations_lose_utility() {
    let p = solved(
        UtilityFunction::exponential(1.0).unwrap(),
        0.0,
        1.0,
        4000,
        false,
    );
    let s = optimal_profile(&p).unwrap();
    let phi = &p.samples.phi;
    let wt = &p.samples.wiener_terminal;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let eu = |x: &[f64]| mean(&x.iter().map(|&v| 1.0 - (-v).exp()).collect::<Vec<_>>());
    let base = eu(&s.profile);
    let directions: [Box<dyn Fn(f64) -> f64>; 2] = [Box::new(|w| w), Box::new(|w| w * w)];
    let mut checked = 0;
    for z in &directions {
        let zs: Vec<f64> = wt.iter().map(|&w| z(w)).collect();
        let shift = mean(&zs.iter().zip(phi).map(|(a, b)| a * b).collect::<Vec<_>>()) / mean(phi);
        for k in 1..=5 {
            for sign in [-1.0, 1.0] {
                let eta = sign * 0.1 * k as f64;
                let y: Vec<f64> = s
                    .profile
                    .iter()
                    .zip(&zs)
                    .map(|(x, z)| x + eta * (z - shift))
                    .collect();
                let b = mean(&y.iter().zip(phi).map(|(a, b)| a * b).collect::<Vec<_>>());
                assert!((b - s.budget.mean).abs() < 1e-10);
                assert!(eu(&y) < base, "eta {eta}: {} vs {base}", eu(&y));
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 20);
}

#[test]
fn hidden_constants_at_three_quarters() {
    // Γ(0.75), Γ(0.5) = √π and Γ(1.25) from tables.
    let (g34, g12, g54) = (
        1.225_416_702_465_177,
        std::f64::consts::PI.sqrt(),
        0.906_402_477_055_477,
    );
    let expected = (g34 / (1.5 * g12 * g54)).sqrt() / 0.75;
    let c = hidden_semimartingale_constants(0.75).unwrap();
    assert!(
        (c.c1 - expected).abs() <= 1e-10 * expected,
        "{} vs {expected}",
        c.c1
    );
    assert!((c.c1 - 0.951).abs() < 5e-4);
    for h in [0.55, 0.6, 0.75, 0.9, 0.95] {
        let c = hidden_semimartingale_constants(h).unwrap();
        assert!((c.c2 / c.c1 - (1.5 - h)).abs() < 1e-14);
    }
    assert!(hidden_semimartingale_constants(0.5).is_err());
}

#[test]
fn kernel_drift_integral_scaling() {
    for h in [0.6, 0.75, 0.9] {
        let one = kernel_drift_integral(h, 1.0).unwrap();
        let half = kernel_drift_integral(h, 0.5).unwrap();
        let ratio = 2f64.powf(-(1.5 - h));
        assert!(
            ((half / one) - ratio).abs() <= 1e-3 * ratio,
            "{h}: {}",
            half / one
        );
        // ∫_0^1 s^{½−H} K*(1,s) ds = Γ(3/2−H) / ((3/2−H) Γ(2−2H)).
        let closed = gamma(1.5 - h) / ((1.5 - h) * gamma(2.0 - 2.0 * h));
        assert!(
            (one - closed).abs() <= 1e-6 * closed,
            "{h}: {one} vs {closed}"
        );
    }
}

#[test]
fn example42_integrand() {
    let flat = Example42::new(0.75, 0.03, 0.03, 0.2).unwrap();
    assert_eq!(flat.varsigma(0.3), 0.1);
    assert_eq!(flat.moment_order(), f64::INFINITY);
    let m = Example42::new(0.75, 0.08, 0.03, 0.2).unwrap();
    let c2 = hidden_semimartingale_constants(0.75).unwrap().c2;
    assert!((m.varsigma(1.0) - (0.25 * c2 + 0.1)).abs() < 1e-15);
    assert!(m.moment(1.5, 1.0).unwrap().is_finite());
    assert!(m.moment(2.5, 1.0).is_err());
    // p = 1: ∫_0^1 (a s^{−1/4} + b)² ds = 2a² + (8/3)ab + b².
    let (a, b) = (m.drift_coefficient(), 0.1);
    let exact = 2.0 * a * a + 8.0 / 3.0 * a * b + b * b;
    assert!((m.moment(1.0, 1.0).unwrap() - exact).abs() < 1e-9 * exact);
    assert!(m.moment_order() > 1.0 && (m.h - 0.5) * 2.0 * m.moment_order() < 1.0);
}

#[test]
fn example42_density_has_unit_mean() {
    let theta = example42_theta(0.75, 0.08, 0.03, 0.2).unwrap();
    let d = DensityProcess::new(theta);
    let g = Arc::new(SampleGrid::uniform(1.0, 64).unwrap());
    let s = DensitySamples::draw(&d, g, 8000, 5).unwrap();
    assert!(estimate(&s.phi).within(1.0, 3.0));
    let h = relative_entropy(&s.phi);
    assert!(h.mean.is_finite() && h.mean >= 0.0);
}

/// Independent evaluation for H = 3/4 after removing both singularities by
/// substitution (`v = t + εw⁴` in `J`, `u = x²` outside), with Simpson's rule.
fn prelimit_quadrature_three_quarters(eps: f64, t: f64) -> f64 {
    let simpson = |f: &dyn Fn(f64) -> f64, a: f64, b: f64| {
        let n = 4000;
        let hh = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for k in 1..n {
            s += f(a + k as f64 * hh) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * hh / 3.0
    };
    let big = t + eps;
    let j = 4.0 * eps.powf(0.25) * simpson(&|w: f64| (t + eps * w.powi(4)).powf(0.25), 0.0, 1.0);
    let denom = t.powf(-0.25) * j;
    simpson(
        &|x: f64| 2.0 * big.sqrt() * (big - x * x).powf(-1.5) / (denom * denom),
        0.0,
        t.sqrt(),
    )
}

#[test]
fn prelimit_variance_values() {
    let v = prelimit_variance(0.75, 0.1, 1.0).unwrap();
    let formula = 0.1f64.powf(-0.5) * (1.0 / 0.5) * (0.1f64.powf(-0.5) - 1.1f64.powf(-0.5));
    assert!((v.stated_bound - formula).abs() < 1e-6);
    assert!((v.stated_bound - 13.97).abs() < 5e-3);
    let oracle = prelimit_quadrature_three_quarters(0.1, 1.0);
    assert!(
        (v.quadrature - oracle).abs() <= 1e-6 * oracle,
        "{} vs {oracle}",
        v.quadrature
    );
    let halved = prelimit_variance(0.75, 0.05, 1.0).unwrap();
    assert!(halved.stated_bound > v.stated_bound);
    assert!(halved.quadrature > v.quadrature);
}

#[test]
fn prelimit_variance_dominates_the_rigorous_bound() {
    for h in [0.6, 0.75, 0.9] {
        for eps in [0.05, 0.1, 0.2] {
            for t in [0.5, 1.0, 2.0] {
                let v = prelimit_variance(h, eps, t).unwrap();
                assert!(v.quadrature >= v.rigorous_bound, "({h}, {eps}, {t}): {v:?}");
            }
        }
    }
}

proptest! {
    #[test]
    fn inverse_marginal_inverts(y in 1e-3f64..1e3, beta in 0.1f64..5.0, gamma in 0.05f64..0.95) {
        for u in [UtilityFunction::exponential(beta).unwrap(), UtilityFunction::power(gamma).unwrap(), UtilityFunction::Log] {
            let x = u.inverse_marginal(y, false).unwrap();
            prop_assert!((u.du(x) - y).abs() <= 1e-9 * y);
        }
    }

    #[test]
    fn entropy_is_nonnegative(seed in 0u64..1000, theta0 in -2.0f64..2.0) {
        let (_, s) = samples(theta0, 64, seed);
        let h = relative_entropy(&s.phi);
        // Jensen holds for the empirical measure only after normalizing E φ = 1.
        let m = estimate(&s.phi).mean;
        prop_assert!(h.mean / m - m.ln() >= -1e-12);
    }
}
