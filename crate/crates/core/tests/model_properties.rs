//! Log-posterior, transforms and deviance against hand arithmetic, analytic
//! Jacobians and independent summation.

use flexmeta::distributions::{Family, FamilyParams};
use flexmeta::model::{LatentState, ModelSpec, PriorConfig, Transform};
use flexmeta::StudyRecord;
use proptest::prelude::*;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

fn one_study() -> Vec<StudyRecord> {
    vec![StudyRecord::new("a", 0.0, 1.0)]
}

fn spec(studies: Vec<StudyRecord>, family: Family) -> ModelSpec {
    ModelSpec::new(studies, family, PriorConfig::default()).unwrap()
}

fn normal_state(theta: Vec<f64>, xi: f64, omega: f64) -> LatentState {
    LatentState {
        theta,
        hyper: FamilyParams::normal(xi, omega),
    }
}

#[test]
fn single_study_terms_by_hand() {
    let s = spec(one_study(), Family::Normal);
    let z = s.to_unconstrained(&normal_state(vec![0.0], 0.0, 1.0)).unwrap();
    let t = s.log_posterior_terms(&z).unwrap();
    assert!((t.likelihood + LN_SQRT_2PI).abs() < 1e-14);
    assert!((t.random_effects + LN_SQRT_2PI).abs() < 1e-14);
    // ξ ~ N(0, 100²) at 0 and ω ~ U(0, 20)
    let prior = -LN_SQRT_2PI - 100f64.ln() - 20f64.ln();
    assert!((t.prior - prior).abs() < 1e-13);
    // ω = 20p with p = 1/20: dω/dz = 20 p (1 − p)
    let jac = (20.0 * 0.05 * 0.95f64).ln();
    assert!((t.jacobian - jac).abs() < 1e-13);
    let total = -2.0 * LN_SQRT_2PI + prior + jac;
    assert!((s.log_posterior(&z).unwrap() - total).abs() < 1e-13);
}

#[test]
fn moving_one_effect_by_one_costs_one() {
    let s = spec(one_study(), Family::Normal);
    let z0 = s.to_unconstrained(&normal_state(vec![0.0], 0.0, 1.0)).unwrap();
    let z1 = s.to_unconstrained(&normal_state(vec![1.0], 0.0, 1.0)).unwrap();
    let d = s.log_posterior(&z1).unwrap() - s.log_posterior(&z0).unwrap();
    assert!((d + 1.0).abs() < 1e-14);
}

#[test]
fn jacobian_term_near_the_scale_bound() {
    let s = spec(one_study(), Family::Normal);
    // θ = ξ keeps the random-effects term moderate while ω ≈ 2e-12
    let z = [0.1, -30.0, 0.1];
    let t = s.log_posterior_terms(&z).unwrap();
    assert!(s.log_posterior(&z).unwrap().is_finite());
    let analytic = 20f64.ln() + z[1] - 2.0 * z[1].exp().ln_1p();
    assert!((t.jacobian - analytic).abs() < 1e-12);
    let without = t.likelihood + t.random_effects + t.prior;
    assert!((t.total() - without - analytic).abs() < 1e-12);
}

#[test]
fn omega_midpoint_and_nu_bound() {
    let s = spec(one_study(), Family::Normal);
    let z = s.to_unconstrained(&normal_state(vec![0.0], 0.0, 10.0)).unwrap();
    assert_eq!(z[1], 0.0);
    let t = spec(one_study(), Family::StudentT);
    for zn in [-800.0, -50.0, -1.0, 0.0] {
        let h = t.hyper_from_unconstrained(&[0.0, 0.0, zn]).unwrap();
        assert!(h.values()[2] > 2.5);
    }
}

#[test]
fn transform_jacobians_match_finite_differences() {
    let transforms = [
        Transform::ShiftedLog { lower: 2.5 },
        Transform::ScaledLogit { lower: 0.0, upper: 20.0 },
        Transform::ScaledLogit { lower: 1.5, upper: 200.0 },
        Transform::ScaledLogit { lower: 0.0, upper: 100.0 },
        Transform::Identity,
    ];
    let h = 1e-5;
    for t in transforms {
        for i in 0..=32 {
            let z = -8.0 + 0.5 * i as f64;
            let d = (t.to_constrained(z + h) - t.to_constrained(z - h)) / (2.0 * h);
            assert!((d.ln() - t.ln_jacobian(z)).abs() < 1e-6, "{t:?} at {z}");
        }
    }
}

#[test]
fn normal_location_is_exactly_quadratic() {
    let studies: Vec<StudyRecord> = (0..6)
        .map(|i| StudyRecord::new(format!("s{i}"), 0.4 * i as f64 - 1.0, 0.5 + 0.1 * i as f64))
        .collect();
    let mut priors = PriorConfig::default();
    priors.apply_override("xi=flat").unwrap();
    priors.apply_override("omega=fixed:2").unwrap();
    let s = ModelSpec::new(studies, Family::Normal, priors).unwrap();
    let theta = [-1.2, 0.3, 0.0, 1.9, -0.4, 0.8];
    let f = |xi: f64| {
        let mut z = vec![xi, 0.0];
        z.extend_from_slice(&theta);
        s.log_posterior(&z).unwrap()
    };
    let (omega, k) = (2.0, theta.len() as f64);
    let sum: f64 = theta.iter().sum();
    for xi in [-3.0, 0.0, 0.7, 5.0] {
        let h = 0.5;
        let second = (f(xi + h) - 2.0 * f(xi) + f(xi - h)) / (h * h);
        let first = (f(xi + h) - f(xi - h)) / (2.0 * h);
        assert!((second + k / (omega * omega)).abs() < 1e-9, "{second}");
        assert!((first - (sum - k * xi) / (omega * omega)).abs() < 1e-9, "{first}");
    }
}

#[test]
fn deviance_examples() {
    let s = spec(one_study(), Family::Normal);
    assert!((s.deviance(&[0.0]).unwrap() - 1.837_877_066_409_345_5).abs() < 1e-12);
    let studies: Vec<StudyRecord> = [0.5, -1.0, 2.0].iter().map(|&y| StudyRecord::new("s", y, 1.0)).collect();
    let s = spec(studies.clone(), Family::Normal);
    let theta = [0.1, 0.2, 0.3];
    let moved: Vec<f64> = studies.iter().zip(&theta).map(|(r, t)| r.y - 2.0 * (r.y - t)).collect();
    let expected: f64 = studies
        .iter()
        .zip(&theta)
        .zip(&moved)
        .map(|((r, t), m)| (r.y - m).powi(2) - (r.y - t).powi(2))
        .sum();
    let d = s.deviance(&moved).unwrap() - s.deviance(&theta).unwrap();
    assert!((d - expected).abs() < 1e-12);
}

/// Neumaier-compensated sum of the per-study deviance terms.
fn compensated_deviance(studies: &[StudyRecord], theta: &[f64]) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for (s, t) in studies.iter().zip(theta) {
        let term = ((s.y - t) / s.se).powi(2) + 2.0 * s.se.ln() + 2.0 * LN_SQRT_2PI;
        let next = sum + term;
        c += if sum.abs() >= term.abs() { (sum - next) + term } else { (term - next) + sum };
        sum = next;
    }
    sum + c
}

fn studies_strategy() -> impl Strategy<Value = Vec<StudyRecord>> {
    prop::collection::vec((-20.0..20.0f64, 0.1..5.0f64), 2..30)
        .prop_map(|v| v.into_iter().enumerate().map(|(i, (y, se))| StudyRecord::new(format!("s{i}"), y, se)).collect())
}

/// A value inside the default prior support of `name`.
fn hyper_value(name: &str, u: f64) -> f64 {
    match name {
        "xi" | "alpha" | "epsilon" => -50.0 + 100.0 * u,
        "omega" => 0.01 + 19.98 * u,
        "nu" => 2.51 + 60.0 * u,
        "a" | "b" => 1.51 + 198.0 * u,
        "delta" => 0.01 + 99.98 * u,
        _ => unreachable!("{name}"),
    }
}

fn state_strategy() -> impl Strategy<Value = (Family, Vec<f64>, Vec<f64>)> {
    (0..7usize, prop::collection::vec(0.0..1.0f64, 4), prop::collection::vec(-30.0..30.0f64, 3)).prop_map(
        |(f, u, theta)| {
            let family = Family::ALL[f];
            let hyper = family.parameter_names().iter().zip(&u).map(|(n, &u)| hyper_value(n, u)).collect();
            (family, hyper, theta)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn unconstrained_round_trip((family, hyper, theta) in state_strategy()) {
        let studies = (0..3).map(|i| StudyRecord::new(format!("s{i}"), 0.0, 1.0)).collect();
        let s = spec(studies, family);
        let state = LatentState { theta: theta.clone(), hyper: FamilyParams::from_values(family, &hyper).unwrap() };
        let back = s.from_unconstrained(&s.to_unconstrained(&state).unwrap()).unwrap();
        for (a, b) in back.hyper.values().iter().zip(&hyper) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
        }
        prop_assert_eq!(back.theta, theta);
    }

    #[test]
    fn deviance_matches_compensated_sum(studies in studies_strategy(), shift in -3.0..3.0f64) {
        let theta: Vec<f64> = studies.iter().map(|s| s.y + shift * s.se).collect();
        let s = spec(studies.clone(), Family::Normal);
        let d = s.deviance(&theta).unwrap();
        prop_assert!((d - compensated_deviance(&studies, &theta)).abs() < 1e-9);
    }

    #[test]
    fn study_order_does_not_matter(studies in studies_strategy(), rot in 1usize..29, alpha in -5.0..5.0f64) {
        let k = studies.len();
        let theta: Vec<f64> = studies.iter().map(|s| 0.8 * s.y).collect();
        let z_of = |th: &[f64]| {
            let mut z = vec![0.5, 0.2, alpha];
            z.extend_from_slice(th);
            z
        };
        let a = spec(studies.clone(), Family::SkewNormal).log_posterior(&z_of(&theta)).unwrap();
        let perm: Vec<usize> = (0..k).map(|i| (i * (rot % k + 1) + rot) % k).collect();
        let mut seen = perm.clone();
        seen.sort();
        seen.dedup();
        prop_assume!(seen.len() == k);
        let ps: Vec<StudyRecord> = perm.iter().map(|&i| studies[i].clone()).collect();
        let pt: Vec<f64> = perm.iter().map(|&i| theta[i]).collect();
        let b = spec(ps, Family::SkewNormal).log_posterior(&z_of(&pt)).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{a} vs {b}");
    }
}
