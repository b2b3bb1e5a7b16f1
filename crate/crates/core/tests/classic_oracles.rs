//! DerSimonian–Laird pooling against hand arithmetic and an independent
//! re-implementation.

use flexmeta::classic::{dersimonian_laird, ClassicError};
use flexmeta::StudyRecord;
use proptest::prelude::*;

fn studies(y: &[f64], se: &[f64]) -> Vec<StudyRecord> {
    y.iter()
        .zip(se)
        .enumerate()
        .map(|(i, (&y, &se))| StudyRecord::new(format!("s{i}"), y, se))
        .collect()
}

#[test]
fn equal_weights_without_excess_dispersion() {
    let r = dersimonian_laird(&studies(&[0.0, 1.0, 2.0], &[1.0; 3])).unwrap();
    assert!((r.q - 2.0).abs() < 1e-12);
    assert_eq!(r.tau2, 0.0);
    assert!((r.mu_hat - 1.0).abs() < 1e-12);
    assert_eq!(r.i2, 0.0);
}

#[test]
fn one_outlier_among_three() {
    let r = dersimonian_laird(&studies(&[0.0, 0.0, 6.0], &[1.0; 3])).unwrap();
    assert!((r.q - 24.0).abs() < 1e-12);
    assert!((r.tau2 - 11.0).abs() < 1e-12);
    assert!((r.mu_hat - 2.0).abs() < 1e-12);
    assert!((r.i2 - 100.0 * 22.0 / 24.0).abs() < 1e-12);
    // t quantile with one degree of freedom is the Cauchy quantile
    let t = (std::f64::consts::PI * 0.475).tan();
    let half = t * 15f64.sqrt();
    let pi = r.hts_pi.unwrap();
    assert!((pi.lower - (2.0 - half)).abs() < 1e-9, "{pi:?}");
    assert!((pi.upper - (2.0 + half)).abs() < 1e-9, "{pi:?}");
    assert!((r.ci95.upper - (2.0 + 1.96 * 2.0)).abs() < 1e-12);
}

#[test]
fn common_value_has_no_heterogeneity() {
    let r = dersimonian_laird(&studies(&[1.25; 4], &[0.3, 1.0, 2.0, 0.7])).unwrap();
    assert!(r.q.abs() < 1e-12);
    assert_eq!(r.tau2, 0.0);
    assert!((r.mu_hat - 1.25).abs() < 1e-12);
    assert_eq!(r.i2, 0.0);
}

#[test]
fn rejects_too_few_or_bad_studies() {
    assert!(matches!(
        dersimonian_laird(&studies(&[1.0], &[1.0])),
        Err(ClassicError::TooFewStudies { .. })
    ));
    assert!(dersimonian_laird(&studies(&[1.0, 2.0], &[1.0, 0.0])).is_err());
    let two = dersimonian_laird(&studies(&[1.0, 2.0], &[1.0, 1.0])).unwrap();
    assert!(two.hts_pi.is_none());
}

/// Straight-line DL, written without reference to the library code.
fn reference_dl(s: &[StudyRecord]) -> (f64, f64, f64, f64) {
    let k = s.len() as f64;
    let w: Vec<f64> = s.iter().map(|r| 1.0 / (r.se * r.se)).collect();
    let s1: f64 = w.iter().sum();
    let s2: f64 = w.iter().map(|w| w * w).sum();
    let ybar = s.iter().zip(&w).map(|(r, w)| w * r.y).sum::<f64>() / s1;
    let q: f64 = s.iter().zip(&w).map(|(r, w)| w * (r.y - ybar).powi(2)).sum();
    let tau2 = ((q - (k - 1.0)) / (s1 - s2 / s1)).max(0.0);
    let ws: Vec<f64> = s.iter().map(|r| 1.0 / (r.se * r.se + tau2)).collect();
    let mu = s.iter().zip(&ws).map(|(r, w)| w * r.y).sum::<f64>() / ws.iter().sum::<f64>();
    let i2 = if q > 0.0 { ((q - (k - 1.0)) / q).max(0.0) * 100.0 } else { 0.0 };
    (mu, q, tau2, i2)
}

#[test]
fn bundled_datasets_match_reference() {
    for d in [flexmeta::synth::skew_normal_dataset(), flexmeta::synth::normal_dataset()] {
        let r = dersimonian_laird(&d).unwrap();
        let (mu, q, tau2, i2) = reference_dl(&d);
        assert!((r.mu_hat - mu).abs() < 1e-9);
        assert!((r.q - q).abs() < 1e-9);
        assert!((r.tau2 - tau2).abs() < 1e-9);
        assert!((r.i2 - i2).abs() < 1e-9);
    }
}

fn instance() -> impl Strategy<Value = Vec<StudyRecord>> {
    prop::collection::vec((-10.0..10.0f64, 0.2..3.0f64), 3..15)
        .prop_map(|v| v.into_iter().enumerate().map(|(i, (y, se))| StudyRecord::new(format!("s{i}"), y, se)).collect())
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-9 * scale.max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn invariants_hold(s in instance()) {
        let r = dersimonian_laird(&s).unwrap();
        prop_assert!(r.tau2 >= 0.0 && (0.0..=100.0).contains(&r.i2));
        prop_assert!(r.ci95.contains(r.mu_hat));
        let pi = r.hts_pi.unwrap();
        prop_assert!(pi.contains(r.mu_hat));
        prop_assert!(pi.width() > r.ci95.width());
        if r.q <= (s.len() - 1) as f64 {
            prop_assert_eq!(r.tau2, 0.0);
        }
    }

    #[test]
    fn shift_equivariance(s in instance(), c in -50.0..50.0f64) {
        let r = dersimonian_laird(&s).unwrap();
        let moved: Vec<StudyRecord> = s.iter().map(|x| StudyRecord::new(x.id.clone(), x.y + c, x.se)).collect();
        let m = dersimonian_laird(&moved).unwrap();
        let sc = 1.0 + c.abs() + r.mu_hat.abs();
        prop_assert!(close(m.mu_hat, r.mu_hat + c, sc));
        prop_assert!(close(m.ci95.lower, r.ci95.lower + c, sc));
        prop_assert!(close(m.hts_pi.unwrap().upper, r.hts_pi.unwrap().upper + c, sc + r.hts_pi.unwrap().width()));
        prop_assert!(close(m.q, r.q, r.q));
        prop_assert!(close(m.tau2, r.tau2, r.tau2));
        prop_assert!(close(m.i2, r.i2, 100.0));
    }

    #[test]
    fn scale_equivariance(s in instance(), f in 0.1..10.0f64) {
        let r = dersimonian_laird(&s).unwrap();
        let scaled: Vec<StudyRecord> = s.iter().map(|x| StudyRecord::new(x.id.clone(), x.y * f, x.se * f)).collect();
        let m = dersimonian_laird(&scaled).unwrap();
        let sc = f * (1.0 + r.mu_hat.abs() + r.hts_pi.unwrap().width());
        prop_assert!(close(m.mu_hat, r.mu_hat * f, sc));
        prop_assert!(close(m.ci95.upper, r.ci95.upper * f, sc));
        prop_assert!(close(m.hts_pi.unwrap().lower, r.hts_pi.unwrap().lower * f, sc));
        prop_assert!(close(m.tau2, r.tau2 * f * f, f * f * (1.0 + r.tau2)));
        prop_assert!(close(m.q, r.q, r.q));
        prop_assert!(close(m.i2, r.i2, 100.0));
        prop_assert!(close(m.q_pvalue, r.q_pvalue, 1.0));
    }
}
