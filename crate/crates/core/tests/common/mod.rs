//! Test-only numerical oracles.
//!
//! Double-exponential (tanh-sinh / exp-sinh) quadrature, written separately
//! from the library's Gauss–Kronrod integrator so the two can check each
//! other.

#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

use flexmeta::distributions::FamilyParams;

const MAX_LEVEL: u32 = 12;

/// ∫ₐᵇ f by tanh-sinh.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let h = 0.5 * (b - a);
    let term = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let ch = u.cosh();
        let x = u.tanh();
        // distance to the nearer endpoint without cancellation
        let gap = h / (u.abs().exp() * ch);
        let pt = if x >= 0.0 { b - gap } else { a + gap };
        let w = h * FRAC_PI_2 * t.cosh() / (ch * ch);
        if w == 0.0 || !(pt > a && pt < b) {
            0.0
        } else {
            w * f(pt)
        }
    };
    sum_levels(term, 4.0)
}

/// ∫ₐ^∞ f by exp-sinh, with `scale` the width of the bulk.
pub fn integrate_upper(f: impl Fn(f64) -> f64, a: f64, scale: f64) -> f64 {
    let term = |t: f64| -> f64 {
        let e = (FRAC_PI_2 * t.sinh()).exp();
        let w = scale * FRAC_PI_2 * t.cosh() * e;
        if !w.is_finite() || w == 0.0 {
            return 0.0;
        }
        let v = f(a + scale * e);
        if v == 0.0 {
            0.0
        } else {
            w * v
        }
    };
    sum_levels(term, 5.0)
}

/// ∫_{−∞}^b f.
pub fn integrate_lower(f: impl Fn(f64) -> f64, b: f64, scale: f64) -> f64 {
    integrate_upper(|x| f(2.0 * b - x), b, scale)
}

/// ∫ f over the real line, split at `split`.
pub fn integrate_line(f: impl Fn(f64) -> f64, split: f64, scale: f64) -> f64 {
    integrate_lower(&f, split, scale) + integrate_upper(&f, split, scale)
}

fn sum_levels(term: impl Fn(f64) -> f64, t_max: f64) -> f64 {
    let mut h = 0.5;
    let mut sum = term(0.0);
    let mut k = 1;
    while (k as f64) * h <= t_max {
        let t = k as f64 * h;
        sum += term(t) + term(-t);
        k += 1;
    }
    let mut estimate = sum * h;
    for _ in 0..MAX_LEVEL {
        h *= 0.5;
        // add the new odd nodes
        let mut k = 1;
        while (k as f64) * h <= t_max {
            let t = k as f64 * h;
            sum += term(t) + term(-t);
            k += 2;
        }
        let next = sum * h;
        if (next - estimate).abs() <= 1e-13 * next.abs().max(1e-300) {
            return next;
        }
        estimate = next;
    }
    estimate
}

pub fn pdf(p: &FamilyParams) -> impl Fn(f64) -> f64 + '_ {
    move |t| p.log_pdf(t).unwrap().exp()
}

/// Total probability of a family's density.
pub fn mass(p: &FamilyParams) -> f64 {
    integrate_line(pdf(p), p.location(), p.scale())
}

/// (mean, variance) by direct integration of θ·pdf and (θ − E)²·pdf.
pub fn quadrature_moments(p: &FamilyParams) -> (f64, f64) {
    let f = pdf(p);
    let xi = p.location();
    let omega = p.scale();
    let m1 = integrate_line(|t| (t - xi) / omega * f(t), xi, omega);
    let mean = xi + omega * m1;
    let m2 = integrate_line(
        |t| {
            let z = (t - mean) / omega;
            z * z * f(t)
        },
        xi,
        omega,
    );
    (mean, omega * omega * m2)
}

/// Numerical CDF of `p` evaluated at each of the (sorted) points.
pub fn cdf_at_sorted(p: &FamilyParams, sorted: &[f64]) -> Vec<f64> {
    let f = pdf(p);
    let xi = p.location();
    let omega = p.scale();
    let mut out = Vec::with_capacity(sorted.len());
    let mut prev = sorted[0].min(xi);
    let mut acc = integrate_lower(&f, prev, omega);
    for &x in sorted {
        if x > prev {
            acc += segment(&f, prev, x, xi, omega);
            prev = x;
        }
        out.push(acc);
    }
    out
}

fn segment(f: &impl Fn(f64) -> f64, a: f64, b: f64, kink: f64, omega: f64) -> f64 {
    if a < kink && kink < b {
        return segment(f, a, kink, kink, omega) + segment(f, kink, b, kink, omega);
    }
    if b - a < 0.02 * omega {
        gauss_legendre5(f, a, b)
    } else {
        integrate(f, a, b)
    }
}

fn gauss_legendre5(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const X: [f64; 5] = [
        -0.906_179_845_938_664,
        -0.538_469_310_105_683,
        0.0,
        0.538_469_310_105_683,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.236_926_885_056_189_1,
        0.478_628_670_499_366_5,
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
    ];
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    X.iter().zip(W).map(|(&x, w)| w * f(c + h * x)).sum::<f64>() * h
}

/// One-sample Kolmogorov–Smirnov statistic of `draws` against `p`.
pub fn ks_statistic(p: &FamilyParams, draws: &mut [f64]) -> f64 {
    draws.sort_by(f64::total_cmp);
    let cdf = cdf_at_sorted(p, draws);
    let n = draws.len() as f64;
    cdf.iter()
        .enumerate()
        .map(|(i, &c)| (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs()))
        .fold(0.0, f64::max)
}

/// Two-sample KS statistic.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Parameter settings exercised by the normalization, moment and sampler
/// checks. Each family has at least three, including strongly skewed and
/// heavy-tailed ones.
pub fn parameter_settings() -> Vec<FamilyParams> {
    vec![
        FamilyParams::normal(0.0, 1.0),
        FamilyParams::normal(2.0, 0.5),
        FamilyParams::normal(-3.0, 4.0),
        FamilyParams::student_t(0.0, 1.0, 2.6),
        FamilyParams::student_t(1.0, 2.0, 5.0),
        FamilyParams::student_t(-2.0, 0.7, 30.0),
        FamilyParams::skew_normal(0.0, 1.0, 8.0),
        FamilyParams::skew_normal(1.0, 2.0, -3.0),
        FamilyParams::skew_normal(0.0, 1.0, 0.5),
        FamilyParams::skew_t(0.0, 1.0, 2.6, 8.0),
        FamilyParams::skew_t(1.0, 2.0, 5.0, -3.0),
        FamilyParams::skew_t(0.0, 1.0, 10.0, 1.0),
        FamilyParams::as2(0.0, 1.0, 2.6, 8.0),
        FamilyParams::as2(1.0, 2.0, 1.2, -3.0),
        FamilyParams::as2(-1.0, 0.5, 4.0, 1.0),
        FamilyParams::jones_faddy(0.0, 1.0, 20.0, 2.0),
        FamilyParams::jones_faddy(1.0, 2.0, 2.0, 20.0),
        FamilyParams::jones_faddy(0.0, 1.0, 5.0, 2.5),
        FamilyParams::sinh_arcsinh(0.0, 1.0, 2.0, 1.0),
        FamilyParams::sinh_arcsinh(1.0, 2.0, -0.5, 0.6),
        FamilyParams::sinh_arcsinh(0.0, 1.0, 0.5, 1.5),
    ]
}

/// Two settings per family for the sampler KS checks.
pub fn sampler_settings() -> Vec<FamilyParams> {
    let all = parameter_settings();
    all.chunks(3).flat_map(|c| c[..2].to_vec()).collect()
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    c: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        self.c += if self.sum.abs() >= x.abs() { (self.sum - t) + x } else { (x - t) + self.sum };
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// DIC of `draws` recomputed from the raw θ rows alone: the deviance of
/// every row and the posterior mean of θ are both accumulated with
/// compensated sums.
pub fn dic_from_raw_draws(draws: &flexmeta::sampler::DrawsMatrix, studies: &[flexmeta::StudyRecord]) -> f64 {
    let dev = |theta: &[f64]| -> f64 {
        studies
            .iter()
            .zip(theta)
            .map(|(s, t)| ((s.y - t) / s.se).powi(2) + (2.0 * std::f64::consts::PI * s.se * s.se).ln())
            .sum()
    };
    let k = studies.len();
    let mut total = CompensatedSum::default();
    let mut theta_sum = vec![CompensatedSum::default(); k];
    for c in &draws.chains {
        for row in c.theta.chunks_exact(k) {
            total.add(dev(row));
            for (s, t) in theta_sum.iter_mut().zip(row) {
                s.add(*t);
            }
        }
    }
    let n = draws.n_draws() as f64;
    let mean_theta: Vec<f64> = theta_sum.iter().map(|s| s.value() / n).collect();
    2.0 * total.value() / n - dev(&mean_theta)
}
