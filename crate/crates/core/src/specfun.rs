//! Special functions used by the densities and moment formulas.
//!
//! Everything here is dependency-free and works for non-integer degrees of
//! freedom. The checked entry points return [`SpecError`] on out-of-domain
//! input; the `pub(crate)` variants skip the checks for hot loops where the
//! caller already guarantees the domain.

use std::f64::consts::{LN_2, PI};

use thiserror::Error;

/// ln(√(2π))
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("{function}: argument {value} outside the domain")]
    Domain { function: &'static str, value: f64 },
    #[error("{function}: series failed to converge")]
    NoConvergence { function: &'static str },
}

fn domain(function: &'static str, value: f64) -> SpecError {
    SpecError::Domain { function, value }
}

// Lanczos approximation, g = 671/128 with 14 terms.
const LANCZOS: [f64; 14] = [
    57.156_235_665_862_923_5,
    -59.597_960_355_475_491_2,
    14.136_097_974_741_747_1,
    -0.491_913_816_097_620_199,
    0.339_946_499_848_118_887e-4,
    0.465_236_289_270_485_756e-4,
    -0.983_744_753_048_795_646e-4,
    0.158_088_703_224_912_494e-3,
    -0.210_264_441_724_104_883e-3,
    0.217_439_618_115_212_643e-3,
    -0.164_318_106_536_763_890e-3,
    0.844_182_239_838_527_433e-4,
    -0.261_908_384_015_814_087e-4,
    0.368_991_826_595_316_234e-5,
];

// (-1)^k ζ(k) / k for k = 2..=31, the Taylor coefficients of ln Γ(1 + d) + γd.
const LN_GAMMA_1P: [f64; 30] = [
    8.224_670_334_241_132e-1,
    -4.006_856_343_865_314e-1,
    2.705_808_084_277_845e-1,
    -2.073_855_510_286_74e-1,
    1.695_571_769_974_082e-1,
    -1.440_498_967_688_461e-1,
    1.255_096_695_247_43e-1,
    -1.113_342_658_695_647e-1,
    1.000_994_575_127_818e-1,
    -9.095_401_714_582_904e-2,
    8.335_384_054_610_9e-2,
    -7.693_251_641_135_219e-2,
    7.143_294_629_536_133e-2,
    -6.666_870_588_242_046e-2,
    6.250_095_514_121_304e-2,
    -5.882_397_865_868_458e-2,
    5.555_576_762_740_361e-2,
    -5.263_167_937_961_666e-2,
    5.000_004_769_810_169e-2,
    -4.761_907_033_014_223e-2,
    4.545_455_629_320_467e-2,
    -4.347_826_605_304_026e-2,
    4.166_666_915_034_121e-2,
    -4.000_000_119_214_014e-2,
    3.846_153_903_467_518e-2,
    -3.703_703_731_298_932e-2,
    3.571_428_584_733_335e-2,
    -3.448_275_868_491_93e-2,
    3.333_333_336_437_758e-2,
    -3.225_806_453_115_042e-2,
];

fn ln_gamma_1p_series(d: f64) -> f64 {
    let mut acc = 0.0;
    for &c in LN_GAMMA_1P.iter().rev() {
        acc = acc * d + c;
    }
    d * (acc * d - EULER_GAMMA)
}

/// ln Γ(x) for x > 0, no domain check.
pub(crate) fn lgamma(x: f64) -> f64 {
    if (x - 1.0).abs() < 0.2 {
        return ln_gamma_1p_series(x - 1.0);
    }
    if (x - 2.0).abs() < 0.2 {
        let d = x - 2.0;
        return d.ln_1p() + ln_gamma_1p_series(d);
    }
    let mut y = x;
    let t = x + 5.242_187_5;
    let t = (x + 0.5) * t.ln() - t;
    let mut ser = 0.999_999_999_999_997_092;
    for c in LANCZOS {
        y += 1.0;
        ser += c / y;
    }
    t + (2.506_628_274_631_000_5 * ser / x).ln()
}

/// Natural log of the gamma function.
pub fn ln_gamma(x: f64) -> Result<f64, SpecError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain("ln_gamma", x));
    }
    Ok(lgamma(x))
}

pub(crate) fn lbeta(a: f64, b: f64) -> f64 {
    lgamma(a) + lgamma(b) - lgamma(a + b)
}

/// ln B(a, b).
pub fn ln_beta(a: f64, b: f64) -> Result<f64, SpecError> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(domain("ln_beta", a));
    }
    if !(b > 0.0) || !b.is_finite() {
        return Err(domain("ln_beta", b));
    }
    Ok(lbeta(a, b))
}

// ---------------------------------------------------------------------------
// Incomplete gamma

fn gamma_series(a: f64, x: f64) -> Result<f64, SpecError> {
    // returns the series sum S with P(a, x) = S * exp(-x + a ln x - lnΓ(a))
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..10_000 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            return Ok(sum);
        }
    }
    Err(SpecError::NoConvergence {
        function: "gamma_series",
    })
}

fn gamma_cf(a: f64, x: f64) -> Result<f64, SpecError> {
    // modified Lentz; Q(a, x) = h * exp(-x + a ln x - lnΓ(a))
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(SpecError::NoConvergence { function: "gamma_cf" })
}

fn check_gamma_args(function: &'static str, a: f64, x: f64) -> Result<(), SpecError> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(domain(function, a));
    }
    if !(x >= 0.0) {
        return Err(domain(function, x));
    }
    Ok(())
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_p(a: f64, x: f64) -> Result<f64, SpecError> {
    check_gamma_args("gamma_p", a, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let front = -x + a * x.ln() - lgamma(a);
    if x < a + 1.0 {
        Ok((gamma_series(a, x)?.ln() + front).exp().min(1.0))
    } else {
        Ok(1.0 - (gamma_cf(a, x)?.ln() + front).exp())
    }
}

/// Regularized upper incomplete gamma Q(a, x) = 1 − P(a, x).
pub fn gamma_q(a: f64, x: f64) -> Result<f64, SpecError> {
    Ok(ln_gamma_q(a, x)?.exp())
}

fn ln_gamma_q(a: f64, x: f64) -> Result<f64, SpecError> {
    check_gamma_args("gamma_q", a, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(f64::NEG_INFINITY);
    }
    let front = -x + a * x.ln() - lgamma(a);
    if x < a + 1.0 {
        let p = (gamma_series(a, x)?.ln() + front).exp();
        Ok((-p).ln_1p())
    } else {
        Ok(gamma_cf(a, x)?.ln() + front)
    }
}

/// Survival function of the chi-square distribution with `df` degrees of freedom.
pub fn chi_square_sf(x: f64, df: f64) -> Result<f64, SpecError> {
    if !(df > 0.0) {
        return Err(domain("chi_square_sf", df));
    }
    if x <= 0.0 {
        return Ok(1.0);
    }
    gamma_q(0.5 * df, 0.5 * x)
}

// ---------------------------------------------------------------------------
// Normal distribution

pub fn normal_pdf(x: f64) -> f64 {
    normal_ln_pdf(x).exp()
}

pub fn normal_ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Standard normal CDF Φ(x).
pub fn normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    // Φ(-|x|) = Q(1/2, x²/2) / 2
    let tail = 0.5 * ln_gamma_q(0.5, 0.5 * x * x).map_or(0.0, f64::exp);
    if x < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// ln Φ(x), accurate far into the lower tail.
pub fn normal_ln_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    let ln_tail = -LN_2 + ln_gamma_q(0.5, 0.5 * x * x).unwrap_or(f64::NEG_INFINITY);
    if x < 0.0 {
        ln_tail
    } else {
        (-ln_tail.exp()).ln_1p()
    }
}

/// Inverse of Φ by safeguarded Newton iteration. Only used off the hot path.
pub fn normal_quantile(p: f64) -> Result<f64, SpecError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain("normal_quantile", p));
    }
    invert_cdf(p, normal_cdf, normal_pdf)
}

// ---------------------------------------------------------------------------
// Incomplete beta

fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64, SpecError> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..50_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(SpecError::NoConvergence { function: "beta_cf" })
}

/// ln I_x(a, b), taking both x and y = 1 − x so callers can avoid cancellation.
fn ln_beta_inc_pair(a: f64, b: f64, x: f64, y: f64) -> Result<f64, SpecError> {
    if x <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if y <= 0.0 {
        return Ok(0.0);
    }
    let front = a * x.ln() + b * y.ln() - lbeta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front + beta_cf(a, b, x)?.ln() - a.ln())
    } else {
        let upper = (front + beta_cf(b, a, y)?.ln() - b.ln()).exp();
        Ok((-upper).ln_1p())
    }
}

/// Regularized incomplete beta I_x(a, b).
pub fn beta_inc_reg(a: f64, b: f64, x: f64) -> Result<f64, SpecError> {
    if !(a > 0.0) {
        return Err(domain("beta_inc_reg", a));
    }
    if !(b > 0.0) {
        return Err(domain("beta_inc_reg", b));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(domain("beta_inc_reg", x));
    }
    Ok(ln_beta_inc_pair(a, b, x, 1.0 - x)?.exp())
}

// ---------------------------------------------------------------------------
// Student t

/// ln f_t(x | ν) without the domain check.
pub(crate) fn t_ln_pdf(x: f64, nu: f64) -> f64 {
    lgamma(0.5 * (nu + 1.0)) - lgamma(0.5 * nu) - 0.5 * (nu * PI).ln()
        - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p()
}

pub fn student_t_ln_pdf(x: f64, nu: f64) -> Result<f64, SpecError> {
    if !(nu > 0.0) {
        return Err(domain("student_t_ln_pdf", nu));
    }
    Ok(t_ln_pdf(x, nu))
}

/// ln P(T > |x|).
fn t_ln_upper_tail(x: f64, nu: f64) -> Result<f64, SpecError> {
    if x.is_infinite() {
        return Ok(f64::NEG_INFINITY);
    }
    let t2 = x * x;
    let z = nu / (nu + t2);
    let w = t2 / (nu + t2);
    Ok(-LN_2 + ln_beta_inc_pair(0.5 * nu, 0.5, z, w)?)
}

pub(crate) fn t_ln_cdf(x: f64, nu: f64) -> f64 {
    if x == 0.0 {
        return -LN_2;
    }
    let ln_tail = t_ln_upper_tail(x, nu).unwrap_or(f64::NAN);
    if x < 0.0 {
        ln_tail
    } else {
        (-ln_tail.exp()).ln_1p()
    }
}

/// Student t CDF with real-valued degrees of freedom.
pub fn student_t_cdf(x: f64, nu: f64) -> Result<f64, SpecError> {
    if !(nu > 0.0) || nu.is_nan() {
        return Err(domain("student_t_cdf", nu));
    }
    if x.is_nan() {
        return Err(domain("student_t_cdf", x));
    }
    if x == 0.0 {
        return Ok(0.5);
    }
    let tail = t_ln_upper_tail(x, nu)?.exp();
    Ok(if x < 0.0 { tail } else { 1.0 - tail })
}

/// ln F_t(x | ν), accurate in the far lower tail.
pub fn student_t_ln_cdf(x: f64, nu: f64) -> Result<f64, SpecError> {
    if !(nu > 0.0) || nu.is_nan() {
        return Err(domain("student_t_ln_cdf", nu));
    }
    Ok(t_ln_cdf(x, nu))
}

pub fn student_t_quantile(p: f64, nu: f64) -> Result<f64, SpecError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain("student_t_quantile", p));
    }
    if !(nu > 0.0) {
        return Err(domain("student_t_quantile", nu));
    }
    invert_cdf(
        p,
        |x| student_t_cdf(x, nu).unwrap_or(f64::NAN),
        |x| t_ln_pdf(x, nu).exp(),
    )
}

fn invert_cdf(p: f64, cdf: impl Fn(f64) -> f64, pdf: impl Fn(f64) -> f64) -> Result<f64, SpecError> {
    let (mut lo, mut hi) = (-1.0, 1.0);
    while cdf(lo) > p {
        lo *= 2.0;
        if lo < -1e300 {
            return Err(SpecError::NoConvergence { function: "quantile" });
        }
    }
    while cdf(hi) < p {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(SpecError::NoConvergence { function: "quantile" });
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..500 {
        let f = cdf(x) - p;
        if f == 0.0 {
            return Ok(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let step = f / pdf(x);
        let newton = x - step;
        x = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (hi - lo).abs() <= 1e-15 * x.abs().max(1.0) || step.abs() <= 1e-15 * x.abs().max(1.0) {
            return Ok(x);
        }
    }
    Ok(x)
}

// ---------------------------------------------------------------------------
// Modified Bessel function of the second kind

// Taylor coefficients of 1/Γ(1 + x).
const RECIP_GAMMA_1P: [f64; 26] = [
    1.0,
    0.577_215_664_901_532_9,
    -0.655_878_071_520_253_8,
    -0.042_002_635_034_095_2,
    0.166_538_611_382_291_5,
    -0.042_197_734_555_544_3,
    -0.009_621_971_527_877_0,
    0.007_218_943_246_663_0,
    -0.001_165_167_591_859_1,
    -0.000_215_241_674_114_9,
    0.000_128_050_282_388_2,
    -0.000_020_134_854_780_7,
    -0.000_001_250_493_482_1,
    0.000_001_133_027_232_0,
    -0.000_000_205_633_841_7,
    0.000_000_006_116_095_0,
    0.000_000_005_002_007_5,
    -0.000_000_001_181_274_6,
    0.000_000_000_104_342_7,
    0.000_000_000_007_782_3,
    -0.000_000_000_003_696_8,
    0.000_000_000_000_510_0,
    -0.000_000_000_000_020_6,
    -0.000_000_000_000_005_4,
    0.000_000_000_000_001_4,
    0.000_000_000_000_000_1,
];

/// Returns (Γ₁(μ), Γ₂(μ), 1/Γ(1+μ), 1/Γ(1−μ)) for |μ| ≤ 1/2, as used by Temme's series.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    let mu2 = mu * mu;
    let mut odd = 0.0;
    let mut even = 0.0;
    for (j, &c) in RECIP_GAMMA_1P.iter().enumerate().rev() {
        if j % 2 == 1 {
            odd = odd * mu2 + c;
        } else {
            even = even * mu2 + c;
        }
    }
    // 1/Γ(1±μ) = even ± μ·odd
    (-odd, even, even + mu * odd, even - mu * odd)
}

/// K_ν(x), the modified Bessel function of the second kind, for real order.
pub fn bessel_k(order: f64, x: f64) -> Result<f64, SpecError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain("bessel_k", x));
    }
    if !order.is_finite() {
        return Err(domain("bessel_k", order));
    }
    let nu = order.abs();
    let nl = (nu + 0.5).floor();
    let mu = nu - nl;
    let mu2 = mu * mu;
    let xi = 1.0 / x;
    let xi2 = 2.0 * xi;

    let (mut k_mu, mut k_mu1) = if x < 2.0 {
        let x2 = 0.5 * x;
        let pimu = PI * mu;
        let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
        let d = -x2.ln();
        let e = mu * d;
        let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let e = e.exp();
        let mut p = 0.5 * e / gampl;
        let mut q = 0.5 / (e * gammi);
        let mut c = 1.0;
        let d = x2 * x2;
        let mut sum1 = p;
        let mut converged = false;
        for i in 1..10_000 {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - mu2);
            c *= d / fi;
            p /= fi - mu;
            q /= fi + mu;
            let del = c * ff;
            sum += del;
            sum1 += c * (p - fi * ff);
            if del.abs() < sum.abs() * EPS {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(SpecError::NoConvergence { function: "bessel_k" });
        }
        (sum, sum1 * xi2)
    } else {
        // Steed's continued fraction
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut delh = d;
        let mut h = d;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25 - mu2;
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        let mut converged = false;
        for i in 1..10_000 {
            let fi = i as f64;
            a -= 2.0 * fi;
            c = -a * c / (fi + 1.0);
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh = (b * d - 1.0) * delh;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < EPS {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(SpecError::NoConvergence { function: "bessel_k" });
        }
        let k = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
        (k, k * (mu + x + 0.5 - a1 * h) * xi)
    };

    for i in 1..=(nl as u64) {
        let next = (mu + i as f64) * xi2 * k_mu1 + k_mu;
        k_mu = k_mu1;
        k_mu1 = next;
    }
    Ok(k_mu)
}
