//! Split-R̂ and effective sample size.
//!
//! Every input chain is cut into two halves before either statistic is
//! computed, so a single long chain can be checked against itself.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Convergence thresholds for the monitored scalars.
pub const RHAT_MAX: f64 = 1.01;
pub const ESS_MIN: f64 = 400.0;
/// Shortest chain accepted by [`split_rhat`] and [`ess`].
pub const MIN_DRAWS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("need chains of at least {needed} draws, got {got}")]
    InsufficientDraws { needed: usize, got: usize },
    #[error("chains have unequal lengths")]
    Ragged,
    #[error("draws have zero variance within chains")]
    Degenerate,
    #[error("draws contain non-finite values")]
    NonFinite,
}

/// Splits each chain in half, dropping the middle draw of odd-length chains.
fn split_halves<'a>(chains: &[&'a [f64]]) -> Result<Vec<&'a [f64]>, DiagnosticsError> {
    let n = chains.first().map_or(0, |c| c.len());
    if chains.is_empty() || n < MIN_DRAWS {
        return Err(DiagnosticsError::InsufficientDraws { needed: MIN_DRAWS, got: n });
    }
    if chains.iter().any(|c| c.len() != n) {
        return Err(DiagnosticsError::Ragged);
    }
    if chains.iter().any(|c| c.iter().any(|x| !x.is_finite())) {
        return Err(DiagnosticsError::NonFinite);
    }
    let h = n / 2;
    Ok(chains.iter().flat_map(|c| [&c[..h], &c[n - h..]]).collect())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

struct Variances {
    chain_means: Vec<f64>,
    /// mean within-chain variance
    w: f64,
    /// marginal posterior variance estimate
    var_plus: f64,
}

fn variances(halves: &[&[f64]]) -> Result<Variances, DiagnosticsError> {
    let m = halves.len() as f64;
    let n = halves[0].len() as f64;
    let chain_means: Vec<f64> = halves.iter().map(|c| mean(c)).collect();
    let grand = mean(&chain_means);
    let w = halves
        .iter()
        .zip(&chain_means)
        .map(|(c, &mu)| c.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    if !(w > 0.0) {
        return Err(DiagnosticsError::Degenerate);
    }
    let b = if m > 1.0 {
        n * chain_means.iter().map(|mu| (mu - grand) * (mu - grand)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    let var_plus = (n - 1.0) / n * w + b / n;
    Ok(Variances { chain_means, w, var_plus })
}

/// Potential scale reduction factor over split chains.
pub fn split_rhat(chains: &[&[f64]]) -> Result<f64, DiagnosticsError> {
    let halves = split_halves(chains)?;
    let v = variances(&halves)?;
    Ok((v.var_plus / v.w).sqrt())
}

/// Effective sample size with Geyer's initial monotone positive sequence
/// truncation of the combined-chain autocorrelations.
pub fn ess(chains: &[&[f64]]) -> Result<f64, DiagnosticsError> {
    let halves = split_halves(chains)?;
    let v = variances(&halves)?;
    let m = halves.len();
    let n = halves[0].len();

    let centered: Vec<Vec<f64>> = halves
        .iter()
        .zip(&v.chain_means)
        .map(|(c, &mu)| c.iter().map(|x| x - mu).collect())
        .collect();
    let nf = n as f64;
    // within-chain autocovariance at `lag`, averaged over chains (divisor n)
    let acov = |lag: usize| -> f64 {
        centered
            .iter()
            .map(|c| c[..n - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / nf)
            .sum::<f64>()
            / m as f64
    };
    let w_biased = v.w * (nf - 1.0) / nf;
    let rho = |lag: usize| 1.0 - (w_biased - acov(lag)) / v.var_plus;

    let mut tau = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = if lag == 0 { 1.0 + rho(1) } else { rho(lag) + rho(lag + 1) };
        if pair < 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        tau += pair;
        prev_pair = pair;
        lag += 2;
    }
    let tau = (2.0 * tau - 1.0).max(1.0 / (m as f64 * nf).log10().max(1.0));
    Ok(m as f64 * nf / tau)
}

/// R̂ and ESS for one monitored scalar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarDiagnostics {
    pub name: String,
    pub rhat: f64,
    pub ess: f64,
}

/// Convergence summary for one fitted family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub scalars: Vec<ScalarDiagnostics>,
    /// Post-warmup acceptance rate per unconstrained coordinate, then per
    /// joint move, averaged over chains. Fixed coordinates report 0.
    pub acceptance: Vec<f64>,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    /// Computes diagnostics for named scalars, each given as per-chain slices.
    pub fn assess(monitored: &[(String, Vec<&[f64]>)], acceptance: Vec<f64>) -> Self {
        let mut scalars = Vec::new();
        let mut warnings = Vec::new();
        for (name, chains) in monitored {
            match (split_rhat(chains), ess(chains)) {
                (Ok(rhat), Ok(ess)) => {
                    if rhat > RHAT_MAX {
                        warnings.push(format!("{name}: split R-hat {rhat:.4} exceeds {RHAT_MAX}"));
                    }
                    if ess < ESS_MIN {
                        warnings.push(format!("{name}: ESS {ess:.0} below {ESS_MIN}"));
                    }
                    scalars.push(ScalarDiagnostics {
                        name: name.clone(),
                        rhat,
                        ess,
                    });
                }
                (Err(e), _) | (_, Err(e)) => {
                    warnings.push(format!("{name}: {e}"));
                    scalars.push(ScalarDiagnostics {
                        name: name.clone(),
                        rhat: f64::NAN,
                        ess: f64::NAN,
                    });
                }
            }
        }
        Diagnostics {
            scalars,
            acceptance,
            converged: warnings.is_empty(),
            warnings,
        }
    }

    pub fn get(&self, name: &str) -> Option<&ScalarDiagnostics> {
        self.scalars.iter().find(|s| s.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn constant_chains_are_degenerate() {
        let c = vec![1.5; 200];
        assert_eq!(split_rhat(&[&c, &c]), Err(DiagnosticsError::Degenerate));
        assert_eq!(ess(&[&c, &c]), Err(DiagnosticsError::Degenerate));
    }

    #[test]
    fn short_chains_are_rejected() {
        let c = vec![0.0; 99];
        assert!(matches!(
            split_rhat(&[&c]),
            Err(DiagnosticsError::InsufficientDraws { got: 99, .. })
        ));
    }

    #[test]
    fn iid_chains() {
        let all = normals(3, 20_000);
        let (a, b) = all.split_at(10_000);
        let r = split_rhat(&[a, b]).unwrap();
        assert!(r < 1.005, "{r}");
        let e = ess(&[a]).unwrap();
        assert!((8_000.0..=12_000.0).contains(&e), "{e}");
    }

    #[test]
    fn autocorrelated_chain_has_ar1_ess() {
        // AR(1) with φ = 0.9: τ = (1 + φ)/(1 − φ) = 19
        let e = normals(8, 100_000);
        let mut x = vec![0.0; e.len()];
        for i in 1..x.len() {
            x[i] = 0.9 * x[i - 1] + e[i];
        }
        let n = ess(&[&x]).unwrap();
        let expect = 100_000.0 / 19.0;
        assert!((n / expect - 1.0).abs() < 0.15, "{n} vs {expect}");
    }

    #[test]
    fn shifted_chains_inflate_rhat() {
        let a = normals(1, 1000);
        let b: Vec<f64> = normals(2, 1000).iter().map(|x| x + 1.0).collect();
        assert!(split_rhat(&[&a, &b]).unwrap() > 1.1);
    }
}
