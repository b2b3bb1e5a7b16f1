//! DerSimonian–Laird random-effects pooling with Cochran's Q, I², τ² and the
//! Higgins–Thompson–Spiegelhalter prediction interval.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::specfun::{chi_square_sf, student_t_quantile, SpecError};
use crate::Interval;

/// Normal quantile used for the DL confidence interval.
pub const Z_975: f64 = 1.96;

/// One study's effect estimate and its (known) within-study standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub id: String,
    pub y: f64,
    pub se: f64,
}

impl StudyRecord {
    pub fn new(id: impl Into<String>, y: f64, se: f64) -> Self {
        StudyRecord { id: id.into(), y, se }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassicError {
    #[error("need at least {needed} studies, got {got}")]
    TooFewStudies { needed: usize, got: usize },
    #[error("study {index} has non-positive standard error {se}")]
    NonPositiveSe { index: usize, se: f64 },
    #[error("study {index} has non-finite effect {y}")]
    NonFiniteEffect { index: usize, y: f64 },
    #[error(transparent)]
    Special(#[from] SpecError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicResult {
    pub k: usize,
    pub mu_hat: f64,
    pub se_mu: f64,
    pub ci95: Interval,
    pub tau2: f64,
    pub q: f64,
    pub q_df: usize,
    pub q_pvalue: f64,
    pub i2: f64,
    /// Absent when fewer than three studies are available.
    pub hts_pi: Option<Interval>,
}

pub fn check_studies(data: &[StudyRecord]) -> Result<(), ClassicError> {
    for (index, s) in data.iter().enumerate() {
        if !(s.se > 0.0 && s.se.is_finite()) {
            return Err(ClassicError::NonPositiveSe { index, se: s.se });
        }
        if !s.y.is_finite() {
            return Err(ClassicError::NonFiniteEffect { index, y: s.y });
        }
    }
    Ok(())
}

/// DerSimonian–Laird moment estimator and the quantities derived from it.
pub fn dersimonian_laird(data: &[StudyRecord]) -> Result<ClassicResult, ClassicError> {
    let k = data.len();
    if k < 2 {
        return Err(ClassicError::TooFewStudies { needed: 2, got: k });
    }
    check_studies(data)?;

    let w: Vec<f64> = data.iter().map(|s| 1.0 / (s.se * s.se)).collect();
    let s1: f64 = w.iter().sum();
    let s2: f64 = w.iter().map(|w| w * w).sum();
    let y_fixed = data.iter().zip(&w).map(|(s, w)| w * s.y).sum::<f64>() / s1;
    let q: f64 = data
        .iter()
        .zip(&w)
        .map(|(s, w)| {
            let d = s.y - y_fixed;
            w * d * d
        })
        .sum();
    let df = (k - 1) as f64;
    let tau2 = ((q - df) / (s1 - s2 / s1)).max(0.0);

    let w_star: Vec<f64> = data.iter().map(|s| 1.0 / (s.se * s.se + tau2)).collect();
    let sw: f64 = w_star.iter().sum();
    let mu_hat = data.iter().zip(&w_star).map(|(s, w)| w * s.y).sum::<f64>() / sw;
    let var_mu = 1.0 / sw;
    let se_mu = var_mu.sqrt();
    let ci95 = Interval::new(mu_hat - Z_975 * se_mu, mu_hat + Z_975 * se_mu);
    let i2 = if q > 0.0 { ((q - df) / q).max(0.0) * 100.0 } else { 0.0 };
    let q_pvalue = chi_square_sf(q, df)?;

    let hts_pi = if k >= 3 {
        let t = student_t_quantile(0.975, (k - 2) as f64)?;
        let half = t * (tau2 + var_mu).sqrt();
        Some(Interval::new(mu_hat - half, mu_hat + half))
    } else {
        None
    };

    Ok(ClassicResult {
        k,
        mu_hat,
        se_mu,
        ci95,
        tau2,
        q,
        q_df: k - 1,
        q_pvalue,
        i2,
        hts_pi,
    })
}
