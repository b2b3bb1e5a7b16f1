//! Posterior and predictive summaries, DIC and density grids.
//!
//! Quantiles use linear interpolation between order statistics (type 7):
//! for probability `p` over `n` sorted draws the position is `(n − 1)·p`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{Family, FamilyParams};
use crate::model::{ModelError, ModelSpec};
use crate::sampler::DrawsMatrix;
use crate::Interval;

/// Points in exported density grids.
pub const GRID_POINTS: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("no draws to summarize")]
    Empty,
    #[error("density grid needs at least 2 points and a non-empty range, got {points} points on [{lower}, {upper}]")]
    DegenerateRange { lower: f64, upper: f64, points: usize },
    #[error("draws contain non-finite values")]
    NonFinite,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Posterior summary of μ for one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub family: Family,
    pub label: String,
    pub mean: f64,
    pub sd: f64,
    pub cri95: Interval,
    pub prob_below_zero: f64,
    pub dic: f64,
    pub p_d: f64,
}

/// Summary of the predictive distribution of θ_new for one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveRow {
    pub family: Family,
    pub label: String,
    pub mean: f64,
    pub sd: f64,
    pub pi95: Interval,
    pub prob_below_zero: f64,
}

/// Mean, SD, equal-tailed 95% interval and Pr(x < 0) of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSummary {
    pub mean: f64,
    pub sd: f64,
    pub interval: Interval,
    pub prob_below_zero: f64,
}

/// Type-7 quantile of already sorted values.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Type-7 quantile.
pub fn quantile_type7(x: &[f64], p: f64) -> Result<f64, InferenceError> {
    let sorted = sorted_finite(x)?;
    Ok(quantile_sorted(&sorted, p))
}

fn sorted_finite(x: &[f64]) -> Result<Vec<f64>, InferenceError> {
    if x.is_empty() {
        return Err(InferenceError::Empty);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(InferenceError::NonFinite);
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

pub fn summarize(x: &[f64]) -> Result<SampleSummary, InferenceError> {
    let sorted = sorted_finite(x)?;
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = if x.len() > 1 {
        (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let below = sorted.partition_point(|&v| v < 0.0);
    Ok(SampleSummary {
        mean,
        sd,
        interval: Interval::new(quantile_sorted(&sorted, 0.025), quantile_sorted(&sorted, 0.975)),
        prob_below_zero: below as f64 / n,
    })
}

/// DIC and its parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dic {
    pub mean_deviance: f64,
    pub deviance_at_mean: f64,
    pub p_d: f64,
    pub dic: f64,
}

impl Dic {
    pub fn from_parts(mean_deviance: f64, deviance_at_mean: f64) -> Self {
        let p_d = mean_deviance - deviance_at_mean;
        Dic {
            mean_deviance,
            deviance_at_mean,
            p_d,
            dic: mean_deviance + p_d,
        }
    }
}

/// DIC with the deviance conditional on θ, evaluated at the posterior mean of θ.
pub fn dic(draws: &DrawsMatrix, spec: &ModelSpec) -> Result<Dic, InferenceError> {
    if draws.is_empty() {
        return Err(InferenceError::Empty);
    }
    let dev = draws.deviance_all();
    // shifted by the first draw so point-mass draws give pD = 0 exactly
    let mean_dev = dev[0] + dev.iter().map(|d| d - dev[0]).sum::<f64>() / dev.len() as f64;
    let at_mean = spec.deviance(&draws.theta_mean())?;
    Ok(Dic::from_parts(mean_dev, at_mean))
}

pub fn summarize_mu(draws: &DrawsMatrix, spec: &ModelSpec) -> Result<SummaryRow, InferenceError> {
    let s = summarize(&draws.mu_all())?;
    let d = dic(draws, spec)?;
    Ok(SummaryRow {
        family: draws.family,
        label: draws.family.label().to_string(),
        mean: s.mean,
        sd: s.sd,
        cri95: s.interval,
        prob_below_zero: s.prob_below_zero,
        dic: d.dic,
        p_d: d.p_d,
    })
}

/// One θ_new per kept hyperparameter draw.
pub fn predictive_draws<R: Rng + ?Sized>(draws: &DrawsMatrix, rng: &mut R) -> Vec<f64> {
    draws.hyper_params().map(|p| p.sample(rng)).collect()
}

pub fn summarize_predictive(family: Family, theta_new: &[f64]) -> Result<PredictiveRow, InferenceError> {
    let s = summarize(theta_new)?;
    Ok(PredictiveRow {
        family,
        label: family.label().to_string(),
        mean: s.mean,
        sd: s.sd,
        pi95: s.interval,
        prob_below_zero: s.prob_below_zero,
    })
}

/// A density tabulated on an evenly spaced grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub theta: Vec<f64>,
    pub density: Vec<f64>,
}

impl DensityGrid {
    /// Trapezoid-rule integral of the tabulated density.
    pub fn trapezoid(&self) -> f64 {
        self.theta
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(t, d)| 0.5 * (t[1] - t[0]) * (d[0] + d[1]))
            .sum()
    }
}

fn linspace(lower: f64, upper: f64, points: usize) -> Result<Vec<f64>, InferenceError> {
    if points < 2 || !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
        return Err(InferenceError::DegenerateRange { lower, upper, points });
    }
    let step = (upper - lower) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| if i + 1 == points { upper } else { lower + step * i as f64 })
        .collect())
}

/// Exact density of `params` on an evenly spaced grid.
pub fn density_grid_exact(
    params: &FamilyParams,
    lower: f64,
    upper: f64,
    points: usize,
) -> Result<DensityGrid, InferenceError> {
    let theta = linspace(lower, upper, points)?;
    let dens = params
        .log_density()
        .map_err(|e| InferenceError::Model(ModelError::Distribution(e)))?;
    let density = theta.iter().map(|&t| dens.eval(t).exp()).collect();
    Ok(DensityGrid { theta, density })
}

/// Gaussian kernel density estimate of `draws` on `points` grid points, with
/// Silverman's bandwidth and linear binning. The default range runs from the
/// 0.01% to the 99.99% quantile, widened by four bandwidths.
///
/// Draws with no spread produce a single spike of mass one at the grid point
/// nearest their value.
pub fn density_grid_draws(draws: &[f64], points: usize) -> Result<DensityGrid, InferenceError> {
    let sorted = sorted_finite(draws)?;
    if points < 2 {
        return Err(InferenceError::DegenerateRange {
            lower: sorted[0],
            upper: sorted[sorted.len() - 1],
            points,
        });
    }
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let sd = (sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * n.powf(-0.2);

    if !(h > 0.0) {
        let c = sorted[0];
        let half = if c == 0.0 { 1.0 } else { c.abs() * 1e-3 };
        let theta = linspace(c - half, c + half, points)?;
        let step = theta[1] - theta[0];
        let k = theta
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - c).abs().total_cmp(&(b.1 - c).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let mut density = vec![0.0; points];
        // trapezoid weight is half a step at the ends
        density[k] = if k == 0 || k + 1 == points { 2.0 / step } else { 1.0 / step };
        return Ok(DensityGrid { theta, density });
    }

    let lower = quantile_sorted(&sorted, 1e-4) - 4.0 * h;
    let upper = quantile_sorted(&sorted, 1.0 - 1e-4) + 4.0 * h;
    let theta = linspace(lower, upper, points)?;
    let step = theta[1] - theta[0];

    // linear binning onto the grid; draws beyond the range go to the end bins
    let mut bins = vec![0.0; points];
    for &x in &sorted {
        let pos = ((x - lower) / step).clamp(0.0, (points - 1) as f64);
        let i = (pos.floor() as usize).min(points - 2);
        let f = pos - i as f64;
        bins[i] += 1.0 - f;
        bins[i + 1] += f;
    }
    let reach = ((6.0 * h / step).ceil() as usize).min(points - 1);
    let kernel: Vec<f64> = (0..=reach)
        .map(|d| {
            let u = d as f64 * step / h;
            (-0.5 * u * u).exp()
        })
        .collect();
    // discrete normalization keeps unit mass even when the step is wide
    // relative to the bandwidth
    let kernel_mass = step * (2.0 * kernel.iter().sum::<f64>() - kernel[0]);
    let norm = 1.0 / (n * kernel_mass);
    let density = (0..points)
        .map(|i| {
            let lo = i.saturating_sub(reach);
            let hi = (i + reach).min(points - 1);
            (lo..=hi).map(|j| bins[j] * kernel[i.abs_diff(j)]).sum::<f64>() * norm
        })
        .collect();
    Ok(DensityGrid { theta, density })
}
