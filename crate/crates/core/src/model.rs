//! The hierarchical random-effects model
//!
//! ```text
//! y_i | θ_i ~ N(θ_i, se_i²)
//! θ_i       ~ F(θ | hyperparameters)
//! ```
//!
//! with priors on the hyperparameters. The sampler works on an unconstrained
//! vector `z = [hyper..., θ_1..θ_K]`; each hyperparameter is mapped through a
//! transform chosen by its prior's support.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classic::{check_studies, ClassicError, StudyRecord};
use crate::distributions::{DistError, Family, FamilyParams, LogDensity, NU_PRIOR_BOUND};
use crate::specfun::{normal_ln_pdf, LN_SQRT_2PI};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("log-posterior is not finite")]
    NonFinite,
    #[error("unconstrained vector has length {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("{parameter} = {value} lies outside its prior support")]
    OutOfSupport { parameter: &'static str, value: f64 },
    #[error("invalid prior for {parameter}: {reason}")]
    Prior { parameter: String, reason: String },
    #[error(transparent)]
    Studies(#[from] ClassicError),
    #[error(transparent)]
    Distribution(#[from] DistError),
}

/// A prior on one scalar hyperparameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Prior {
    Normal { mean: f64, sd: f64 },
    Uniform { lower: f64, upper: f64 },
    /// Exponential with the given rate, shifted to start at `lower`.
    TruncatedExponential { rate: f64, lower: f64 },
    /// Improper constant density; only for overrides.
    Flat,
    /// Point mass: the coordinate is held fixed and not sampled.
    Fixed { value: f64 },
}

impl Prior {
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Prior::Normal { .. } | Prior::Flat => (f64::NEG_INFINITY, f64::INFINITY),
            Prior::Uniform { lower, upper } => (lower, upper),
            Prior::TruncatedExponential { lower, .. } => (lower, f64::INFINITY),
            Prior::Fixed { value } => (value, value),
        }
    }

    pub fn ln_density(&self, x: f64) -> f64 {
        match *self {
            Prior::Normal { mean, sd } => normal_ln_pdf((x - mean) / sd) - sd.ln(),
            Prior::Uniform { lower, upper } => {
                if x > lower && x < upper {
                    -(upper - lower).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Prior::TruncatedExponential { rate, lower } => {
                if x > lower {
                    rate.ln() - rate * (x - lower)
                } else {
                    f64::NEG_INFINITY
                }
            }
            Prior::Flat | Prior::Fixed { .. } => 0.0,
        }
    }

    pub fn transform(&self) -> Transform {
        match *self {
            Prior::Normal { .. } | Prior::Flat => Transform::Identity,
            Prior::Uniform { lower, upper } => Transform::ScaledLogit { lower, upper },
            Prior::TruncatedExponential { lower, .. } => Transform::ShiftedLog { lower },
            Prior::Fixed { value } => Transform::Fixed { value },
        }
    }

    fn check(&self, parameter: &str) -> Result<(), ModelError> {
        let bad = |reason: &str| {
            Err(ModelError::Prior {
                parameter: parameter.to_string(),
                reason: reason.to_string(),
            })
        };
        match *self {
            Prior::Normal { mean, sd } => {
                if !mean.is_finite() || !(sd > 0.0 && sd.is_finite()) {
                    return bad("normal prior needs a finite mean and positive sd");
                }
            }
            Prior::Uniform { lower, upper } => {
                if !(lower.is_finite() && upper.is_finite() && lower < upper) {
                    return bad("uniform prior needs finite lower < upper");
                }
            }
            Prior::TruncatedExponential { rate, lower } => {
                if !(rate > 0.0 && rate.is_finite() && lower.is_finite()) {
                    return bad("exponential prior needs a positive rate and finite lower bound");
                }
            }
            Prior::Flat => {}
            Prior::Fixed { value } => {
                if !value.is_finite() {
                    return bad("fixed value must be finite");
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Prior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Prior::Normal { mean, sd } => write!(f, "normal:{mean}:{sd}"),
            Prior::Uniform { lower, upper } => write!(f, "uniform:{lower}:{upper}"),
            Prior::TruncatedExponential { rate, lower } => write!(f, "exp:{rate}:{lower}"),
            Prior::Flat => write!(f, "flat"),
            Prior::Fixed { value } => write!(f, "fixed:{value}"),
        }
    }
}

impl FromStr for Prior {
    type Err = String;

    /// `normal:MEAN:SD`, `uniform:LO:HI`, `exp:RATE:LO`, `flat`, `fixed:VALUE`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.trim().split(':');
        let kind = parts.next().unwrap_or_default().to_ascii_lowercase();
        let nums: Vec<f64> = parts
            .map(|p| p.trim().parse::<f64>().map_err(|_| format!("`{p}` is not a number in prior `{s}`")))
            .collect::<Result<_, _>>()?;
        let arity = |n: usize| {
            if nums.len() == n {
                Ok(())
            } else {
                Err(format!("prior `{kind}` takes {n} numbers, got {}", nums.len()))
            }
        };
        match kind.as_str() {
            "normal" => arity(2).map(|_| Prior::Normal { mean: nums[0], sd: nums[1] }),
            "uniform" => arity(2).map(|_| Prior::Uniform {
                lower: nums[0],
                upper: nums[1],
            }),
            "exp" | "exponential" => arity(2).map(|_| Prior::TruncatedExponential {
                rate: nums[0],
                lower: nums[1],
            }),
            "flat" => arity(0).map(|_| Prior::Flat),
            "fixed" => arity(1).map(|_| Prior::Fixed { value: nums[0] }),
            other => Err(format!("unknown prior kind `{other}`")),
        }
    }
}

/// Map between a constrained hyperparameter and the real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    Identity,
    /// x = lower + eᶻ
    ShiftedLog { lower: f64 },
    /// x = lower + (upper − lower)·logistic(z)
    ScaledLogit { lower: f64, upper: f64 },
    Fixed { value: f64 },
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + eˣ) without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl Transform {
    pub fn to_constrained(&self, z: f64) -> f64 {
        match *self {
            Transform::Identity => z,
            // bounds stay strict even where the map saturates in floating point
            Transform::ShiftedLog { lower } => (lower + z.exp()).max(lower.next_up()),
            Transform::ScaledLogit { lower, upper } => {
                (lower + (upper - lower) * logistic(z)).clamp(lower.next_up(), upper.next_down())
            }
            Transform::Fixed { value } => value,
        }
    }

    pub fn to_unconstrained(&self, x: f64) -> f64 {
        match *self {
            Transform::Identity => x,
            Transform::ShiftedLog { lower } => (x - lower).ln(),
            Transform::ScaledLogit { lower, upper } => {
                let u = (x - lower) / (upper - lower);
                (u / (1.0 - u)).ln()
            }
            Transform::Fixed { .. } => 0.0,
        }
    }

    /// ln |dx/dz|.
    pub fn ln_jacobian(&self, z: f64) -> f64 {
        match *self {
            Transform::Identity | Transform::Fixed { .. } => 0.0,
            Transform::ShiftedLog { .. } => z,
            Transform::ScaledLogit { lower, upper } => (upper - lower).ln() - softplus(z) - softplus(-z),
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, Transform::Fixed { .. })
    }
}

/// Priors for every hyperparameter any family may use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub xi: Prior,
    pub omega: Prior,
    pub nu: Prior,
    pub alpha: Prior,
    pub a: Prior,
    pub b: Prior,
    pub epsilon: Prior,
    pub delta: Prior,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            xi: Prior::Normal { mean: 0.0, sd: 100.0 },
            omega: Prior::Uniform { lower: 0.0, upper: 20.0 },
            nu: Prior::TruncatedExponential {
                rate: 0.1,
                lower: NU_PRIOR_BOUND,
            },
            alpha: Prior::Normal { mean: 0.0, sd: 5.0 },
            a: Prior::Uniform { lower: 1.5, upper: 200.0 },
            b: Prior::Uniform { lower: 1.5, upper: 200.0 },
            epsilon: Prior::Normal { mean: 0.0, sd: 100.0 },
            delta: Prior::Uniform { lower: 0.0, upper: 100.0 },
        }
    }
}

impl PriorConfig {
    pub fn get(&self, name: &str) -> Option<&Prior> {
        Some(match name {
            "xi" => &self.xi,
            "omega" => &self.omega,
            "nu" => &self.nu,
            "alpha" => &self.alpha,
            "a" => &self.a,
            "b" => &self.b,
            "epsilon" => &self.epsilon,
            "delta" => &self.delta,
            _ => return None,
        })
    }

    fn get_mut(&mut self, name: &str) -> Option<&mut Prior> {
        Some(match name {
            "xi" => &mut self.xi,
            "omega" => &mut self.omega,
            "nu" => &mut self.nu,
            "alpha" => &mut self.alpha,
            "a" => &mut self.a,
            "b" => &mut self.b,
            "epsilon" => &mut self.epsilon,
            "delta" => &mut self.delta,
            _ => return None,
        })
    }

    /// Applies a `name=prior` override such as `omega=uniform:0:50`.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), ModelError> {
        let (name, prior) = spec.split_once('=').ok_or_else(|| ModelError::Prior {
            parameter: spec.to_string(),
            reason: "expected NAME=PRIOR".into(),
        })?;
        let name = name.trim();
        let prior: Prior = prior.parse().map_err(|reason| ModelError::Prior {
            parameter: name.to_string(),
            reason,
        })?;
        prior.check(name)?;
        let slot = self.get_mut(name).ok_or_else(|| ModelError::Prior {
            parameter: name.to_string(),
            reason: "unknown hyperparameter".into(),
        })?;
        *slot = prior;
        Ok(())
    }

    /// Checks that the priors used by `family` keep every draw inside the
    /// region where the density and its mean are defined.
    pub fn check_for(&self, family: Family) -> Result<(), ModelError> {
        for &name in family.parameter_names() {
            let prior = self.get(name).expect("known name");
            prior.check(name)?;
            let (lo, _) = prior.support();
            let min = match (family, name) {
                (_, "omega") | (_, "delta") | (Family::As2, "nu") => Some(0.0),
                (Family::StudentT | Family::SkewT, "nu") => Some(1.0),
                (_, "a") | (_, "b") => Some(0.5),
                _ => None,
            };
            if let Some(min) = min {
                let ok = match prior {
                    Prior::Fixed { value } => *value > min,
                    _ => lo >= min,
                };
                if !ok {
                    return Err(ModelError::Prior {
                        parameter: name.to_string(),
                        reason: format!("support must lie above {min} for the {family} family"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Latent study effects plus the random-effects distribution parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub theta: Vec<f64>,
    pub hyper: FamilyParams,
}

/// Additive pieces of the log-posterior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorTerms {
    pub likelihood: f64,
    pub random_effects: f64,
    pub prior: f64,
    pub jacobian: f64,
}

impl PosteriorTerms {
    pub fn total(&self) -> f64 {
        self.likelihood + self.random_effects + self.prior + self.jacobian
    }
}

/// Dataset, family and priors; shared read-only across chains.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    studies: Vec<StudyRecord>,
    family: Family,
    priors: PriorConfig,
    transforms: Vec<Transform>,
    hyper_priors: Vec<Prior>,
    ln_se_sum: f64,
}

impl ModelSpec {
    pub fn new(studies: Vec<StudyRecord>, family: Family, priors: PriorConfig) -> Result<Self, ModelError> {
        if studies.is_empty() {
            return Err(ClassicError::TooFewStudies { needed: 1, got: 0 }.into());
        }
        check_studies(&studies)?;
        priors.check_for(family)?;
        let hyper_priors: Vec<Prior> = family
            .parameter_names()
            .iter()
            .map(|n| *priors.get(n).expect("known name"))
            .collect();
        let transforms = hyper_priors.iter().map(Prior::transform).collect();
        let ln_se_sum = studies.iter().map(|s| s.se.ln()).sum();
        Ok(ModelSpec {
            studies,
            family,
            priors,
            transforms,
            hyper_priors,
            ln_se_sum,
        })
    }

    pub fn studies(&self) -> &[StudyRecord] {
        &self.studies
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn priors(&self) -> &PriorConfig {
        &self.priors
    }

    pub fn n_studies(&self) -> usize {
        self.studies.len()
    }

    pub fn n_hyper(&self) -> usize {
        self.transforms.len()
    }

    /// Length of the unconstrained vector.
    pub fn dim(&self) -> usize {
        self.n_hyper() + self.n_studies()
    }

    pub fn transforms(&self) -> &[Transform] {
        &self.transforms
    }

    pub fn hyper_priors(&self) -> &[Prior] {
        &self.hyper_priors
    }

    pub fn is_free(&self, coord: usize) -> bool {
        coord >= self.n_hyper() || !self.transforms[coord].is_fixed()
    }

    pub fn to_unconstrained(&self, state: &LatentState) -> Result<Vec<f64>, ModelError> {
        if state.hyper.family() != self.family {
            return Err(ModelError::Distribution(DistError::Arity {
                family: self.family,
                expected: self.n_hyper(),
                got: state.hyper.values().len(),
            }));
        }
        if state.theta.len() != self.n_studies() {
            return Err(ModelError::Dimension {
                expected: self.n_studies(),
                got: state.theta.len(),
            });
        }
        state.hyper.check_domain()?;
        let names = self.family.parameter_names();
        let mut z = Vec::with_capacity(self.dim());
        for ((&x, prior), (t, &name)) in state
            .hyper
            .values()
            .iter()
            .zip(&self.hyper_priors)
            .zip(self.transforms.iter().zip(names))
        {
            let (lo, hi) = prior.support();
            let inside = match prior {
                Prior::Fixed { value } => x == *value,
                Prior::Normal { .. } | Prior::Flat => x.is_finite(),
                _ => x > lo && x < hi,
            };
            if !inside {
                return Err(ModelError::OutOfSupport { parameter: name, value: x });
            }
            z.push(t.to_unconstrained(x));
        }
        for &th in &state.theta {
            if !th.is_finite() {
                return Err(ModelError::OutOfSupport {
                    parameter: "theta",
                    value: th,
                });
            }
            z.push(th);
        }
        Ok(z)
    }

    /// Hyperparameters from the leading block of an unconstrained vector.
    pub fn hyper_from_unconstrained(&self, zh: &[f64]) -> Result<FamilyParams, ModelError> {
        let mut v = [0.0; 4];
        let n = self.n_hyper();
        let names = self.family.parameter_names();
        for j in 0..n {
            let x = self.transforms[j].to_constrained(zh[j]);
            let (lo, hi) = self.hyper_priors[j].support();
            let fixed = self.transforms[j].is_fixed();
            if !x.is_finite() || (!fixed && (x <= lo || x >= hi)) {
                return Err(ModelError::OutOfSupport {
                    parameter: names[j],
                    value: x,
                });
            }
            v[j] = x;
        }
        let p = FamilyParams::from_values(self.family, &v[..n])?;
        p.check_domain()?;
        Ok(p)
    }

    pub fn from_unconstrained(&self, z: &[f64]) -> Result<LatentState, ModelError> {
        self.check_dim(z)?;
        let n = self.n_hyper();
        Ok(LatentState {
            hyper: self.hyper_from_unconstrained(&z[..n])?,
            theta: z[n..].to_vec(),
        })
    }

    fn check_dim(&self, z: &[f64]) -> Result<(), ModelError> {
        if z.len() != self.dim() {
            return Err(ModelError::Dimension {
                expected: self.dim(),
                got: z.len(),
            });
        }
        Ok(())
    }

    /// Prior plus log-Jacobian of the hyperparameter block.
    pub fn hyper_log_prior(&self, zh: &[f64], hyper: &FamilyParams) -> (f64, f64) {
        let values = hyper.values();
        let mut prior = 0.0;
        let mut jac = 0.0;
        for j in 0..self.n_hyper() {
            prior += self.hyper_priors[j].ln_density(values[j]);
            jac += self.transforms[j].ln_jacobian(zh[j]);
        }
        (prior, jac)
    }

    /// ln N(y_i | θ, se_i²).
    pub fn ln_likelihood_study(&self, i: usize, theta: f64) -> f64 {
        let s = &self.studies[i];
        normal_ln_pdf((s.y - theta) / s.se) - s.se.ln()
    }

    pub fn log_posterior_terms(&self, z: &[f64]) -> Result<PosteriorTerms, ModelError> {
        self.check_dim(z)?;
        let n = self.n_hyper();
        let hyper = self.hyper_from_unconstrained(&z[..n])?;
        let dens = LogDensity::new_unchecked(hyper);
        let theta = &z[n..];
        let likelihood = (0..theta.len()).map(|i| self.ln_likelihood_study(i, theta[i])).sum();
        let random_effects = theta.iter().map(|&t| dens.eval(t)).sum();
        let (prior, jacobian) = self.hyper_log_prior(&z[..n], &hyper);
        Ok(PosteriorTerms {
            likelihood,
            random_effects,
            prior,
            jacobian,
        })
    }

    /// Joint log-posterior (up to the data's marginal) on the unconstrained scale.
    pub fn log_posterior(&self, z: &[f64]) -> Result<f64, ModelError> {
        let v = self.log_posterior_terms(z)?.total();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ModelError::NonFinite)
        }
    }

    /// −2 Σ ln N(y_i | θ_i, se_i²), the deviance given latent effects.
    pub fn deviance(&self, theta: &[f64]) -> Result<f64, ModelError> {
        if theta.len() != self.n_studies() {
            return Err(ModelError::Dimension {
                expected: self.n_studies(),
                got: theta.len(),
            });
        }
        let ss: f64 = self
            .studies
            .iter()
            .zip(theta)
            .map(|(s, &t)| {
                let r = (s.y - t) / s.se;
                r * r
            })
            .sum();
        Ok(ss + 2.0 * self.ln_se_sum + 2.0 * LN_SQRT_2PI * self.n_studies() as f64)
    }
}
