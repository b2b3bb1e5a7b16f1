//! Adaptive random-walk Metropolis within Gibbs.
//!
//! Each sweep updates every free coordinate of the unconstrained vector in
//! order (hyperparameters first, then θ_1..θ_K) with a Gaussian random-walk
//! proposal. During warmup the per-coordinate log proposal scale follows a
//! Robbins–Monro recursion toward the target acceptance rate; afterwards the
//! scales are frozen. Chains use independent ChaCha streams derived from
//! `(seed, chain index)` and are merged in chain order, so serial and
//! parallel runs give identical output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classic::dersimonian_laird;
use crate::diagnostics::Diagnostics;
use crate::distributions::{DistError, Family, FamilyParams, LogDensity};
use crate::model::{ModelError, ModelSpec, Prior};

/// Exponent of the Robbins–Monro step size `t^-0.6`.
const ADAPT_DECAY: f64 = 0.6;
/// Standard deviation of the start-point jitter on the unconstrained scale.
const INIT_JITTER: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error("no valid starting point: {0}")]
    Init(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Distribution(#[from] DistError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    Serial,
    /// Chains run on the rayon pool; identical to `Serial` when the
    /// `parallel` feature is off.
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub chains: usize,
    /// Warmup sweeps per chain.
    pub warmup: usize,
    /// Kept draws in total, split evenly across chains.
    pub keep: usize,
    pub seed: u64,
    pub target_accept: f64,
    pub thin: usize,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            chains: 4,
            warmup: 10_000,
            keep: 250_000,
            seed: 0,
            target_accept: 0.44,
            thin: 1,
            execution: Execution::Parallel,
        }
    }
}

impl SamplerConfig {
    /// Desk-scale settings: 1000 warmup sweeps and 20000 kept draws.
    pub fn fast() -> Self {
        SamplerConfig {
            warmup: 1_000,
            keep: 20_000,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn draws_per_chain(&self) -> usize {
        self.keep / self.chains.max(1)
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: String| Err(SamplerError::Config(m));
        if self.chains < 1 {
            return bad("chains must be at least 1".into());
        }
        if self.warmup < 100 {
            return bad(format!("warmup must be at least 100, got {}", self.warmup));
        }
        if self.keep < self.chains {
            return bad(format!("keep ({}) must be at least chains ({})", self.keep, self.chains));
        }
        if self.thin < 1 {
            return bad("thin must be at least 1".into());
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return bad(format!("target_accept must lie in (0, 1), got {}", self.target_accept));
        }
        Ok(())
    }
}

/// A log-density over an unconstrained vector, updated one coordinate at a
/// time, optionally followed by joint block moves.
///
/// `propose` evaluates the log ratio for setting `z[coord] = value` and may
/// stash intermediate results in the cache; `accept` then commits them.
/// Block moves work the same way through `propose_block`, which writes the
/// candidate vector into `out` and returns the log acceptance ratio including
/// any Jacobian of the move.
pub trait Target: Sync {
    type Cache: Send;

    fn dim(&self) -> usize;
    fn is_free(&self, coord: usize) -> bool;
    fn initial_point(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, SamplerError>;
    /// One scale per coordinate, then one per block move.
    fn initial_scales(&self) -> Vec<f64>;
    fn init_cache(&self, z: &[f64]) -> Result<Self::Cache, SamplerError>;
    /// `None` rejects the proposal outright (outside the support or a
    /// non-finite density).
    fn propose(&self, cache: &mut Self::Cache, z: &[f64], coord: usize, value: f64) -> Option<f64>;
    fn accept(&self, cache: &mut Self::Cache, coord: usize);

    fn n_blocks(&self) -> usize {
        0
    }

    fn propose_block(&self, _cache: &mut Self::Cache, _z: &[f64], _block: usize, _step: f64, _out: &mut [f64]) -> Option<f64> {
        None
    }

    fn accept_block(&self, _cache: &mut Self::Cache, _block: usize) {}
}

/// Output of one chain on the unconstrained scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRun {
    pub dim: usize,
    /// Kept states, row-major.
    pub z: Vec<f64>,
    /// Post-warmup acceptance rate per coordinate, then per block move.
    pub acceptance: Vec<f64>,
    pub warmup_scales: Vec<f64>,
    /// Scales in use at the final kept draw.
    pub final_scales: Vec<f64>,
}

impl ChainRun {
    pub fn rows(&self) -> usize {
        self.z.len() / self.dim
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.z[r * self.dim..(r + 1) * self.dim]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.z.iter().skip(c).step_by(self.dim).copied().collect()
    }
}

/// The RNG of chain `chain`.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

fn run_chain<T: Target>(target: &T, cfg: &SamplerConfig, chain: usize) -> Result<ChainRun, SamplerError> {
    let mut rng = chain_rng(cfg.seed, chain);
    let dim = target.dim();
    let n_moves = dim + target.n_blocks();
    let mut z = target.initial_point(&mut rng)?;
    let mut cache = target.init_cache(&z)?;
    let mut log_scale: Vec<f64> = target.initial_scales().iter().map(|s| s.ln()).collect();
    assert_eq!(log_scale.len(), n_moves, "one scale per coordinate and block move");
    let active: Vec<usize> = (0..dim)
        .filter(|&c| target.is_free(c))
        .chain(dim..n_moves)
        .collect();
    let mut scratch = vec![0.0; dim];

    let mut sweep = |z: &mut Vec<f64>, rng: &mut ChaCha8Rng, log_scale: &[f64], accepted: &mut [bool]| {
        for &m in &active {
            let e: f64 = StandardNormal.sample(rng);
            let step = log_scale[m].exp() * e;
            let u: f64 = rng.random();
            accepted[m] = false;
            if m < dim {
                let proposal = z[m] + step;
                if let Some(log_ratio) = target.propose(&mut cache, z, m, proposal) {
                    if u.ln() < log_ratio {
                        target.accept(&mut cache, m);
                        z[m] = proposal;
                        accepted[m] = true;
                    }
                }
            } else if let Some(log_ratio) = target.propose_block(&mut cache, z, m - dim, step, &mut scratch) {
                if u.ln() < log_ratio {
                    target.accept_block(&mut cache, m - dim);
                    z.copy_from_slice(&scratch);
                    accepted[m] = true;
                }
            }
        }
    };

    let mut accepted = vec![false; n_moves];
    for t in 1..=cfg.warmup {
        sweep(&mut z, &mut rng, &log_scale, &mut accepted);
        let gamma = (t as f64).powf(-ADAPT_DECAY);
        for &m in &active {
            let a = if accepted[m] { 1.0 } else { 0.0 };
            log_scale[m] += gamma * (a - cfg.target_accept);
        }
    }
    let warmup_scales: Vec<f64> = log_scale.iter().map(|l| l.exp()).collect();

    let rows = cfg.draws_per_chain();
    let mut kept = Vec::with_capacity(rows * dim);
    let mut counts = vec![0u64; n_moves];
    for _ in 0..rows {
        for _ in 0..cfg.thin {
            sweep(&mut z, &mut rng, &log_scale, &mut accepted);
            for &m in &active {
                counts[m] += accepted[m] as u64;
            }
        }
        kept.extend_from_slice(&z);
    }
    let total = (rows * cfg.thin) as f64;
    Ok(ChainRun {
        dim,
        z: kept,
        acceptance: counts.iter().map(|&n| n as f64 / total).collect(),
        warmup_scales,
        final_scales: log_scale.iter().map(|l| l.exp()).collect(),
    })
}

/// Runs `cfg.chains` chains on `target` and returns them in chain order.
pub fn run_target<T: Target>(target: &T, cfg: &SamplerConfig) -> Result<Vec<ChainRun>, SamplerError> {
    cfg.validate()?;
    let one = |c: usize| run_chain(target, cfg, c);
    #[cfg(feature = "parallel")]
    {
        if cfg.execution == Execution::Parallel {
            use rayon::prelude::*;
            return (0..cfg.chains).into_par_iter().map(one).collect();
        }
    }
    (0..cfg.chains).map(one).collect()
}

/// A target given by a closure returning the log-density, or `None` outside
/// the support. Every coordinate is free.
pub struct FnTarget<F> {
    pub log_density: F,
    pub start: Vec<f64>,
    pub scales: Vec<f64>,
}

impl<F> FnTarget<F>
where
    F: Fn(&[f64]) -> Option<f64> + Sync,
{
    pub fn new(log_density: F, start: Vec<f64>) -> Self {
        let scales = vec![1.0; start.len()];
        FnTarget {
            log_density,
            start,
            scales,
        }
    }
}

pub struct FnCache {
    current: f64,
    pending: f64,
    buf: Vec<f64>,
}

impl<F> Target for FnTarget<F>
where
    F: Fn(&[f64]) -> Option<f64> + Sync,
{
    type Cache = FnCache;

    fn dim(&self) -> usize {
        self.start.len()
    }

    fn is_free(&self, _: usize) -> bool {
        true
    }

    fn initial_point(&self, _: &mut ChaCha8Rng) -> Result<Vec<f64>, SamplerError> {
        Ok(self.start.clone())
    }

    fn initial_scales(&self) -> Vec<f64> {
        self.scales.clone()
    }

    fn init_cache(&self, z: &[f64]) -> Result<FnCache, SamplerError> {
        let current = (self.log_density)(z)
            .filter(|v| v.is_finite())
            .ok_or_else(|| SamplerError::Init("log-density is not finite at the start".into()))?;
        Ok(FnCache {
            current,
            pending: current,
            buf: z.to_vec(),
        })
    }

    fn propose(&self, cache: &mut FnCache, z: &[f64], coord: usize, value: f64) -> Option<f64> {
        cache.buf.copy_from_slice(z);
        cache.buf[coord] = value;
        let v = (self.log_density)(&cache.buf).filter(|v| v.is_finite())?;
        cache.pending = v;
        Some(v - cache.current)
    }

    fn accept(&self, cache: &mut FnCache, _: usize) {
        cache.current = cache.pending;
    }
}

/// Joint moves applied after each coordinate sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Block {
    /// ξ and every θ_i move by the same amount.
    Shift,
    /// ω and every θ_i − ξ are multiplied by the same factor.
    Scale,
    /// One shape coordinate moves while ξ and ω adjust so that the mean and
    /// standard deviation of F stay put.
    Shape(usize),
}

/// The random-effects model as a sampling target.
///
/// Besides the coordinate updates it uses joint moves: a shift and a scale
/// that leave the standardized effects (θ_i − ξ)/ω unchanged, and for each
/// shape parameter a move that holds the mean and SD of F fixed. These break
/// the strong posterior coupling between location, scale and shape.
pub struct ModelTarget<'a> {
    spec: &'a ModelSpec,
    start: Vec<f64>,
    scales: Vec<f64>,
    blocks: Vec<Block>,
}

pub struct ModelCache {
    density: LogDensity,
    /// ln f(θ_i | hyper) per study
    re: Vec<f64>,
    hyper_prior: f64,
    pending_density: Option<LogDensity>,
    pending_re: Vec<f64>,
    pending_hyper_prior: f64,
}

/// A point strictly inside the support of `prior`, as close to `x` as allowed.
fn clamp_into(prior: &Prior, x: f64) -> f64 {
    match *prior {
        Prior::Fixed { value } => value,
        Prior::Uniform { lower, upper } => {
            let pad = 0.01 * (upper - lower);
            x.clamp(lower + pad, upper - pad)
        }
        Prior::TruncatedExponential { lower, rate } => x.max(lower + 0.1 / rate.max(1e-3)).max(lower + 0.1),
        Prior::Normal { .. } | Prior::Flat => x,
    }
}

impl<'a> ModelTarget<'a> {
    pub fn new(spec: &'a ModelSpec) -> Result<Self, SamplerError> {
        let studies = spec.studies();
        let ys: Vec<f64> = studies.iter().map(|s| s.y).collect();
        let (loc, spread, se_loc) = match dersimonian_laird(studies) {
            Ok(c) => (c.mu_hat, c.tau2.sqrt(), c.se_mu),
            Err(_) => (ys[0], studies[0].se, studies[0].se),
        };
        let spread = if spread > 0.0 { spread } else { 0.5 * se_loc.max(1e-3) };
        let names = spec.family().parameter_names();
        let mut hyper = Vec::with_capacity(names.len());
        for (j, &name) in names.iter().enumerate() {
            let guess = match name {
                "xi" => loc,
                "omega" => spread,
                "nu" => 10.0,
                "alpha" | "epsilon" => 0.0,
                "a" | "b" => 5.0,
                "delta" => 1.0,
                _ => unreachable!("unknown hyperparameter {name}"),
            };
            hyper.push(clamp_into(&spec.hyper_priors()[j], guess));
        }
        let hp = FamilyParams::from_values(spec.family(), &hyper)?;
        let state = crate::model::LatentState {
            theta: ys.clone(),
            hyper: hp,
        };
        let start = spec.to_unconstrained(&state)?;

        let mut scales = Vec::with_capacity(spec.dim());
        for (j, &name) in names.iter().enumerate() {
            scales.push(match (name, spec.transforms()[j].is_fixed()) {
                (_, true) => 1.0,
                ("xi", _) => se_loc.max(1e-3),
                _ => 0.5,
            });
        }
        scales.extend(studies.iter().map(|s| s.se));
        let mut blocks = Vec::new();
        if spec.is_free(0) {
            blocks.push(Block::Shift);
            scales.push(se_loc.max(1e-3));
        }
        if spec.is_free(1) {
            blocks.push(Block::Scale);
            scales.push(0.1);
        }
        if spec.is_free(0) && spec.is_free(1) {
            for j in 2..spec.n_hyper() {
                if spec.is_free(j) {
                    blocks.push(Block::Shape(j));
                    scales.push(0.5);
                }
            }
        }
        Ok(ModelTarget {
            spec,
            start,
            scales,
            blocks,
        })
    }

    fn n_hyper(&self) -> usize {
        self.spec.n_hyper()
    }

    /// Mean and SD of F at unit location and scale, for the shape part of `zh`.
    fn standard_moments(&self, zh: &[f64]) -> Option<(f64, f64)> {
        let mut v = [0.0; 4];
        v[1] = 1.0;
        for j in 2..zh.len() {
            v[j] = self.spec.transforms()[j].to_constrained(zh[j]);
        }
        let p = FamilyParams::from_values(self.spec.family(), &v[..zh.len()]).ok()?;
        p.check_domain().ok()?;
        let m = p.mean().ok()?;
        let sd = p.variance().ok()?.sqrt();
        (m.is_finite() && sd > 0.0 && sd.is_finite()).then_some((m, sd))
    }
}

impl Target for ModelTarget<'_> {
    type Cache = ModelCache;

    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn is_free(&self, coord: usize) -> bool {
        self.spec.is_free(coord)
    }

    fn initial_point(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, SamplerError> {
        let mut z = self.start.clone();
        for (c, zc) in z.iter_mut().enumerate() {
            if self.is_free(c) {
                let e: f64 = StandardNormal.sample(rng);
                let width = if c < self.n_hyper() { 1.0 } else { self.scales[c] };
                *zc += INIT_JITTER * width * e;
            }
        }
        match self.spec.log_posterior(&z) {
            Ok(_) => Ok(z),
            Err(_) => self
                .spec
                .log_posterior(&self.start)
                .map(|_| self.start.clone())
                .map_err(|e| SamplerError::Init(e.to_string())),
        }
    }

    fn initial_scales(&self) -> Vec<f64> {
        self.scales.clone()
    }

    fn init_cache(&self, z: &[f64]) -> Result<ModelCache, SamplerError> {
        let n = self.n_hyper();
        let hyper = self.spec.hyper_from_unconstrained(&z[..n])?;
        let density = hyper.log_density()?;
        let re: Vec<f64> = z[n..].iter().map(|&t| density.eval(t)).collect();
        let (prior, jac) = self.spec.hyper_log_prior(&z[..n], &hyper);
        Ok(ModelCache {
            density,
            pending_re: re.clone(),
            re,
            hyper_prior: prior + jac,
            pending_density: None,
            pending_hyper_prior: 0.0,
        })
    }

    fn propose(&self, cache: &mut ModelCache, z: &[f64], coord: usize, value: f64) -> Option<f64> {
        let n = self.n_hyper();
        if coord >= n {
            let i = coord - n;
            let old = z[coord];
            let re_new = cache.density.eval(value);
            let diff = self.spec.ln_likelihood_study(i, value) - self.spec.ln_likelihood_study(i, old) + re_new
                - cache.re[i];
            cache.pending_re[i] = re_new;
            return diff.is_finite().then_some(diff);
        }
        let mut zh = [0.0; 4];
        zh[..n].copy_from_slice(&z[..n]);
        zh[coord] = value;
        let hyper = self.spec.hyper_from_unconstrained(&zh[..n]).ok()?;
        let density = hyper.log_density().ok()?;
        let (prior, jac) = self.spec.hyper_log_prior(&zh[..n], &hyper);
        let mut delta = prior + jac - cache.hyper_prior;
        for ((slot, &t), &old) in cache.pending_re.iter_mut().zip(&z[n..]).zip(&cache.re) {
            *slot = density.eval(t);
            delta += *slot - old;
        }
        cache.pending_density = Some(density);
        cache.pending_hyper_prior = prior + jac;
        delta.is_finite().then_some(delta)
    }

    fn accept(&self, cache: &mut ModelCache, coord: usize) {
        let n = self.n_hyper();
        if coord >= n {
            let i = coord - n;
            cache.re[i] = cache.pending_re[i];
        } else {
            cache.density = cache.pending_density.take().expect("accept follows propose");
            cache.hyper_prior = cache.pending_hyper_prior;
            cache.re.copy_from_slice(&cache.pending_re);
        }
    }

    fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    fn propose_block(&self, cache: &mut ModelCache, z: &[f64], block: usize, step: f64, out: &mut [f64]) -> Option<f64> {
        let n = self.n_hyper();
        let k = self.spec.n_studies();
        out.copy_from_slice(z);
        let mut log_jacobian = 0.0;
        match self.blocks[block] {
            Block::Shift => {
                out[0] += step;
                for v in &mut out[n..] {
                    *v += step;
                }
            }
            Block::Scale => {
                let t = self.spec.transforms()[1];
                let xi = self.spec.transforms()[0].to_constrained(z[0]);
                let c = step.exp();
                let omega = c * t.to_constrained(z[1]);
                let (lo, hi) = self.spec.hyper_priors()[1].support();
                if !(omega > lo && omega < hi) {
                    return None;
                }
                out[1] = t.to_unconstrained(omega);
                for v in &mut out[n..] {
                    *v = xi + c * (*v - xi);
                }
                log_jacobian = (k + 1) as f64 * step + t.ln_jacobian(z[1]) - t.ln_jacobian(out[1]);
            }
            Block::Shape(j) => {
                out[j] += step;
                let (m0, s0) = self.standard_moments(&z[..n])?;
                let (m1, s1) = self.standard_moments(&out[..n])?;
                let tx = self.spec.transforms()[0];
                let tw = self.spec.transforms()[1];
                let xi = tx.to_constrained(z[0]);
                let omega = tw.to_constrained(z[1]);
                let ratio = s0 / s1;
                let omega_new = omega * ratio;
                let (lo, hi) = self.spec.hyper_priors()[1].support();
                if !(omega_new > lo && omega_new < hi) {
                    return None;
                }
                out[1] = tw.to_unconstrained(omega_new);
                out[0] = tx.to_unconstrained(xi + omega * m0 - omega_new * m1);
                log_jacobian = ratio.ln() + tw.ln_jacobian(z[1]) - tw.ln_jacobian(out[1]);
            }
        }
        let hyper = self.spec.hyper_from_unconstrained(&out[..n]).ok()?;
        let density = hyper.log_density().ok()?;
        let (prior, jac) = self.spec.hyper_log_prior(&out[..n], &hyper);
        let mut delta = prior + jac - cache.hyper_prior + log_jacobian;
        for i in 0..k {
            let (old, new) = (z[n + i], out[n + i]);
            cache.pending_re[i] = density.eval(new);
            delta += cache.pending_re[i] - cache.re[i] + self.spec.ln_likelihood_study(i, new)
                - self.spec.ln_likelihood_study(i, old);
        }
        cache.pending_density = Some(density);
        cache.pending_hyper_prior = prior + jac;
        delta.is_finite().then_some(delta)
    }

    fn accept_block(&self, cache: &mut ModelCache, _: usize) {
        self.accept(cache, 0);
    }
}

/// Draws of one chain on the constrained scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDraws {
    /// Hyperparameter rows in the family's canonical order.
    pub hyper: Vec<f64>,
    /// θ rows, one column per study.
    pub theta: Vec<f64>,
    /// Mean of the random-effects distribution at each draw.
    pub mu: Vec<f64>,
    pub deviance: Vec<f64>,
    pub acceptance: Vec<f64>,
    pub warmup_scales: Vec<f64>,
    pub final_scales: Vec<f64>,
}

/// Posterior draws of all chains, in chain order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawsMatrix {
    pub family: Family,
    pub n_studies: usize,
    pub chains: Vec<ChainDraws>,
    pub diagnostics: Diagnostics,
}

impl DrawsMatrix {
    pub fn n_hyper(&self) -> usize {
        self.family.n_parameters()
    }

    pub fn rows_per_chain(&self) -> usize {
        self.chains.first().map_or(0, |c| c.mu.len())
    }

    pub fn n_draws(&self) -> usize {
        self.chains.iter().map(|c| c.mu.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.n_draws() == 0
    }

    /// μ over all chains, concatenated in chain order.
    pub fn mu_all(&self) -> Vec<f64> {
        self.chains.iter().flat_map(|c| c.mu.iter().copied()).collect()
    }

    pub fn deviance_all(&self) -> Vec<f64> {
        self.chains.iter().flat_map(|c| c.deviance.iter().copied()).collect()
    }

    /// Column `j` of the hyperparameters, per chain.
    pub fn hyper_column(&self, j: usize) -> Vec<Vec<f64>> {
        let h = self.n_hyper();
        self.chains
            .iter()
            .map(|c| c.hyper.iter().skip(j).step_by(h).copied().collect())
            .collect()
    }

    /// Hyperparameter draws over all chains.
    pub fn hyper_params(&self) -> impl Iterator<Item = FamilyParams> + '_ {
        let h = self.n_hyper();
        self.chains.iter().flat_map(move |c| {
            c.hyper
                .chunks_exact(h)
                .map(move |v| FamilyParams::from_values(self.family, v).expect("stored rows have family arity"))
        })
    }

    /// Posterior mean of each θ_i.
    pub fn theta_mean(&self) -> Vec<f64> {
        let k = self.n_studies;
        let mut sum = vec![0.0; k];
        for c in &self.chains {
            for row in c.theta.chunks_exact(k) {
                for (s, t) in sum.iter_mut().zip(row) {
                    *s += t;
                }
            }
        }
        let n = self.n_draws() as f64;
        sum.iter().map(|s| s / n).collect()
    }
}

/// Samples the posterior of `spec` and assembles draws, derived μ, deviance
/// and convergence diagnostics.
pub fn run(spec: &ModelSpec, cfg: &SamplerConfig) -> Result<DrawsMatrix, SamplerError> {
    let target = ModelTarget::new(spec)?;
    let runs = run_target(&target, cfg)?;
    let n = spec.n_hyper();
    let k = spec.n_studies();

    let mut chains = Vec::with_capacity(runs.len());
    for r in &runs {
        let rows = r.rows();
        let mut hyper = Vec::with_capacity(rows * n);
        let mut theta = Vec::with_capacity(rows * k);
        let mut mu = Vec::with_capacity(rows);
        let mut deviance = Vec::with_capacity(rows);
        for i in 0..rows {
            let row = r.row(i);
            let hp = spec.hyper_from_unconstrained(&row[..n])?;
            hyper.extend(hp.values());
            theta.extend_from_slice(&row[n..]);
            mu.push(hp.mean()?);
            deviance.push(spec.deviance(&row[n..])?);
        }
        chains.push(ChainDraws {
            hyper,
            theta,
            mu,
            deviance,
            acceptance: r.acceptance.clone(),
            warmup_scales: r.warmup_scales.clone(),
            final_scales: r.final_scales.clone(),
        });
    }

    let mut draws = DrawsMatrix {
        family: spec.family(),
        n_studies: k,
        chains,
        diagnostics: Diagnostics::assess(&[], Vec::new()),
    };
    draws.diagnostics = assess(spec, &draws);
    Ok(draws)
}

fn assess(spec: &ModelSpec, draws: &DrawsMatrix) -> Diagnostics {
    let mut columns: Vec<(String, Vec<Vec<f64>>)> = vec![
        ("mu".into(), draws.chains.iter().map(|c| c.mu.clone()).collect()),
        ("deviance".into(), draws.chains.iter().map(|c| c.deviance.clone()).collect()),
    ];
    for (j, name) in spec.family().parameter_names().iter().enumerate() {
        if spec.is_free(j) {
            columns.push((name.to_string(), draws.hyper_column(j)));
        }
    }
    let monitored: Vec<(String, Vec<&[f64]>)> = columns
        .iter()
        .map(|(name, cols)| (name.clone(), cols.iter().map(Vec::as_slice).collect()))
        .collect();
    let moves = draws.chains.first().map_or(0, |c| c.acceptance.len());
    let m = draws.chains.len() as f64;
    let acceptance = (0..moves)
        .map(|c| draws.chains.iter().map(|ch| ch.acceptance[c]).sum::<f64>() / m)
        .collect();
    Diagnostics::assess(&monitored, acceptance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classic::StudyRecord;
    use crate::model::PriorConfig;

    fn small_cfg(seed: u64) -> SamplerConfig {
        SamplerConfig {
            chains: 2,
            warmup: 500,
            keep: 2_000,
            seed,
            ..SamplerConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::default().validate().is_ok());
        let c = SamplerConfig {
            warmup: 99,
            ..SamplerConfig::default()
        };
        assert!(c.validate().is_err());
        let c = SamplerConfig {
            keep: 3,
            ..SamplerConfig::default()
        };
        assert!(c.validate().is_err());
        assert_eq!(SamplerConfig::default().draws_per_chain(), 62_500);
    }

    #[test]
    fn chain_streams_differ() {
        let a: u64 = chain_rng(1, 0).random();
        let b: u64 = chain_rng(1, 1).random();
        assert_ne!(a, b);
        assert_eq!(a, chain_rng(1, 0).random::<u64>());
    }

    #[test]
    fn model_run_shapes() {
        let studies: Vec<StudyRecord> = [0.1, -0.4, 0.8, 0.3]
            .iter()
            .enumerate()
            .map(|(i, &y)| StudyRecord::new(format!("s{i}"), y, 0.3))
            .collect();
        let spec = ModelSpec::new(studies, Family::SkewNormal, PriorConfig::default()).unwrap();
        let d = run(&spec, &small_cfg(4)).unwrap();
        assert_eq!(d.chains.len(), 2);
        assert_eq!(d.rows_per_chain(), 1_000);
        assert_eq!(d.chains[0].theta.len(), 4_000);
        for (p, &m) in d.hyper_params().zip(&d.mu_all()) {
            assert_eq!(p.mean().unwrap(), m);
            assert!(p.check_domain().is_ok());
        }
        assert_eq!(d.chains[0].warmup_scales, d.chains[0].final_scales);
    }
}
