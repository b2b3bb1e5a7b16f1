//! End-to-end analysis: classic pooling once, then one Bayesian fit per
//! requested family.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::classic::{dersimonian_laird, ClassicError, ClassicResult, StudyRecord};
use crate::diagnostics::Diagnostics;
use crate::distributions::Family;
use crate::inference::{
    density_grid_draws, predictive_draws, summarize_mu, summarize_predictive, DensityGrid, InferenceError,
    PredictiveRow, SummaryRow, GRID_POINTS,
};
use crate::ingest::{read_studies, IngestError};
use crate::model::{ModelError, ModelSpec, PriorConfig};
use crate::sampler::{chain_rng, run, SamplerConfig, SamplerError};
#[cfg(feature = "parallel")]
use crate::sampler::Execution;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "FLEXMETA_THREADS";
/// RNG streams at or above this offset are reserved for predictive draws.
const PREDICTIVE_STREAM: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Classic(#[from] ClassicError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{family}: {source}")]
    Sampler { family: Family, source: SamplerError },
    #[error("{family}: {source}")]
    Inference { family: Family, source: InferenceError },
    #[error("no families requested")]
    NoFamilies,
    #[error("thread pool: {0}")]
    Threads(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub data: PathBuf,
    pub families: Vec<Family>,
    pub sampler: SamplerConfig,
    /// `name=prior` strings applied on top of the default priors.
    pub prior_overrides: Vec<String>,
    pub out_dir: Option<PathBuf>,
    pub format: OutputFormat,
    /// Worker thread cap; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    /// Overrides the report timestamp, for reproducible output.
    pub timestamp: Option<String>,
}

impl RunConfig {
    pub fn new(data: impl Into<PathBuf>) -> Self {
        RunConfig {
            data: data.into(),
            families: Family::ALL.to_vec(),
            sampler: SamplerConfig::default(),
            prior_overrides: Vec::new(),
            out_dir: None,
            format: OutputFormat::Table,
            threads: None,
            timestamp: None,
        }
    }

    pub fn priors(&self) -> Result<PriorConfig, ModelError> {
        let mut p = PriorConfig::default();
        for o in &self.prior_overrides {
            p.apply_override(o)?;
        }
        Ok(p)
    }
}

/// Thread cap from [`THREADS_ENV`], if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Convergence summary of one family's fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyDiagnostics {
    pub family: Family,
    pub mean_deviance: f64,
    pub deviance_at_mean: f64,
    #[serde(flatten)]
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub seed: u64,
    /// SHA-256 of the data, families, priors and sampler settings.
    pub config_hash: String,
    pub sampler: SamplerConfig,
    pub priors: PriorConfig,
    pub families: Vec<Family>,
    pub n_studies: usize,
}

/// Density grids of μ and θ_new for one family.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyDensities {
    pub family: Family,
    pub mu: DensityGrid,
    pub predictive: DensityGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub classic: ClassicResult,
    pub posterior: Vec<SummaryRow>,
    pub predictive: Vec<PredictiveRow>,
    pub diagnostics: Vec<FamilyDiagnostics>,
    pub provenance: Provenance,
    pub timestamp: String,
    #[serde(skip)]
    pub densities: Vec<FamilyDensities>,
}

impl AnalysisReport {
    pub fn converged(&self) -> bool {
        self.diagnostics.iter().all(|d| d.diagnostics.converged)
    }
}

struct FamilyFit {
    summary: SummaryRow,
    predictive: PredictiveRow,
    diagnostics: FamilyDiagnostics,
    densities: FamilyDensities,
}

fn fit_family(
    studies: &[StudyRecord],
    family: Family,
    priors: &PriorConfig,
    cfg: &SamplerConfig,
) -> Result<FamilyFit, AnalysisError> {
    let spec = ModelSpec::new(studies.to_vec(), family, priors.clone())?;
    let draws = run(&spec, cfg).map_err(|source| AnalysisError::Sampler { family, source })?;
    let infer = |source| AnalysisError::Inference { family, source };
    let summary = summarize_mu(&draws, &spec).map_err(infer)?;
    let stream = PREDICTIVE_STREAM + Family::ALL.iter().position(|&f| f == family).unwrap_or(0);
    let mut rng = chain_rng(cfg.seed, stream);
    let theta_new = predictive_draws(&draws, &mut rng);
    let predictive = summarize_predictive(family, &theta_new).map_err(infer)?;
    let dic = crate::inference::dic(&draws, &spec).map_err(infer)?;
    let densities = FamilyDensities {
        family,
        mu: density_grid_draws(&draws.mu_all(), GRID_POINTS).map_err(infer)?,
        predictive: density_grid_draws(&theta_new, GRID_POINTS).map_err(infer)?,
    };
    for w in &draws.diagnostics.warnings {
        log::warn!("{family}: {w}");
    }
    Ok(FamilyFit {
        summary,
        predictive,
        diagnostics: FamilyDiagnostics {
            family,
            mean_deviance: dic.mean_deviance,
            deviance_at_mean: dic.deviance_at_mean,
            diagnostics: draws.diagnostics,
        },
        densities,
    })
}

fn config_hash(studies: &[StudyRecord], families: &[Family], priors: &PriorConfig, cfg: &SamplerConfig) -> String {
    let canonical = serde_json::json!({
        "studies": studies,
        "families": families,
        "priors": priors,
        "sampler": cfg,
    });
    let digest = Sha256::digest(canonical.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Analyzes already loaded studies.
pub fn analyze(studies: &[StudyRecord], cfg: &RunConfig) -> Result<AnalysisReport, AnalysisError> {
    if cfg.families.is_empty() {
        return Err(AnalysisError::NoFamilies);
    }
    cfg.sampler
        .validate()
        .map_err(|source| AnalysisError::Sampler {
            family: cfg.families[0],
            source,
        })?;
    let classic = dersimonian_laird(studies)?;
    let priors = cfg.priors()?;
    for &f in &cfg.families {
        priors.check_for(f)?;
    }

    let work = || -> Result<Vec<FamilyFit>, AnalysisError> {
        let one = |&f: &Family| fit_family(studies, f, &priors, &cfg.sampler);
        #[cfg(feature = "parallel")]
        {
            if cfg.sampler.execution == Execution::Parallel {
                use rayon::prelude::*;
                return cfg.families.par_iter().map(one).collect();
            }
        }
        cfg.families.iter().map(one).collect()
    };
    let fits = match cfg.threads {
        #[cfg(feature = "parallel")]
        Some(n) if cfg.sampler.execution == Execution::Parallel => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| AnalysisError::Threads(e.to_string()))?
            .install(work)?,
        _ => work()?,
    };

    let mut report = AnalysisReport {
        classic,
        posterior: Vec::with_capacity(fits.len()),
        predictive: Vec::with_capacity(fits.len()),
        diagnostics: Vec::with_capacity(fits.len()),
        provenance: Provenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.sampler.seed,
            config_hash: config_hash(studies, &cfg.families, &priors, &cfg.sampler),
            sampler: cfg.sampler.clone(),
            priors,
            families: cfg.families.clone(),
            n_studies: studies.len(),
        },
        timestamp: cfg
            .timestamp
            .clone()
            .unwrap_or_else(|| humantime::format_rfc3339_seconds(std::time::SystemTime::now()).to_string()),
        densities: Vec::with_capacity(fits.len()),
    };
    for fit in fits {
        report.posterior.push(fit.summary);
        report.predictive.push(fit.predictive);
        report.diagnostics.push(fit.diagnostics);
        report.densities.push(fit.densities);
    }
    Ok(report)
}

/// Reads the data file named in `cfg` and analyzes it.
pub fn run_analysis(cfg: &RunConfig) -> Result<AnalysisReport, AnalysisError> {
    let studies = read_studies(&cfg.data)?;
    analyze(&studies, cfg)
}
