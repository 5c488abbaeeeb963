use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::count_models::{Family, FitOptions};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::features::{FeatureOptions, ParticipationBasis, RESPONSE_MONTHS};
use crate::focus_metrics::ModuleGranularity;
use crate::szz::SzzConfig;
use crate::xeval::DEFAULT_MIN_ROWS;

/// Model structure fitted by the `fit` stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Hurdle,
    Poisson,
    Negbin,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hurdle" => Ok(ModelKind::Hurdle),
            "poisson" => Ok(ModelKind::Poisson),
            "negbin" => Ok(ModelKind::Negbin),
            _ => Err(Error::Config(format!("unknown model {s:?}; expected hurdle, poisson or negbin"))),
        }
    }
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub response_months: u32,
    pub min_participation_months: u32,
    pub participation: ParticipationBasis,
    pub granularity: ModuleGranularity,
    pub age_scale: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        let d = FeatureOptions::default();
        FeatureConfig {
            response_months: 6,
            min_participation_months: d.min_participation_months,
            participation: d.participation,
            granularity: d.granularity,
            age_scale: d.age_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Truncated family of the hurdle count component.
    pub count_family: Family,
    pub zero_columns: Vec<String>,
    pub count_columns: Vec<String>,
    /// Controls kept regardless of their VIF.
    pub protected_columns: Vec<String>,
    pub vif_screen: bool,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let o = FitOptions::default();
        ModelConfig {
            kind: ModelKind::Hurdle,
            count_family: Family::TruncPoisson,
            zero_columns: strings(&[
                "oss_rho",
                "oss_kappa",
                "log_social_outdegree",
                "log_buggy_commits",
                "daf",
                "top_committer_or_owner",
                "log_commits",
                "committer_only",
                "log_total_posts",
                "github_age_days",
                "github_age_days_sq",
            ]),
            count_columns: strings(&[
                "oss_rho",
                "oss_kappa",
                "iss_kappa",
                "log_social_outdegree",
                "log_buggy_commits",
                "daf",
                "top_committer_or_owner",
                "log_commits",
                "log_responsiveness",
                "committer_only",
                "log_total_posts",
                "log_observed_mentions",
                "github_age_days",
            ]),
            protected_columns: strings(&[
                "committer_only",
                "log_total_posts",
                "log_observed_mentions",
                "github_age_days",
                "github_age_days_sq",
            ]),
            vif_screen: true,
            max_iter: o.max_iter,
            tol: o.tol,
        }
    }
}

impl ModelConfig {
    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            max_iter: self.max_iter,
            tol: self.tol,
            ..FitOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct XevalConfig {
    pub min_rows: usize,
}

impl Default for XevalConfig {
    fn default() -> Self {
        XevalConfig {
            min_rows: DEFAULT_MIN_ROWS,
        }
    }
}

/// Everything a pipeline run needs. Every field has a default, and the TOML
/// form round-trips exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub store: PathBuf,
    /// `owner/name` entries; empty means every project in the store.
    pub projects: Vec<String>,
    pub out_dir: PathBuf,
    pub parallel: bool,
    pub features: FeatureConfig,
    pub szz: SzzConfig,
    pub model: ModelConfig,
    pub xeval: XevalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            store: PathBuf::from("store"),
            projects: vec![],
            out_dir: PathBuf::from("out"),
            parallel: true,
            features: FeatureConfig::default(),
            szz: SzzConfig::default(),
            model: ModelConfig::default(),
            xeval: XevalConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !RESPONSE_MONTHS.contains(&self.features.response_months) {
            return Err(Error::Config(format!(
                "features.response_months must be 3, 6 or 12, got {}",
                self.features.response_months
            )));
        }
        if !self.model.count_family.is_truncated() {
            return Err(Error::Config("model.count_family must be trunc_poisson or trunc_negbin".into()));
        }
        if !(self.features.age_scale > 0.0 && self.features.age_scale.is_finite()) {
            return Err(Error::Config("features.age_scale must be positive".into()));
        }
        for p in &self.projects {
            p.parse::<crate::ingest::ProjectId>()?;
        }
        Ok(())
    }

    pub fn execution(&self) -> Execution {
        if self.parallel {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }

    pub fn feature_options(&self) -> FeatureOptions {
        FeatureOptions {
            min_participation_months: self.features.min_participation_months,
            participation: self.features.participation,
            granularity: self.features.granularity,
            szz: self.szz,
            age_scale: self.features.age_scale,
        }
    }
}
