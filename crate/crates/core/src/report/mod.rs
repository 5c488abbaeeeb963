//! End-to-end pipeline, artifact layout and the markdown report.

mod config;
mod fitting;
mod metrics;
mod render;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{FeatureConfig, ModelConfig, ModelKind, PipelineConfig, XevalConfig};
pub use fitting::{fit_features, predict_developer, FitArtifact};
pub use metrics::{metrics_table, write_metrics_csv, MetricsRow};
pub use render::{render_report, significance_marker};

use crate::error::{Error, Result};
use crate::features::{assemble_all, population_stats, write_features_csv, FeatureRow, SummaryReport};
use crate::ingest::{jsonl_bytes, list_projects, write_atomic, ProjectId, ProjectStore};
use crate::mention_graph::build_graph;
use crate::szz::run_szz;
use crate::timewin::Window;
use crate::xeval::{run_xeval, XevalOutput};

pub const REPORT_FILE: &str = "report.md";
pub const BUNDLE_MANIFEST: &str = "bundle.json";

/// Pipeline stage names, in execution order.
pub const STAGES: [&str; 6] = ["graph", "metrics", "szz", "features", "fit", "xeval"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleFile {
    /// Relative to the output directory, with `/` separators.
    pub path: String,
    pub sha256: String,
}

/// Every file a run wrote, with content hashes. `digest` hashes the sorted
/// file list, so two runs agree on it iff they wrote identical bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub files: Vec<BundleFile>,
    pub digest: String,
}

#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub out_dir: PathBuf,
    pub summary: SummaryReport,
    /// Projects left out of the feature table, with the reason.
    pub feature_exclusions: Vec<(String, String)>,
    pub rows: Vec<FeatureRow>,
    pub fit: FitArtifact,
    pub xeval: XevalOutput,
    pub manifest: BundleManifest,
}

impl ReportBundle {
    pub fn digest(&self) -> &str {
        &self.manifest.digest
    }
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage: name,
        source: Box::new(e),
    })
}

/// Stores named by the config, or every store under its root.
pub fn load_stores(config: &PipelineConfig) -> Result<Vec<ProjectStore>> {
    let ids: Vec<ProjectId> = if config.projects.is_empty() {
        list_projects(&config.store)?
    } else {
        config.projects.iter().map(|p| p.parse()).collect::<Result<_>>()?
    };
    if ids.is_empty() {
        return Err(Error::UnreadableStore {
            path: config.store.clone(),
            message: "no projects found".into(),
        });
    }
    ids.iter().map(|id| ProjectStore::load(&config.store, id)).collect()
}

fn write_file(out: &Path, rel: &str, bytes: &[u8]) -> Result<()> {
    let path = out.join(rel);
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_atomic(&path, bytes)
}

/// Runs every stage over the configured stores and writes the bundle under
/// `config.out_dir`. A failing stage aborts the run with its name; files
/// from earlier stages stay on disk.
pub fn run_pipeline(config: &PipelineConfig) -> Result<ReportBundle> {
    config.validate()?;
    let exec = config.execution();
    let out = config.out_dir.clone();
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let stores = load_stores(config)?;

    info!("stage graph: {} projects", stores.len());
    stage("graph", (|| {
        for s in &stores {
            let g = build_graph(s, &s.project, &Window::all())?;
            write_file(&out, &format!("graphs/{}.edges.jsonl", s.project.slug()), &g.to_jsonl()?)?;
        }
        Ok(())
    })())?;

    info!("stage metrics");
    stage("metrics", (|| {
        for s in &stores {
            let rows = metrics_table(s, &Window::all(), config.features.granularity, &config.szz, exec)?;
            let dir = out.join("metrics");
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            write_metrics_csv(&dir.join(format!("{}.metrics.csv", s.project.slug())), &rows)?;
        }
        Ok(())
    })())?;

    info!("stage szz");
    stage("szz", (|| {
        for s in &stores {
            let rep = run_szz(s, &config.szz, exec);
            write_file(&out, &format!("szz/{}.attributions.jsonl", s.project.slug()), &jsonl_bytes(&rep.attributions)?)?;
        }
        Ok(())
    })())?;

    info!("stage features");
    let (rows, exclusions) = stage("features", (|| {
        let per = assemble_all(&stores, config.features.response_months, &config.feature_options(), exec)?;
        let mut rows = Vec::new();
        let mut excl = Vec::new();
        for p in per {
            if let Some(why) = p.excluded {
                excl.push((p.project, why));
            } else {
                rows.extend(p.rows);
            }
        }
        write_features_csv(&out.join("features.csv"), &rows)?;
        Ok((rows, excl))
    })())?;

    info!("stage fit: {} rows", rows.len());
    let fit = stage("fit", (|| {
        let a = fit_features(&rows, &config.model, config.features.age_scale, true)?;
        a.write(&out.join("fit.json"))?;
        Ok(a)
    })())?;

    info!("stage xeval");
    let xeval = stage("xeval", run_xeval(&rows, config.xeval.min_rows, &out.join("xeval"), exec))?;

    let mut counts: BTreeMap<String, usize> = stores.iter().map(|s| (s.project.to_string(), 0)).collect();
    for r in &rows {
        *counts.entry(r.project.clone()).or_default() += 1;
    }
    let summary = population_stats(&stores).with_feature_rows(&counts);
    let md = render_report(config, &summary, &exclusions, &fit, &xeval)?;
    write_atomic(&out.join(REPORT_FILE), md.as_bytes())?;

    let manifest = bundle_manifest(&out)?;
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    write_atomic(&out.join(BUNDLE_MANIFEST), &bytes)?;
    Ok(ReportBundle {
        out_dir: out,
        summary,
        feature_exclusions: exclusions,
        rows,
        fit,
        xeval,
        manifest,
    })
}

fn collect_files(root: &Path, dir: &Path, acc: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_files(root, &path, acc)?;
        } else if path.strip_prefix(root).map(|p| p != Path::new(BUNDLE_MANIFEST)).unwrap_or(false) {
            acc.push(path);
        }
    }
    Ok(())
}

/// Hashes every file under `out_dir` except the manifest itself.
pub fn bundle_manifest(out_dir: &Path) -> Result<BundleManifest> {
    let mut paths = Vec::new();
    collect_files(out_dir, out_dir, &mut paths)?;
    let mut files: Vec<BundleFile> = paths
        .iter()
        .map(|p| {
            let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
            let rel = p.strip_prefix(out_dir).expect("under root");
            let rel: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
            Ok(BundleFile {
                path: rel.join("/"),
                sha256: hex::encode(Sha256::digest(&bytes)),
            })
        })
        .collect::<Result<_>>()?;
    files.sort_by(|a, b| a.path.cmp(&b.path));
    let mut h = Sha256::new();
    for f in &files {
        h.update(f.path.as_bytes());
        h.update(b"\0");
        h.update(f.sha256.as_bytes());
        h.update(b"\n");
    }
    Ok(BundleManifest {
        files,
        digest: hex::encode(h.finalize()),
    })
}
