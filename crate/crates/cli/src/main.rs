use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{ArgGroup, Parser, Subcommand};
use log::{info, warn};

use mention_lab_core::features::{assemble_all, read_features_csv, write_features_csv};
use mention_lab_core::ingest::{ingest_project, jsonl_bytes, write_atomic, ProjectId, ProjectStore, Source};
use mention_lab_core::mention_graph::build_graph;
use mention_lab_core::report::{
    fit_features, load_stores, metrics_table, predict_developer, run_pipeline, write_metrics_csv, FitArtifact, ModelKind,
    PipelineConfig,
};
use mention_lab_core::szz::run_szz;
use mention_lab_core::timewin::Window;
use mention_lab_core::xeval::run_xeval;

#[derive(Parser)]
#[command(name = "mention-lab", version, about = "Mine @-mention networks and model future mentions")]
struct Cli {
    /// TOML pipeline config; command-line flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Run single-threaded.
    #[arg(long, global = true)]
    sequential: bool,

    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Copy a project into the store from fixtures or the GitHub API.
    #[command(group(ArgGroup::new("source").required(true).args(["from_api", "fixtures"])))]
    Ingest {
        #[arg(long)]
        project: String,
        /// Crawl the GitHub API, authenticating with MENTION_LAB_TOKEN.
        #[arg(long)]
        from_api: bool,
        /// Directory with threads.jsonl, commits.jsonl and developers.jsonl.
        #[arg(long, value_name = "DIR")]
        fixtures: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        store: Option<PathBuf>,
    },
    /// Classified mention edges of one project as JSONL.
    Graph {
        #[arg(long, value_name = "DIR")]
        store: Option<PathBuf>,
        #[arg(long)]
        project: String,
        /// `START..END`, dates or RFC 3339 timestamps; either side may be empty.
        #[arg(long, default_value = "..")]
        window: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-developer metrics of one project as CSV.
    Metrics {
        #[arg(long, value_name = "DIR")]
        store: Option<PathBuf>,
        #[arg(long)]
        project: String,
        #[arg(long, default_value = "..")]
        window: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bug-introducing commit attributions of one project as JSONL.
    Szz {
        #[arg(long, value_name = "DIR")]
        store: Option<PathBuf>,
        #[arg(long)]
        project: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Person-project feature table over every configured project.
    Features {
        #[arg(long, value_name = "DIR")]
        store: Option<PathBuf>,
        #[arg(long, value_name = "MONTHS")]
        response_months: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a count model to a feature table.
    Fit {
        #[arg(long, value_name = "CSV")]
        features: PathBuf,
        /// hurdle, poisson or negbin.
        #[arg(long)]
        model: Option<ModelKind>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-project prediction matrices and heatmaps.
    Xeval {
        #[arg(long, value_name = "CSV")]
        features: PathBuf,
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
        #[arg(long)]
        min_rows: Option<usize>,
    },
    /// Run every stage and write report.md with all artifacts.
    Report {
        #[arg(long, value_name = "DIR")]
        store: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },
    /// Expected mentions from a hurdle fit.
    #[command(group(ArgGroup::new("input").required(true).args(["row", "features"])))]
    Predict {
        #[arg(long, value_name = "JSON")]
        fit: PathBuf,
        /// JSON object of covariate values, e.g. '{"log_commits": 1.2}'.
        #[arg(long)]
        row: Option<String>,
        /// Predict every row of a feature table, one JSON line each.
        #[arg(long, value_name = "CSV")]
        features: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut c = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if cli.sequential {
        c.parallel = false;
    }
    Ok(c)
}

fn open_store(root: &Path, project: &str) -> Result<ProjectStore> {
    let id: ProjectId = project.parse()?;
    ProjectStore::load(root, &id).with_context(|| format!("loading {project} from {}", root.display()))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            ensure_parent(p)?;
            write_atomic(p, text.as_bytes())?;
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    let exec = cfg.execution();
    match cli.command {
        Command::Ingest {
            project,
            from_api,
            fixtures,
            store,
        } => {
            let id: ProjectId = project.parse()?;
            let root = store.unwrap_or(cfg.store);
            let s = if from_api {
                ingest_from_api(&id, &root)?
            } else {
                let dir = fixtures.expect("clap enforces a source");
                ingest_project(Source::Fixtures(dir), &id, &root)?
            };
            println!(
                "{}: {} threads, {} commits, {} developers, digest {}",
                id,
                s.threads.len(),
                s.commits.len(),
                s.developers.len(),
                s.manifest.digest
            );
        }
        Command::Graph {
            store,
            project,
            window,
            out,
        } => {
            let s = open_store(&store.unwrap_or(cfg.store), &project)?;
            let g = build_graph(&s, &s.project, &Window::parse(&window)?)?;
            ensure_parent(&out)?;
            write_atomic(&out, &g.to_jsonl()?)?;
            info!("{} edges written to {}", g.edges.len(), out.display());
        }
        Command::Metrics {
            store,
            project,
            window,
            out,
        } => {
            let s = open_store(&store.unwrap_or(cfg.store), &project)?;
            let rows = metrics_table(&s, &Window::parse(&window)?, cfg.features.granularity, &cfg.szz, exec)?;
            ensure_parent(&out)?;
            write_metrics_csv(&out, &rows)?;
            info!("{} developers written to {}", rows.len(), out.display());
        }
        Command::Szz { store, project, out } => {
            let s = open_store(&store.unwrap_or(cfg.store), &project)?;
            let rep = run_szz(&s, &cfg.szz, exec);
            ensure_parent(&out)?;
            write_atomic(&out, &jsonl_bytes(&rep.attributions)?)?;
            for skip in &rep.skipped {
                warn!("fix {} for #{} skipped: {}", skip.fixing_sha, skip.issue_number, skip.reason);
            }
            info!(
                "{} fix links, {} attributions, {} skipped",
                rep.links.len(),
                rep.attributions.len(),
                rep.skipped.len()
            );
        }
        Command::Features {
            store,
            response_months,
            out,
        } => {
            if let Some(s) = store {
                cfg.store = s;
            }
            if let Some(m) = response_months {
                cfg.features.response_months = m;
            }
            cfg.validate()?;
            let stores = load_stores(&cfg)?;
            let per = assemble_all(&stores, cfg.features.response_months, &cfg.feature_options(), exec)?;
            let mut rows = Vec::new();
            for p in per {
                match p.excluded {
                    Some(why) => warn!("excluded {}: {why}", p.project),
                    None => rows.extend(p.rows),
                }
            }
            ensure_parent(&out)?;
            write_features_csv(&out, &rows)?;
            info!("{} rows written to {}", rows.len(), out.display());
        }
        Command::Fit { features, model, out } => {
            if let Some(m) = model {
                cfg.model.kind = m;
            }
            let rows = read_features_csv(&features)?;
            let a = fit_features(&rows, &cfg.model, cfg.features.age_scale, false)?;
            ensure_parent(&out)?;
            a.write(&out)?;
            if let Some(h) = &a.hurdle {
                if !h.converged() {
                    bail!("hurdle fit did not converge; results written to {}", out.display());
                }
            }
            if let Some(g) = &a.glm {
                if !g.converged {
                    bail!("{} fit did not converge; results written to {}", g.family.name(), out.display());
                }
            }
            println!("{} rows, MAE {:.3}, MSE {:.3}", a.n_rows, a.mae, a.mse);
        }
        Command::Xeval {
            features,
            out_dir,
            min_rows,
        } => {
            let rows = read_features_csv(&features)?;
            let x = run_xeval(&rows, min_rows.unwrap_or(cfg.xeval.min_rows), &out_dir, exec)?;
            for e in &x.models.excluded {
                warn!("excluded {}: {}", e.project, e.reason);
            }
            if x.models.pairs.len() < 2 {
                bail!("cross-project prediction needs at least two fitted projects, got {}", x.models.pairs.len());
            }
            println!("{} projects, {} files in {}", x.models.pairs.len(), x.files.len(), out_dir.display());
        }
        Command::Report { store, out_dir } => {
            if let Some(s) = store {
                cfg.store = s;
            }
            if let Some(o) = out_dir {
                cfg.out_dir = o;
            }
            let b = run_pipeline(&cfg)?;
            println!("report {} digest {}", b.out_dir.join("report.md").display(), b.digest());
        }
        Command::Predict {
            fit,
            row,
            features,
            out,
        } => {
            let a = FitArtifact::load(&fit)?;
            let mut text = String::new();
            if let Some(json) = row {
                let values: BTreeMap<String, f64> =
                    serde_json::from_str(&json).map_err(|e| anyhow!("--row must be a JSON object of numbers: {e}"))?;
                text = serde_json::to_string(&predict_developer(&a, &values)?)?;
                text.push('\n');
            } else if let Some(csv) = features {
                for r in read_features_csv(&csv)? {
                    let p = predict_developer(&a, &r.values())?;
                    let line = serde_json::json!({
                        "project": r.project,
                        "developer": r.developer,
                        "observed": r.future_mentions,
                        "p_first_mention": p.p_first_mention,
                        "expected_count": p.expected_count,
                        "expected_mentions": p.expected_mentions,
                    });
                    text.push_str(&line.to_string());
                    text.push('\n');
                }
            }
            emit(out.as_deref(), &text)?;
        }
    }
    Ok(())
}

#[cfg(feature = "api")]
fn ingest_from_api(id: &ProjectId, root: &Path) -> Result<ProjectStore> {
    use mention_lab_core::ingest::api::GithubClient;
    let client = GithubClient::from_env()?;
    Ok(ingest_project(Source::Api(&client), id, root)?)
}

#[cfg(not(feature = "api"))]
fn ingest_from_api(_: &ProjectId, _: &Path) -> Result<ProjectStore> {
    bail!("this build has no API support; rebuild with the `api` feature")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
