use std::fmt::Write;

use super::config::PipelineConfig;
use super::fitting::FitArtifact;
use crate::count_models::{FitResult, Term, INTERCEPT};
use crate::error::Result;
use crate::features::{ProjectSummary, SummaryReport};
use crate::xeval::XevalOutput;

/// `†`, `*`, `**` or `***` for adjusted p below 0.1, 0.05, 0.01, 0.001.
pub fn significance_marker(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else if p < 0.1 {
        "†"
    } else {
        ""
    }
}

fn opt(v: Option<f64>, digits: usize) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.digits$}"),
        _ => "n/a".into(),
    }
}

fn pct(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{:.1}%", 100.0 * x))
}

fn summary_row(s: &ProjectSummary, label: &str) -> String {
    format!(
        "| {label} | {} | {} | {} | {} | {} | {} | {} | {} | {} |\n",
        s.issues,
        pct(s.issue_mention_fraction()),
        s.pull_requests,
        pct(s.pull_request_mention_fraction()),
        s.mentions,
        opt(s.mean_mentions_per_thread(), 3),
        pct(s.response_rate()),
        pct(s.response_rate_excluding_never()),
        s.feature_rows.unwrap_or(0),
    )
}

fn term_cell(t: Option<&Term>) -> String {
    match t {
        Some(t) => format!("{:.4} ({:.4}){}", t.estimate, t.std_error, significance_marker(t.p_adjusted)),
        None => String::new(),
    }
}

fn coefficient_table(out: &mut String, fits: &[(&str, &FitResult)]) {
    let mut names: Vec<&str> = vec![INTERCEPT];
    for (_, f) in fits {
        for t in &f.terms {
            if !names.contains(&t.name.as_str()) {
                names.push(&t.name);
            }
        }
    }
    out.push_str("| term |");
    for (label, _) in fits {
        let _ = write!(out, " {label} |");
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(fits.len()));
    out.push('\n');
    for n in names {
        let _ = write!(out, "| {n} |");
        for (_, f) in fits {
            let _ = write!(out, " {} |", term_cell(f.terms.iter().find(|t| t.name == n)));
        }
        out.push('\n');
    }
    for (label, f) in fits {
        if let Some(theta) = f.theta {
            let _ = writeln!(out, "\n{label} dispersion theta = {theta:.4} (SE {})", opt(f.theta_std_error, 4));
        }
    }
    out.push_str("\nEstimate (standard error). Significance after Benjamini-Hochberg adjustment: † p<0.1; * p<0.05; ** p<0.01; *** p<0.001.\n");
}

/// Markdown report of a finished run. Contains no timestamps or absolute
/// output paths beyond those in the embedded config.
pub fn render_report(
    config: &PipelineConfig,
    summary: &SummaryReport,
    exclusions: &[(String, String)],
    fit: &FitArtifact,
    xeval: &XevalOutput,
) -> Result<String> {
    let mut s = String::new();
    s.push_str("# Mention analysis report\n\n## Population\n\n");
    s.push_str("| project | issues | issues with mention | pull requests | PRs with mention | mentions | mentions per thread | response rate | response rate (responders) | feature rows |\n");
    s.push_str("|---|---|---|---|---|---|---|---|---|---|\n");
    for p in &summary.projects {
        s.push_str(&summary_row(p, &p.project));
    }
    s.push_str(&summary_row(&summary.total, "**total**"));

    s.push_str("\n## Exclusions\n\n");
    let mut any = false;
    for (p, why) in exclusions {
        let _ = writeln!(s, "- features: {p}: {why}");
        any = true;
    }
    for e in &xeval.models.excluded {
        let _ = writeln!(s, "- cross-project: {}: {}", e.project, e.reason);
        any = true;
    }
    for c in &fit.constant_columns {
        let _ = writeln!(s, "- fit: column {c} is constant and was left out");
        any = true;
    }
    if !any {
        s.push_str("None.\n");
    }

    s.push_str("\n## Variance inflation\n\n");
    match &fit.vif {
        Some(v) => {
            s.push_str("| column | VIF | protected |\n|---|---|---|\n");
            for e in &v.table {
                let _ = writeln!(s, "| {} | {} | {} |", e.column, opt(e.vif, 3), if e.protected { "yes" } else { "" });
            }
            if v.dropped.is_empty() {
                s.push_str("\nNo column exceeded the threshold.\n");
            } else {
                let _ = writeln!(s, "\nDropped: {}.", v.dropped.join(", "));
            }
        }
        None => s.push_str("Screening disabled.\n"),
    }

    let _ = writeln!(s, "\n## Coefficients ({} model, {} rows)\n", fit.model_name(), fit.n_rows);
    match (&fit.hurdle, &fit.glm) {
        (Some(h), _) => {
            coefficient_table(&mut s, &[("count", &h.count), ("zero", &h.zero)]);
            let _ = writeln!(
                s,
                "\nLog-likelihood {:.4}, AIC {:.4}. Converged: count {}, zero {}.",
                h.log_likelihood, h.aic, h.count.converged, h.zero.converged
            );
        }
        (None, Some(g)) => {
            coefficient_table(&mut s, &[(g.family.name(), g)]);
            let _ = writeln!(s, "\nLog-likelihood {:.4}, AIC {:.4}. Converged: {}.", g.log_likelihood, g.aic, g.converged);
        }
        _ => s.push_str("No model.\n"),
    }

    s.push_str("\n## Prediction error (in sample)\n\n");
    let _ = writeln!(s, "Mean absolute error {:.3}, mean squared error {:.3}.", fit.mae, fit.mse);

    if let Some(sel) = &fit.selection {
        s.push_str("\n## Model selection\n\n| model | parameters | log-likelihood | AIC | converged |\n|---|---|---|---|---|\n");
        for r in &sel.aic {
            let _ = writeln!(s, "| {} | {} | {:.4} | {:.4} | {} |", r.model.name(), r.n_params, r.log_likelihood, r.aic, r.converged);
        }
        if !sel.vuong.is_empty() {
            s.push_str("\n| comparison | Vuong z | p |\n|---|---|---|\n");
            for v in &sel.vuong {
                let (z, p) = v.result.map_or(("n/a".to_string(), "n/a".to_string()), |r| {
                    (format!("{:.4}", r.statistic), format!("{:.4}", r.p_value))
                });
                let _ = writeln!(s, "| {} vs {} | {z} | {p} |", v.a.name(), v.b.name());
            }
        }
        for (c, why) in &sel.failed {
            let _ = writeln!(s, "\n{} failed: {why}", c.name());
        }
        let _ = writeln!(s, "\nLowest AIC: {}.", sel.preferred.name());
    }

    s.push_str("\n## Cross-project prediction\n\n");
    let _ = writeln!(s, "{} projects modeled.", xeval.models.pairs.len());
    if let (Some(c), Some(z)) = (&xeval.count, &xeval.zero) {
        let _ = writeln!(
            s,
            "Mean off-diagonal count MAE {}, mean off-diagonal zero AUC {}.",
            opt(c.off_diagonal_mean(), 3),
            opt(z.off_diagonal_mean(), 3)
        );
    }
    s.push('\n');
    for f in &xeval.files {
        if let Some(name) = f.file_name() {
            let name = name.to_string_lossy();
            if name.ends_with(".svg") {
                let _ = writeln!(s, "![{name}](xeval/{name})");
            } else {
                let _ = writeln!(s, "- [xeval/{name}](xeval/{name})");
            }
        }
    }

    s.push_str("\n## Configuration\n\n```toml\n");
    s.push_str(&config.to_toml()?);
    s.push_str("```\n");
    Ok(s)
}
