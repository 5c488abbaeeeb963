//! Acceptance suite: one test per criterion, each printing a PASS or FAIL
//! line before asserting. Run with `--nocapture` to see the lines.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Instant;

use chrono::{DateTime, Duration, TimeZone, Utc};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};

use mention_lab_core::count_models::family::{log_likelihood, score, score_theta};
use mention_lab_core::count_models::{bh_adjust, fit_glm, fit_hurdle, DesignMatrix, Family, FitResult};
use mention_lab_core::features::{assemble, make_split, population_stats, store_before, FeatureOptions, FeatureRow};
use mention_lab_core::focus_metrics::{specialization_all, Axis};
use mention_lab_core::ingest::{
    load_fixtures, CommentEvent, CommitRecord, FileChange, Hunk, ProjectId, ProjectStore, ThreadKind, ThreadRecord,
};
use mention_lab_core::mention_graph::{classify_thread, InteractionMatrix, MentionKind};
use mention_lab_core::report::{run_pipeline, PipelineConfig, REPORT_FILE};
use mention_lab_core::sim::{synthetic_store, StoreSpec};
use mention_lab_core::szz::{run_szz, SzzConfig};
use mention_lab_core::xeval::{cross_predict, fit_project_models, CrossMatrix};
use mention_lab_core::Execution;

fn verdict(n: u32, what: &str, ok: bool, detail: &str) {
    println!("{} criterion {n}: {what} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {what}: {detail}");
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap()
}

// ---------------------------------------------------------------- 1

#[test]
fn criterion_01_specialization_bounds() {
    let start = Instant::now();
    let mut r = rng(1);
    let mut checked = 0usize;
    let mut bad = Vec::new();
    for k in 0..1000 {
        let rows = r.random_range(1..=20);
        let cols = r.random_range(1..=20);
        let proportional = k % 4 == 0;
        let data: Vec<Vec<u64>> = if proportional {
            // every row a multiple of one profile, so every row and column
            // equals its marginal distribution
            let base: Vec<u64> = (0..cols).map(|_| r.random_range(0..5)).collect();
            (0..rows).map(|_| {
                let s = r.random_range(1..4);
                base.iter().map(|v| v * s).collect()
            }).collect()
        } else {
            (0..rows)
                .map(|_| (0..cols).map(|_| if r.random::<f64>() < 0.4 { 0 } else { r.random_range(0..12) }).collect())
                .collect()
        };
        let m = InteractionMatrix::from_rows(&data).unwrap();
        for axis in [Axis::Outward, Axis::Inward] {
            for s in specialization_all(&m, axis, Execution::Sequential).into_iter().flatten() {
                checked += 1;
                if !(0.0..=1.0).contains(&s.normalized) || s.raw_delta < 0.0 {
                    bad.push(format!("matrix {k}: {s:?}"));
                }
                if proportional && s.raw_delta.abs() > 1e-12 {
                    bad.push(format!("matrix {k}: proportional profile has delta {}", s.raw_delta));
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        1,
        "normalized scores in [0,1], raw delta >= 0, zero on marginal profiles",
        bad.is_empty() && secs < 10.0,
        &format!("{checked} scores over 1000 matrices in {secs:.2}s; {} violations {:?}", bad.len(), bad.first()),
    );
}

// ---------------------------------------------------------------- 2

fn normal_design(r: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<Vec<f64>> {
    (0..k).map(|_| (0..n).map(|_| r.sample::<f64, _>(StandardNormal)).collect()).collect()
}

fn eta(beta: &[f64], cols: &[Vec<f64>], i: usize) -> f64 {
    beta[0] + cols.iter().zip(&beta[1..]).map(|(c, b)| c[i] * b).sum::<f64>()
}

fn design(cols: &[Vec<f64>], y: Vec<u64>) -> DesignMatrix {
    let named: Vec<(String, Vec<f64>)> = cols.iter().enumerate().map(|(j, c)| (format!("x{}", j + 1), c.clone())).collect();
    let refs: Vec<(&str, Vec<f64>)> = named.iter().map(|(n, c)| (n.as_str(), c.clone())).collect();
    DesignMatrix::new(&refs, y).unwrap()
}

fn poisson_draw(r: &mut ChaCha8Rng, mu: f64) -> u64 {
    Poisson::new(mu).unwrap().sample(r) as u64
}

fn positive_poisson_draw(r: &mut ChaCha8Rng, mu: f64) -> u64 {
    loop {
        let y = poisson_draw(r, mu);
        if y > 0 {
            return y;
        }
    }
}

/// Draws a response for `fam` with the given linear predictor.
fn draw(r: &mut ChaCha8Rng, fam: Family, e: f64, theta: f64) -> u64 {
    match fam {
        Family::Logistic => u64::from(r.random::<f64>() < 1.0 / (1.0 + (-e).exp())),
        Family::Poisson => poisson_draw(r, e.exp()),
        Family::TruncPoisson => positive_poisson_draw(r, e.exp()),
        Family::NegBin => {
            let lambda = Gamma::new(theta, e.exp() / theta).unwrap().sample(r);
            if lambda > 0.0 {
                poisson_draw(r, lambda)
            } else {
                0
            }
        }
        Family::TruncNegBin => unreachable!(),
    }
}

fn within(fit: &FitResult, truth: &[f64]) -> (bool, f64) {
    let mut worst = 0.0f64;
    let mut ok = true;
    for (t, b) in fit.terms.iter().zip(truth) {
        let err = (t.estimate - b).abs();
        worst = worst.max(err);
        ok &= err <= 0.05 && err <= 3.0 * t.std_error;
    }
    (ok, worst)
}

#[test]
fn criterion_02_estimator_recovery() {
    let start = Instant::now();
    let n = 20_000;
    let cases: [(Family, &[f64], f64); 4] = [
        (Family::Logistic, &[-0.3, 0.6, -0.5], 0.0),
        (Family::Poisson, &[0.5, 0.3, -0.4], 0.0),
        (Family::TruncPoisson, &[0.4, 0.5, -0.3], 0.0),
        (Family::NegBin, &[0.7, -0.4, 0.3], 1.5),
    ];
    let mut lines = Vec::new();
    let mut all_ok = true;
    for (fam, beta, theta) in cases {
        let mut passes = 0;
        let mut worst = 0.0f64;
        for seed in 0..20u64 {
            let mut r = rng(1000 + seed);
            let cols = normal_design(&mut r, n, beta.len() - 1);
            let y: Vec<u64> = (0..n).map(|i| draw(&mut r, fam, eta(beta, &cols, i), theta)).collect();
            let fit = fit_glm(&design(&cols, y), fam).unwrap();
            let (ok, w) = within(&fit, beta);
            passes += usize::from(ok && fit.converged);
            worst = worst.max(w);
        }
        all_ok &= passes >= 19;
        lines.push(format!("{}: {passes}/20 (worst |err| {worst:.4})", fam.name()));
    }

    let zero_beta = [-0.2, 0.8, -0.5];
    let count_beta = [0.4, 0.3, -0.3];
    let mut passes = 0;
    for seed in 0..20u64 {
        let mut r = rng(5000 + seed);
        let cols = normal_design(&mut r, n, 2);
        let y: Vec<u64> = (0..n)
            .map(|i| {
                if draw(&mut r, Family::Logistic, eta(&zero_beta, &cols, i), 0.0) == 1 {
                    positive_poisson_draw(&mut r, eta(&count_beta, &cols, i).exp())
                } else {
                    0
                }
            })
            .collect();
        let names = vec!["x1".to_string(), "x2".to_string()];
        let h = fit_hurdle(&design(&cols, y), &names, &names).unwrap();
        let ok = within(&h.zero, &zero_beta).0 && within(&h.count, &count_beta).0 && h.converged();
        passes += usize::from(ok);
    }
    all_ok &= passes >= 19;
    lines.push(format!("hurdle: {passes}/20"));

    let secs = start.elapsed().as_secs_f64();
    verdict(
        2,
        "coefficients within 0.05 and 3 SE in >= 19 of 20 seeds",
        all_ok && secs < 120.0,
        &format!("{} in {secs:.1}s", lines.join("; ")),
    );
}

// ---------------------------------------------------------------- 3

#[test]
fn criterion_03_gradient_checks() {
    let mut r = rng(3);
    let families = [Family::Logistic, Family::Poisson, Family::TruncPoisson, Family::NegBin, Family::TruncNegBin];
    let mut worst = 0.0f64;
    for point in 0..100 {
        let fam = families[point % families.len()];
        let n = 25;
        let p = 3;
        let cols = normal_design(&mut r, n, p - 1);
        let beta: Vec<f64> = (0..p).map(|_| r.random_range(-0.8..0.8)).collect();
        let theta = r.random_range(0.3..5.0);
        let y: Vec<u64> = (0..n)
            .map(|i| {
                let e = eta(&beta, &cols, i);
                match fam {
                    Family::TruncNegBin => draw(&mut r, Family::NegBin, e, theta).max(1),
                    f => draw(&mut r, f, e, theta),
                }
            })
            .collect();
        let d = design(&cols, y);
        let b = DVector::from_vec(beta.clone());
        let analytic = score(fam, &d.x, &d.y, &b, theta);
        let mut g_a: Vec<f64> = analytic.iter().copied().collect();
        let mut g_n = Vec::new();
        for j in 0..p {
            let h = 1e-6 * (1.0 + b[j].abs());
            let (mut up, mut dn) = (b.clone(), b.clone());
            up[j] += h;
            dn[j] -= h;
            g_n.push((log_likelihood(fam, &d.x, &d.y, &up, theta) - log_likelihood(fam, &d.x, &d.y, &dn, theta)) / (2.0 * h));
        }
        if fam.has_dispersion() {
            g_a.push(score_theta(fam, &d.x, &d.y, &b, theta));
            let h = 1e-6 * theta;
            g_n.push(
                (log_likelihood(fam, &d.x, &d.y, &b, theta + h) - log_likelihood(fam, &d.x, &d.y, &b, theta - h)) / (2.0 * h),
            );
        }
        let diff: f64 = g_a.iter().zip(&g_n).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = g_a.iter().map(|a| a * a).sum::<f64>().sqrt();
        worst = worst.max(diff / norm.max(1e-8));
    }
    verdict(3, "analytic gradients match central differences", worst < 1e-5, &format!("worst relative error {worst:.2e} over 100 points"));
}

// ---------------------------------------------------------------- 4

fn fixture_root() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/pipeline"))
}

const FIXTURE_PROJECTS: [&str; 3] = ["acme/widgets", "acme/gadgets", "blue/sprockets"];

fn fixture_stores() -> Vec<ProjectStore> {
    FIXTURE_PROJECTS
        .iter()
        .map(|p| {
            let id: ProjectId = p.parse().unwrap();
            load_fixtures(&fixture_root().join(id.slug()), &id).unwrap()
        })
        .collect()
}

#[test]
fn criterion_04_hurdle_decomposition() {
    let mut fixtures: Vec<(String, DesignMatrix, Vec<String>)> = Vec::new();
    for seed in 0..5u64 {
        let mut r = rng(400 + seed);
        let n = 3000;
        let cols = normal_design(&mut r, n, 2);
        let y = (0..n)
            .map(|i| {
                if r.random::<f64>() < 0.4 + 0.1 * cols[0][i].tanh() {
                    positive_poisson_draw(&mut r, (0.3 + 0.4 * cols[1][i]).exp())
                } else {
                    0
                }
            })
            .collect();
        fixtures.push((format!("simulated seed {seed}"), design(&cols, y), vec!["x1".into(), "x2".into()]));
    }
    // bundled fixture, pooled feature table
    let opts = FeatureOptions::default();
    let mut rows = Vec::new();
    for s in fixture_stores() {
        let split = make_split(&s, 6).unwrap();
        rows.extend(assemble(&s, &split, &opts, Execution::Sequential).unwrap());
    }
    let cols: Vec<String> = ["oss_rho", "log_commits", "log_total_posts", "log_observed_mentions"].iter().map(|s| s.to_string()).collect();
    fixtures.push(("bundled fixture".into(), mention_lab_core::features::design_matrix(&rows, &cols).unwrap(), cols));

    let mut worst = 0.0f64;
    let mut worst_indep = 0.0f64;
    for (_, d, cols) in &fixtures {
        let h = fit_hurdle(d, cols, cols).unwrap();
        worst = worst.max((h.log_likelihood - (h.zero.log_likelihood + h.count.log_likelihood)).abs());
        // independent recomputation from the coefficients
        let z = d.select_columns(cols).unwrap();
        let zy: Vec<u64> = z.y.iter().map(|&v| u64::from(v > 0)).collect();
        let zb = DVector::from_vec(h.zero.terms.iter().map(|t| t.estimate).collect());
        let pos: Vec<usize> = (0..d.nrows()).filter(|&i| d.y[i] > 0).collect();
        let c = z.select_rows(&pos);
        let cb = DVector::from_vec(h.count.terms.iter().map(|t| t.estimate).collect());
        let total = log_likelihood(Family::Logistic, &z.x, &zy, &zb, 0.0) + log_likelihood(Family::TruncPoisson, &c.x, &c.y, &cb, 0.0);
        worst_indep = worst_indep.max((total - h.log_likelihood).abs() / h.log_likelihood.abs());
    }
    verdict(
        4,
        "hurdle log-likelihood equals the sum of its components",
        worst <= 1e-12 && worst_indep < 1e-12,
        &format!("{} fixtures; max |diff| {worst:.1e}; independent recomputation rel diff {worst_indep:.1e}", fixtures.len()),
    );
}

// ---------------------------------------------------------------- 5

fn sha(i: usize) -> String {
    format!("{:040x}", 0xc0ffee_u64 * 1000 + i as u64)
}

fn lines(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn edit(path: &str, old_start: u32, deleted: &[&str], added: &[&str]) -> FileChange {
    FileChange {
        path: path.into(),
        old_path: None,
        hunks: vec![Hunk {
            old_start,
            deleted: lines(deleted),
            new_start: old_start,
            added: lines(added),
        }],
    }
}

fn issue(project: &ProjectId, number: u64) -> ThreadRecord {
    ThreadRecord {
        project: project.clone(),
        number,
        kind: ThreadKind::Issue,
        created_at: t0(),
        author: "reporter".into(),
        events: vec![CommentEvent {
            author: "reporter".into(),
            timestamp: t0(),
            body: format!("bug {number}"),
        }],
        title: format!("bug {number}"),
        merge_commits: vec![],
    }
}

#[test]
fn criterion_05_szz_oracle() {
    let project: ProjectId = "hand/szz".parse().unwrap();
    // (author, message, change); commit i+1 is at day i+1
    let plan: Vec<(&str, &str, FileChange)> = vec![
        ("alice", "add a", edit("a.txt", 1, &[], &["fn a() {", "  x = 1", "  y = 2", "}"])),
        ("bob", "add b", edit("b.txt", 1, &[], &["alpha", "beta", "gamma"])),
        ("carol", "tune x", edit("a.txt", 2, &["  x = 1"], &["  x = 10"])),
        ("dave", "tune x again", edit("a.txt", 2, &["  x = 10"], &["  x = 11"])),
        ("erin", "reindent", edit("b.txt", 2, &["beta"], &["  beta"])),
        ("alice", "add z", edit("a.txt", 4, &[], &["  z = 3"])),
        ("bob", "rename gamma", edit("b.txt", 3, &["gamma"], &["gamma2"])),
        ("carol", "Fixes #1", edit("a.txt", 2, &["  x = 11"], &["  x = 12"])),
        ("dave", "Fixes #2", edit("b.txt", 2, &["  beta", "gamma2"], &["  beta_fixed", "gamma3"])),
        ("erin", "header", edit("a.txt", 1, &["fn a() {"], &["pub fn a() {"])),
        ("alice", "Fixes #3", edit("b.txt", 4, &[], &["delta"])),
        ("bob", "tidy", edit("a.txt", 5, &["}"], &["} // end"])),
    ];
    let commits: Vec<CommitRecord> = plan
        .into_iter()
        .enumerate()
        .map(|(i, (who, msg, fc))| CommitRecord {
            sha: sha(i + 1),
            author_login: Some(who.into()),
            author_date: t0() + Duration::days(i as i64 + 1),
            message: msg.into(),
            parents: if i == 0 { vec![] } else { vec![sha(i)] },
            file_changes: vec![fc],
        })
        .collect();
    assert_eq!(commits.len(), 12);
    let threads = (1..=3).map(|n| issue(&project, n)).collect();
    let store = ProjectStore::from_records(project, threads, commits, vec![], true, vec![]).unwrap();
    let rep = run_szz(&store, &SzzConfig::default(), Execution::Sequential);

    // hand trace:
    //  #1 rewrites a.txt:2, last changed by commit 4 (after commit 3)
    //  #2 rewrites b.txt:2, whose only change after commit 2 was whitespace,
    //     and b.txt:3, last changed by commit 7
    //  #3 only adds a line, so nothing is blamed
    let expected: BTreeSet<(u64, String, String)> =
        [(1, sha(4), sha(8)), (2, sha(2), sha(9)), (2, sha(7), sha(9))].into_iter().collect();
    let got: BTreeSet<(u64, String, String)> = rep
        .attributions
        .iter()
        .map(|a| (a.issue_number, a.buggy_sha.clone(), a.fixing_sha.clone()))
        .collect();
    let fp = got.difference(&expected).count();
    let fneg = expected.difference(&got).count();
    verdict(
        5,
        "SZZ attributions match the hand trace",
        fp == 0 && fneg == 0 && rep.links.len() == 3 && rep.skipped.is_empty(),
        &format!("{} links, {} attributions, {fp} false positives, {fneg} false negatives", rep.links.len(), got.len()),
    );
}

// ---------------------------------------------------------------- 6

/// A thread as (author, minutes after creation, mentioned logins) events.
struct PlannedThread {
    author: String,
    events: Vec<(String, i64, Vec<String>)>,
}

fn realize(project: &ProjectId, number: u64, p: &PlannedThread) -> ThreadRecord {
    ThreadRecord {
        project: project.clone(),
        number,
        kind: ThreadKind::Issue,
        created_at: t0(),
        author: p.author.clone(),
        events: p
            .events
            .iter()
            .map(|(who, min, ms)| CommentEvent {
                author: who.clone(),
                timestamp: t0() + Duration::minutes(*min),
                body: std::iter::once("text".to_string()).chain(ms.iter().map(|m| format!("@{m}"))).collect::<Vec<_>>().join(" "),
            })
            .collect(),
        title: String::new(),
        merge_commits: vec![],
    }
}

/// Brute-force replay: a mentionee has posted if they opened the thread
/// before the mention or authored any strictly earlier event.
fn replay(p: &PlannedThread) -> Vec<(String, String, MentionKind)> {
    let mut out = Vec::new();
    for (who, at, ms) in &p.events {
        for m in ms {
            let m = m.to_ascii_lowercase();
            let w = who.to_ascii_lowercase();
            if m == w {
                continue;
            }
            let mut posted = p.author.to_ascii_lowercase() == m && 0 < *at;
            for (other, t, _) in &p.events {
                if other.to_ascii_lowercase() == m && t < at {
                    posted = true;
                }
            }
            out.push((w, m, if posted { MentionKind::Reply } else { MentionKind::Call }));
        }
    }
    out
}

fn ev(who: &str, min: i64, ms: &[&str]) -> (String, i64, Vec<String>) {
    (who.into(), min, ms.iter().map(|s| s.to_string()).collect())
}

fn hand_threads() -> Vec<PlannedThread> {
    let t = |author: &str, events: Vec<(String, i64, Vec<String>)>| PlannedThread { author: author.into(), events };
    vec![
        t("ann", vec![ev("ann", 0, &["bo", "cy"]), ev("bo", 5, &["cy"]), ev("cy", 9, &["bo"])]),
        t("bo", vec![ev("bo", 0, &["bo", "dee"]), ev("dee", 3, &["bo", "eve"]), ev("eve", 4, &["dee"])]),
        t("cy", vec![ev("cy", 0, &[]), ev("ann", 2, &["cy", "Bo"]), ev("bo", 2, &["ann"]), ev("BO", 7, &["ann", "cy"])]),
        t("dee", vec![ev("dee", 0, &["eve"]), ev("eve", 1, &["dee", "fay"]), ev("fay", 8, &["eve"])]),
        t("eve", vec![ev("eve", 0, &["ann", "bo"]), ev("ann", 1, &["bo"]), ev("bo", 6, &["ann"])]),
        t("fay", vec![ev("fay", 0, &[]), ev("gus", 4, &["fay", "gus"]), ev("fay", 5, &["gus"])]),
        t("gus", vec![ev("gus", 0, &["hal"]), ev("hal", 0, &["gus"]), ev("hal", 3, &["gus"])]),
        t("hal", vec![ev("hal", 0, &["ann"]), ev("bo", 2, &["ann"]), ev("ann", 9, &["hal"])]),
        t("ann", vec![ev("ann", 0, &["cy"]), ev("cy", 1, &["ann"]), ev("dee", 2, &["cy", "ann"]), ev("eve", 3, &["dee"])]),
        t("bo", vec![ev("bo", 0, &["eve"]), ev("cy", 2, &["bo", "eve"]), ev("eve", 5, &["cy"])]),
    ]
}

fn random_thread(r: &mut ChaCha8Rng) -> PlannedThread {
    let people = ["ann", "bo", "cy", "dee", "eve", "fay"];
    let author = people[r.random_range(0..people.len())].to_string();
    let mut at = 0;
    let mut events = Vec::new();
    for k in 0..r.random_range(1..8) {
        if k > 0 {
            // ties are allowed
            at += r.random_range(0..3);
        }
        let who = if k == 0 { author.clone() } else { people[r.random_range(0..people.len())].to_string() };
        let ms: Vec<String> = (0..r.random_range(0..4)).map(|_| people[r.random_range(0..people.len())].to_string()).collect();
        events.push((who, at, ms));
    }
    PlannedThread { author, events }
}

#[test]
fn criterion_06_mention_classification() {
    let project: ProjectId = "hand/mentions".parse().unwrap();
    let planned = hand_threads();
    let total_tokens: usize = planned.iter().map(|p| p.events.iter().map(|e| e.2.len()).sum::<usize>()).sum();
    let mut mismatches = 0;
    let mut labelled = 0;
    for (k, p) in planned.iter().enumerate() {
        let edges = classify_thread(&realize(&project, k as u64 + 1, p));
        let got: Vec<(String, String, MentionKind)> = edges.iter().map(|e| (e.mentioner.clone(), e.mentionee.clone(), e.kind)).collect();
        let want = replay(p);
        labelled += want.len();
        if got != want {
            mismatches += 1;
        }
    }

    let mut r = rng(6);
    let mut partition_failures = 0;
    for k in 0..1000 {
        let p = random_thread(&mut r);
        let edges = classify_thread(&realize(&project, k + 1, &p));
        let non_self = replay(&p).len();
        let replies = edges.iter().filter(|e| e.kind == MentionKind::Reply).count();
        let calls = edges.iter().filter(|e| e.kind == MentionKind::Call).count();
        if replies + calls != non_self || edges.len() != non_self {
            partition_failures += 1;
        }
    }
    verdict(
        6,
        "reply/call labels match replay; reply + call = non-self mentions",
        total_tokens == 40 && mismatches == 0 && partition_failures == 0,
        &format!(
            "10 threads, {total_tokens} mentions ({labelled} non-self), {mismatches} mismatched threads; {partition_failures}/1000 partition failures"
        ),
    );
}

// ---------------------------------------------------------------- 7

fn covariates(r: &FeatureRow) -> Vec<f64> {
    let mut v = r.values().into_values().collect::<Vec<_>>();
    v.push(0.0);
    v
}

#[test]
fn criterion_07_time_split_isolation() {
    let id: ProjectId = "iso/proj".parse().unwrap();
    let spec = StoreSpec {
        developers: 40,
        threads: 160,
        commits: 300,
        ..StoreSpec::default()
    };
    let base = synthetic_store(&id, &spec, 77);
    let split = make_split(&base, 6).unwrap();
    let t_split = split.t_split();
    let opts = FeatureOptions::default();
    let rows_of = |s: &ProjectStore| -> BTreeMap<String, FeatureRow> {
        assemble(s, &split, &opts, Execution::Sequential)
            .unwrap()
            .into_iter()
            .map(|r| (r.developer.clone(), r))
            .collect()
    };
    let baseline = rows_of(&base);
    let devs: Vec<String> = base.developers.iter().map(|d| d.login.clone()).collect();
    let mut r = rng(7);
    let mut failures = Vec::new();
    let mut done = [0usize; 2];
    while done[0] + done[1] < 100 {
        let response_side = (done[0] + done[1]) % 2 == 0;
        let mut s = base.clone();
        // pick an event on the chosen side of the split
        let mut candidates = Vec::new();
        for (ti, t) in s.threads.iter().enumerate() {
            for (ei, e) in t.events.iter().enumerate() {
                if (e.timestamp >= t_split) == response_side && ei > 0 {
                    candidates.push((ti, ei));
                }
            }
        }
        let (ti, ei) = candidates[r.random_range(0..candidates.len())];
        let who = devs[r.random_range(0..devs.len())].clone();
        let target = devs[r.random_range(0..devs.len())].clone();
        let e = &mut s.threads[ti].events[ei];
        match r.random_range(0..3) {
            0 => e.author = who,
            1 => e.body = format!("@{target} @{who} please look"),
            _ => e.body = "no mentions here".into(),
        }
        // commits on the same side get a new author too
        let commit_idx: Vec<usize> = (0..s.commits.len()).filter(|&i| (s.commits[i].author_date >= t_split) == response_side).collect();
        if !commit_idx.is_empty() {
            let c = commit_idx[r.random_range(0..commit_idx.len())];
            s.commits[c].author_login = Some(devs[r.random_range(0..devs.len())].clone());
        }
        let after = rows_of(&s);
        if response_side {
            if after.len() != baseline.len() {
                failures.push("response perturbation changed the population".to_string());
            }
            for (dev, row) in &baseline {
                if after.get(dev).map(covariates) != Some(covariates(row)) {
                    failures.push(format!("covariates of {dev} changed"));
                }
            }
            done[0] += 1;
        } else {
            for (dev, row) in &baseline {
                if let Some(a) = after.get(dev) {
                    if a.future_mentions != row.future_mentions {
                        failures.push(format!("future mentions of {dev} changed"));
                    }
                }
            }
            done[1] += 1;
        }
    }
    // the truncated store really is blind to the response window
    let past = store_before(&base, t_split);
    let leak = past.threads.iter().flat_map(|t| &t.events).any(|e| e.timestamp >= t_split);
    verdict(
        7,
        "response edits leave covariates alone; observation edits leave the response alone",
        failures.is_empty() && !leak,
        &format!("{} response-side and {} observation-side perturbations, {} failures {:?}", done[0], done[1], failures.len(), failures.first()),
    );
}

// ---------------------------------------------------------------- 8

#[test]
fn criterion_08_bh_adjustment() {
    let hand = bh_adjust(&[0.01, 0.02, 0.04]);
    let hand_ok = hand.iter().zip([0.03, 0.03, 0.04]).all(|(a, e)| (a - e).abs() < 1e-15);

    // bh = envelope(scale(p)): scale multiplies the i-th smallest p by m/i,
    // the envelope takes the running minimum from the top, capped at 1. The
    // adjusted vector is a fixed point of the envelope, and thresholding it
    // at any level gives the step-up rejection set.
    let mut r = rng(8);
    let mut failures = 0;
    for _ in 0..1000 {
        let m = r.random_range(1..40);
        let p: Vec<f64> = (0..m).map(|_| if r.random::<f64>() < 0.1 { r.random::<f64>() * 1e-4 } else { r.random::<f64>() }).collect();
        let q = bh_adjust(&p);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
        // envelope applied to the adjusted values in the same order
        let mut env = vec![0.0; m];
        let mut running = 1.0f64;
        for &i in order.iter().rev() {
            running = running.min(q[i]).min(1.0);
            env[i] = running;
        }
        let fixed = env == q;
        // m * p / m may round one ulp below p
        let dominates = p.iter().zip(&q).all(|(a, b)| *b >= a * (1.0 - 4.0 * f64::EPSILON));
        let monotone = order.windows(2).all(|w| q[w[0]] <= q[w[1]]);
        let mut rejections_ok = true;
        for alpha in [0.01, 0.05, 0.1, 0.2] {
            // largest k with p_(k) <= k alpha / m
            let k = (1..=m).rev().find(|&k| p[order[k - 1]] <= k as f64 * alpha / m as f64).unwrap_or(0);
            let step_up: BTreeSet<usize> = order[..k].iter().copied().collect();
            let from_q: BTreeSet<usize> = (0..m).filter(|&i| q[i] <= alpha).collect();
            rejections_ok &= step_up == from_q;
        }
        if !(fixed && dominates && monotone && rejections_ok) {
            failures += 1;
        }
    }
    verdict(
        8,
        "hand step-up example; adjusted values are a fixed point of the step-up envelope",
        hand_ok && failures == 0,
        &format!("example -> {hand:?}; {failures}/1000 random vectors failed"),
    );
}

// ---------------------------------------------------------------- 9

fn simple_rows(project: &str, zero: &[f64; 6], count: &[f64; 8], n: usize, seed: u64) -> Vec<FeatureRow> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let mut x = || r.sample::<f64, _>(StandardNormal);
            let (rho, kappa, outdeg, buggy, commits, resp, age) = (x(), x(), x(), x(), x(), x(), x());
            let ez = zero[0] + zero[1] * rho + zero[2] * outdeg + zero[3] * buggy + zero[4] * commits + zero[5] * age;
            let ec = count[0]
                + count[1] * rho
                + count[2] * kappa
                + count[3] * outdeg
                + count[4] * buggy
                + count[5] * commits
                + count[6] * resp
                + count[7] * age;
            let y = if draw(&mut r, Family::Logistic, ez, 0.0) == 1 { positive_poisson_draw(&mut r, ec.exp()) } else { 0 };
            FeatureRow {
                project: project.into(),
                developer: format!("d{}", r.random::<u32>()),
                oss_rho: rho,
                oss_kappa: 0.0,
                iss_kappa: kappa,
                log_social_outdegree: outdeg,
                log_buggy_commits: buggy,
                daf: 0.0,
                top_committer_or_owner: 0,
                log_commits: commits,
                log_responsiveness: resp,
                committer_only: 0,
                log_total_posts: 0.0,
                log_observed_mentions: 0.0,
                github_age_days: age,
                github_age_days_sq: age * age,
                future_mentions: y,
                oss_rho_absent: 0,
                oss_kappa_absent: 0,
                iss_kappa_absent: 0,
                daf_absent: 0,
            }
        })
        .collect()
}

fn mean_off(m: &CrossMatrix, i: usize) -> f64 {
    m.row_off_diagonal_mean(i).unwrap()
}

fn col_off(m: &CrossMatrix, j: usize) -> f64 {
    let v: Vec<f64> = (0..m.projects.len()).filter(|&i| i != j).filter_map(|i| m.values[i][j]).collect();
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn criterion_09_cross_project_protocol() {
    let start = Instant::now();
    let zero = [0.2, 1.8, 1.2, -1.0, 1.5, -0.9];
    let count = [0.3, 0.4, -0.2, 0.3, 0.2, 0.35, -0.25, 0.1];
    let mut rows = Vec::new();
    for k in 0..5 {
        rows.extend(simple_rows(&format!("sim/p{k}"), &zero, &count, 1500, 900 + k));
    }
    let models = fit_project_models(&rows, 30, Execution::Parallel);
    let (c, z) = cross_predict(&models.pairs, &rows, Execution::Parallel).unwrap();
    let auc = z.off_diagonal_mean().unwrap();
    let mae_off = c.off_diagonal_mean().unwrap();
    let mae_in = c.diagonal_mean().unwrap();
    let shared_ok = models.pairs.len() == 5 && auc >= 0.9 && (mae_off - mae_in).abs() <= 0.2 * mae_in;

    let inv_zero: [f64; 6] = std::array::from_fn(|i| if i == 0 { zero[0] } else { -zero[i] });
    let inv_count: [f64; 8] = std::array::from_fn(|i| if i == 0 { count[0] } else { -count[i] });
    rows.extend(simple_rows("sim/zz_inverted", &inv_zero, &inv_count, 1500, 999));
    let models6 = fit_project_models(&rows, 30, Execution::Parallel);
    let (c6, z6) = cross_predict(&models6.pairs, &rows, Execution::Parallel).unwrap();
    let k = c6.projects.len();
    let inv = c6.projects.iter().position(|p| p == "sim/zz_inverted").unwrap();
    let worst_mae_row = (0..k).max_by(|&a, &b| mean_off(&c6, a).total_cmp(&mean_off(&c6, b))).unwrap();
    let worst_mae_col = (0..k).max_by(|&a, &b| col_off(&c6, a).total_cmp(&col_off(&c6, b))).unwrap();
    let worst_auc_row = (0..k).min_by(|&a, &b| mean_off(&z6, a).total_cmp(&mean_off(&z6, b))).unwrap();
    let worst_auc_col = (0..k).min_by(|&a, &b| col_off(&z6, a).total_cmp(&col_off(&z6, b))).unwrap();
    let outlier_ok = [worst_mae_row, worst_mae_col, worst_auc_row, worst_auc_col].iter().all(|&w| w == inv);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        9,
        "shared projects transfer; the inverted project is the worst row and column",
        shared_ok && outlier_ok && secs < 60.0,
        &format!(
            "off-diagonal AUC {auc:.3}, MAE {mae_off:.3} vs in-sample {mae_in:.3}; inverted row AUC {:.3}, MAE {:.3}; {secs:.1}s",
            mean_off(&z6, inv),
            mean_off(&c6, inv)
        ),
    );
}

// ---------------------------------------------------------------- 10

#[test]
fn criterion_10_end_to_end_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let store_root = tmp.path().join("store");
    let stores = fixture_stores();
    for s in &stores {
        s.write(&store_root).unwrap();
    }
    let out = tmp.path().join("out");
    let cfg = PipelineConfig {
        store: store_root,
        out_dir: out.clone(),
        ..PipelineConfig::default()
    };
    let read_all = |files: &[String]| -> Vec<Vec<u8>> { files.iter().map(|f| std::fs::read(out.join(f)).unwrap()).collect() };
    let a = run_pipeline(&cfg).unwrap();
    let names: Vec<String> = a.manifest.files.iter().map(|f| f.path.clone()).collect();
    let first = read_all(&names);
    std::fs::remove_dir_all(&out).unwrap();
    let b = run_pipeline(&cfg).unwrap();
    let second = read_all(&names);
    let identical = a.digest() == b.digest() && first == second && a.manifest == b.manifest;
    let stages_green = out.join(REPORT_FILE).exists() && a.xeval.models.pairs.len() == 3 && a.feature_exclusions.is_empty();

    let text = std::fs::read_to_string(fixture_root().join("expected_population.json")).unwrap();
    let expected: Vec<BTreeMap<String, serde_json::Value>> = serde_json::from_str(&text).unwrap();
    let summary = population_stats(&stores);
    let mut mismatched = Vec::new();
    for e in &expected {
        let project = e["project"].as_str().unwrap();
        let got = summary.projects.iter().find(|p| p.project == project).expect("project summarized");
        let got = serde_json::to_value(got).unwrap();
        for (k, v) in e {
            if got[k] != *v {
                mismatched.push(format!("{project} {k}: {} vs {v}", got[k]));
            }
        }
    }
    verdict(
        10,
        "pipeline reruns are byte-identical; population counts match the hand counts",
        identical && stages_green && mismatched.is_empty() && expected.len() == 3,
        &format!("{} files, digest {}; {} count mismatches {:?}", names.len(), &a.digest()[..16], mismatched.len(), mismatched.first()),
    );
}
