//! Seeded simulators used by tests, benches and the acceptance suite.

use chrono::{Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};

use sha2::{Digest, Sha256};

use crate::count_models::{family, DesignMatrix, Family};
use crate::features::FeatureRow;
use crate::ingest::{
    CommentEvent, CommitRecord, DeveloperRecord, FileChange, Hunk, ProjectId, ProjectStore, ThreadKind, ThreadRecord,
};
use crate::timewin::Timestamp;
use crate::xeval::{SIMPLE_COUNT_COLUMNS, SIMPLE_ZERO_COLUMNS};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard-normal covariates named `x1..xk`.
pub fn normal_columns(rng: &mut impl Rng, n: usize, k: usize) -> Vec<(String, Vec<f64>)> {
    (1..=k)
        .map(|j| (format!("x{j}"), (0..n).map(|_| rng.sample(StandardNormal)).collect()))
        .collect()
}

pub fn sample_poisson(rng: &mut impl Rng, mu: f64) -> u64 {
    if mu <= 0.0 {
        return 0;
    }
    Poisson::new(mu).expect("positive mean").sample(rng) as u64
}

/// Poisson conditioned on being positive, by inversion of the conditional CDF.
pub fn sample_trunc_poisson(rng: &mut impl Rng, mu: f64) -> u64 {
    let u: f64 = rng.random();
    let norm = -(-mu).exp_m1();
    let mut k = 1u64;
    let mut pk = (-mu).exp() * mu / norm;
    let mut cdf = pk;
    while u > cdf && k < 100_000 {
        k += 1;
        pk *= mu / k as f64;
        cdf += pk;
        if pk < 1e-300 && cdf >= 1.0 - 1e-15 {
            break;
        }
    }
    k
}

pub fn sample_negbin(rng: &mut impl Rng, mu: f64, theta: f64) -> u64 {
    let g = Gamma::new(theta, mu / theta).expect("valid gamma").sample(rng);
    sample_poisson(rng, g)
}

fn draw(rng: &mut impl Rng, fam: Family, eta: f64, theta: f64) -> u64 {
    match fam {
        Family::Logistic => u64::from(rng.random::<f64>() < family::sigmoid(eta)),
        Family::Poisson => sample_poisson(rng, eta.exp()),
        Family::TruncPoisson => sample_trunc_poisson(rng, eta.exp()),
        Family::NegBin => sample_negbin(rng, eta.exp(), theta),
        Family::TruncNegBin => loop {
            let y = sample_negbin(rng, eta.exp(), theta);
            if y > 0 {
                break y;
            }
        },
    }
}

/// Draws `n` rows from a GLM with intercept `beta[0]` and standard-normal
/// covariates for the remaining coefficients.
pub fn simulate_glm(fam: Family, beta: &[f64], theta: f64, n: usize, seed: u64) -> DesignMatrix {
    let mut r = rng(seed);
    let cols = normal_columns(&mut r, n, beta.len() - 1);
    let y = (0..n)
        .map(|i| {
            let eta = beta[0] + cols.iter().zip(&beta[1..]).map(|(c, b)| c.1[i] * b).sum::<f64>();
            draw(&mut r, fam, eta, theta)
        })
        .collect();
    let named: Vec<(&str, Vec<f64>)> = cols.iter().map(|(n, c)| (n.as_str(), c.clone())).collect();
    DesignMatrix::new(&named, y).expect("simulated design is valid")
}

/// Two-stage hurdle draw: a logistic gate then a zero-truncated Poisson,
/// both on the same standard-normal covariates.
pub fn simulate_hurdle(zero_beta: &[f64], count_beta: &[f64], n: usize, seed: u64) -> DesignMatrix {
    assert_eq!(zero_beta.len(), count_beta.len());
    let mut r = rng(seed);
    let cols = normal_columns(&mut r, n, zero_beta.len() - 1);
    let lin = |b: &[f64], i: usize| b[0] + cols.iter().zip(&b[1..]).map(|(c, b)| c.1[i] * b).sum::<f64>();
    let y = (0..n)
        .map(|i| {
            let gate = r.random::<f64>() < family::sigmoid(lin(zero_beta, i));
            if gate {
                sample_trunc_poisson(&mut r, lin(count_beta, i).exp())
            } else {
                0
            }
        })
        .collect();
    let named: Vec<(&str, Vec<f64>)> = cols.iter().map(|(n, c)| (n.as_str(), c.clone())).collect();
    DesignMatrix::new(&named, y).expect("simulated design is valid")
}

/// Shape of a randomly generated project store.
#[derive(Debug, Clone, PartialEq)]
pub struct StoreSpec {
    pub developers: usize,
    pub threads: usize,
    pub commits: usize,
    pub files: usize,
    pub start: Timestamp,
    pub days: i64,
}

impl Default for StoreSpec {
    fn default() -> Self {
        StoreSpec {
            developers: 30,
            threads: 200,
            commits: 400,
            files: 12,
            start: Utc.with_ymd_and_hms(2015, 1, 1, 0, 0, 0).single().expect("valid date"),
            days: 3 * 365,
        }
    }
}

fn fake_sha(seed: u64, i: usize) -> String {
    let d = Sha256::digest(format!("{seed}:{i}").as_bytes());
    hex::encode(d)[..40].to_string()
}

/// Random but internally consistent store: a linear commit history whose
/// hunks replay against tracked file contents, fix messages that close real
/// issues, and threads whose comments @-mention other developers.
pub fn synthetic_store(project: &ProjectId, spec: &StoreSpec, seed: u64) -> ProjectStore {
    let mut r = rng(seed);
    let secs = spec.days * 86_400;
    let at = |s: i64| spec.start + Duration::seconds(s);
    let devs: Vec<String> = (0..spec.developers).map(|i| format!("dev{i}")).collect();
    // a few heavy contributors
    let pick_dev = |r: &mut ChaCha8Rng| -> usize {
        let u: f64 = r.random();
        ((u * u) * devs.len() as f64) as usize
    };

    let mut threads = Vec::with_capacity(spec.threads);
    for number in 1..=spec.threads as u64 {
        let created = r.random_range(0..secs - 86_400);
        let author = pick_dev(&mut r);
        let kind = if r.random::<f64>() < 0.25 { ThreadKind::PullRequest } else { ThreadKind::Issue };
        let mut t = created;
        let mut events = Vec::new();
        let n_events = 1 + r.random_range(0..6);
        let mut who = author;
        for k in 0..n_events {
            if k > 0 {
                t += r.random_range(60..20 * 86_400);
                who = pick_dev(&mut r);
            }
            if t >= secs {
                break;
            }
            let mut body = format!("comment {k} on #{number}");
            for _ in 0..r.random_range(0..3) {
                let m = pick_dev(&mut r);
                body.push_str(&format!(" cc @{}", devs[m]));
            }
            events.push(CommentEvent {
                author: devs[who].clone(),
                timestamp: at(t),
                body,
            });
        }
        threads.push(ThreadRecord {
            project: project.clone(),
            number,
            kind,
            created_at: at(created),
            author: devs[author].clone(),
            events,
            title: format!("thread {number}"),
            merge_commits: vec![],
        });
    }

    let mut times: Vec<i64> = (0..spec.commits).map(|_| r.random_range(0..secs)).collect();
    times.sort_unstable();
    let mut files: Vec<Vec<String>> = vec![Vec::new(); spec.files.max(1)];
    let mut commits = Vec::with_capacity(spec.commits);
    let mut line_id = 0u64;
    for (i, &t) in times.iter().enumerate() {
        let f = r.random_range(0..files.len());
        let path = format!("mod{}/file{f}.rs", f % 4);
        let content = &mut files[f];
        let hunk = if content.is_empty() || r.random::<f64>() < 0.4 {
            let pos = r.random_range(0..=content.len());
            let added: Vec<String> = (0..r.random_range(1..4))
                .map(|_| {
                    line_id += 1;
                    format!("line {line_id}")
                })
                .collect();
            content.splice(pos..pos, added.iter().cloned());
            Hunk {
                old_start: pos as u32 + 1,
                deleted: vec![],
                new_start: pos as u32 + 1,
                added,
            }
        } else {
            let pos = r.random_range(0..content.len());
            line_id += 1;
            let new = format!("line {line_id}");
            let old = std::mem::replace(&mut content[pos], new.clone());
            Hunk {
                old_start: pos as u32 + 1,
                deleted: vec![old],
                new_start: pos as u32 + 1,
                added: vec![new],
            }
        };
        let open_issues: Vec<u64> = threads
            .iter()
            .filter(|th| th.kind == ThreadKind::Issue && th.created_at < at(t))
            .map(|th| th.number)
            .collect();
        let message = if !hunk.deleted.is_empty() && !open_issues.is_empty() && r.random::<f64>() < 0.3 {
            format!("Fixes #{}", open_issues[r.random_range(0..open_issues.len())])
        } else {
            format!("change {i}")
        };
        let parents = if i == 0 { vec![] } else { vec![fake_sha(seed, i - 1)] };
        commits.push(CommitRecord {
            sha: fake_sha(seed, i),
            author_login: Some(devs[pick_dev(&mut r)].clone()),
            author_date: at(t) + Duration::milliseconds(i as i64),
            message,
            parents,
            file_changes: vec![FileChange {
                path,
                old_path: None,
                hunks: vec![hunk],
            }],
        });
    }

    let developers = devs
        .iter()
        .map(|d| DeveloperRecord {
            login: d.clone(),
            github_created_at: spec.start - Duration::days(r.random_range(0..2000)),
        })
        .collect();
    ProjectStore::from_records(project.clone(), threads, commits, developers, true, vec![]).expect("synthetic store is valid")
}

/// Feature rows whose response follows a hurdle process over the simplified
/// cross-project covariates. `zero_beta` is the intercept followed by one
/// coefficient per entry of [`SIMPLE_ZERO_COLUMNS`]; likewise `count_beta`
/// for [`SIMPLE_COUNT_COLUMNS`].
pub fn simulate_feature_rows(project: &str, zero_beta: &[f64], count_beta: &[f64], n: usize, seed: u64) -> Vec<FeatureRow> {
    assert_eq!(zero_beta.len(), SIMPLE_ZERO_COLUMNS.len() + 1);
    assert_eq!(count_beta.len(), SIMPLE_COUNT_COLUMNS.len() + 1);
    let mut r = rng(seed);
    (0..n)
        .map(|i| {
            let age: f64 = r.random_range(0.2..3.0);
            let mut row = FeatureRow {
                project: project.to_string(),
                developer: format!("dev{i:05}"),
                oss_rho: r.random(),
                oss_kappa: r.random(),
                iss_kappa: r.random(),
                log_social_outdegree: (sample_poisson(&mut r, 3.0) as f64).ln_1p(),
                log_buggy_commits: (sample_poisson(&mut r, 1.0) as f64).ln_1p(),
                daf: r.random(),
                top_committer_or_owner: 0,
                log_commits: (1.0 + sample_poisson(&mut r, 10.0) as f64).ln_1p(),
                log_responsiveness: (sample_poisson(&mut r, 1.0) as f64).ln_1p(),
                committer_only: 0,
                log_total_posts: (sample_poisson(&mut r, 5.0) as f64).ln_1p(),
                log_observed_mentions: (sample_poisson(&mut r, 2.0) as f64).ln_1p(),
                github_age_days: age,
                github_age_days_sq: age * age,
                future_mentions: 0,
                oss_rho_absent: 0,
                oss_kappa_absent: 0,
                iss_kappa_absent: 0,
                daf_absent: 0,
            };
            let lin = |b: &[f64], cols: &[&str]| b[0] + cols.iter().zip(&b[1..]).map(|(c, b)| row.value(c).expect("known column") * b).sum::<f64>();
            let gate = r.random::<f64>() < family::sigmoid(lin(zero_beta, &SIMPLE_ZERO_COLUMNS));
            let mu = lin(count_beta, &SIMPLE_COUNT_COLUMNS).exp();
            row.future_mentions = if gate { sample_trunc_poisson(&mut r, mu) } else { 0 };
            row
        })
        .collect()
}
