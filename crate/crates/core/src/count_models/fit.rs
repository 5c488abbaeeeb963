//! Newton–Raphson maximum likelihood for the GLM families.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::bh::bh_adjust;
use super::design::{standardize, unscale_map, ColumnScaling, DesignMatrix};
use super::family::{self, hessian, log_likelihood, loglik_obs, mean_of, score, score_theta, sigmoid, truncated_poisson_mean, Family};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Gradient-norm convergence threshold on the total log-likelihood.
    pub tol: f64,
    pub standardize: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 100,
            tol: 1e-8,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub z_value: f64,
    pub p_value: f64,
    pub p_adjusted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "FitResultRepr", from = "FitResultRepr")]
pub struct FitResult {
    pub family: Family,
    /// Coefficients on the original covariate scale.
    pub terms: Vec<Term>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_std_error: Option<f64>,
    pub log_likelihood: f64,
    pub aic: f64,
    /// Parameter count including the dispersion parameter.
    pub n_params: usize,
    pub n_obs: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Final gradient norm in the standardized parameterization.
    pub gradient_norm: f64,
    pub scaling: Vec<ColumnScaling>,
    /// Per-row log-likelihoods of the fitted rows; not serialized.
    pub obs_log_likelihood: Vec<f64>,
}

/// On-disk form: per-statistic maps keyed by column name, plus the column
/// order.
#[derive(Serialize, Deserialize)]
struct FitResultRepr {
    family: Family,
    columns: Vec<String>,
    coefficients: BTreeMap<String, f64>,
    std_errors: BTreeMap<String, f64>,
    z_values: BTreeMap<String, f64>,
    p_values: BTreeMap<String, f64>,
    p_adjusted: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta_std_error: Option<f64>,
    log_likelihood: f64,
    aic: f64,
    n_params: usize,
    n_obs: usize,
    converged: bool,
    iterations: usize,
    gradient_norm: f64,
    scaling: Vec<ColumnScaling>,
}

impl From<FitResult> for FitResultRepr {
    fn from(f: FitResult) -> Self {
        let map = |g: fn(&Term) -> f64| f.terms.iter().map(|t| (t.name.clone(), g(t))).collect();
        FitResultRepr {
            family: f.family,
            columns: f.names(),
            coefficients: map(|t| t.estimate),
            std_errors: map(|t| t.std_error),
            z_values: map(|t| t.z_value),
            p_values: map(|t| t.p_value),
            p_adjusted: map(|t| t.p_adjusted),
            theta: f.theta,
            theta_std_error: f.theta_std_error.filter(|v| v.is_finite()),
            log_likelihood: f.log_likelihood,
            aic: f.aic,
            n_params: f.n_params,
            n_obs: f.n_obs,
            converged: f.converged,
            iterations: f.iterations,
            gradient_norm: f.gradient_norm,
            scaling: f.scaling,
        }
    }
}

impl From<FitResultRepr> for FitResult {
    fn from(r: FitResultRepr) -> Self {
        let get = |m: &BTreeMap<String, f64>, c: &str| m.get(c).copied().unwrap_or(f64::NAN);
        let terms = r
            .columns
            .iter()
            .map(|c| Term {
                name: c.clone(),
                estimate: get(&r.coefficients, c),
                std_error: get(&r.std_errors, c),
                z_value: get(&r.z_values, c),
                p_value: get(&r.p_values, c),
                p_adjusted: get(&r.p_adjusted, c),
            })
            .collect();
        FitResult {
            family: r.family,
            terms,
            theta: r.theta,
            theta_std_error: r.theta_std_error,
            log_likelihood: r.log_likelihood,
            aic: r.aic,
            n_params: r.n_params,
            n_obs: r.n_obs,
            converged: r.converged,
            iterations: r.iterations,
            gradient_norm: r.gradient_norm,
            scaling: r.scaling,
            obs_log_likelihood: Vec::new(),
        }
    }
}

impl FitResult {
    pub fn names(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.name.clone()).collect()
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.estimate)
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.std_error)
    }

    pub fn beta(&self) -> DVector<f64> {
        DVector::from_iterator(self.terms.len(), self.terms.iter().map(|t| t.estimate))
    }

    /// Linear predictor for each row of a matrix whose columns follow `terms`.
    pub fn linear_predictor(&self, x: &DMatrix<f64>) -> DVector<f64> {
        x * self.beta()
    }

    /// Mean response per row: probability for logistic, `E[y]` for counts,
    /// `E[y | y > 0]` for truncated families.
    pub fn predict_mean(&self, x: &DMatrix<f64>) -> Vec<f64> {
        self.linear_predictor(x).iter().map(|&e| self.mean_from_eta(e)).collect()
    }

    pub fn mean_from_eta(&self, eta: f64) -> f64 {
        match self.family {
            Family::Logistic => sigmoid(eta),
            Family::Poisson | Family::NegBin => mean_of(eta),
            Family::TruncPoisson => truncated_poisson_mean(mean_of(eta)),
            Family::TruncNegBin => {
                let mu = mean_of(eta);
                let theta = self.theta.unwrap_or(1.0);
                let p0 = (theta * (theta / (theta + mu)).ln()).exp();
                mu / (1.0 - p0)
            }
        }
    }

    pub fn recompute_aic(&self) -> f64 {
        aic(self.n_params, self.log_likelihood)
    }

    /// Overwrites adjusted p-values, e.g. after a joint correction.
    pub(crate) fn set_adjusted(&mut self, adjusted: &[f64]) {
        for (t, &a) in self.terms.iter_mut().zip(adjusted) {
            t.p_adjusted = a;
        }
    }
}

pub fn aic(k: usize, ll: f64) -> f64 {
    2.0 * k as f64 - 2.0 * ll
}

/// Two-sided normal p-value for a Wald statistic.
pub fn wald_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

pub fn fit_glm(d: &DesignMatrix, family: Family) -> Result<FitResult> {
    fit_glm_with(d, family, &FitOptions::default())
}

pub fn fit_glm_with(d: &DesignMatrix, family: Family, opts: &FitOptions) -> Result<FitResult> {
    d.check()?;
    check_response(d, family)?;
    let (xs, scaling) = if opts.standardize {
        standardize(d)
    } else {
        (d.x.clone(), d.names[1..].iter().map(|n| ColumnScaling { name: n.clone(), center: 0.0, scale: 1.0 }).collect())
    };
    check_rank(&xs)?;
    if family == Family::Logistic {
        check_separation(d)?;
    }

    let outcome = if family.has_dispersion() {
        fit_dispersion(&xs, &d.y, family, opts)?
    } else {
        let start = initial_beta(&xs, &d.y, family);
        newton(&xs, &d.y, family, start, 0.0, opts, &d.names)?
    };

    let info = -hessian(family, &xs, &d.y, &outcome.beta, outcome.theta);
    let cov_scaled = info.clone().cholesky().ok_or(Error::RankDeficient)?.inverse();
    let t = unscale_map(&scaling);
    let beta = &t * &outcome.beta;
    let cov = &t * cov_scaled * t.transpose();

    let mut terms = Vec::with_capacity(d.ncols());
    for (j, name) in d.names.iter().enumerate() {
        let var = cov[(j, j)];
        if !(var.is_finite() && var > 0.0) {
            return Err(Error::RankDeficient);
        }
        let se = var.sqrt();
        let z = beta[j] / se;
        terms.push(Term {
            name: name.clone(),
            estimate: beta[j],
            std_error: se,
            z_value: z,
            p_value: wald_p(z),
            p_adjusted: f64::NAN,
        });
    }
    let adjusted = bh_adjust(&terms.iter().map(|t| t.p_value).collect::<Vec<_>>());
    for (t, a) in terms.iter_mut().zip(adjusted) {
        t.p_adjusted = a;
    }

    let theta = family.has_dispersion().then_some(outcome.theta);
    let obs = family::obs_log_likelihoods(family, &d.x, &d.y, &beta, outcome.theta);
    let ll: f64 = obs.iter().sum();
    let k = d.ncols() + usize::from(family.has_dispersion());
    Ok(FitResult {
        family,
        terms,
        theta,
        theta_std_error: theta.and(Some(outcome.theta_se)).filter(|v| v.is_finite()),
        log_likelihood: ll,
        aic: aic(k, ll),
        n_params: k,
        n_obs: d.nrows(),
        converged: outcome.converged,
        iterations: outcome.iterations,
        gradient_norm: outcome.gradient_norm,
        scaling,
        obs_log_likelihood: obs,
    })
}

fn check_response(d: &DesignMatrix, family: Family) -> Result<()> {
    match family {
        Family::Logistic => {
            if d.y.iter().any(|&y| y > 1) {
                return Err(Error::InvalidDesign("logistic response must be 0/1".into()));
            }
            let pos = d.y.iter().filter(|&&y| y == 1).count();
            if pos == 0 || pos == d.y.len() {
                return Err(Error::DegenerateResponse("binary response has a single class".into()));
            }
        }
        Family::TruncPoisson | Family::TruncNegBin => {
            if d.y.contains(&0) {
                return Err(Error::InvalidDesign("truncated family requires y >= 1".into()));
            }
        }
        Family::Poisson | Family::NegBin => {
            if d.y.iter().all(|&y| y == 0) {
                return Err(Error::DegenerateResponse("all responses are zero".into()));
            }
        }
    }
    Ok(())
}

fn check_rank(xs: &DMatrix<f64>) -> Result<()> {
    let gram = xs.transpose() * xs;
    let eig = gram.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if max.is_nan() || max <= 0.0 || min <= max * 1e-12 {
        return Err(Error::RankDeficient);
    }
    Ok(())
}

/// Complete separation by a single covariate.
fn check_separation(d: &DesignMatrix) -> Result<()> {
    for j in 1..d.ncols() {
        let col = d.x.column(j);
        let (mut lo0, mut hi0, mut lo1, mut hi1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (v, &y) in col.iter().zip(&d.y) {
            if y == 0 {
                lo0 = lo0.min(*v);
                hi0 = hi0.max(*v);
            } else {
                lo1 = lo1.min(*v);
                hi1 = hi1.max(*v);
            }
        }
        if hi0 < lo1 || hi1 < lo0 {
            return Err(Error::PerfectSeparation {
                column: d.names[j].clone(),
            });
        }
    }
    Ok(())
}

fn initial_beta(xs: &DMatrix<f64>, y: &[u64], family: Family) -> DVector<f64> {
    let mut b = DVector::zeros(xs.ncols());
    let n = y.len() as f64;
    let ybar = y.iter().sum::<u64>() as f64 / n;
    b[0] = match family {
        Family::Logistic => (ybar / (1.0 - ybar)).ln(),
        Family::Poisson | Family::NegBin => ybar.max(1e-3).ln(),
        Family::TruncPoisson | Family::TruncNegBin => (ybar - 1.0).max(0.05).ln(),
    };
    b
}

struct Outcome {
    beta: DVector<f64>,
    theta: f64,
    theta_se: f64,
    converged: bool,
    iterations: usize,
    gradient_norm: f64,
}

/// Divergence of a standardized coefficient beyond this signals separation.
const SEPARATION_BOUND: f64 = 40.0;

fn newton(
    xs: &DMatrix<f64>,
    y: &[u64],
    family: Family,
    mut beta: DVector<f64>,
    theta: f64,
    opts: &FitOptions,
    names: &[String],
) -> Result<Outcome> {
    let mut ll = log_likelihood(family, xs, y, &beta, theta);
    let mut grad = score(family, xs, y, &beta, theta);
    let mut iterations = 0;
    let mut converged = grad.norm() < opts.tol;
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let step = newton_step(family, xs, y, &beta, theta, &grad)?;
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-12 {
            let cand = &beta + &step * t;
            let cand_ll = log_likelihood(family, xs, y, &cand, theta);
            if cand_ll.is_finite() && cand_ll >= ll - 1e-12 * ll.abs().max(1.0) {
                beta = cand;
                ll = cand_ll;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        grad = score(family, xs, y, &beta, theta);
        converged = grad.norm() < opts.tol;
        if family == Family::Logistic {
            if let Some((j, v)) = beta.iter().enumerate().skip(1).max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())) {
                if v.abs() > SEPARATION_BOUND {
                    return Err(Error::PerfectSeparation { column: names[j].clone() });
                }
            }
        }
        if !improved {
            break;
        }
    }
    Ok(Outcome {
        gradient_norm: grad.norm(),
        beta,
        theta,
        theta_se: f64::NAN,
        converged,
        iterations,
    })
}

/// Solves `(-H) step = grad`, damping the diagonal when `-H` is not
/// positive definite.
fn newton_step(family: Family, xs: &DMatrix<f64>, y: &[u64], beta: &DVector<f64>, theta: f64, grad: &DVector<f64>) -> Result<DVector<f64>> {
    let info = -hessian(family, xs, y, beta, theta);
    if let Some(ch) = info.clone().cholesky() {
        return Ok(ch.solve(grad));
    }
    let scale = info.diagonal().iter().map(|v| v.abs()).fold(1e-8, f64::max);
    let mut lambda = 1e-6 * scale;
    for _ in 0..40 {
        let mut damped = info.clone();
        for i in 0..damped.nrows() {
            damped[(i, i)] += lambda;
        }
        if let Some(ch) = damped.cholesky() {
            return Ok(ch.solve(grad));
        }
        lambda *= 10.0;
    }
    Err(Error::RankDeficient)
}

const LN_THETA_MIN: f64 = -9.21; // 1e-4
const LN_THETA_MAX: f64 = 18.42; // 1e8

/// Alternates a line search over `ln theta` with Newton steps in `beta`.
fn fit_dispersion(xs: &DMatrix<f64>, y: &[u64], family: Family, opts: &FitOptions) -> Result<Outcome> {
    let base = if family == Family::TruncNegBin { Family::TruncPoisson } else { Family::Poisson };
    let start = initial_beta(xs, y, base);
    let pois = newton(xs, y, base, start, 0.0, opts, &[])?;
    let mut beta = pois.beta;

    let mu: Vec<f64> = (xs * &beta).iter().map(|&e| mean_of(e)).collect();
    let num: f64 = mu.iter().map(|m| m * m).sum();
    let den: f64 = mu.iter().zip(y).map(|(m, &yi)| (yi as f64 - m).powi(2) - m).sum();
    let mut ln_theta = if den > 0.0 { (num / den).ln() } else { 5.0 }.clamp(LN_THETA_MIN, LN_THETA_MAX);

    let mut iterations = pois.iterations;
    let mut converged = false;
    let mut grad_norm = f64::INFINITY;
    for _ in 0..opts.max_iter {
        ln_theta = maximize_ln_theta(xs, y, family, &beta, ln_theta);
        let inner = newton(xs, y, family, beta, ln_theta.exp(), opts, &[])?;
        iterations += inner.iterations;
        beta = inner.beta;
        let mut g_theta = ln_theta_score(xs, y, family, &beta, ln_theta);
        // projected gradient: an optimum on a bound may still point outward
        if (ln_theta >= LN_THETA_MAX - 1e-6 && g_theta > 0.0) || (ln_theta <= LN_THETA_MIN + 1e-6 && g_theta < 0.0) {
            g_theta = 0.0;
        }
        grad_norm = (inner.gradient_norm.powi(2) + g_theta.powi(2)).sqrt();
        if inner.converged && grad_norm < opts.tol {
            converged = true;
            break;
        }
    }
    let theta = ln_theta.exp();
    // curvature of the profile in ln theta, from the analytic derivative
    let curv = ln_theta_curvature(xs, y, family, &beta, ln_theta);
    let theta_se = if curv < 0.0 { theta / (-curv).sqrt() } else { f64::NAN };
    Ok(Outcome {
        beta,
        theta,
        theta_se,
        converged,
        iterations,
        gradient_norm: grad_norm,
    })
}

/// Golden-section search for the best `ln theta` with `beta` fixed.
fn maximize_ln_theta(xs: &DMatrix<f64>, y: &[u64], family: Family, beta: &DVector<f64>, guess: f64) -> f64 {
    let eta = xs * beta;
    let f = |s: f64| -> f64 {
        let theta = s.exp();
        eta.iter().zip(y).map(|(&e, &yi)| loglik_obs(family, yi as f64, e, theta)).sum()
    };
    // bracket around the guess, widened until the ends are worse
    let mut lo = (guess - 2.0).max(LN_THETA_MIN);
    let mut hi = (guess + 2.0).min(LN_THETA_MAX);
    let fg = f(guess);
    while lo > LN_THETA_MIN && f(lo) > fg {
        lo = (lo - 4.0).max(LN_THETA_MIN);
    }
    while hi < LN_THETA_MAX && f(hi) > fg {
        hi = (hi + 4.0).min(LN_THETA_MAX);
    }
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > 1e-11 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    // the likelihood is flat near the optimum, so finish on its derivative
    let mut s = (a + b) / 2.0;
    for _ in 0..50 {
        let g = ln_theta_score(xs, y, family, beta, s);
        let c = ln_theta_curvature(xs, y, family, beta, s);
        if c.is_nan() || c >= 0.0 {
            break;
        }
        let next = (s - g / c).clamp(s - 0.5, s + 0.5).clamp(LN_THETA_MIN, LN_THETA_MAX);
        if next == s || g.abs() < 1e-12 {
            break;
        }
        s = next;
    }
    s
}

fn ln_theta_score(xs: &DMatrix<f64>, y: &[u64], family: Family, beta: &DVector<f64>, s: f64) -> f64 {
    score_theta(family, xs, y, beta, s.exp()) * s.exp()
}

fn ln_theta_curvature(xs: &DMatrix<f64>, y: &[u64], family: Family, beta: &DVector<f64>, s: f64) -> f64 {
    let h = 1e-5;
    (ln_theta_score(xs, y, family, beta, s + h) - ln_theta_score(xs, y, family, beta, s - h)) / (2.0 * h)
}
