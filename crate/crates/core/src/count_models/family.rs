//! Per-observation log-likelihoods and their derivatives in the linear
//! predictor `eta` (and dispersion `theta` for the negative binomials).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

pub const MU_MIN: f64 = 1e-10;
pub const MU_MAX: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Logistic,
    Poisson,
    TruncPoisson,
    /// NB2 with variance `mu + mu^2 / theta`.
    NegBin,
    TruncNegBin,
}

impl Family {
    pub fn has_dispersion(self) -> bool {
        matches!(self, Family::NegBin | Family::TruncNegBin)
    }

    pub fn is_truncated(self) -> bool {
        matches!(self, Family::TruncPoisson | Family::TruncNegBin)
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Logistic => "logistic",
            Family::Poisson => "poisson",
            Family::TruncPoisson => "trunc_poisson",
            Family::NegBin => "negbin",
            Family::TruncNegBin => "trunc_negbin",
        }
    }
}

/// `lambda = exp(eta)` clamped away from 0 and overflow.
pub fn mean_of(eta: f64) -> f64 {
    eta.exp().clamp(MU_MIN, MU_MAX)
}

fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln Γ(y + θ) − ln Γ(θ)`, summed directly for small integer `y` to avoid
/// cancellation when `θ` is large.
fn ln_gamma_ratio(y: f64, theta: f64) -> f64 {
    if y < 64.0 {
        (0..y as u64).map(|k| (theta + k as f64).ln()).sum()
    } else {
        ln_gamma(y + theta) - ln_gamma(theta)
    }
}

/// `ψ(y + θ) − ψ(θ)`, likewise.
fn digamma_ratio(y: f64, theta: f64) -> f64 {
    if y < 64.0 {
        (0..y as u64).map(|k| 1.0 / (theta + k as f64)).sum()
    } else {
        digamma(y + theta) - digamma(theta)
    }
}

fn ln_factorial(y: f64) -> f64 {
    ln_gamma(y + 1.0)
}

/// `ln(1 - e^{-mu})`.
fn ln_one_minus_exp_neg(mu: f64) -> f64 {
    (-(-mu).exp_m1()).ln()
}

/// `E[Y | Y > 0]` for a Poisson with mean `mu`: `mu / (1 - e^{-mu})`.
pub fn truncated_poisson_mean(mu: f64) -> f64 {
    if mu < 1e-4 {
        1.0 + mu / 2.0 + mu * mu / 12.0
    } else {
        mu / -(-mu).exp_m1()
    }
}

fn truncated_poisson_mean_deriv(mu: f64) -> f64 {
    if mu < 1e-3 {
        0.5 + mu / 6.0 - mu.powi(3) / 180.0
    } else {
        let q = -(-mu).exp_m1();
        (q - mu * (-mu).exp()) / (q * q)
    }
}

struct NbParts {
    r: f64,
    ln_one_minus_r: f64,
    ln_r: f64,
}

fn nb_parts(mu: f64, theta: f64) -> NbParts {
    // ln1p keeps theta * ln(theta / (theta + mu)) accurate when theta >> mu
    let (ln_one_minus_r, ln_r) = if mu <= theta {
        let l = (mu / theta).ln_1p();
        (-l, mu.ln() - theta.ln() - l)
    } else {
        let l = (theta / mu).ln_1p();
        (theta.ln() - mu.ln() - l, -l)
    };
    NbParts {
        r: mu / (theta + mu),
        ln_one_minus_r,
        ln_r,
    }
}

/// Zero-truncation term for NB2: `(ln p0, p0 / (1 - p0), ln(1 - p0))`.
fn nb_zero(theta: f64, parts: &NbParts) -> (f64, f64, f64) {
    let ln_p0 = theta * parts.ln_one_minus_r;
    let one_minus_p0 = -ln_p0.exp_m1();
    let odds = ln_p0.exp() / one_minus_p0;
    (ln_p0, odds, one_minus_p0.ln())
}

/// Log-likelihood of one observation.
pub fn loglik_obs(family: Family, y: f64, eta: f64, theta: f64) -> f64 {
    match family {
        Family::Logistic => y * eta - softplus(eta),
        Family::Poisson => {
            let mu = mean_of(eta);
            y * mu.ln() - mu - ln_factorial(y)
        }
        Family::TruncPoisson => {
            let mu = mean_of(eta);
            y * mu.ln() - mu - ln_factorial(y) - ln_one_minus_exp_neg(mu)
        }
        Family::NegBin | Family::TruncNegBin => {
            let mu = mean_of(eta);
            let p = nb_parts(mu, theta);
            let base = ln_gamma_ratio(y, theta) - ln_factorial(y) + theta * p.ln_one_minus_r + y * p.ln_r;
            if family == Family::TruncNegBin {
                base - nb_zero(theta, &p).2
            } else {
                base
            }
        }
    }
}

/// `(d/deta, d2/deta2)` of the observation log-likelihood.
pub fn eta_derivs(family: Family, y: f64, eta: f64, theta: f64) -> (f64, f64) {
    match family {
        Family::Logistic => {
            let p = sigmoid(eta);
            (y - p, -p * (1.0 - p))
        }
        Family::Poisson => {
            let mu = mean_of(eta);
            (y - mu, -mu)
        }
        Family::TruncPoisson => {
            let mu = mean_of(eta);
            (y - truncated_poisson_mean(mu), -mu * truncated_poisson_mean_deriv(mu))
        }
        Family::NegBin | Family::TruncNegBin => {
            let mu = mean_of(eta);
            let d1 = theta * (y - mu) / (theta + mu);
            let d2 = -theta * mu * (theta + y) / ((theta + mu) * (theta + mu));
            if family == Family::NegBin {
                return (d1, d2);
            }
            let p = nb_parts(mu, theta);
            let (_, o, _) = nb_zero(theta, &p);
            let r = p.r;
            let t1 = o * theta * r;
            let t2 = theta * (-o * (1.0 + o) * theta * r * r + o * r * (1.0 - r));
            (d1 - t1, d2 - t2)
        }
    }
}

/// `d/dtheta` of the observation log-likelihood (negative binomials only).
pub fn theta_deriv(family: Family, y: f64, eta: f64, theta: f64) -> f64 {
    match family {
        Family::NegBin | Family::TruncNegBin => {
            let mu = mean_of(eta);
            let p = nb_parts(mu, theta);
            let base = digamma_ratio(y, theta) + p.ln_one_minus_r + 1.0 - (theta + y) / (theta + mu);
            if family == Family::TruncNegBin {
                let (_, o, _) = nb_zero(theta, &p);
                base + o * (p.ln_one_minus_r + p.r)
            } else {
                base
            }
        }
        _ => 0.0,
    }
}

/// Total log-likelihood at coefficients `beta` (`theta` ignored unless the
/// family has a dispersion parameter).
pub fn log_likelihood(family: Family, x: &DMatrix<f64>, y: &[u64], beta: &DVector<f64>, theta: f64) -> f64 {
    let eta = x * beta;
    eta.iter().zip(y).map(|(&e, &yi)| loglik_obs(family, yi as f64, e, theta)).sum()
}

/// Per-observation log-likelihoods.
pub fn obs_log_likelihoods(family: Family, x: &DMatrix<f64>, y: &[u64], beta: &DVector<f64>, theta: f64) -> Vec<f64> {
    let eta = x * beta;
    eta.iter().zip(y).map(|(&e, &yi)| loglik_obs(family, yi as f64, e, theta)).collect()
}

/// Gradient of the total log-likelihood in `beta`.
pub fn score(family: Family, x: &DMatrix<f64>, y: &[u64], beta: &DVector<f64>, theta: f64) -> DVector<f64> {
    let eta = x * beta;
    let d1 = DVector::from_iterator(
        y.len(),
        eta.iter().zip(y).map(|(&e, &yi)| eta_derivs(family, yi as f64, e, theta).0),
    );
    x.transpose() * d1
}

/// Derivative of the total log-likelihood in `theta`.
pub fn score_theta(family: Family, x: &DMatrix<f64>, y: &[u64], beta: &DVector<f64>, theta: f64) -> f64 {
    let eta = x * beta;
    eta.iter().zip(y).map(|(&e, &yi)| theta_deriv(family, yi as f64, e, theta)).sum()
}

/// Observed Hessian of the total log-likelihood in `beta`.
pub fn hessian(family: Family, x: &DMatrix<f64>, y: &[u64], beta: &DVector<f64>, theta: f64) -> DMatrix<f64> {
    let eta = x * beta;
    let p = x.ncols();
    let mut h = DMatrix::zeros(p, p);
    for (i, (&e, &yi)) in eta.iter().zip(y).enumerate() {
        let w = eta_derivs(family, yi as f64, e, theta).1;
        let row = x.row(i);
        for a in 0..p {
            let ra = row[a] * w;
            for b in a..p {
                h[(a, b)] += ra * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            h[(a, b)] = h[(b, a)];
        }
    }
    h
}
