//! Matérn covariance kernels with unit variance.
//!
//! Closed forms cover ν ∈ {1/2, 3/2, 5/2}; every other smoothness goes through
//! the modified Bessel function of the second kind, evaluated with Temme's
//! series for small arguments and Steed's continued fraction beyond, followed
//! by the stable upward recurrence in the order.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CovarianceError {
    #[error("invalid covariance parameter: {0}")]
    InvalidModel(String),
    #[error("distance must be finite and nonnegative, got {0}")]
    InvalidDistance(f64),
    #[error("Bessel evaluation did not converge for nu={nu}, x={x}")]
    BesselNonConvergent { nu: f64, x: f64 },
}

/// Stationary covariance families with integrable covariance functions.
/// Only Matérn ships; it spans the smoothness scale the priors need.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceFamily {
    Matern,
}

/// Isotropic covariance specification. Variance is structurally fixed at one:
/// the covariate model standardizes every channel.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    pub family: CovarianceFamily,
    pub nu: f64,
    pub lengthscale: f64,
}

impl CovarianceModel {
    pub fn matern(nu: f64, lengthscale: f64) -> Result<Self, CovarianceError> {
        if nu <= 0.0 || !nu.is_finite() {
            return Err(CovarianceError::InvalidModel(format!(
                "nu must be positive, got {nu}"
            )));
        }
        if lengthscale <= 0.0 || !lengthscale.is_finite() {
            return Err(CovarianceError::InvalidModel(format!(
                "lengthscale must be positive, got {lengthscale}"
            )));
        }
        Ok(CovarianceModel {
            family: CovarianceFamily::Matern,
            nu,
            lengthscale,
        })
    }

    pub fn variance(&self) -> f64 {
        1.0
    }
}

/// k(r) for the model; k(0) = 1, nonincreasing, k(r) -> 0 as r -> infinity.
pub fn matern_cov(r: f64, model: &CovarianceModel) -> Result<f64, CovarianceError> {
    if !r.is_finite() || r < 0.0 {
        return Err(CovarianceError::InvalidDistance(r));
    }
    if r == 0.0 {
        return Ok(1.0);
    }
    let s = r / model.lengthscale;
    let nu = model.nu;
    if (nu - 0.5).abs() < 1e-12 {
        Ok((-s).exp())
    } else if (nu - 1.5).abs() < 1e-12 {
        let t = 3.0f64.sqrt() * s;
        Ok((1.0 + t) * (-t).exp())
    } else if (nu - 2.5).abs() < 1e-12 {
        let t = 5.0f64.sqrt() * s;
        Ok((1.0 + t + t * t / 3.0) * (-t).exp())
    } else {
        matern_general(s, nu)
    }
}

/// General-ν kernel at scaled distance s = r/ℓ.
fn matern_general(s: f64, nu: f64) -> Result<f64, CovarianceError> {
    let a = (2.0 * nu).sqrt() * s;
    // Deep in the a -> 0 limit the kernel is 1 to beyond f64 precision for
    // nu >= 1 and the direct product can overflow; short-circuit there.
    if nu >= 1.0 && a < 1e-7 {
        return Ok(1.0);
    }
    let k = bessel_k(nu, a)?;
    let value = (2.0f64).powf(1.0 - nu) / libm::tgamma(nu) * a.powf(nu) * k;
    if value.is_nan() {
        return Err(CovarianceError::BesselNonConvergent { nu, x: a });
    }
    // Clamp tiny negative round-off at extreme tails.
    Ok(value.clamp(0.0, 1.0))
}

const BESSEL_EPS: f64 = 1e-16;
const BESSEL_MAXIT: usize = 10_000;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Modified Bessel function of the second kind K_ν(x) for ν ≥ 0, x > 0.
pub fn bessel_k(nu: f64, x: f64) -> Result<f64, CovarianceError> {
    if x <= 0.0 || !x.is_finite() || nu < 0.0 || nu.is_nan() {
        return Err(CovarianceError::InvalidModel(format!(
            "bessel_k requires x > 0 and nu >= 0, got nu={nu}, x={x}"
        )));
    }
    let nl = (nu + 0.5).floor() as usize;
    let mu = nu - nl as f64; // mu in [-0.5, 0.5)
    let (mut k_mu, mut k_mu1) = if x <= 2.0 {
        temme_series(mu, x)?
    } else {
        steed_cf2(mu, x)?
    };
    // Upward recurrence K_{m+1} = K_{m-1} + (2m/x) K_m, stable for K.
    let two_over_x = 2.0 / x;
    for i in 1..=nl {
        let next = (mu + i as f64) * two_over_x * k_mu1 + k_mu;
        k_mu = k_mu1;
        k_mu1 = next;
    }
    Ok(k_mu)
}

/// Temme's series: (K_mu, K_{mu+1}) for |mu| <= 1/2, 0 < x <= 2.
fn temme_series(mu: f64, x: f64) -> Result<(f64, f64), CovarianceError> {
    let half_x = 0.5 * x;
    let pi_mu = std::f64::consts::PI * mu;
    let fact = if pi_mu.abs() < BESSEL_EPS {
        1.0
    } else {
        pi_mu / pi_mu.sin()
    };
    let log_term = -half_x.ln();
    let e = mu * log_term;
    let fact2 = if e.abs() < BESSEL_EPS {
        1.0
    } else {
        e.sinh() / e
    };
    let (gam1, gam2, gam_plus, gam_minus) = reciprocal_gamma_pair(mu);
    let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * log_term);
    let mut sum = ff;
    let e = e.exp();
    let mut p = 0.5 * e / gam_plus;
    let mut q = 0.5 / (e * gam_minus);
    let mut c = 1.0;
    let d = half_x * half_x;
    let mut sum1 = p;
    let mu2 = mu * mu;
    for i in 1..=BESSEL_MAXIT {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi - mu2);
        c *= d / fi;
        p /= fi - mu;
        q /= fi + mu;
        let del = c * ff;
        sum += del;
        let del1 = c * (p - fi * ff);
        sum1 += del1;
        if del.abs() < sum.abs() * BESSEL_EPS {
            return Ok((sum, sum1 * 2.0 / x));
        }
    }
    Err(CovarianceError::BesselNonConvergent { nu: mu, x })
}

/// Steed's continued fraction CF2: (K_mu, K_{mu+1}) for |mu| <= 1/2, x > 2.
fn steed_cf2(mu: f64, x: f64) -> Result<(f64, f64), CovarianceError> {
    let mu2 = mu * mu;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - mu2;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    let mut converged = false;
    for i in 2..=BESSEL_MAXIT {
        a -= 2.0 * (i as f64 - 1.0);
        c = -a * c / i as f64;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < BESSEL_EPS {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(CovarianceError::BesselNonConvergent { nu: mu, x });
    }
    h *= a1;
    let k_mu = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k_mu1 = k_mu * (mu + x + 0.5 - h) / x;
    Ok((k_mu, k_mu1))
}

/// (Γ₁, Γ₂, 1/Γ(1+μ), 1/Γ(1−μ)) with Γ₁ = [1/Γ(1−μ) − 1/Γ(1+μ)]/(2μ).
fn reciprocal_gamma_pair(mu: f64) -> (f64, f64, f64, f64) {
    let gam_plus = 1.0 / libm::tgamma(1.0 + mu);
    let gam_minus = 1.0 / libm::tgamma(1.0 - mu);
    let gam1 = if mu.abs() < 1e-6 {
        -EULER_GAMMA
    } else {
        (gam_minus - gam_plus) / (2.0 * mu)
    };
    let gam2 = (gam_minus + gam_plus) / 2.0;
    (gam1, gam2, gam_plus, gam_minus)
}
