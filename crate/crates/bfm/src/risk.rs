//! Cause-specific failure probabilities `F_k = ∫ r_k(t)·sf(t) dt`.
//!
//! Four routes: adaptive quadrature (P1), the hazard ratio `r_k(x)/r(x)` at a
//! chosen time (P2), the integro-exponential series (P3) and Monte Carlo over
//! the latent-minimum construction.

use serde::{Deserialize, Serialize};

use crate::distribution::{bfm_quantile, bfm_sample, BfmParams, CauseLabel};
use crate::error::{domain, BfmError, Result};
use crate::specfun::{gen_integro_exponential, guarded_alternating_sum, integrate_positive, SeriesResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskMethod {
    P1Quadrature,
    P2Proportionality,
    P3Series,
    McOracle,
}

/// Per-cause series diagnostics for the P3 route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskSeriesDetail {
    pub cause1: SeriesResult,
    pub cause2: SeriesResult,
    /// False if any nested sum of the cause-2 series stopped without converging.
    pub cause2_inner_converged: bool,
}

/// Estimated probabilities that the eventual failure is of cause 1 or 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub f1: f64,
    pub f2: f64,
    pub method: RiskMethod,
    pub detail: Option<RiskSeriesDetail>,
    /// Binomial standard error (Monte Carlo only).
    pub std_error: Option<f64>,
}

impl RiskEstimate {
    pub fn sum(&self) -> f64 {
        self.f1 + self.f2
    }

    pub(crate) fn quadrature(f1: f64, f2: f64) -> Self {
        Self {
            f1,
            f2,
            method: RiskMethod::P1Quadrature,
            detail: None,
            std_error: None,
        }
    }
}

const RISK_TOL: f64 = 1e-12;

/// `(∫ h₁·S, ∫ h₂·S)` over `(0, ∞)` for any additive two-cause hazard, given
/// the component hazards, the log survival and a characteristic time scale.
pub fn component_risk_integrals<H1, H2, L>(h1: H1, h2: H2, log_sf: L, scale: f64) -> Result<(f64, f64)>
where
    H1: Fn(f64) -> f64,
    H2: Fn(f64) -> f64,
    L: Fn(f64) -> f64,
{
    let term = |h: &dyn Fn(f64) -> f64, x: f64| {
        let s = log_sf(x).exp();
        if s == 0.0 {
            return 0.0;
        }
        let v = h(x);
        if v.is_finite() {
            v * s
        } else {
            0.0
        }
    };
    let f1 = integrate_positive(|x| term(&h1, x), scale, RISK_TOL)?.value;
    let f2 = integrate_positive(|x| term(&h2, x), scale, RISK_TOL)?.value;
    Ok((f1, f2))
}

/// P1: adaptive quadrature of `r_k·sf` for each cause.
pub fn risk_p1(p: &BfmParams) -> Result<RiskEstimate> {
    let scale = bfm_quantile(0.5, p)?;
    let (f1, f2) = component_risk_integrals(
        |x| p.dhillon_frf_unchecked(x),
        |x| p.exppower_frf_unchecked(x),
        |x| p.log_sf_unchecked(x),
        scale,
    )?;
    Ok(RiskEstimate::quadrature(f1, f2))
}

/// P2: hazard ratios `r₁(x)/r(x)` and `1 - r₁(x)/r(x)` at time `x`.
pub fn risk_p2(x: f64, p: &BfmParams) -> Result<RiskEstimate> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!("proportionality risk needs x > 0, got {x}"));
    }
    let r1 = p.dhillon_frf_unchecked(x);
    let r2 = p.exppower_frf_unchecked(x);
    let f1 = if r2.is_infinite() { 0.0 } else { r1 / (r1 + r2) };
    Ok(RiskEstimate {
        f1,
        f2: 1.0 - f1,
        method: RiskMethod::P2Proportionality,
        detail: None,
        std_error: None,
    })
}

/// P3: integro-exponential series for both causes.
///
/// Cause 1: `(νθe/τ) Σ_ℓ (ℓ+1)(-ν)^ℓ ζ^{-θ(ℓ+1)} I(θ(ℓ+1)/τ - 1)`.
/// Cause 2: `e Σ_ℓ (-ν)^ℓ ζ^{-θℓ} Σ_s I(θℓ/τ + s)/s!`, where `I(j)` is the
/// integro-exponential function at lower limit 1. Divergent sums return their
/// optimal truncation with `converged = false`.
pub fn risk_p3(p: &BfmParams, tol: f64, max_terms: usize) -> Result<RiskEstimate> {
    if !(tol > 0.0) || max_terms == 0 {
        return Err(BfmError::Config(
            "series tolerance must be > 0 and max_terms ≥ 1".into(),
        ));
    }
    let (nu, theta, tau, zeta) = (p.nu(), p.theta(), p.tau(), p.zeta());
    let e = std::f64::consts::E;
    let mut failure: Option<BfmError> = None;

    let cause1 = guarded_alternating_sum(
        |l| {
            let k = (l + 1) as f64;
            match gen_integro_exponential(theta * k / tau - 1.0, 1.0) {
                Ok(i) => {
                    let log_mag = k.ln() + l as f64 * nu.ln() - theta * k * zeta.ln() + i.ln();
                    alt_sign(l) * log_mag.exp()
                }
                Err(err) => {
                    failure.get_or_insert(err);
                    f64::NAN
                }
            }
        },
        tol,
        max_terms,
    );
    if let Some(err) = failure.take() {
        if cause1.terms_used == 0 {
            return Err(err);
        }
    }
    let pre1 = nu * theta * e / tau;

    let mut inner_ok = true;
    let cause2 = guarded_alternating_sum(
        |l| {
            let m = theta * l as f64 / tau;
            let mut inner_failure = None;
            let inner = guarded_alternating_sum(
                |s| match gen_integro_exponential(m + s as f64, 1.0) {
                    Ok(i) => (i.ln() - libm::lgamma(s as f64 + 1.0)).exp(),
                    Err(err) => {
                        inner_failure.get_or_insert(err);
                        f64::NAN
                    }
                },
                tol,
                max_terms,
            );
            if inner_failure.is_some() || !inner.converged {
                inner_ok = false;
            }
            let log_mag = l as f64 * nu.ln() - theta * l as f64 * zeta.ln() + inner.value.ln();
            alt_sign(l) * log_mag.exp()
        },
        tol,
        max_terms,
    );

    let scale1 = |s: SeriesResult| SeriesResult {
        value: pre1 * s.value,
        last_term_magnitude: pre1 * s.last_term_magnitude,
        ..s
    };
    let scale2 = |s: SeriesResult| SeriesResult {
        value: e * s.value,
        last_term_magnitude: e * s.last_term_magnitude,
        ..s
    };
    let (c1, c2) = (scale1(cause1), scale2(cause2));
    Ok(RiskEstimate {
        f1: c1.value,
        f2: c2.value,
        method: RiskMethod::P3Series,
        detail: Some(RiskSeriesDetail {
            cause1: c1,
            cause2: SeriesResult {
                converged: c2.converged && inner_ok,
                ..c2
            },
            cause2_inner_converged: inner_ok,
        }),
        std_error: None,
    })
}

fn alt_sign(l: usize) -> f64 {
    if l.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Monte Carlo cause frequencies from `draws` latent-minimum samples.
pub fn risk_mc(p: &BfmParams, draws: usize, seed: u64) -> Result<RiskEstimate> {
    if draws < 10_000 {
        return Err(BfmError::Config(format!(
            "Monte Carlo risks need ≥ 10000 draws, got {draws}"
        )));
    }
    let samples = bfm_sample(p, draws, seed);
    let c1 = samples.iter().filter(|d| d.cause == CauseLabel::Cause1).count();
    let n = draws as f64;
    let f1 = c1 as f64 / n;
    Ok(RiskEstimate {
        f1,
        f2: (draws - c1) as f64 / n,
        method: RiskMethod::McOracle,
        detail: None,
        std_error: Some((f1 * (1.0 - f1) / n).sqrt()),
    })
}
