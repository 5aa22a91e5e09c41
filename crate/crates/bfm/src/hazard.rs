//! The `HazardModel` abstraction shared by the BFM and its competitors, and
//! the BFM instance with its analytic likelihood gradient.

use crate::data::Dataset;
use crate::distribution::BfmParams;
use crate::specfun::{find_root, integrate_positive};

/// A positive-parameter lifetime model given by its hazard and cumulative
/// hazard. `chf(0) = 0` and `chf` nondecreasing are required of implementors.
pub trait HazardModel: Send + Sync {
    fn name(&self) -> &str;

    fn param_names(&self) -> &'static [&'static str];

    fn param_count(&self) -> usize {
        self.param_names().len()
    }

    fn frf(&self, x: f64, p: &[f64]) -> f64;

    fn chf(&self, x: f64, p: &[f64]) -> f64;

    fn log_frf(&self, x: f64, p: &[f64]) -> f64 {
        self.frf(x, p).ln()
    }

    fn cdf(&self, x: f64, p: &[f64]) -> f64 {
        -(-self.chf(x, p)).exp_m1()
    }

    /// Analytic gradient of the negative log-likelihood, when available.
    fn nll_gradient(&self, _p: &[f64], _data: &Dataset) -> Option<Vec<f64>> {
        None
    }

    /// Maps a dimensionless start vector to the data's timescale `t`.
    fn scale_start(&self, raw: &[f64], _t: f64) -> Vec<f64> {
        raw.to_vec()
    }

    /// Extra starting points tailored to the model.
    fn anchor_starts(&self, _data: &Dataset) -> Vec<Vec<f64>> {
        Vec::new()
    }

    /// Upper limits of the region searched by the likelihood fit.
    fn search_upper_bounds(&self) -> Option<Vec<f64>> {
        None
    }

    /// Hazards of the two additive components, for models of that form.
    fn component_frfs(&self, _x: f64, _p: &[f64]) -> Option<(f64, f64)> {
        None
    }
}

/// Negative log-likelihood of right-censored data: failures of any cause
/// contribute `−ln r(x)`, every observation contributes `H(x)`. Returns +∞
/// for invalid parameters or numerical overflow.
pub fn nll(model: &dyn HazardModel, p: &[f64], data: &Dataset) -> f64 {
    if p.len() != model.param_count() || p.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return f64::INFINITY;
    }
    let mut total = 0.0;
    for o in &data.observations {
        total += model.chf(o.time, p);
        if o.status.is_failure() {
            total -= model.log_frf(o.time, p);
        }
    }
    if total.is_nan() {
        f64::INFINITY
    } else {
        total
    }
}

/// Quantile by inverting the cumulative hazard in log-time.
pub fn model_quantile(model: &dyn HazardModel, u: f64, p: &[f64]) -> Option<f64> {
    if !(u > 0.0 && u < 1.0) {
        return None;
    }
    let target = -(-u).ln_1p();
    let g = |s: f64| model.chf(s.exp(), p) - target;
    let (mut lo, mut hi) = (-1.0, 1.0);
    let mut steps = 0;
    while !(g(lo) < 0.0) {
        lo -= 2.0;
        steps += 1;
        if steps > 400 {
            return None;
        }
    }
    while !(g(hi) >= 0.0) {
        hi += 2.0;
        steps += 1;
        if steps > 400 {
            return None;
        }
    }
    find_root(g, lo, hi, 1e-13, 300).ok().map(f64::exp)
}

/// Mean residual life `∫₀^∞ exp(H(x) − H(x+t)) dt` of any hazard model.
pub fn model_mrl(model: &dyn HazardModel, x: f64, p: &[f64]) -> crate::Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return crate::error::domain(format!("time must be finite and ≥ 0, got {x}"));
    }
    let h0 = model.chf(x, p);
    let scale = model_quantile(model, 0.5, p)
        .unwrap_or(1.0)
        .max(x * 1e-3)
        .max(f64::MIN_POSITIVE);
    let r = integrate_positive(|t| (h0 - model.chf(x + t, p)).exp(), scale, 1e-10)?;
    Ok(r.value)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BfmModel;

impl HazardModel for BfmModel {
    fn name(&self) -> &str {
        "BFM"
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["nu", "theta", "tau", "zeta"]
    }

    fn frf(&self, x: f64, p: &[f64]) -> f64 {
        unchecked(p).frf_unchecked(x)
    }

    fn chf(&self, x: f64, p: &[f64]) -> f64 {
        unchecked(p).chf_unchecked(x)
    }

    fn log_frf(&self, x: f64, p: &[f64]) -> f64 {
        unchecked(p).log_frf_unchecked(x)
    }

    fn nll_gradient(&self, p: &[f64], data: &Dataset) -> Option<Vec<f64>> {
        let g = bfm_nll_grad_slice(p, data);
        g.iter().all(|v| v.is_finite()).then(|| g.to_vec())
    }

    fn scale_start(&self, raw: &[f64], t: f64) -> Vec<f64> {
        vec![raw[0] * t.powf(-raw[1]), raw[1], raw[2], raw[3] / t]
    }

    fn anchor_starts(&self, data: &Dataset) -> Vec<Vec<f64>> {
        let t = data.max_time();
        let mut out = Vec::new();
        for &(theta, tau) in &[(0.7, 3.0), (3.0, 0.5), (1.0, 1.0), (5.0, 0.5), (0.6, 4.0)] {
            for &zt in &[0.5, 1.0] {
                out.push(vec![0.1 * t.powf(-theta), theta, tau, zt / t]);
            }
        }
        out
    }

    fn search_upper_bounds(&self) -> Option<Vec<f64>> {
        Some(vec![
            f64::INFINITY,
            crate::models::SHAPE_MAX,
            crate::models::SHAPE_MAX,
            f64::INFINITY,
        ])
    }

    fn component_frfs(&self, x: f64, p: &[f64]) -> Option<(f64, f64)> {
        let b = unchecked(p);
        Some((b.dhillon_frf_unchecked(x), b.exppower_frf_unchecked(x)))
    }
}

fn unchecked(p: &[f64]) -> BfmParams {
    BfmParams::new_unchecked([p[0], p[1], p[2], p[3]])
}

pub(crate) fn bfm_nll_grad_slice(p: &[f64], data: &Dataset) -> [f64; 4] {
    let (nu, theta, tau, zeta) = (p[0], p[1], p[2], p[3]);
    let mut g = [0.0; 4];
    for o in &data.observations {
        let x = o.time;
        let lx = x.ln();
        let lzx = (zeta * x).ln();
        let a = nu * x.powf(theta);
        let z = (zeta * x).powf(tau);
        let ez = z.exp();
        let da = a / (1.0 + a);
        g[0] += da / nu;
        g[1] += da * lx;
        g[2] += ez * z * lzx;
        g[3] += ez * z * tau / zeta;
        if o.status.is_failure() {
            let ln_r1 = theta.ln() + a.ln() - lx - a.ln_1p();
            let ln_r2 = tau.ln() + z + z.ln() - lx;
            let w1 = 1.0 / (1.0 + (ln_r2 - ln_r1).exp());
            let w2 = 1.0 / (1.0 + (ln_r1 - ln_r2).exp());
            g[0] -= w1 / (nu * (1.0 + a));
            g[1] -= w1 * (1.0 / theta + lx / (1.0 + a));
            g[2] -= w2 * (1.0 / tau + lzx * (1.0 + z));
            g[3] -= w2 * tau * (1.0 + z) / zeta;
        }
    }
    if g.iter().any(|v| v.is_nan()) {
        return [f64::INFINITY; 4];
    }
    g
}

/// BFM negative log-likelihood.
pub fn bfm_nll(p: &BfmParams, data: &Dataset) -> f64 {
    nll(&BfmModel, &p.to_array(), data)
}

/// Analytic gradient of [`bfm_nll`] in natural parameters (ν, θ, τ, ζ).
pub fn bfm_nll_grad(p: &BfmParams, data: &Dataset) -> [f64; 4] {
    bfm_nll_grad_slice(&p.to_array(), data)
}
