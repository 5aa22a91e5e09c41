//! Competitor lifetime models, information criteria, EDF goodness-of-fit
//! statistics with parametric-bootstrap p-values, and rank tables.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{CensoredObservation, Dataset, Status};
use crate::error::{BfmError, Result};
use crate::hazard::{model_quantile, BfmModel, HazardModel};
use crate::mle::{fit_mle, MleConfig};
use crate::risk::RiskEstimate;

/// `ln(1 + e^v)` without overflow.
fn log1p_exp(v: f64) -> f64 {
    if v > 35.0 {
        v + (-v).exp()
    } else {
        v.exp().ln_1p()
    }
}

/// `1/(1 + e^{-v})`
fn logistic(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Largest `θ` with `e^θ` finite. The additive Gompertz likelihoods grow
/// without bound as a hazard spike forms at the largest failure time, so fits
/// search `θ ≤ GOMPERTZ_THETA_MAX`.
pub const GOMPERTZ_THETA_MAX: f64 = 709.782_712_893_384;

/// Search limit for shape exponents, which otherwise run off to the same kind
/// of spike (a step in cumulative hazard at the largest failure time).
pub const SHAPE_MAX: f64 = 100.0;

const INF: f64 = f64::INFINITY;

/// `e^{-θ}(e^{kx} − 1)`, the Gompertz cumulative hazard term.
fn gompertz_chf(k: f64, theta: f64, x: f64) -> f64 {
    (k * x - theta + (-(-k * x).exp_m1()).ln()).exp()
}

/// `ln(1 − e^{−A})` for `A > 0`.
fn log_one_minus_exp_neg(a: f64) -> f64 {
    if a < std::f64::consts::LN_2 {
        (-(-a).exp_m1()).ln()
    } else {
        (-(-a).exp()).ln_1p()
    }
}

/// `H = −ln(1 − (1 − e^{−A})^θ)` for exponentiated models.
fn exponentiated_chf(a: f64, theta: f64) -> f64 {
    if a > 700.0 {
        return a - theta.ln();
    }
    let log_f = theta * log_one_minus_exp_neg(a);
    if log_f < -std::f64::consts::LN_2 {
        -(-log_f.exp()).ln_1p()
    } else {
        -(-log_f.exp_m1()).ln()
    }
}

/// `ln r` for `F = (1 − e^{−A})^θ` with `A' = dA/dx`.
fn exponentiated_log_frf(a: f64, da: f64, theta: f64) -> f64 {
    let h = exponentiated_chf(a, theta);
    theta.ln() + (theta - 1.0) * log_one_minus_exp_neg(a) - a + da.ln() + h
}

/// Two additive logistic-type hazards `c·k·e^{kx}/(1 + c·e^{kx})`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Apd;

impl HazardModel for Apd {
    fn name(&self) -> &str {
        "APD"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["alpha", "beta", "lambda", "theta"]
    }
    fn frf(&self, x: f64, p: &[f64]) -> f64 {
        let (a, b) = self.component_frfs(x, p).unwrap_or((f64::NAN, f64::NAN));
        a + b
    }
    fn chf(&self, x: f64, p: &[f64]) -> f64 {
        let (alpha, beta, lambda, theta) = (p[0], p[1], p[2], p[3]);
        (log1p_exp(alpha.ln() + lambda * x) - alpha.ln_1p()) + (log1p_exp(beta.ln() + theta * x) - beta.ln_1p())
    }
    fn scale_start(&self, raw: &[f64], t: f64) -> Vec<f64> {
        vec![raw[0], raw[1], raw[2] / t, raw[3] / t]
    }
    fn anchor_starts(&self, data: &Dataset) -> Vec<Vec<f64>> {
        let t = data.max_time();
        let mut out = Vec::new();
        for &(a, b) in &[(1e-3, 0.5), (0.1, 0.1), (1e-4, 1.0), (1.0, 10.0)] {
            for &(k1, k2) in &[(10.0, 2.0), (5.0, 0.5), (1.0, 1.0)] {
                out.push(vec![a, b, k1 / t, k2 / t]);
            }
        }
        out
    }
    fn component_frfs(&self, x: f64, p: &[f64]) -> Option<(f64, f64)> {
        let (alpha, beta, lambda, theta) = (p[0], p[1], p[2], p[3]);
        Some((
            lambda * logistic(alpha.ln() + lambda * x),
            theta * logistic(beta.ln() + theta * x),
        ))
    }
}

/// Chen-type hazard `αγx^{γ−1}e^{x^γ}` plus Gompertz `λe^{λx−θ}`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Facg;

impl HazardModel for Facg {
    fn search_upper_bounds(&self) -> Option<Vec<f64>> {
        Some(vec![SHAPE_MAX, INF, INF, GOMPERTZ_THETA_MAX])
    }
    fn name(&self) -> &str {
        "FACG"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["gamma", "alpha", "lambda", "theta"]
    }
    fn frf(&self, x: f64, p: &[f64]) -> f64 {
        let (a, b) = self.component_frfs(x, p).unwrap_or((f64::NAN, f64::NAN));
        a + b
    }
    fn chf(&self, x: f64, p: &[f64]) -> f64 {
        let (gamma, alpha, lambda, theta) = (p[0], p[1], p[2], p[3]);
        alpha * x.powf(gamma).exp_m1() + gompertz_chf(lambda, theta, x)
    }
    fn scale_start(&self, raw: &[f64], t: f64) -> Vec<f64> {
        let lambda = raw[2] * 10.0 / t;
        vec![raw[0], raw[1], lambda, lambda * t]
    }
    fn anchor_starts(&self, data: &Dataset) -> Vec<Vec<f64>> {
        let t = data.max_time();
        let mut out = Vec::new();
        for &gamma in &[0.3, 0.6, 1.0] {
            for &alpha in &[0.01, 0.2] {
                for &k in &[1.0, 5.0, 20.0, 100.0] {
                    out.push(vec![gamma, alpha, k / t, k]);
                }
            }
        }
        out
    }
    fn component_frfs(&self, x: f64, p: &[f64]) -> Option<(f64, f64)> {
        let (gamma, alpha, lambda, theta) = (p[0], p[1], p[2], p[3]);
        let xg = x.powf(gamma);
        Some((
            alpha * gamma * xg / x * xg.exp(),
            (lambda.ln() + lambda * x - theta).exp(),
        ))
    }
}

/// Exponential-power hazard `τυ(υx)^{τ−1}e^{(υx)^τ}` plus Gompertz
/// `αe^{αx−θ}`. Tabulated labels (α, γ, λ, θ) correspond to (τ, υ, α, θ).
#[derive(Debug, Clone, Copy, Default)]
pub struct Faepg;

impl HazardModel for Faepg {
    fn search_upper_bounds(&self) -> Option<Vec<f64>> {
        Some(vec![SHAPE_MAX, INF, INF, GOMPERTZ_THETA_MAX])
    }
    fn name(&self) -> &str {
        "FAEPG"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["tau", "upsilon", "alpha", "theta"]
    }
    fn frf(&self, x: f64, p: &[f64]) -> f64 {
        let (a, b) = self.component_frfs(x, p).unwrap_or((f64::NAN, f64::NAN));
        a + b
    }
    fn chf(&self, x: f64, p: &[f64]) -> f64 {
        let (tau, ups, alpha, theta) = (p[0], p[1], p[2], p[3]);
        (ups * x).powf(tau).exp_m1() + gompertz_chf(alpha, theta, x)
    }
    fn scale_start(&self, raw: &[f64], t: f64) -> Vec<f64> {
        let alpha = raw[2] * 10.0 / t;
        vec![raw[0], raw[1] / t, alpha, alpha * t]
    }
    fn anchor_starts(&self, data: &Dataset) -> Vec<Vec<f64>> {
        let t = data.max_time();
        let mut out = Vec::new();
        for &tau in &[0.5, 1.0, 2.0] {
            for &u in &[0.3, 1.0] {
                for &k in &[1.0, 5.0, 20.0, 100.0] {
                    out.push(vec![tau, u / t, k / t, k]);
                }
            }
        }
        out
    }
    fn component_frfs(&self, x: f64, p: &[f64]) -> Option<(f64, f64)> {
        let (tau, ups, alpha, theta) = (p[0], p[1], p[2], p[3]);
        let z = (ups * x).powf(tau);
        Some((tau * z / x * z.exp(), (alpha.ln() + alpha * x - theta).exp()))
    }
}

/// Exponentiated additive Weibull, `F = (1 − e^{−(αx^β + γx^λ)})^θ`.
#[derive(Debug, Clone, Copy, Default)]
pub struct EAddW;

impl EAddW {
    fn a(x: f64, p: &[f64]) -> (f64, f64) {
        let (alpha, beta, gamma, lambda) = (p[0], p[1], p[2], p[3]);
        let (t1, t2) = (alpha * x.powf(beta), gamma * x.powf(lambda));
        (t1 + t2, (beta * t1 + lambda * t2) / x)
    }
}

impl HazardModel for EAddW {
    fn search_upper_bounds(&self) -> Option<Vec<f64>> {
        Some(vec![INF, SHAPE_MAX, INF, SHAPE_MAX, INF])
    }
    fn name(&self) -> &str {
        "EAddW"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["alpha", "beta", "gamma", "lambda", "theta"]
    }
    fn frf(&self, x: f64, p: &[f64]) -> f64 {
        self.log_frf(x, p).exp()
    }
    fn log_frf(&self, x: f64, p: &[f64]) -> f64 {
        let (a, da) = Self::a(x, p);
        exponentiated_log_frf(a, da, p[4])
    }
    fn chf(&self, x: f64, p: &[f64]) -> f64 {
        exponentiated_chf(Self::a(x, p).0, p[4])
    }
    fn scale_start(&self, raw: &[f64], t: f64) -> Vec<f64> {
        vec![
            raw[0] * t.powf(-raw[1]),
            raw[1],
            raw[2] * t.powf(-raw[3]),
            raw[3],
            raw[4],
        ]
    }
    fn anchor_starts(&self, data: &Dataset) -> Vec<Vec<f64>> {
        let t = data.max_time();
        let mut out = Vec::new();
        for &(b, l) in &[(0.5, 2.0), (0.1, 2.5), (1.0, 4.0), (0.3, 1.5)] {
            for &th in &[1.0, 5.0] {
                out.push(vec![0.5 * t.powf(-b), b, 0.5 * t.powf(-l), l, th]);
            }
        }
        out
    }
}

/// Generalized extended exponential-Weibull, `F = (1 − e^{−(βx^γ + λx)^c})^α`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GExtEW;

impl GExtEW {
    fn a(x: f64, p: &[f64]) -> (f64, f64) {
        let (beta, gamma, lambda, c) = (p[1], p[2], p[3], p[4]);
        let inner = beta * x.powf(gamma) + lambda * x;
        let d_inner = beta * gamma * x.powf(gamma - 1.0) + lambda;
        let a = inner.powf(c);
        (a, c * a / inner * d_inner)
    }
}

impl HazardModel for GExtEW {
    fn search_upper_bounds(&self) -> Option<Vec<f64>> {
        Some(vec![INF, INF, SHAPE_MAX, INF, SHAPE_MAX])
    }
    fn name(&self) -> &str {
        "GExtEW"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["alpha", "beta", "gamma", "lambda", "c"]
    }
    fn frf(&self, x: f64, p: &[f64]) -> f64 {
        self.log_frf(x, p).exp()
    }
    fn log_frf(&self, x: f64, p: &[f64]) -> f64 {
        let (a, da) = Self::a(x, p);
        exponentiated_log_frf(a, da, p[0])
    }
    fn chf(&self, x: f64, p: &[f64]) -> f64 {
        exponentiated_chf(Self::a(x, p).0, p[0])
    }
    fn scale_start(&self, raw: &[f64], t: f64) -> Vec<f64> {
        vec![raw[0], raw[1] * t.powf(-raw[2]), raw[2], raw[3] / t, raw[4]]
    }
    fn anchor_starts(&self, data: &Dataset) -> Vec<Vec<f64>> {
        let t = data.max_time();
        let mut out = Vec::new();
        for &(al, g, c) in &[(0.2, 0.1, 20.0), (1.0, 1.0, 1.0), (0.5, 0.5, 3.0), (2.0, 2.0, 0.5)] {
            out.push(vec![al, 0.5 * t.powf(-g), g, 0.01 / t, c]);
        }
        out
    }
}

pub const COMPETITOR_NAMES: [&str; 5] = ["APD", "FACG", "FAEPG", "EAddW", "GExtEW"];

/// Competitor by name (case-insensitive).
pub fn competitor(name: &str) -> Result<Box<dyn HazardModel>> {
    match name.to_ascii_lowercase().as_str() {
        "apd" => Ok(Box::new(Apd)),
        "facg" => Ok(Box::new(Facg)),
        "faepg" => Ok(Box::new(Faepg)),
        "eaddw" => Ok(Box::new(EAddW)),
        "gextew" => Ok(Box::new(GExtEW)),
        other => Err(BfmError::Config(format!(
            "unknown model `{other}` (known: BFM, {})",
            COMPETITOR_NAMES.join(", ")
        ))),
    }
}

/// BFM or a competitor by name.
pub fn model_by_name(name: &str) -> Result<Box<dyn HazardModel>> {
    if name.eq_ignore_ascii_case("bfm") {
        Ok(Box::new(BfmModel))
    } else {
        competitor(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoCriteria {
    pub aic: f64,
    pub bic: f64,
    pub bc: f64,
}

/// AIC, BIC and the bridge criterion `2·nll + n^{2/3}·Σ_{k≤p} 1/k`.
pub fn info_criteria(nll: f64, p: usize, n: usize) -> InfoCriteria {
    let harmonic: f64 = (1..=p).map(|k| 1.0 / k as f64).sum();
    let n = n as f64;
    InfoCriteria {
        aic: 2.0 * nll + 2.0 * p as f64,
        bic: 2.0 * nll + p as f64 * n.ln(),
        bc: 2.0 * nll + n.powf(2.0 / 3.0) * harmonic,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofStats {
    pub ks: f64,
    pub ad: f64,
    pub cvm: f64,
}

/// KS, AD and CvM statistics of PIT values given as `(ln u, ln(1−u))` pairs.
pub fn edf_statistics(mut log_pairs: Vec<(f64, f64)>) -> Result<GofStats> {
    if log_pairs.is_empty() {
        return Err(BfmError::Validation(
            "goodness of fit needs at least one uncensored observation".into(),
        ));
    }
    log_pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = log_pairs.len();
    let nf = n as f64;
    let u: Vec<f64> = log_pairs.iter().map(|p| p.0.exp()).collect();
    let mut ks = 0.0f64;
    let mut cvm = 1.0 / (12.0 * nf);
    let mut ad_sum = 0.0;
    for i in 0..n {
        let k = i as f64 + 1.0;
        ks = ks.max(k / nf - u[i]).max(u[i] - (k - 1.0) / nf);
        cvm += (u[i] - (2.0 * k - 1.0) / (2.0 * nf)).powi(2);
        ad_sum += (2.0 * k - 1.0) * (log_pairs[i].0 + log_pairs[n - 1 - i].1);
    }
    Ok(GofStats {
        ks,
        ad: -nf - ad_sum / nf,
        cvm,
    })
}

/// EDF statistics on the probability-integral transform of uncensored times.
pub fn gof_statistics(model: &dyn HazardModel, params: &[f64], data: &Dataset) -> Result<GofStats> {
    let pairs = data
        .failure_times()
        .into_iter()
        .map(|x| {
            let h = model.chf(x, params);
            ((-(-h).exp_m1()).ln(), -h)
        })
        .collect();
    edf_statistics(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofPValues {
    pub ks: f64,
    pub ad: f64,
    pub cvm: f64,
    pub replicates_used: usize,
    pub replicates_dropped: usize,
}

/// Simulated dataset with the size of `data`, Type-I censored at the largest
/// censoring time of `data` (if any).
pub fn simulate_like(model: &dyn HazardModel, params: &[f64], data: &Dataset, rng: &mut impl Rng) -> Option<Dataset> {
    let cutoff = data
        .observations
        .iter()
        .filter(|o| o.status == Status::Censored)
        .map(|o| o.time)
        .fold(f64::NAN, f64::max);
    let mut obs = Vec::with_capacity(data.len());
    for _ in 0..data.len() {
        let u: f64 = rng.gen_range(f64::EPSILON..1.0);
        let t = model_quantile(model, u, params)?;
        let o = if cutoff.is_finite() && t >= cutoff {
            CensoredObservation::new(cutoff, Status::Censored).ok()?
        } else {
            CensoredObservation::new(t, Status::FailureCauseUnknown).ok()?
        };
        obs.push(o);
    }
    let mut d = Dataset::from_observations("bootstrap", obs).ok()?;
    d.time_unit = data.time_unit.clone();
    Some(d)
}

/// Parametric-bootstrap p-values: replicate `r` uses seed `seed + r`, is
/// refitted from `params`, and counts toward `p = #{stat ≥ observed}/used`.
pub fn gof_pvalues(
    model: &dyn HazardModel,
    params: &[f64],
    data: &Dataset,
    bootstrap_reps: usize,
    seed: u64,
) -> Result<GofPValues> {
    if bootstrap_reps < 199 {
        return Err(BfmError::Config(format!(
            "bootstrap_reps must be >= 199, got {bootstrap_reps}"
        )));
    }
    let observed = gof_statistics(model, params, data)?;
    let cfg = MleConfig {
        polish: true,
        ..MleConfig::default()
    };
    let reps: Vec<Option<GofStats>> = (0..bootstrap_reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
            let sim = simulate_like(model, params, data, &mut rng)?;
            let fit = fit_mle(model, &sim, &[params.to_vec()], &cfg).ok()?;
            gof_statistics(model, &fit.params, &sim).ok()
        })
        .collect();
    let used: Vec<GofStats> = reps.into_iter().flatten().collect();
    if used.is_empty() {
        return Err(BfmError::Convergence {
            iterations: bootstrap_reps,
            detail: "every bootstrap replicate failed".into(),
        });
    }
    let frac = |f: &dyn Fn(&GofStats) -> bool| used.iter().filter(|s| f(s)).count() as f64 / used.len() as f64;
    Ok(GofPValues {
        ks: frac(&|s| s.ks >= observed.ks),
        ad: frac(&|s| s.ad >= observed.ad),
        cvm: frac(&|s| s.cvm >= observed.cvm),
        replicates_used: used.len(),
        replicates_dropped: bootstrap_reps - used.len(),
    })
}

pub const METRIC_NAMES: [&str; 7] = ["nll", "aic", "bic", "bc", "ks", "ad", "cvm"];

/// The seven comparison metrics of one fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub model: String,
    pub params: Vec<f64>,
    pub std_devs: Vec<f64>,
    pub nll: f64,
    pub criteria: InfoCriteria,
    pub gof: GofStats,
    pub pvalues: Option<GofPValues>,
}

impl ModelMetrics {
    pub fn metric_values(&self) -> [f64; 7] {
        [
            self.nll,
            self.criteria.aic,
            self.criteria.bic,
            self.criteria.bc,
            self.gof.ks,
            self.gof.ad,
            self.gof.cvm,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedModel {
    pub metrics: ModelMetrics,
    pub ranks: [f64; 7],
    pub average_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub models: Vec<RankedModel>,
}

impl EvalReport {
    /// Number of metrics on which `model` attains the minimum (ties count).
    pub fn wins(&self, model: &str) -> usize {
        let Some(m) = self.models.iter().find(|m| m.metrics.model == model) else {
            return 0;
        };
        let own = m.metrics.metric_values();
        (0..7)
            .filter(|&k| self.models.iter().all(|o| own[k] <= o.metrics.metric_values()[k]))
            .count()
    }
}

/// Average ranks of `values` (rank 1 = smallest); ties share the mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn rank_models(dataset: &str, reports: Vec<ModelMetrics>) -> Result<EvalReport> {
    if reports.len() < 2 {
        return Err(BfmError::Config("ranking needs at least two models".into()));
    }
    if reports.iter().any(|r| r.metric_values().iter().any(|v| v.is_nan())) {
        return Err(BfmError::Validation("every model needs all seven metrics".into()));
    }
    let mut ranks = vec![[0.0; 7]; reports.len()];
    for k in 0..7 {
        let col: Vec<f64> = reports.iter().map(|r| r.metric_values()[k]).collect();
        for (i, r) in average_ranks(&col).into_iter().enumerate() {
            ranks[i][k] = r;
        }
    }
    Ok(EvalReport {
        dataset: dataset.to_string(),
        models: reports
            .into_iter()
            .zip(ranks)
            .map(|(metrics, ranks)| RankedModel {
                average_rank: ranks.iter().sum::<f64>() / 7.0,
                metrics,
                ranks,
            })
            .collect(),
    })
}

/// Fits `model` and assembles its seven metrics (and p-values if requested).
pub fn evaluate_model(
    model: &dyn HazardModel,
    data: &Dataset,
    cfg: &MleConfig,
    bootstrap: Option<(usize, u64)>,
) -> Result<ModelMetrics> {
    let starts = crate::mle::default_starts(model, data, cfg.random_starts, cfg.seed);
    let fit = fit_mle(model, data, &starts, cfg)?;
    let gof = gof_statistics(model, &fit.params, data)?;
    let pvalues = match bootstrap {
        Some((reps, seed)) => Some(gof_pvalues(model, &fit.params, data, reps, seed)?),
        None => None,
    };
    Ok(ModelMetrics {
        model: model.name().to_string(),
        criteria: info_criteria(fit.nll, model.param_count(), data.len()),
        params: fit.params,
        std_devs: fit.std_devs,
        nll: fit.nll,
        gof,
        pvalues,
    })
}

/// Risks `F_k = ∫ r_k·S` of an additive two-component model.
pub fn competitor_risks(model: &dyn HazardModel, params: &[f64]) -> Result<RiskEstimate> {
    if model.component_frfs(1.0, params).is_none() {
        return Err(BfmError::Config(format!(
            "{} is not an additive two-component model",
            model.name()
        )));
    }
    // F₁ = E[h₁(X)/h(X)], integrated over the CDF level so that hazard spikes
    // occupy their probability mass rather than their (possibly tiny) width.
    let share = |u: f64| {
        let Some(x) = model_quantile(model, u, params) else {
            return 0.5;
        };
        match model.component_frfs(x, params) {
            Some((h1, h2)) if h1.is_infinite() && h2.is_finite() => 1.0,
            Some((h1, h2)) if h2.is_infinite() && h1.is_finite() => 0.0,
            Some((h1, h2)) if h1 + h2 > 0.0 => h1 / (h1 + h2),
            _ => 0.5,
        }
    };
    let f1 = crate::specfun::integrate(share, 0.0, 1.0, 1e-9)?.value.clamp(0.0, 1.0);
    Ok(RiskEstimate::quadrature(f1, 1.0 - f1))
}
