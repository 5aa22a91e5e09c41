//! Hamiltonian Monte Carlo for the BFM posterior under independent Gamma
//! priors, sampled in log-parameter space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{CensoredObservation, Dataset, Status};
use crate::distribution::{bfm_sample, BfmParams, CauseLabel};
use crate::error::{BfmError, Result};
use crate::hazard::{bfm_nll_grad_slice, nll, BfmModel};
use crate::specfun::log_gamma;

/// Gamma(shape `a`, rate `b`) prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub a: f64,
    pub b: f64,
}

impl GammaPrior {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(BfmError::Config(format!(
                "gamma prior needs a, b > 0 (got a={a}, b={b})"
            )));
        }
        Ok(Self { a, b })
    }

    /// Prior with mean `m` and rate `b`.
    pub fn with_mean(m: f64, b: f64) -> Result<Self> {
        Self::new(m * b, b)
    }

    pub fn mean(&self) -> f64 {
        self.a / self.b
    }

    pub fn variance(&self) -> f64 {
        self.a / (self.b * self.b)
    }

    pub fn log_density(&self, x: f64) -> f64 {
        self.a * self.b.ln() - log_gamma(self.a).unwrap_or(f64::NAN) + (self.a - 1.0) * x.ln() - self.b * x
    }
}

/// Default priors centred on `omp`: rate 2, shape 2·OMP.
pub fn centered_priors(omp: &BfmParams, rate: f64) -> Result<[GammaPrior; 4]> {
    let v = omp.to_array();
    Ok([
        GammaPrior::with_mean(v[0], rate)?,
        GammaPrior::with_mean(v[1], rate)?,
        GammaPrior::with_mean(v[2], rate)?,
        GammaPrior::with_mean(v[3], rate)?,
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmcConfig {
    pub epsilon: f64,
    pub leapfrog_steps: usize,
    pub mass_diag: Vec<f64>,
    pub iterations: usize,
    pub warmup: usize,
    pub chains: usize,
    pub seed: u64,
    /// Step-size tuning towards 0.6–0.9 acceptance during warm-up.
    pub tune: bool,
}

impl Default for HmcConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.02,
            leapfrog_steps: 25,
            mass_diag: vec![1.0; 4],
            iterations: 2000,
            warmup: 1000,
            chains: 4,
            seed: 2024,
            tune: true,
        }
    }
}

impl HmcConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(BfmError::Config(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.leapfrog_steps == 0 {
            return Err(BfmError::Config("leapfrog_steps must be >= 1".into()));
        }
        if self.mass_diag.len() != dim || self.mass_diag.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(BfmError::Config(format!("mass_diag needs {dim} positive entries")));
        }
        if self.iterations == 0 || self.warmup >= self.iterations {
            return Err(BfmError::Config(format!(
                "need 0 <= warmup < iterations (got warmup={}, iterations={})",
                self.warmup, self.iterations
            )));
        }
        if self.chains == 0 {
            return Err(BfmError::Config("chains must be >= 1".into()));
        }
        Ok(())
    }
}

/// A differentiable log-density.
pub trait Target: Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, q: &[f64]) -> f64;
    fn grad(&self, q: &[f64]) -> Vec<f64>;
}

/// BFM posterior over `ln ϖ`, including the log-Jacobian `Σ ln ϖ`.
pub struct BfmPosterior<'a> {
    pub data: &'a Dataset,
    pub priors: [GammaPrior; 4],
}

impl Target for BfmPosterior<'_> {
    fn dim(&self) -> usize {
        4
    }

    fn log_density(&self, q: &[f64]) -> f64 {
        log_posterior(q, self.data, &self.priors)
    }

    fn grad(&self, q: &[f64]) -> Vec<f64> {
        log_posterior_grad(q, self.data, &self.priors).to_vec()
    }
}

/// Log posterior in log-parameter space; −∞ when the likelihood overflows.
pub fn log_posterior(log_p: &[f64], data: &Dataset, priors: &[GammaPrior; 4]) -> f64 {
    let p: Vec<f64> = log_p.iter().map(|v| v.exp()).collect();
    let ll = -nll(&BfmModel, &p, data);
    let lp: f64 = priors.iter().zip(&p).map(|(pr, v)| pr.log_density(*v)).sum();
    let jac: f64 = log_p.iter().sum();
    let v = ll + lp + jac;
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

pub fn log_posterior_grad(log_p: &[f64], data: &Dataset, priors: &[GammaPrior; 4]) -> [f64; 4] {
    let p: Vec<f64> = log_p.iter().map(|v| v.exp()).collect();
    let g = bfm_nll_grad_slice(&p, data);
    let mut out = [0.0; 4];
    for h in 0..4 {
        out[h] = -p[h] * g[h] + priors[h].a - priors[h].b * p[h];
    }
    out
}

/// Kick-drift-kick leapfrog on `(q, κ)` with kinetic energy `Σ κ²/2m`.
/// Returns `None` on a non-finite state (divergent transition).
pub fn leapfrog<G: Fn(&[f64]) -> Vec<f64>>(
    q: &[f64],
    momentum: &[f64],
    epsilon: f64,
    steps: usize,
    mass_diag: &[f64],
    grad_fn: G,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let mut q = q.to_vec();
    let mut k = momentum.to_vec();
    let mut g = grad_fn(&q);
    for _ in 0..steps {
        for i in 0..q.len() {
            k[i] += 0.5 * epsilon * g[i];
            q[i] += epsilon * k[i] / mass_diag[i];
        }
        g = grad_fn(&q);
        for i in 0..q.len() {
            k[i] += 0.5 * epsilon * g[i];
        }
        if q.iter().chain(&k).chain(&g).any(|v| !v.is_finite()) {
            return None;
        }
    }
    Some((q, k))
}

fn kinetic(k: &[f64], mass: &[f64]) -> f64 {
    k.iter().zip(mass).map(|(k, m)| 0.5 * k * k / m).sum()
}

/// One chain's output; `states` excludes warm-up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRun {
    pub states: Vec<Vec<f64>>,
    pub accept_rate: f64,
    pub divergences: usize,
    pub epsilon: f64,
}

fn run_chain<T: Target + ?Sized>(target: &T, init: &[f64], cfg: &HmcConfig, chain: usize) -> ChainRun {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(chain as u64));
    let mut eps = cfg.epsilon;
    let mut q = init.to_vec();
    let mut logp = target.log_density(&q);
    let (mut window_acc, mut window_n) = (0usize, 0usize);
    let (mut kept_acc, mut divergences) = (0usize, 0usize);
    let mut states = Vec::with_capacity(cfg.iterations - cfg.warmup);
    for it in 0..cfg.iterations {
        let k0: Vec<f64> = cfg
            .mass_diag
            .iter()
            .map(|m| {
                let z: f64 = StandardNormal.sample(&mut rng);
                m.sqrt() * z
            })
            .collect();
        let h0 = -logp + kinetic(&k0, &cfg.mass_diag);
        let mut accepted = false;
        match leapfrog(&q, &k0, eps, cfg.leapfrog_steps, &cfg.mass_diag, |x| target.grad(x)) {
            Some((q1, k1)) => {
                let logp1 = target.log_density(&q1);
                let h1 = -logp1 + kinetic(&k1, &cfg.mass_diag);
                if h1.is_finite() {
                    let u: f64 = rng.gen();
                    if u.ln() < h0 - h1 {
                        q = q1;
                        logp = logp1;
                        accepted = true;
                    }
                } else {
                    divergences += 1;
                }
            }
            None => divergences += 1,
        }
        if it < cfg.warmup {
            window_n += 1;
            window_acc += accepted as usize;
            if cfg.tune && window_n == 50 {
                let rate = window_acc as f64 / 50.0;
                if rate < 0.6 {
                    eps *= 0.8;
                } else if rate > 0.9 {
                    eps *= 1.15;
                }
                window_n = 0;
                window_acc = 0;
            }
        } else {
            kept_acc += accepted as usize;
            states.push(q.clone());
        }
    }
    ChainRun {
        accept_rate: kept_acc as f64 / states.len() as f64,
        states,
        divergences,
        epsilon: eps,
    }
}

/// Runs `cfg.chains` independent chains (concurrently), chain `i` seeded with
/// `cfg.seed + i`.
pub fn sample_target<T: Target + ?Sized>(target: &T, init: &[f64], cfg: &HmcConfig) -> Result<Vec<ChainRun>> {
    cfg.validate(target.dim())?;
    if init.len() != target.dim() || !target.log_density(init).is_finite() {
        return Err(BfmError::Config("initial state must have finite log density".into()));
    }
    Ok((0..cfg.chains)
        .into_par_iter()
        .map(|c| run_chain(target, init, cfg, c))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorChains {
    /// chains × kept iterations × 4, natural parameters.
    pub draws: Vec<Vec<[f64; 4]>>,
    pub log_draws: Vec<Vec<[f64; 4]>>,
    pub accept_rate: Vec<f64>,
    pub divergences: Vec<usize>,
    pub final_epsilon: Vec<f64>,
    pub warmup: usize,
}

impl PosteriorChains {
    /// Chains with acceptance outside [0.1, 0.99] or more than 10% divergences.
    pub fn unhealthy_chains(&self) -> Vec<usize> {
        (0..self.draws.len())
            .filter(|&c| {
                let total = self.draws[c].len() + self.warmup;
                let a = self.accept_rate[c];
                !(0.1..=0.99).contains(&a) || self.divergences[c] as f64 > 0.1 * total as f64
            })
            .collect()
    }
}

/// HMC for the BFM posterior started at `init` (typically the MLE).
pub fn hmc_run(data: &Dataset, priors: &[GammaPrior; 4], cfg: &HmcConfig, init: &BfmParams) -> Result<PosteriorChains> {
    let target = BfmPosterior { data, priors: *priors };
    let q0: Vec<f64> = init.to_array().iter().map(|v| v.ln()).collect();
    let runs = sample_target(&target, &q0, cfg)?;
    let log_draws: Vec<Vec<[f64; 4]>> = runs
        .iter()
        .map(|r| r.states.iter().map(|s| [s[0], s[1], s[2], s[3]]).collect())
        .collect();
    let draws = log_draws
        .iter()
        .map(|c| c.iter().map(|s| s.map(f64::exp)).collect())
        .collect();
    Ok(PosteriorChains {
        draws,
        log_draws,
        accept_rate: runs.iter().map(|r| r.accept_rate).collect(),
        divergences: runs.iter().map(|r| r.divergences).collect(),
        final_epsilon: runs.iter().map(|r| r.epsilon).collect(),
        warmup: cfg.warmup,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub hpd95: Vec<(f64, f64)>,
    /// NaN (serialized as null) with a single chain.
    pub rhat: Vec<f64>,
}

/// Shortest interval holding `ceil(level·n)` of the sorted draws.
pub fn hpd_interval(draws: &[f64], level: f64) -> (f64, f64) {
    let mut v = draws.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let k = ((level * n as f64).ceil() as usize).clamp(1, n);
    (0..=n - k)
        .map(|i| (v[i], v[i + k - 1]))
        .min_by(|a, b| (a.1 - a.0).total_cmp(&(b.1 - b.0)))
        .unwrap_or((f64::NAN, f64::NAN))
}

/// Classic potential scale reduction factor for one coordinate.
pub fn rhat(chains: &[Vec<f64>]) -> Result<f64> {
    let m = chains.len();
    if m < 2 {
        return Ok(f64::NAN);
    }
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    let vars: Vec<f64> = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (n - 1.0))
        .collect();
    let w = vars.iter().sum::<f64>() / m as f64;
    let grand = means.iter().sum::<f64>() / m as f64;
    let b = n * means.iter().map(|mu| (mu - grand) * (mu - grand)).sum::<f64>() / (m as f64 - 1.0);
    if vars.contains(&0.0) {
        if b == 0.0 && w == 0.0 {
            return Ok(1.0);
        }
        if b > 0.0 {
            return Err(BfmError::Validation(
                "a chain is constant while chain means differ".into(),
            ));
        }
    }
    Ok((((n - 1.0) / n * w + b / n) / w).sqrt())
}

/// Summary of draws shaped chains × iterations × dim.
pub fn summarize_draws(draws: &[Vec<Vec<f64>>]) -> Result<PosteriorSummary> {
    if draws.is_empty() || draws.iter().any(|c| c.len() < 10 || c.len() != draws[0].len()) {
        return Err(BfmError::Validation(
            "summaries need equal-length chains with >= 10 draws".into(),
        ));
    }
    let dim = draws[0][0].len();
    let mut out = PosteriorSummary {
        mean: Vec::new(),
        sd: Vec::new(),
        hpd95: Vec::new(),
        rhat: Vec::new(),
    };
    for h in 0..dim {
        let per_chain: Vec<Vec<f64>> = draws.iter().map(|c| c.iter().map(|s| s[h]).collect()).collect();
        let pooled: Vec<f64> = per_chain.concat();
        let n = pooled.len() as f64;
        let mean = pooled.iter().sum::<f64>() / n;
        let var = pooled.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        out.mean.push(mean);
        out.sd.push(var.max(0.0).sqrt());
        out.hpd95.push(hpd_interval(&pooled, 0.95));
        out.rhat.push(rhat(&per_chain)?);
    }
    Ok(out)
}

pub fn summarize(chains: &PosteriorChains) -> Result<PosteriorSummary> {
    let draws: Vec<Vec<Vec<f64>>> = chains
        .draws
        .iter()
        .map(|c| c.iter().map(|s| s.to_vec()).collect())
        .collect();
    summarize_draws(&draws)
}

/// `count` simulated datasets of `n_obs` uncensored lifetimes at the posterior
/// mean; set `k` uses seed `seed + k`.
pub fn posterior_predictive_sets(
    chains: &PosteriorChains,
    n_obs: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<Dataset>> {
    if count == 0 || n_obs == 0 {
        return Err(BfmError::Config(
            "predictive sets need count >= 1 and n_obs >= 1".into(),
        ));
    }
    let s = summarize(chains)?;
    let p = BfmParams::from_slice(&s.mean)?;
    (0..count)
        .map(|k| {
            let obs = bfm_sample(&p, n_obs, seed.wrapping_add(k as u64))
                .into_iter()
                .map(|d| {
                    let status = match d.cause {
                        CauseLabel::Cause1 => Status::FailureCause1,
                        CauseLabel::Cause2 => Status::FailureCause2,
                    };
                    CensoredObservation::new(d.time, status)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut d = Dataset::from_observations(&format!("predictive-{}", k + 1), obs)?;
            d.time_unit = "same as source".into();
            Ok(d)
        })
        .collect()
}

/// Fraction of grid points at which `reference` lies inside the pointwise
/// envelope of `curves`.
pub fn envelope_coverage(reference: &[f64], curves: &[Vec<f64>]) -> f64 {
    if reference.is_empty() || curves.is_empty() {
        return 0.0;
    }
    let inside = (0..reference.len())
        .filter(|&i| {
            let lo = curves.iter().map(|c| c[i]).fold(f64::INFINITY, f64::min);
            let hi = curves.iter().map(|c| c[i]).fold(f64::NEG_INFINITY, f64::max);
            (lo..=hi).contains(&reference[i])
        })
        .count();
    inside as f64 / reference.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::bundled;

    struct StdNormal(usize);

    impl Target for StdNormal {
        fn dim(&self) -> usize {
            self.0
        }
        fn log_density(&self, q: &[f64]) -> f64 {
            -0.5 * q.iter().map(|v| v * v).sum::<f64>()
        }
        fn grad(&self, q: &[f64]) -> Vec<f64> {
            q.iter().map(|v| -v).collect()
        }
    }

    #[test]
    fn leapfrog_hand_step() {
        let (q, k) = leapfrog(&[1.0], &[0.0], 0.1, 1, &[1.0], |q| vec![-q[0]]).unwrap();
        assert!((q[0] - 0.995).abs() < 1e-15 && (k[0] + 0.09975).abs() < 1e-15);
    }

    #[test]
    fn leapfrog_reversible_and_stable() {
        let g = |q: &[f64]| vec![-q[0], -2.0 * q[1]];
        let (q, k) = leapfrog(&[0.3, -1.2], &[0.7, 0.1], 0.05, 40, &[1.0, 2.0], g).unwrap();
        let back = leapfrog(&q, &[-k[0], -k[1]], 0.05, 40, &[1.0, 2.0], g).unwrap();
        assert!((back.0[0] - 0.3).abs() < 1e-10 && (back.0[1] + 1.2).abs() < 1e-10);
        let h = |q: &[f64], k: &[f64]| 0.5 * q[0] * q[0] + 0.5 * k[0] * k[0];
        let (q1, k1) = leapfrog(&[1.0], &[0.0], 0.01, 100, &[1.0], |q| vec![-q[0]]).unwrap();
        assert!((h(&q1, &k1) - 0.5).abs() <= 1e-4);
    }

    #[test]
    fn leapfrog_flags_divergence() {
        assert!(leapfrog(&[1.0], &[0.0], 10.0, 50, &[1.0], |q| vec![q[0].powi(5)]).is_none());
    }

    #[test]
    fn standard_normal_recovered() {
        let runs = sample_target(
            &StdNormal(1),
            &[0.5],
            &HmcConfig {
                epsilon: 0.2,
                leapfrog_steps: 10,
                mass_diag: vec![1.0],
                ..HmcConfig::default()
            },
        )
        .unwrap();
        let all: Vec<f64> = runs.iter().flat_map(|r| r.states.iter().map(|s| s[0])).collect();
        assert_eq!(all.len(), 4000);
        let m = all.iter().sum::<f64>() / all.len() as f64;
        let v = all.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (all.len() - 1) as f64;
        assert!(m.abs() < 0.05 && (v - 1.0).abs() < 0.1, "{m} {v}");
    }

    #[test]
    fn config_validation() {
        let bad = HmcConfig {
            epsilon: 0.0,
            ..HmcConfig::default()
        };
        assert!(matches!(bad.validate(4), Err(BfmError::Config(_))));
        let bad = HmcConfig {
            warmup: 2000,
            ..HmcConfig::default()
        };
        assert!(bad.validate(4).is_err());
    }

    #[test]
    fn rhat_and_hpd_edge_cases() {
        let chain: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let r = rhat(&[chain.clone(), chain.clone()]).unwrap();
        assert!((r - (19.0f64 / 20.0).sqrt()).abs() < 1e-12);
        let constant = vec![vec![vec![2.5]; 12]; 3];
        let s = summarize_draws(&constant).unwrap();
        assert_eq!((s.mean[0], s.sd[0], s.hpd95[0]), (2.5, 0.0, (2.5, 2.5)));
        assert!(rhat(&[vec![1.0; 10], chain[..10].to_vec()]).is_err());
        let draws: Vec<f64> = (0..1000).map(|i| ((i as f64 + 0.5) / 1000.0).powi(3)).collect();
        let (lo, hi) = hpd_interval(&draws, 0.95);
        let mut sorted = draws.clone();
        sorted.sort_by(f64::total_cmp);
        assert!(hi - lo <= sorted[974] - sorted[25]);
    }

    #[test]
    fn grand_mean_is_double_sum() {
        let d: Vec<Vec<Vec<f64>>> = (0..3)
            .map(|c| (0..15).map(|i| vec![(c * 15 + i) as f64]).collect())
            .collect();
        let s = summarize_draws(&d).unwrap();
        assert_eq!(s.mean[0], (0..45).sum::<usize>() as f64 / 45.0);
    }

    #[test]
    fn posterior_reduces_to_prior_on_empty_data() {
        let mut d = bundled("afst").unwrap();
        d.observations.clear();
        let pri = [GammaPrior::new(1.0, 1.0).unwrap(); 4];
        let q = [0.1, -0.3, 0.2, 0.0];
        let lp = log_posterior(&q, &d, &pri);
        let closed: f64 = q.iter().map(|v| -v.exp() + v).sum();
        assert!((lp - closed).abs() < 1e-12);
        let g = log_posterior_grad(&q, &d, &pri);
        for h in 0..4 {
            assert!((g[h] - (1.0 - q[h].exp())).abs() < 1e-12);
        }
    }

    #[test]
    fn posterior_gradient_matches_differences() {
        let d = bundled("afst").unwrap();
        let pri = centered_priors(&BfmParams::new(0.0054, 4.9472, 0.4701, 0.0419).unwrap(), 2.0).unwrap();
        let q = [-5.0, 1.5, -0.8, -3.0];
        let g = log_posterior_grad(&q, &d, &pri);
        for k in 0..4 {
            let (mut up, mut dn) = (q, q);
            up[k] += 1e-6;
            dn[k] -= 1e-6;
            let fd = (log_posterior(&up, &d, &pri) - log_posterior(&dn, &d, &pri)) / 2e-6;
            assert!((g[k] - fd).abs() <= 1e-6 * g[k].abs().max(1.0), "{k} {} {fd}", g[k]);
        }
    }

    #[test]
    fn predictive_sets_are_reproducible() {
        let d = bundled("afst").unwrap();
        let omp = BfmParams::new(0.0054, 4.9472, 0.4701, 0.0419).unwrap();
        let cfg = HmcConfig {
            iterations: 300,
            warmup: 100,
            chains: 2,
            ..HmcConfig::default()
        };
        let ch = hmc_run(&d, &centered_priors(&omp, 2.0).unwrap(), &cfg, &omp).unwrap();
        assert_eq!(ch.draws[0].len(), 200);
        assert!(ch.draws.iter().flatten().all(|s| s.iter().all(|v| *v > 0.0)));
        let a = posterior_predictive_sets(&ch, 33, 5, 9).unwrap();
        let b = posterior_predictive_sets(&ch, 33, 5, 9).unwrap();
        assert_eq!(a.len(), 5);
        assert_eq!(a, b);
        assert!(posterior_predictive_sets(&ch, 33, 0, 9).is_err());
    }
}
