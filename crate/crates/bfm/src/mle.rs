//! Maximum-likelihood fitting of right-censored data for any [`HazardModel`],
//! with observed-information standard deviations and asymptotic intervals.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{BfmError, Result};
pub use crate::hazard::{bfm_nll, bfm_nll_grad, nll, BfmModel, HazardModel};
use crate::optim::{bfgs, hessian, hessian_from_gradient, nelder_mead, NelderMeadConfig};

/// Coordinates the optimizer works in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamSpace {
    /// `ln ϖ`, positivity by construction.
    Log,
    /// `ϖ` scaled by the start point; non-positive values are rejected.
    Natural,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleConfig {
    pub space: ParamSpace,
    pub random_starts: usize,
    pub seed: u64,
    pub max_evals: usize,
    pub polish: bool,
    pub hessian_rel_step: f64,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            space: ParamSpace::Log,
            random_starts: 8,
            seed: 20_240_601,
            max_evals: 20_000,
            polish: true,
            hessian_rel_step: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleFit {
    pub model: String,
    pub param_names: Vec<String>,
    pub params: Vec<f64>,
    pub nll: f64,
    pub std_devs: Vec<f64>,
    pub aci: Vec<(f64, f64)>,
    pub condition_number: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Information {
    pub matrix: Vec<Vec<f64>>,
    pub covariance: Vec<Vec<f64>>,
    pub std_devs: Vec<f64>,
    pub aci: Vec<(f64, f64)>,
    pub condition_number: f64,
}

/// Starting points: model anchors plus `count` log-uniform draws in
/// `[1e-4, 10]` per parameter mapped to the data's timescale.
pub fn default_starts(model: &dyn HazardModel, data: &Dataset, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = data.max_time();
    let (lo, hi) = (1e-4f64.ln(), 10f64.ln());
    let mut starts = model.anchor_starts(data);
    for _ in 0..count {
        let raw: Vec<f64> = (0..model.param_count()).map(|_| rng.gen_range(lo..hi).exp()).collect();
        starts.push(model.scale_start(&raw, t));
    }
    starts
}

struct Transform<'a> {
    space: ParamSpace,
    reference: &'a [f64],
}

impl Transform<'_> {
    fn to_natural(&self, y: &[f64]) -> Vec<f64> {
        match self.space {
            ParamSpace::Log => y.iter().map(|v| v.exp()).collect(),
            ParamSpace::Natural => y.iter().zip(self.reference).map(|(v, r)| v * r).collect(),
        }
    }

    fn to_search(&self, p: &[f64]) -> Vec<f64> {
        match self.space {
            ParamSpace::Log => p.iter().map(|v| v.ln()).collect(),
            ParamSpace::Natural => p.iter().zip(self.reference).map(|(v, r)| v / r).collect(),
        }
    }

    /// dϖ_k / dy_k
    fn jacobian(&self, p: &[f64]) -> Vec<f64> {
        match self.space {
            ParamSpace::Log => p.to_vec(),
            ParamSpace::Natural => self.reference.to_vec(),
        }
    }
}

struct Candidate {
    params: Vec<f64>,
    nll: f64,
    evals: usize,
    converged: bool,
}

fn optimize_from(model: &dyn HazardModel, data: &Dataset, start: &[f64], cfg: &MleConfig) -> Option<Candidate> {
    let start: Vec<f64> = match model.search_upper_bounds() {
        Some(ub) => start.iter().zip(&ub).map(|(v, u)| v.min(*u)).collect(),
        None => start.to_vec(),
    };
    let start = start.as_slice();
    let reference: Vec<f64> = start.to_vec();
    let tr = Transform {
        space: cfg.space,
        reference: &reference,
    };
    let upper = model.search_upper_bounds();
    let obj = |y: &[f64]| {
        let p = tr.to_natural(y);
        match &upper {
            Some(ub) if p.iter().zip(ub).any(|(v, u)| v > u) => f64::INFINITY,
            _ => nll(model, &p, data),
        }
    };
    let y0 = tr.to_search(start);
    if !obj(&y0).is_finite() {
        return None;
    }
    let nm_cfg = NelderMeadConfig {
        initial_step: 0.5,
        max_evals: cfg.max_evals,
        ..NelderMeadConfig::default()
    };
    let mut m = nelder_mead(obj, &y0, &nm_cfg);
    let mut evals = m.evals;
    // A restart from the first optimum guards against simplex collapse.
    let again = nelder_mead(
        obj,
        &m.x,
        &NelderMeadConfig {
            initial_step: 0.1,
            ..nm_cfg
        },
    );
    evals += again.evals;
    if again.f <= m.f {
        m = again;
    }
    let mut converged = m.converged;
    if cfg.polish {
        let grad = |y: &[f64]| {
            let p = tr.to_natural(y);
            model
                .nll_gradient(&p, data)
                .map(|g| g.iter().zip(tr.jacobian(&p)).map(|(a, b)| a * b).collect())
        };
        let b = bfgs(obj, grad, &m.x, 500, 1e-9);
        evals += b.evals;
        if b.f <= m.f {
            converged |= b.converged;
            m.x = b.x;
            m.f = b.f;
        }
    }
    let params = tr.to_natural(&m.x);
    m.f.is_finite().then_some(Candidate {
        params,
        nll: m.f,
        evals,
        converged,
    })
}

/// Minimizes the negative log-likelihood from every start (in parallel) and
/// returns the best optimum with its observed-information summaries.
pub fn fit_mle(model: &dyn HazardModel, data: &Dataset, starts: &[Vec<f64>], cfg: &MleConfig) -> Result<MleFit> {
    if starts.is_empty() {
        return Err(BfmError::Config("fit_mle needs at least one start".into()));
    }
    if data.is_empty() {
        return Err(BfmError::Validation("empty dataset".into()));
    }
    if let Some(s) = starts.iter().find(|s| s.len() != model.param_count()) {
        return Err(BfmError::Validation(format!(
            "{} expects {} parameters, start has {}",
            model.name(),
            model.param_count(),
            s.len()
        )));
    }
    let results: Vec<Candidate> = starts
        .par_iter()
        .filter_map(|s| optimize_from(model, data, s, cfg))
        .collect();
    let iterations = results.iter().map(|c| c.evals).sum();
    let best = results
        .into_iter()
        .min_by(|a, b| a.nll.total_cmp(&b.nll))
        .ok_or_else(|| BfmError::Convergence {
            iterations,
            detail: format!("no start gave a finite {} likelihood", model.name()),
        })?;
    let (std_devs, aci, condition_number) = match observed_information(model, &best.params, data, cfg.hessian_rel_step)
    {
        Ok(info) => (info.std_devs, info.aci, info.condition_number),
        Err(BfmError::SingularHessian { condition }) => (
            vec![f64::NAN; best.params.len()],
            vec![(f64::NAN, f64::NAN); best.params.len()],
            condition,
        ),
        Err(e) => return Err(e),
    };
    Ok(MleFit {
        model: model.name().to_string(),
        param_names: model.param_names().iter().map(|s| s.to_string()).collect(),
        params: best.params,
        nll: best.nll,
        std_devs,
        aci,
        condition_number,
        converged: best.converged,
        iterations,
    })
}

/// BFM fit with default starts.
pub fn fit_bfm(data: &Dataset, cfg: &MleConfig) -> Result<MleFit> {
    let starts = default_starts(&BfmModel, data, cfg.random_starts, cfg.seed);
    fit_mle(&BfmModel, data, &starts, cfg)
}

/// Natural-space Hessian of the nll at `p_hat` (from gradient differences when
/// an analytic gradient exists), its inverse, standard deviations and 95%
/// intervals `estimate ± 1.96 sd` clamped below at 0.
pub fn observed_information(
    model: &dyn HazardModel,
    p_hat: &[f64],
    data: &Dataset,
    rel_step: f64,
) -> Result<Information> {
    let steps: Vec<f64> = p_hat.iter().map(|v| rel_step * v.abs()).collect();
    let has_grad = model.nll_gradient(p_hat, data).is_some();
    let h = if has_grad {
        hessian_from_gradient(
            |q| model.nll_gradient(q, data).unwrap_or_else(|| vec![f64::NAN; q.len()]),
            p_hat,
            &steps,
        )
    } else {
        hessian(|q| nll(model, q, data), p_hat, &steps)
    };
    information_from_hessian(h, p_hat)
}

pub(crate) fn information_from_hessian(h: Vec<Vec<f64>>, p_hat: &[f64]) -> Result<Information> {
    let n = p_hat.len();
    if h.iter().flatten().any(|v| !v.is_finite()) {
        return Err(BfmError::SingularHessian {
            condition: f64::INFINITY,
        });
    }
    let m = DMatrix::from_fn(n, n, |i, j| h[i][j]);
    // Condition number of the diagonally scaled matrix; raw parameter scales
    // differ by many orders of magnitude.
    let d: Vec<f64> = (0..n).map(|i| m[(i, i)].abs().sqrt().max(f64::MIN_POSITIVE)).collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| m[(i, j)] / (d[i] * d[j]));
    if scaled.iter().any(|v| !v.is_finite()) {
        return Err(BfmError::SingularHessian {
            condition: f64::INFINITY,
        });
    }
    let condition = match scaled.clone().try_svd(false, false, f64::EPSILON, 10_000) {
        Some(svd) => svd.singular_values.max() / svd.singular_values.min(),
        None => f64::INFINITY,
    };
    let Some(chol) = scaled.cholesky() else {
        return Err(BfmError::SingularHessian { condition });
    };
    if !(condition < 1e14) {
        return Err(BfmError::SingularHessian { condition });
    }
    let inv_scaled = chol.inverse();
    let cov: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| inv_scaled[(i, j)] / (d[i] * d[j])).collect())
        .collect();
    let std_devs: Vec<f64> = (0..n).map(|i| cov[i][i].sqrt()).collect();
    let aci = p_hat
        .iter()
        .zip(&std_devs)
        .map(|(p, s)| ((p - 1.96 * s).max(0.0), p + 1.96 * s))
        .collect();
    Ok(Information {
        matrix: h,
        covariance: cov,
        std_devs,
        aci,
        condition_number: condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{bundled, CensoredObservation, Status};
    use crate::distribution::{bfm_sample, BfmParams};

    #[test]
    fn afst_fit_reaches_reference_optimum() {
        let d = bundled("afst").unwrap();
        let fit = fit_bfm(&d, &MleConfig::default()).unwrap();
        assert!(fit.nll <= 53.70, "{fit:?}");
        let reference = [0.00538287, 4.9472349, 0.47005216, 0.04188247];
        for (a, b) in fit.params.iter().zip(reference) {
            assert!((a / b - 1.0).abs() < 0.01, "{:?}", fit.params);
        }
        let g = bfm_nll_grad(&BfmParams::from_slice(&fit.params).unwrap(), &d);
        for (gk, pk) in g.iter().zip(&fit.params) {
            assert!((gk * pk).abs() < 1e-2, "{g:?}");
        }
        assert_eq!(fit.aci[3].0, 0.0);
        for k in 0..4 {
            assert!(fit.aci[k].0 <= fit.params[k] && fit.params[k] <= fit.aci[k].1);
        }
    }

    #[test]
    fn quadratic_information_is_identity() {
        let h = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let info = information_from_hessian(h, &[3.0, 4.0]).unwrap();
        assert!((info.std_devs[0] - 1.0).abs() < 1e-14 && (info.covariance[1][1] - 1.0).abs() < 1e-14);
        assert!((info.aci[0].0 - 1.04).abs() < 1e-12);
        let singular = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!(matches!(
            information_from_hessian(singular, &[1.0, 1.0]),
            Err(BfmError::SingularHessian { .. })
        ));
    }

    #[test]
    fn log_and_natural_spaces_agree() {
        let d = bundled("afst").unwrap();
        let start = vec![vec![0.005, 4.5, 0.5, 0.05]];
        let log = fit_mle(&BfmModel, &d, &start, &MleConfig::default()).unwrap();
        let nat = fit_mle(
            &BfmModel,
            &d,
            &start,
            &MleConfig {
                space: ParamSpace::Natural,
                ..MleConfig::default()
            },
        )
        .unwrap();
        assert!((log.nll - nat.nll).abs() < 1e-6, "{} {}", log.nll, nat.nll);
    }

    #[test]
    fn censored_row_adds_its_chf() {
        let mut d = bundled("afst").unwrap();
        let p = BfmParams::new(0.0054, 4.9472, 0.4701, 0.0419).unwrap();
        let before = bfm_nll(&p, &d);
        d.observations
            .push(CensoredObservation::new(5.0, Status::Censored).unwrap());
        let added = bfm_nll(&p, &d) - before;
        assert!((added - crate::distribution::bfm_chf(5.0, &p).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn parametric_recovery() {
        let truth = BfmParams::new(0.5, 0.8, 2.0, 0.5).unwrap();
        let obs = bfm_sample(&truth, 2000, 7)
            .into_iter()
            .map(|d| CensoredObservation::new(d.time, Status::FailureCauseUnknown).unwrap())
            .collect();
        let d = Dataset::from_observations("sim", obs).unwrap();
        let fit = fit_bfm(&d, &MleConfig::default()).unwrap();
        for (a, b) in fit.params.iter().zip(truth.to_array()) {
            assert!((a / b - 1.0).abs() < 0.10, "{:?}", fit.params);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = bundled("afst").unwrap();
        assert!(fit_mle(&BfmModel, &d, &[], &MleConfig::default()).is_err());
        assert!(fit_mle(&BfmModel, &d, &[vec![1.0, 1.0]], &MleConfig::default()).is_err());
    }
}
