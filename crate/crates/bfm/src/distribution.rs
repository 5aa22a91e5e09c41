//! The bi-failure-modes (BFM) lifetime: the minimum of a Dhillon lifetime with
//! survival `1/(νx^θ+1)` and an exponential-power lifetime with survival
//! `exp(1 - e^{(ζx)^τ})`.
//!
//! Everything that can overflow is evaluated in log space. Random generation
//! uses [`rand_chacha::ChaCha8Rng`] seeded with `seed_from_u64`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Open01;
use serde::{Deserialize, Serialize};

use crate::error::{domain, BfmError, Result};
use crate::specfun::find_root;

/// Parameters `(ν, θ, τ, ζ)`, all finite and strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BfmParams {
    nu: f64,
    theta: f64,
    tau: f64,
    zeta: f64,
}

fn check_positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(BfmError::InvalidParameter {
            name,
            value,
            reason: "must be finite and > 0",
        })
    }
}

impl BfmParams {
    pub fn new(nu: f64, theta: f64, tau: f64, zeta: f64) -> Result<Self> {
        Ok(Self {
            nu: check_positive("nu", nu)?,
            theta: check_positive("theta", theta)?,
            tau: check_positive("tau", tau)?,
            zeta: check_positive("zeta", zeta)?,
        })
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        match v {
            [nu, theta, tau, zeta] => Self::new(*nu, *theta, *tau, *zeta),
            _ => Err(BfmError::Validation(format!("expected 4 parameters, got {}", v.len()))),
        }
    }

    /// Skips validation; callers guarantee or tolerate non-positive values.
    pub(crate) fn new_unchecked(v: [f64; 4]) -> Self {
        Self {
            nu: v[0],
            theta: v[1],
            tau: v[2],
            zeta: v[3],
        }
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.nu, self.theta, self.tau, self.zeta]
    }

    /// `νx^θ`
    fn dh(&self, x: f64) -> f64 {
        self.nu * x.powf(self.theta)
    }

    /// `(ζx)^τ`
    fn ep(&self, x: f64) -> f64 {
        (self.zeta * x).powf(self.tau)
    }

    pub(crate) fn log_sf_unchecked(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        -self.chf_unchecked(x)
    }

    pub(crate) fn chf_unchecked(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        self.ep(x).exp_m1() + self.dh(x).ln_1p()
    }

    pub(crate) fn sf_unchecked(&self, x: f64) -> f64 {
        self.log_sf_unchecked(x).exp()
    }

    pub(crate) fn dhillon_frf_unchecked(&self, x: f64) -> f64 {
        let a = self.dh(x);
        if a.is_infinite() {
            return self.theta / x;
        }
        self.theta / x * (a / (1.0 + a))
    }

    pub(crate) fn exppower_frf_unchecked(&self, x: f64) -> f64 {
        let z = self.ep(x);
        self.tau / x * z * z.exp()
    }

    pub(crate) fn frf_unchecked(&self, x: f64) -> f64 {
        self.dhillon_frf_unchecked(x) + self.exppower_frf_unchecked(x)
    }

    pub(crate) fn log_frf_unchecked(&self, x: f64) -> f64 {
        let lx = x.ln();
        let log_a = self.nu.ln() + self.theta * lx;
        let log_r1 = self.theta.ln() - lx + log_a - log_a.exp().ln_1p();
        let log_z = self.tau * (self.zeta.ln() + lx);
        let log_r2 = self.tau.ln() - lx + log_z + log_z.exp();
        log_add_exp(log_r1, log_r2)
    }

    pub(crate) fn pdf_unchecked(&self, x: f64) -> f64 {
        let r = self.frf_unchecked(x);
        let s = self.sf_unchecked(x);
        if r.is_finite() {
            r * s
        } else {
            (self.log_frf_unchecked(x) + self.log_sf_unchecked(x)).exp()
        }
    }
}

impl TryFrom<[f64; 4]> for BfmParams {
    type Error = BfmError;
    fn try_from(v: [f64; 4]) -> Result<Self> {
        Self::from_slice(&v)
    }
}

impl From<BfmParams> for [f64; 4] {
    fn from(p: BfmParams) -> Self {
        p.to_array()
    }
}

pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    if m.is_infinite() {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Failure cause: the Dhillon component (1) or the exponential-power one (2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CauseLabel {
    Cause1,
    Cause2,
}

/// One simulated lifetime and the component that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimeDraw {
    pub time: f64,
    pub cause: CauseLabel,
}

fn check_positive_x(x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        domain(format!("time must be finite and > 0, got {x}"))
    }
}

fn check_nonneg_x(x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        domain(format!("time must be finite and ≥ 0, got {x}"))
    }
}

fn check_unit(u: f64) -> Result<()> {
    if u > 0.0 && u < 1.0 {
        Ok(())
    } else {
        domain(format!("probability must lie in (0, 1), got {u}"))
    }
}

/// Density `w(x) = r(x)·sf(x)`.
pub fn bfm_pdf(x: f64, p: &BfmParams) -> Result<f64> {
    check_positive_x(x)?;
    Ok(p.pdf_unchecked(x))
}

/// Log density.
pub fn bfm_log_pdf(x: f64, p: &BfmParams) -> Result<f64> {
    check_positive_x(x)?;
    Ok(p.log_frf_unchecked(x) + p.log_sf_unchecked(x))
}

/// Reliability `exp(1 - e^{(ζx)^τ}) / (νx^θ + 1)`.
pub fn bfm_sf(x: f64, p: &BfmParams) -> Result<f64> {
    check_nonneg_x(x)?;
    Ok(p.sf_unchecked(x))
}

/// Log reliability; finite far beyond the point where the reliability underflows.
pub fn bfm_log_sf(x: f64, p: &BfmParams) -> Result<f64> {
    check_nonneg_x(x)?;
    Ok(p.log_sf_unchecked(x))
}

pub fn bfm_cdf(x: f64, p: &BfmParams) -> Result<f64> {
    check_nonneg_x(x)?;
    Ok(1.0 - p.sf_unchecked(x))
}

/// Failure rate `r₁(x) + r₂(x)`.
pub fn bfm_frf(x: f64, p: &BfmParams) -> Result<f64> {
    check_positive_x(x)?;
    Ok(p.frf_unchecked(x))
}

/// Cumulative failure rate `e^{(ζx)^τ} + ln(νx^θ + 1) - 1`.
pub fn bfm_chf(x: f64, p: &BfmParams) -> Result<f64> {
    check_nonneg_x(x)?;
    Ok(p.chf_unchecked(x))
}

/// Dhillon failure rate `θνx^{θ-1}/(νx^θ+1)`.
pub fn dhillon_frf(x: f64, p: &BfmParams) -> Result<f64> {
    check_positive_x(x)?;
    Ok(p.dhillon_frf_unchecked(x))
}

/// Exponential-power failure rate `τζ(ζx)^{τ-1} e^{(ζx)^τ}`.
pub fn exppower_frf(x: f64, p: &BfmParams) -> Result<f64> {
    check_positive_x(x)?;
    Ok(p.exppower_frf_unchecked(x))
}

pub fn dhillon_cdf(x: f64, nu: f64, theta: f64) -> f64 {
    let a = nu * x.powf(theta);
    a / (1.0 + a)
}

pub fn exppower_cdf(x: f64, tau: f64, zeta: f64) -> f64 {
    -(-(zeta * x).powf(tau).exp_m1()).exp_m1()
}

/// Inverse Dhillon CDF: `(u/((1-u)ν))^{1/θ}`.
pub fn dhillon_quantile(u: f64, nu: f64, theta: f64) -> Result<f64> {
    check_unit(u)?;
    check_positive("nu", nu)?;
    check_positive("theta", theta)?;
    Ok((u / ((1.0 - u) * nu)).powf(1.0 / theta))
}

/// Inverse exponential-power CDF: `(ln(1 - ln(1-u)))^{1/τ} / ζ`.
pub fn exppower_quantile(u: f64, tau: f64, zeta: f64) -> Result<f64> {
    check_unit(u)?;
    check_positive("tau", tau)?;
    check_positive("zeta", zeta)?;
    Ok((-(-u).ln_1p()).ln_1p().powf(1.0 / tau) / zeta)
}

/// Inverse BFM CDF, solving `chf(x) = -ln(1-u)` in log-time.
pub fn bfm_quantile(u: f64, p: &BfmParams) -> Result<f64> {
    check_unit(u)?;
    let target = -(-u).ln_1p();
    let g = |s: f64| p.chf_unchecked(s.exp()) - target;
    let step = std::f64::consts::LN_2;
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    if g(0.0) < 0.0 {
        while g(hi) < 0.0 {
            lo = hi;
            hi += step;
            if hi > 709.0 {
                return Err(BfmError::Convergence {
                    iterations: 1023,
                    detail: format!("quantile bracket [{}, ∞)", lo.exp()),
                });
            }
        }
    } else {
        while g(lo) >= 0.0 {
            hi = lo;
            lo -= step;
            if lo < -690.0 {
                return Ok(lo.exp());
            }
        }
    }
    let s = find_root(g, lo, hi, 1e-13, 300)?;
    Ok(s.exp())
}

/// Draws `count` lifetimes with cause labels from a ChaCha8 stream seeded by `seed`.
pub fn bfm_sample(p: &BfmParams, count: usize, seed: u64) -> Vec<LifetimeDraw> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    bfm_sample_with(p, count, &mut rng)
}

/// As [`bfm_sample`], drawing from a caller-owned generator.
pub fn bfm_sample_with<R: Rng + ?Sized>(p: &BfmParams, count: usize, rng: &mut R) -> Vec<LifetimeDraw> {
    (0..count)
        .map(|_| {
            let u1: f64 = rng.sample(Open01);
            let u2: f64 = rng.sample(Open01);
            let x1 = (u1 / ((1.0 - u1) * p.nu)).powf(1.0 / p.theta);
            let x2 = (-(-u2).ln_1p()).ln_1p().powf(1.0 / p.tau) / p.zeta;
            if x1 <= x2 {
                LifetimeDraw {
                    time: x1,
                    cause: CauseLabel::Cause1,
                }
            } else {
                LifetimeDraw {
                    time: x2,
                    cause: CauseLabel::Cause2,
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn efst() -> BfmParams {
        BfmParams::new(0.0127, 0.6124, 3.5770, 0.0026).unwrap()
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(BfmParams::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(BfmParams::new(1.0, f64::NAN, 1.0, 1.0).is_err());
        assert!(BfmParams::new(1.0, 1.0, f64::INFINITY, 1.0).is_err());
        assert!(BfmParams::new(1.0, 1.0, 1.0, -2.0).is_err());
        assert!(BfmParams::from_slice(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn serde_round_trip_validates() {
        let p = efst();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[0.0127,0.6124,3.577,0.0026]");
        assert_eq!(serde_json::from_str::<BfmParams>(&s).unwrap(), p);
        assert!(serde_json::from_str::<BfmParams>("[1,1,1,0]").is_err());
    }

    #[test]
    fn domain_errors() {
        let p = efst();
        assert!(bfm_pdf(0.0, &p).is_err());
        assert!(bfm_frf(-1.0, &p).is_err());
        assert!(bfm_sf(-1.0, &p).is_err());
        assert!(bfm_chf(f64::NAN, &p).is_err());
        assert!(dhillon_quantile(1.0, 1.0, 1.0).is_err());
        assert!(exppower_quantile(0.0, 1.0, 1.0).is_err());
        assert!(bfm_quantile(1.0, &p).is_err());
    }

    #[test]
    fn sf_at_zero_and_far_tail() {
        let p = efst();
        assert_eq!(bfm_sf(0.0, &p).unwrap(), 1.0);
        assert_eq!(bfm_chf(0.0, &p).unwrap(), 0.0);
        assert_eq!(bfm_cdf(0.0, &p).unwrap(), 0.0);
        let far = 2000.0;
        assert!(bfm_chf(far, &p).unwrap() > 50.0);
        assert!(bfm_sf(far, &p).unwrap() < 1e-20);
        assert_eq!(bfm_sf(1e6, &p).unwrap(), 0.0);
        assert_eq!(bfm_log_sf(1e6, &p).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn efst_point_values() {
        // Reference values from a 50-digit evaluation of the closed forms.
        let p = efst();
        assert_relative_eq!(
            bfm_sf(100.0, &p).unwrap(),
            0.817_667_889_285_864_2,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            bfm_pdf(100.0, &p).unwrap(),
            0.001_117_874_023_663_688_7,
            max_relative = 1e-12
        );
    }

    #[test]
    fn hazard_identity_unit_params() {
        let p = BfmParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        for x in [0.1, 1.0, 10.0] {
            let lhs = bfm_pdf(x, &p).unwrap();
            let rhs = bfm_frf(x, &p).unwrap() * bfm_sf(x, &p).unwrap();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
    }

    #[test]
    fn frf_additivity() {
        let p = BfmParams::new(0.013, 0.61, 3.58, 0.0026).unwrap();
        for x in [0.5, 5.0, 50.0] {
            let total = bfm_frf(x, &p).unwrap();
            assert_eq!(total, dhillon_frf(x, &p).unwrap() + exppower_frf(x, &p).unwrap());
        }
    }

    #[test]
    fn vanishing_dhillon_component() {
        let p = BfmParams::new(1e-300, 1.3, 2.0, 0.1).unwrap();
        for x in [0.5, 5.0, 50.0] {
            assert_relative_eq!(
                bfm_frf(x, &p).unwrap(),
                exppower_frf(x, &p).unwrap(),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn frf_matches_log_sf_derivative() {
        let p = efst();
        for x in [1.0, 10.0] {
            let h = 1e-5 * x;
            let d = -(bfm_log_sf(x + h, &p).unwrap() - bfm_log_sf(x - h, &p).unwrap()) / (2.0 * h);
            assert_relative_eq!(d, bfm_frf(x, &p).unwrap(), max_relative = 1e-6);
        }
    }

    #[test]
    fn chf_matches_integrated_frf() {
        let p = BfmParams::new(0.5, 0.05, 0.25, 0.8).unwrap();
        // x = v^20 turns both power singularities at 0 into smooth integrands.
        let top = 10f64.powf(1.0 / 20.0);
        let q = crate::specfun::integrate(
            |v: f64| {
                if v == 0.0 {
                    return 0.0;
                }
                let x = v.powi(20);
                p.frf_unchecked(x) * 20.0 * v.powi(19)
            },
            0.0,
            top,
            1e-12,
        )
        .unwrap();
        assert!((q.value - bfm_chf(10.0, &p).unwrap()).abs() <= 1e-7);
    }

    #[test]
    fn component_quantiles() {
        assert_relative_eq!(dhillon_quantile(0.5, 1.0, 1.0).unwrap(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(dhillon_quantile(0.9, 0.01, 2.0).unwrap(), 30.0, max_relative = 1e-13);
        let u = 1.0 - (1.0 - std::f64::consts::E).exp();
        assert_relative_eq!(exppower_quantile(u, 1.0, 1.0).unwrap(), 1.0, max_relative = 1e-12);
        // Root-solve oracle for exp(1 - e^{(x/10)^2}) = 0.5.
        let root = find_root(|x| exppower_cdf(x, 2.0, 0.1) - 0.5, 0.0, 100.0, 1e-14, 200).unwrap();
        assert_relative_eq!(exppower_quantile(0.5, 2.0, 0.1).unwrap(), root, max_relative = 1e-12);
        assert_relative_eq!(root, 7.256_645_465_633_859, max_relative = 1e-12);
    }

    #[test]
    fn bfm_quantile_round_trip_and_ordering() {
        let params = [
            efst(),
            BfmParams::new(1.0, 1.0, 1.0, 1.0).unwrap(),
            BfmParams::new(0.5, 0.05, 0.25, 0.8).unwrap(),
        ];
        for p in params {
            for i in 1..100 {
                let u = i as f64 / 100.0;
                let x = bfm_quantile(u, &p).unwrap();
                assert!((bfm_cdf(x, &p).unwrap() - u).abs() < 1e-9, "u={u} p={p:?}");
                let bound = dhillon_quantile(u, p.nu(), p.theta())
                    .unwrap()
                    .min(exppower_quantile(u, p.tau(), p.zeta()).unwrap());
                assert!(x <= bound * (1.0 + 1e-12));
            }
        }
        let p = BfmParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        assert!((bfm_cdf(bfm_quantile(0.5, &p).unwrap(), &p).unwrap() - 0.5).abs() < 1e-9);
        assert!(bfm_quantile(1e-12, &p).unwrap() < 1e-10);
    }

    #[test]
    fn sampler_is_deterministic() {
        let p = efst();
        assert_eq!(bfm_sample(&p, 100, 7), bfm_sample(&p, 100, 7));
        assert_ne!(bfm_sample(&p, 100, 7), bfm_sample(&p, 100, 8));
    }

    #[test]
    fn sampler_matches_cdf() {
        let p = efst();
        let mut t: Vec<f64> = bfm_sample(&p, 100_000, 11).iter().map(|d| d.time).collect();
        t.sort_by(f64::total_cmp);
        let n = t.len() as f64;
        let ks = t
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let c = bfm_cdf(x, &p).unwrap();
                (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "ks = {ks}");
    }

    #[test]
    fn sampler_cause_frequency() {
        let p = BfmParams::new(0.01, 2.0, 0.6, 0.6).unwrap();
        let draws = bfm_sample(&p, 1_000_000, 3);
        let f1 = draws.iter().filter(|d| d.cause == CauseLabel::Cause1).count() as f64 / 1e6;
        assert!((f1 - 0.0158).abs() <= 0.003, "f1 = {f1}");
    }

    fn params_strategy() -> impl Strategy<Value = BfmParams> {
        (-5.0f64..1.0, -1.0f64..1.5, -1.0f64..1.5, -4.0f64..1.0).prop_map(|(a, b, c, d)| {
            BfmParams::new(10f64.powf(a), 10f64.powf(b), 10f64.powf(c), 10f64.powf(d)).unwrap()
        })
    }

    proptest! {
        #[test]
        fn sf_is_exp_neg_chf(p in params_strategy(), lx in -3.0f64..3.0) {
            let x = 10f64.powf(lx);
            let sf = bfm_sf(x, &p).unwrap();
            let e = (-bfm_chf(x, &p).unwrap()).exp();
            prop_assert!((sf - e).abs() <= 1e-12 * e.max(f64::MIN_POSITIVE));
            let pdf = bfm_pdf(x, &p).unwrap();
            let prod = bfm_frf(x, &p).unwrap() * sf;
            if prod.is_finite() {
                prop_assert!((pdf - prod).abs() <= 1e-12 * prod.abs());
            } else {
                prop_assert_eq!(pdf, 0.0);
            }
            prop_assert!((bfm_cdf(x, &p).unwrap() + sf - 1.0).abs() <= f64::EPSILON);
        }

        #[test]
        fn sf_monotone(p in params_strategy()) {
            let mut prev_sf = 1.0;
            let mut prev_chf = 0.0;
            for i in 0..200 {
                let x = 10f64.powf(-4.0 + 8.0 * i as f64 / 199.0);
                let s = bfm_sf(x, &p).unwrap();
                let c = bfm_chf(x, &p).unwrap();
                prop_assert!(s <= prev_sf);
                prop_assert!(c >= prev_chf);
                prev_sf = s;
                prev_chf = c;
            }
        }

        #[test]
        fn quantile_round_trip(p in params_strategy(), u in 0.001f64..0.999) {
            let x = bfm_quantile(u, &p).unwrap();
            prop_assert!((bfm_cdf(x, &p).unwrap() - u).abs() < 1e-9);
        }
    }
}
