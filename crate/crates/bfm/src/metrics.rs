//! Mean residual life, MTTF, change points of the failure rate and MRL,
//! optimal burn-in, and the scaled total-time-on-test transform.

use serde::{Deserialize, Serialize};

use crate::distribution::BfmParams;
use crate::error::{domain, BfmError, Result};
use crate::specfun::{
    find_root, gen_integro_exponential, guarded_alternating_sum, integrate, SeriesResult, DEFAULT_MAX_TERMS,
    DEFAULT_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MrlMethod {
    Quadrature,
    Series,
}

/// Mean residual life `μ(x̃) = E(X - x̃ | X > x̃)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MrlResult {
    pub value: f64,
    pub method: MrlMethod,
    pub series_detail: Option<SeriesResult>,
}

// chf(x̃ + t) - chf(x̃) without cancellation.
fn chf_increment(p: &BfmParams, x0: f64, t: f64) -> f64 {
    let x1 = x0 + t;
    let z1 = (p.zeta() * x1).powf(p.tau());
    let z0 = if x0 > 0.0 { (p.zeta() * x0).powf(p.tau()) } else { 0.0 };
    let ep = if x0 > 0.0 {
        let dz = z0 * (p.tau() * (t / x0).ln_1p()).exp_m1();
        z0.exp() * dz.exp_m1()
    } else {
        z1.exp_m1()
    };
    let da = if x0 > 0.0 {
        let a0 = p.nu() * x0.powf(p.theta());
        a0 * (p.theta() * (t / x0).ln_1p()).exp_m1() / (1.0 + a0)
    } else {
        p.nu() * x1.powf(p.theta())
    };
    ep + da.ln_1p()
}

// ln(1e14): the integrand exp(-Δchf) is below 1e-14 past this increment.
const TAIL_LOG: f64 = 32.236_191_301_916_64;

fn mrl_quadrature(x0: f64, p: &BfmParams) -> Result<f64> {
    let z0 = if x0 > 0.0 { (p.zeta() * x0).powf(p.tau()) } else { 0.0 };
    if z0 > 700.0 {
        // Deep in the exponential-power tail μ(x̃) = 1/r(x̃) to within 1/(τ z e^z).
        let r = p.frf_unchecked(x0);
        return Ok(if r.is_finite() { 1.0 / r } else { 0.0 });
    }
    let g = |t: f64| chf_increment(p, x0, t) - TAIL_LOG;
    // Start from the hazard's own timescale, then bracket in both directions.
    let r0 = p.frf_unchecked(x0);
    let mut hi = if r0 > 0.0 && r0.is_finite() && x0 > 0.0 {
        TAIL_LOG / r0
    } else {
        (1.0 / p.zeta()).max(x0 * 1e-3)
    }
    .max(f64::MIN_POSITIVE);
    let mut lo = 0.0;
    let mut guard = 0;
    while hi > f64::MIN_POSITIVE && g(0.5 * hi) > 0.0 && guard < 2000 {
        hi *= 0.5;
        guard += 1;
    }
    guard = 0;
    while g(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 2000 {
            return Err(BfmError::Convergence {
                iterations: guard,
                detail: "MRL upper integration bound not found".into(),
            });
        }
    }
    let upper = find_root(g, lo, hi, 1e-10 * hi, 200)?;
    // Geometric breakpoints help the adaptive rule with features near t = 0.
    let mut total = 0.0;
    let mut a = 0.0;
    let mut b = upper * 1e-8;
    // The integrand is at most 1, so the integral is at most `upper`.
    let tol = 1e-13 * upper;
    while a < upper {
        let seg = integrate(|t| (-chf_increment(p, x0, t)).exp(), a, b.min(upper), tol)?;
        total += seg.value;
        a = b.min(upper);
        b *= 10.0;
    }
    Ok(total)
}

fn mrl_series(x0: f64, p: &BfmParams) -> Result<MrlResult> {
    let (nu, theta, tau, zeta) = (p.nu(), p.theta(), p.tau(), p.zeta());
    let lower = (zeta * x0).powf(tau).exp();
    if !lower.is_finite() {
        return domain("series MRL is not computable this far in the tail");
    }
    let mut failure = None;
    let detail = guarded_alternating_sum(
        |l| {
            let l = l as f64;
            let j = (l * theta + 1.0) / tau - 1.0;
            match gen_integro_exponential(j, lower) {
                Ok(i) => {
                    let log_mag = l * nu.ln() - tau.ln() - (l * theta + 1.0) * zeta.ln() + i.ln();
                    let sign = if (l as u64).is_multiple_of(2) { 1.0 } else { -1.0 };
                    sign * log_mag.exp()
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        DEFAULT_TOL,
        DEFAULT_MAX_TERMS,
    );
    if let (Some(e), 0) = (failure, detail.terms_used) {
        return Err(e);
    }
    let scale = std::f64::consts::E / p.sf_unchecked(x0);
    let detail = SeriesResult {
        value: scale * detail.value,
        last_term_magnitude: scale * detail.last_term_magnitude,
        ..detail
    };
    Ok(MrlResult {
        value: detail.value,
        method: MrlMethod::Series,
        series_detail: Some(detail),
    })
}

/// Mean residual life at `x_tilde`.
///
/// The quadrature method integrates the conditional survival up to where it
/// drops below 1e-14; the series method sums the integro-exponential expansion
/// and flags non-convergence in `series_detail`.
pub fn mrl(x_tilde: f64, p: &BfmParams, method: MrlMethod) -> Result<MrlResult> {
    if !(x_tilde >= 0.0) || !x_tilde.is_finite() {
        return domain(format!("MRL needs a finite time ≥ 0, got {x_tilde}"));
    }
    match method {
        MrlMethod::Quadrature => Ok(MrlResult {
            value: mrl_quadrature(x_tilde, p)?,
            method,
            series_detail: None,
        }),
        MrlMethod::Series => mrl_series(x_tilde, p),
    }
}

/// Mean time to failure, `μ(0)`.
pub fn mttf(p: &BfmParams, method: MrlMethod) -> Result<MrlResult> {
    mrl(0.0, p, method)
}

/// Central-difference derivative with one Richardson step.
fn derivative<F: Fn(f64) -> Result<f64>>(f: &F, x: f64, h: f64) -> Result<f64> {
    let d = |h: f64| -> Result<f64> { Ok((f(x + h)? - f(x - h)?) / (2.0 * h)) };
    let d1 = d(h)?;
    let d2 = d(0.5 * h)?;
    Ok((4.0 * d2 - d1) / 3.0)
}

/// `μ'(x) - (μ(x)·r(x) - 1)` for an arbitrary MRL candidate `mu` and failure rate `r`.
pub fn identity_residual<M, R>(mu: M, r: R, x: f64) -> Result<f64>
where
    M: Fn(f64) -> Result<f64>,
    R: Fn(f64) -> Result<f64>,
{
    let h = 1e-3 * x;
    let d = derivative(&mu, x, h)?;
    Ok(d - (mu(x)? * r(x)? - 1.0))
}

/// Residual of the reciprocal identity `μ' = μ·r - 1` for the BFM.
pub fn mrl_frf_identity_residual(x_tilde: f64, p: &BfmParams) -> Result<f64> {
    if !(x_tilde > 0.0) || !x_tilde.is_finite() {
        return domain(format!("identity residual needs x > 0, got {x_tilde}"));
    }
    identity_residual(
        |x| mrl(x, p, MrlMethod::Quadrature).map(|m| m.value),
        |x| crate::distribution::bfm_frf(x, p),
        x_tilde,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeLabel {
    Increasing,
    Decreasing,
    Bathtub,
    InvertedBathtub,
    Ibbfr,
    RollerCoaster,
    Other,
}

/// Turning points of a curve and the shape they imply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePoints {
    pub locations: Vec<f64>,
    pub shape_label: ShapeLabel,
}

fn label_from_signs(signs: &[i8]) -> ShapeLabel {
    match signs {
        [] => ShapeLabel::Other,
        [1] => ShapeLabel::Increasing,
        [-1] => ShapeLabel::Decreasing,
        [-1, 1] => ShapeLabel::Bathtub,
        [1, -1] => ShapeLabel::InvertedBathtub,
        [1, -1, 1] => ShapeLabel::Ibbfr,
        s if s.len() >= 4 => ShapeLabel::RollerCoaster,
        _ => ShapeLabel::Other,
    }
}

/// Locates the turning points of `f` on `(lo, hi)`.
///
/// The sign of the forward difference is tracked over a log-spaced grid of
/// `grid_size` points; differences within 1e-12 relative are treated as flat
/// and skipped. Every sign change is refined by bisection on the sign of a
/// local central difference until the bracket is 1e-6 wide in relative terms.
pub fn find_change_points<F: Fn(f64) -> f64>(f: F, domain_: (f64, f64), grid_size: usize) -> Result<ChangePoints> {
    let (lo, hi) = domain_;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return domain(format!(
            "change-point domain must satisfy 0 < lo < hi, got ({lo}, {hi})"
        ));
    }
    if grid_size < 64 {
        return Err(BfmError::Config(format!("grid_size must be ≥ 64, got {grid_size}")));
    }
    let step = (hi / lo).ln() / (grid_size - 1) as f64;
    let xs: Vec<f64> = (0..grid_size).map(|i| lo * (step * i as f64).exp()).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();

    let mut signs: Vec<i8> = Vec::new();
    let mut locations = Vec::new();
    let mut last_idx = 0usize;
    for i in 0..grid_size - 1 {
        let (a, b) = (ys[i], ys[i + 1]);
        if !a.is_finite() || !b.is_finite() {
            continue;
        }
        let diff = b - a;
        if diff.abs() <= 1e-12 * a.abs().max(b.abs()) {
            continue;
        }
        let s: i8 = if diff > 0.0 { 1 } else { -1 };
        match signs.last() {
            Some(&prev) if prev != s => {
                locations.push(refine_turn(&f, xs[last_idx], xs[i + 1], prev));
                signs.push(s);
            }
            None => signs.push(s),
            _ => {}
        }
        last_idx = i;
    }
    Ok(ChangePoints {
        shape_label: label_from_signs(&signs),
        locations,
    })
}

// Bisects for the point where the local slope leaves sign `before`.
fn refine_turn<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, before: i8) -> f64 {
    let slope = |x: f64| {
        let h = 1e-7 * x;
        f(x + h) - f(x - h)
    };
    while b / a - 1.0 > 1e-6 {
        let m = (a * b).sqrt();
        let s = slope(m);
        let same = if before > 0 { s > 0.0 } else { s < 0.0 };
        if same {
            a = m;
        } else {
            b = m;
        }
    }
    (a * b).sqrt()
}

/// Grid used for BFM change points: `1e-3/ζ … 1e3/ζ`.
pub fn default_domain(p: &BfmParams) -> (f64, f64) {
    let scale = 1.0 / p.zeta();
    (1e-3 * scale, 1e3 * scale)
}

pub fn frf_change_points(p: &BfmParams, grid_size: usize) -> Result<ChangePoints> {
    find_change_points(|x| p.frf_unchecked(x), default_domain(p), grid_size)
}

/// Change points of the MRL over the default grid, truncated at the time
/// where the reliability drops below 1e-300 (beyond it μ ≈ 1/r).
pub fn mrl_change_points(p: &BfmParams, grid_size: usize) -> Result<ChangePoints> {
    let (lo, hi) = default_domain(p);
    let cutoff = crate::distribution::bfm_quantile(1.0 - 1e-15, p).unwrap_or(hi);
    find_change_points(
        |x| mrl(x, p, MrlMethod::Quadrature).map(|m| m.value).unwrap_or(f64::NAN),
        (lo, hi.min(cutoff.max(lo * 10.0))),
        grid_size,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BurnInBoundary {
    Interior,
    AtZero,
    AtUpper,
}

/// Burn-in time maximizing the mean residual life.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurnIn {
    pub b_opt: f64,
    pub mu_star: f64,
    pub boundary: BurnInBoundary,
}

/// Maximizes μ over `[0, search_hi]`: a mixed linear/log grid followed by
/// golden-section refinement around the best grid point.
pub fn optimal_burn_in(p: &BfmParams, search_hi: f64) -> Result<BurnIn> {
    if !(search_hi > 0.0) || !search_hi.is_finite() {
        return domain(format!("burn-in search bound must be > 0, got {search_hi}"));
    }
    let mu = |x: f64| mrl(x, p, MrlMethod::Quadrature).map(|m| m.value);
    let mut grid: Vec<f64> = vec![0.0];
    grid.extend((1..=64).map(|i| search_hi * i as f64 / 64.0));
    grid.extend((0..64).map(|i| search_hi * 10f64.powf(-6.0 + 6.0 * i as f64 / 64.0)));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let values = grid.iter().map(|&x| mu(x)).collect::<Result<Vec<_>>>()?;
    let (best, _) = values.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
    );
    let last = grid.len() - 1;
    if best == 0 || best == last {
        return Ok(BurnIn {
            b_opt: grid[best],
            mu_star: values[best],
            boundary: if best == 0 {
                BurnInBoundary::AtZero
            } else {
                BurnInBoundary::AtUpper
            },
        });
    }
    let (mut a, mut b) = (grid[best - 1], grid[best + 1]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (mu(c)?, mu(d)?);
    for _ in 0..200 {
        if (b - a) <= 1e-9 * b.abs().max(1e-300) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = mu(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = mu(d)?;
        }
    }
    let x = 0.5 * (a + b);
    let fx = mu(x)?;
    let (b_opt, mu_star) = if fx >= values[best] {
        (x, fx)
    } else {
        (grid[best], values[best])
    };
    Ok(BurnIn {
        b_opt,
        mu_star,
        boundary: BurnInBoundary::Interior,
    })
}

/// Scaled TTT curve: points `(i/n, φ(i/n))` for `i = 1..n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TttCurve {
    pub points: Vec<(f64, f64)>,
}

/// `φ(i/n) = [Σ_{j≤i} x₍ⱼ₎ + (n-i)·x₍ᵢ₎] / Σ_j x₍ⱼ₎`.
pub fn scaled_ttt(times: &[f64]) -> Result<TttCurve> {
    if times.is_empty() {
        return domain("TTT transform needs at least one time");
    }
    if let Some(bad) = times.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
        return domain(format!("TTT times must be finite and > 0, got {bad}"));
    }
    let mut x = times.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len();
    let total: f64 = x.iter().sum();
    let mut partial = 0.0;
    let points = x
        .iter()
        .enumerate()
        .map(|(k, &xi)| {
            let i = k + 1;
            partial += xi;
            let phi = if i == n {
                1.0
            } else {
                ((partial + (n - i) as f64 * xi) / total).min(1.0)
            };
            (i as f64 / n as f64, phi)
        })
        .collect();
    Ok(TttCurve { points })
}

/// Failure-rate proxy from a scaled TTT curve: the reciprocal of the secant
/// slope of `φ` over `window` points on either side of each interior point.
/// Since `dφ/du ∝ 1/r(F⁻¹(u))`, its turning points mirror those of the rate.
pub fn ttt_rate_proxy(curve: &TttCurve, window: usize) -> Vec<(f64, f64)> {
    let pts = &curve.points;
    let n = pts.len();
    if window == 0 || n < 2 * window + 1 {
        return Vec::new();
    }
    (window..n - window)
        .filter_map(|i| {
            let (a, b) = (pts[i - window], pts[i + window]);
            let slope = (b.1 - a.1) / (b.0 - a.0);
            (slope > 0.0).then(|| (pts[i].0, 1.0 / slope))
        })
        .collect()
}

/// Minimum retrace, in log units, for a turn of the TTT rate proxy to count.
pub const TTT_TURN_LOG_THRESHOLD: f64 = 0.223_143_551_314_209_7; // ln 1.25

/// Turning points of a noisy positive curve, keeping only moves of at least
/// `log_threshold` in `ln y` away from the running extreme.
pub fn significant_turns(points: &[(f64, f64)], log_threshold: f64) -> ChangePoints {
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mut signs: Vec<i8> = Vec::new();
    let mut locations = Vec::new();
    if y.len() >= 2 {
        let (mut lo, mut hi) = (0usize, 0usize);
        let mut dir: i8 = 0;
        let mut ext = 0usize;
        for i in 1..y.len() {
            match dir {
                0 => {
                    if y[i] < y[lo] {
                        lo = i;
                    }
                    if y[i] > y[hi] {
                        hi = i;
                    }
                    if y[i] - y[lo] >= log_threshold {
                        if y[0] - y[lo] >= log_threshold {
                            signs.push(-1);
                            locations.push(points[lo].0);
                        }
                        signs.push(1);
                        dir = 1;
                        ext = i;
                    } else if y[hi] - y[i] >= log_threshold {
                        if y[hi] - y[0] >= log_threshold {
                            signs.push(1);
                            locations.push(points[hi].0);
                        }
                        signs.push(-1);
                        dir = -1;
                        ext = i;
                    }
                }
                d => {
                    let further = if d > 0 { y[i] > y[ext] } else { y[i] < y[ext] };
                    if further {
                        ext = i;
                    } else if (y[ext] - y[i]).abs() >= log_threshold {
                        locations.push(points[ext].0);
                        dir = -d;
                        signs.push(dir);
                        ext = i;
                    }
                }
            }
        }
    }
    ChangePoints {
        shape_label: label_from_signs(&signs),
        locations,
    }
}

/// Shape of the failure rate read from the TTT proxy (window of about `n/8`
/// points) through [`significant_turns`]. Curves too short for a proxy are
/// labelled `Other` with no turning points.
pub fn ttt_shape(curve: &TttCurve) -> ChangePoints {
    let n = curve.points.len();
    let proxy = ttt_rate_proxy(curve, (n / 8).max(1));
    significant_turns(&proxy, TTT_TURN_LOG_THRESHOLD)
}
