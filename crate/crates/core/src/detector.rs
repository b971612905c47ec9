//! Robust Wald-type CFAR detector: least-squares amplitude, single-snapshot
//! banded covariance, the statistic `2|v^H x|^2 / (v^H G v)`, chi-squared
//! thresholding and Marcum-Q detection probability.

use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;

use crate::array::{CpiReturn, VirtualSteering};
use crate::error::{Error, Result};
use crate::scenario::RadarParams;

/// How the truncation lag is derived from `N` and `kappa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LagRule {
    /// `l = ceil(N^(1 - kappa))`.
    Complement,
    /// `l = ceil(N^min(kappa, cap))`.
    Capped { cap: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub lag_rule: LagRule,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig { lag_rule: LagRule::Complement }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if let LagRule::Capped { cap } = self.lag_rule {
            if !(cap > 0.0 && cap < 1.0) {
                return Err(Error::Validation(format!("kappa_cap must lie in (0,1), got {cap}")));
            }
        }
        Ok(())
    }
}

/// Truncation lag for a length-`n` snapshot, clamped to `n - 1`.
pub fn truncation_lag(n: usize, kappa: f64, rule: LagRule) -> usize {
    let exponent = match rule {
        LagRule::Complement => 1.0 - kappa,
        LagRule::Capped { cap } => kappa.min(cap),
    };
    let l = (n as f64).powf(exponent).ceil() as usize;
    l.min(n.saturating_sub(1))
}

/// `(v^H x) / (v^H v)`.
pub fn estimate_alpha(x: &[Complex64], v: &[Complex64]) -> Result<Complex64> {
    if x.len() != v.len() {
        return Err(Error::Dimension { expected: v.len(), got: x.len() });
    }
    let vv: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    if vv == 0.0 {
        return Err(Error::Domain("zero steering vector".into()));
    }
    Ok(inner(v, x) / vv)
}

/// `a^H b`.
fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Hermitian band matrix stored by upper diagonals: `diagonals[d][i]` is entry `(i, i + d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedCovariance {
    pub diagonals: Vec<Vec<Complex64>>,
    pub n: usize,
    pub lag: usize,
}

impl BandedCovariance {
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let zero = Complex64::new(0.0, 0.0);
        if j >= i {
            let d = j - i;
            if d > self.lag { zero } else { self.diagonals[d][i] }
        } else {
            let d = i - j;
            if d > self.lag { zero } else { self.diagonals[d][j].conj() }
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    /// `v^H G v`, walking the stored diagonals only.
    pub fn quadratic_form(&self, v: &[Complex64]) -> f64 {
        let mut q: f64 = (0..self.n).map(|i| self.diagonals[0][i].re * v[i].norm_sqr()).sum();
        for d in 1..=self.lag {
            let s: Complex64 =
                (0..self.n - d).map(|i| v[i].conj() * self.diagonals[d][i] * v[i + d]).sum();
            q += 2.0 * s.re;
        }
        q
    }
}

/// Entries `c_i c_j^*` within `lag` of the diagonal, zero outside.
pub fn banded_covariance(residual: &[Complex64], lag: usize) -> Result<BandedCovariance> {
    let n = residual.len();
    if lag >= n {
        return Err(Error::Domain(format!("lag {lag} >= N = {n}")));
    }
    let diagonals = (0..=lag)
        .map(|d| (0..n - d).map(|i| residual[i] * residual[i + d].conj()).collect())
        .collect();
    Ok(BandedCovariance { diagonals, n, lag })
}

static WALD_CALLS: AtomicU64 = AtomicU64::new(0);
static WALD_FLOORED: AtomicU64 = AtomicU64::new(0);

/// Process-wide `(calls, floor engagements)` of `wald_statistic`.
pub fn floor_counters() -> (u64, u64) {
    (WALD_CALLS.load(Ordering::Relaxed), WALD_FLOORED.load(Ordering::Relaxed))
}

/// Relative floor on the quadratic form, scaled by `||v||^2 mean|c|^2`.
const Q_FLOOR: f64 = 1e-12;

/// Wald statistic with a banded quadratic form of bandwidth `lag`, computed in
/// `O(N * lag)` without forming the covariance.
pub fn wald_statistic(x: &[Complex64], v: &[Complex64], lag: usize) -> Result<f64> {
    let n = x.len();
    if n < 2 {
        return Err(Error::Domain(format!("need N >= 2, got {n}")));
    }
    if lag >= n {
        return Err(Error::Domain(format!("lag {lag} >= N = {n}")));
    }
    let alpha = estimate_alpha(x, v)?;
    let num = inner(v, x).norm_sqr();
    if num == 0.0 {
        return Ok(0.0);
    }
    let vv: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    // y_i = v_i^* c_i, so that v^H G v = sum_{|i-j|<=l} y_i y_j^*.
    let mut cc = 0.0;
    let y: Vec<Complex64> = x
        .iter()
        .zip(v)
        .map(|(xi, vi)| {
            let c = xi - alpha * vi;
            cc += c.norm_sqr();
            vi.conj() * c
        })
        .collect();
    let mut q: f64 = y.iter().map(|z| z.norm_sqr()).sum();
    for d in 1..=lag {
        let s: Complex64 = y[..n - d].iter().zip(&y[d..]).map(|(a, b)| a * b.conj()).sum();
        q += 2.0 * s.re;
    }
    let floor = Q_FLOOR * vv * cc / n as f64;
    let calls = WALD_CALLS.fetch_add(1, Ordering::Relaxed) + 1;
    let denom = if q > floor && q.is_finite() {
        q
    } else {
        let floored = WALD_FLOORED.fetch_add(1, Ordering::Relaxed) + 1;
        if floored * 1000 > calls && floored.is_power_of_two() {
            log::warn!(
                "banded quadratic form floored in {floored} of {calls} statistics; \
                 disturbance may violate the decay assumption"
            );
        }
        if floor > 0.0 { floor } else { f64::MIN_POSITIVE }
    };
    Ok(2.0 * num / denom)
}

/// Inverse survival of the central chi-squared law with two degrees of freedom.
pub fn cfar_threshold(pfa: f64) -> Result<f64> {
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(Error::Domain(format!("pfa must lie in (0,1), got {pfa}")));
    }
    Ok(-2.0 * pfa.ln())
}

/// `exp(-x) I_k(x)` for `k = 0..=kmax` by Miller's backward recurrence,
/// normalized with `exp(x) = I_0 + 2 sum_{k>=1} I_k`.
fn scaled_bessel_i(x: f64, kmax: usize) -> Vec<f64> {
    if x == 0.0 {
        let mut out = vec![0.0; kmax + 1];
        out[0] = 1.0;
        return out;
    }
    if x < 1e-8 {
        // Leading term (x/2)^k / k!; the next one is smaller by x^2/4.
        let mut out = Vec::with_capacity(kmax + 1);
        let mut t = (-x).exp();
        for k in 0..=kmax {
            out.push(t);
            t *= x / 2.0 / (k + 1) as f64;
        }
        return out;
    }
    // Scaled I_k(x) falls off like exp(-k^2 / 2x), so the normalizing sum needs
    // about 9 sqrt(x) terms beyond the last order requested.
    let start = kmax + 30 + (9.0 * x.sqrt()) as usize;
    let mut vals = vec![0.0; start + 2];
    vals[start] = 1e-280;
    for k in (1..=start).rev() {
        vals[k - 1] = vals[k + 1] + (2.0 * k as f64 / x) * vals[k];
        if vals[k - 1] > 1e250 {
            for v in vals[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let norm = vals[0] + 2.0 * vals[1..=start].iter().sum::<f64>();
    vals.truncate(kmax + 1);
    for v in &mut vals {
        *v /= norm;
    }
    vals
}

/// First-order Marcum Q function.
pub fn marcum_q1(a: f64, b: f64) -> Result<f64> {
    if a.is_nan() || b.is_nan() || a < 0.0 || b < 0.0 || (a.is_infinite() && b.is_infinite()) {
        return Err(Error::Domain(format!("marcum_q1 needs a, b >= 0, got ({a}, {b})")));
    }
    if b == 0.0 || a.is_infinite() {
        return Ok(1.0);
    }
    if b.is_infinite() {
        return Ok(0.0);
    }
    if a == 0.0 {
        return Ok((-b * b / 2.0).exp());
    }
    let gap = (a - b) * (a - b) / 2.0;
    if gap > 745.0 {
        return Ok(if a > b { 1.0 } else { 0.0 });
    }
    let x = a * b;
    if a == b {
        return Ok(0.5 * (1.0 + scaled_bessel_i(x, 0)[0]));
    }
    let kmax = (9.0 * x.sqrt()) as usize + 40;
    let ik = scaled_bessel_i(x, kmax);
    let env = (-gap).exp();
    let (ratio, first) = if a < b { (a / b, 0) } else { (b / a, 1) };
    let mut sum = 0.0;
    let mut pw = if first == 0 { 1.0 } else { ratio };
    for &i in &ik[first..] {
        let term = pw * i;
        sum += term;
        if term < 1e-16 * sum && pw < 1e-16 {
            break;
        }
        pw *= ratio;
    }
    let q = if a < b { env * sum } else { 1.0 - env * sum };
    Ok(q.clamp(0.0, 1.0))
}

/// `Q1(sqrt(lambda_stat), sqrt(threshold))`.
pub fn estimate_pd(lambda_stat: f64, threshold: f64) -> Result<f64> {
    marcum_q1(lambda_stat.max(0.0).sqrt(), threshold.max(0.0).sqrt())
}

/// Per-bin statistics, decisions and detection-probability estimates for one CPI.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticVector {
    pub lambda: Vec<f64>,
    pub threshold: f64,
    pub decisions: Vec<bool>,
    pub pd_estimates: Vec<f64>,
    pub cpi: usize,
}

impl StatisticVector {
    pub fn new(lambda: Vec<f64>, threshold: f64, cpi: usize) -> Result<Self> {
        let decisions = lambda.iter().map(|&l| l >= threshold).collect();
        let pd_estimates = lambda.iter().map(|&l| estimate_pd(l, threshold)).collect::<Result<_>>()?;
        Ok(StatisticVector { lambda, threshold, decisions, pd_estimates, cpi })
    }

    pub fn detected_bins(&self) -> Vec<usize> {
        self.decisions.iter().enumerate().filter(|(_, &d)| d).map(|(l, _)| l).collect()
    }
}

/// Wald statistic in every bin of one radar and one CPI.
pub fn detect_cpi(
    returns: &[CpiReturn],
    steerings: &[VirtualSteering],
    params: &RadarParams,
    config: &DetectorConfig,
) -> Result<StatisticVector> {
    let l = params.n_bins;
    if returns.len() != l || steerings.len() != l {
        return Err(Error::Dimension { expected: l, got: returns.len().min(steerings.len()) });
    }
    let lag = truncation_lag(params.n_samples(), params.kappa, config.lag_rule);
    let lambda = returns
        .iter()
        .zip(steerings)
        .map(|(r, s)| wald_statistic(&r.x, &s.v, lag))
        .collect::<Result<Vec<_>>>()?;
    let cpi = returns.first().map_or(0, |r| r.cpi);
    StatisticVector::new(lambda, cfar_threshold(params.pfa_nominal)?, cpi)
}
