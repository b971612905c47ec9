//! Network fusion: maximal-ratio combining of raw returns at a central node, and
//! per-bin max fusion of soft statistics with its order-statistic threshold.

use num_complex::Complex64;

use crate::array::{CpiReturn, VirtualSteering};
use crate::detector::{
    cfar_threshold, estimate_alpha, marcum_q1, truncation_lag, wald_statistic, DetectorConfig,
    StatisticVector,
};
use crate::error::{Error, Result};
use crate::scenario::{FusionMode, NetworkConfig, RadarParams};

/// Fused statistics in reference-radar bin order.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedCpi {
    pub mode: FusionMode,
    pub statistic: StatisticVector,
    /// Centralized only: `weights_used[l][i]` is radar `i`'s amplitude estimate in reference bin `l`.
    pub weights_used: Vec<Vec<Complex64>>,
}

/// Norm below which the combined return is treated as identically zero.
const XBAR_FLOOR: f64 = 1e-30;

/// MRC fusion. `returns[i]` and `steerings[i]` hold radar `i`'s data indexed by
/// its own bins. For each reference bin the combined return is
/// `sum_i conj(a_i) x_i` with steering `sum_i |a_i|^2 v_i`.
pub fn fuse_centralized(
    returns: &[Vec<CpiReturn>],
    steerings: &[Vec<VirtualSteering>],
    params: &RadarParams,
    net: &NetworkConfig,
    config: &DetectorConfig,
) -> Result<FusedCpi> {
    let (r, l) = (net.n_radars, params.n_bins);
    if returns.len() != r || steerings.len() != r {
        return Err(Error::Dimension { expected: r, got: returns.len().min(steerings.len()) });
    }
    for (x, v) in returns.iter().zip(steerings) {
        if x.len() != l || v.len() != l {
            return Err(Error::Dimension { expected: l, got: x.len().min(v.len()) });
        }
    }
    let n = params.n_samples();
    let lag = truncation_lag(n, params.kappa, config.lag_rule);
    let zero = Complex64::new(0.0, 0.0);
    let mut lambda = Vec::with_capacity(l);
    let mut weights_used = Vec::with_capacity(l);
    for bin in 0..l {
        let mut xbar = vec![zero; n];
        let mut vbar = vec![zero; n];
        let mut w = Vec::with_capacity(r);
        for i in 0..r {
            let q = net.local_bin(i, bin);
            let (x, v) = (&returns[i][q], &steerings[i][q]);
            if x.bin != q || v.bin != q {
                return Err(Error::Validation(format!(
                    "radar {i}: data for bin {} supplied where bin {q} was expected",
                    x.bin
                )));
            }
            let a = estimate_alpha(&x.x, &v.v)?;
            let (ac, a2) = (a.conj(), a.norm_sqr());
            for ((xb, vb), (xi, vi)) in xbar.iter_mut().zip(vbar.iter_mut()).zip(x.x.iter().zip(&v.v)) {
                *xb += ac * xi;
                *vb += a2 * vi;
            }
            w.push(a);
        }
        let xnorm = xbar.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let vnorm = vbar.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let stat = if xnorm < XBAR_FLOOR || vnorm == 0.0 {
            0.0
        } else {
            wald_statistic(&xbar, &vbar, lag)?
        };
        lambda.push(stat);
        weights_used.push(w);
    }
    let cpi = returns[0].first().map_or(0, |x| x.cpi);
    let statistic = StatisticVector::new(lambda, cfar_threshold(params.pfa_nominal)?, cpi)?;
    Ok(FusedCpi { mode: FusionMode::Centralized, statistic, weights_used })
}

/// Per-bin maximum of radar statistics remapped into reference order, thresholded
/// for the maximum of `R` i.i.d. null statistics.
pub fn fuse_decentralized(stats: &[StatisticVector], net: &NetworkConfig, pfa: f64) -> Result<FusedCpi> {
    let r = net.n_radars;
    if stats.len() != r {
        return Err(Error::Dimension { expected: r, got: stats.len() });
    }
    let l = net.bin_mapping[0].len();
    if let Some(bad) = stats.iter().find(|s| s.lambda.len() != l) {
        return Err(Error::Dimension { expected: l, got: bad.lambda.len() });
    }
    let threshold = decentralized_threshold(pfa, r)?;
    let mut lambda = Vec::with_capacity(l);
    let mut pd = Vec::with_capacity(l);
    for bin in 0..l {
        let per: Vec<f64> = (0..r).map(|i| stats[i].lambda[net.local_bin(i, bin)]).collect();
        lambda.push(per.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        pd.push(fused_pd(&per, threshold)?);
    }
    let decisions = lambda.iter().map(|&x| x >= threshold).collect();
    let statistic = StatisticVector { lambda, threshold, decisions, pd_estimates: pd, cpi: stats[0].cpi };
    Ok(FusedCpi { mode: FusionMode::Decentralized, statistic, weights_used: Vec::new() })
}

/// Threshold `lambda` with `1 - (1 - exp(-lambda/2))^R = pfa`.
pub fn decentralized_threshold(pfa: f64, radars: usize) -> Result<f64> {
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(Error::Domain(format!("pfa must lie in (0,1), got {pfa}")));
    }
    if radars == 0 {
        return Err(Error::Domain("need at least one radar".into()));
    }
    if radars == 1 {
        return cfar_threshold(pfa);
    }
    // 1 - (1 - pfa)^(1/R), evaluated without cancellation.
    let tail = -((-pfa).ln_1p() / radars as f64).exp_m1();
    Ok(-2.0 * tail.ln())
}

/// False-alarm probability of the max of `R` i.i.d. central chi-squared(2) statistics,
/// by composite Simpson quadrature of the order-statistic density above `lambda`.
pub fn max_fusion_pfa_quadrature(lambda: f64, radars: usize) -> f64 {
    let r = radars as f64;
    let density = |x: f64| {
        let f = 0.5 * (-x / 2.0).exp();
        let cdf = -(-x / 2.0).exp_m1();
        r * cdf.powf(r - 1.0) * f
    };
    let upper = lambda + 120.0;
    let n = 40_000;
    let h = (upper - lambda) / n as f64;
    let mut s = density(lambda) + density(upper);
    for i in 1..n {
        s += density(lambda + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Threshold found by bisection on the quadrature false-alarm probability.
pub fn decentralized_threshold_quadrature(pfa: f64, radars: usize) -> Result<f64> {
    if !(pfa > 0.0 && pfa < 1.0) || radars == 0 {
        return Err(Error::Domain(format!("invalid pfa {pfa} or radar count {radars}")));
    }
    let (mut lo, mut hi) = (0.0, 2.0 * (-pfa.ln()) + 20.0 + 2.0 * (radars as f64).ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if max_fusion_pfa_quadrature(mid, radars) > pfa {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `1 - prod_i (1 - Q1(sqrt(stat_i), sqrt(threshold)))`.
pub fn fused_pd(stats_per_radar: &[f64], threshold: f64) -> Result<f64> {
    let mut miss = 1.0;
    for &s in stats_per_radar {
        miss *= 1.0 - marcum_q1(s.max(0.0).sqrt(), threshold.max(0.0).sqrt())?;
    }
    Ok(1.0 - miss)
}

/// Instantaneous SNR at one sample of the weighted combination
/// `sum_i conj(w_i) x_i`: `|sum conj(w_i) a_i v_i|^2 / sum |w_i|^2 g_i`, where `v_i` is
/// radar `i`'s steering entry and `g_i` its disturbance variance at that sample.
pub fn combined_snr(weights: &[Complex64], alphas: &[Complex64], v: &[Complex64], gamma: &[f64]) -> f64 {
    let num: Complex64 = weights.iter().zip(alphas).zip(v).map(|((w, a), vi)| w.conj() * a * vi).sum();
    let den: f64 = weights.iter().zip(gamma).map(|(w, g)| w.norm_sqr() * g).sum();
    num.norm_sqr() / den
}

/// Upper bound `sum_i |a_i v_i|^2 / g_i` reached by maximal-ratio weights.
pub fn mrc_snr_bound(alphas: &[Complex64], v: &[Complex64], gamma: &[f64]) -> f64 {
    alphas.iter().zip(v).zip(gamma).map(|((a, vi), g)| (a * vi).norm_sqr() / g).sum()
}
