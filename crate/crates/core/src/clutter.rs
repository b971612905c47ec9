//! Two-dimensional AR disturbance over the (spatial channel, pulse) grid with
//! compound-Gaussian innovations, its vectorization and decay diagnostics.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Distribution of the driving noise `eps[n,k]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Innovation {
    ComplexGaussian { sigma2: f64 },
    /// Compound-Gaussian complex t with `nu` degrees of freedom and scale `sigma2`.
    ComplexT { nu: f64, sigma2: f64 },
}

impl Innovation {
    pub fn sigma2(&self) -> f64 {
        match *self {
            Innovation::ComplexGaussian { sigma2 } | Innovation::ComplexT { sigma2, .. } => sigma2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.sigma2();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Validation(format!("innovation sigma2 must be positive, got {s}")));
        }
        if let Innovation::ComplexT { nu, .. } = *self {
            if !(nu > 1.0) {
                return Err(Error::Domain(format!("complex t needs nu > 1, got {nu}")));
            }
        }
        Ok(())
    }

    pub fn sampler(&self) -> Result<InnovationSampler> {
        self.validate()?;
        let texture = match *self {
            Innovation::ComplexGaussian { .. } => None,
            Innovation::ComplexT { nu, .. } => Some((
                nu,
                ChiSquared::new(nu).map_err(|e| Error::Domain(e.to_string()))?,
            )),
        };
        Ok(InnovationSampler { scale: (self.sigma2() / 2.0).sqrt(), texture })
    }
}

/// Pre-built sampler for one innovation law.
#[derive(Debug, Clone)]
pub struct InnovationSampler {
    scale: f64,
    texture: Option<(f64, ChiSquared<f64>)>,
}

impl InnovationSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let g = Complex64::new(re, im) * self.scale;
        match &self.texture {
            None => g,
            Some((nu, chi)) => g * (nu / chi.sample(rng)).sqrt(),
        }
    }
}

/// One complex-t draw: `g * sqrt(nu / q)` with `g ~ CN(0, sigma2)` and `q ~ chi2(nu)`.
pub fn sample_complex_t<R: Rng + ?Sized>(nu: f64, sigma2: f64, rng: &mut R) -> Result<Complex64> {
    Ok(Innovation::ComplexT { nu, sigma2 }.sampler()?.sample(rng))
}

/// Quarter-plane AR model `c[n,k] = sum_{i=1..p} sum_{j=1..q} phi[i,j] c[n-i,k-j] + eps[n,k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ar2dModel {
    /// Row-major `p x q` coefficients; entry `(i-1)*q + (j-1)` is `phi[i,j]`.
    pub phi: Vec<Complex64>,
    pub p: usize,
    pub q: usize,
    pub innovation: Innovation,
    /// Factors `(phi_s, phi_t)` when `phi = phi_s phi_t^T`.
    separable: Option<(Vec<Complex64>, Vec<Complex64>)>,
}

/// Points on the unit circle swept by the stability check.
const BICIRCLE_GRID: usize = 1024;

impl Ar2dModel {
    pub fn new(p: usize, q: usize, phi: Vec<Complex64>, innovation: Innovation) -> Result<Self> {
        if phi.len() != p * q {
            return Err(Error::Dimension { expected: p * q, got: phi.len() });
        }
        let m = Ar2dModel { phi, p, q, innovation, separable: None };
        m.check()?;
        Ok(m)
    }

    /// `phi = phi_s phi_t^T`.
    pub fn separable(phi_s: Vec<Complex64>, phi_t: Vec<Complex64>, innovation: Innovation) -> Result<Self> {
        let (p, q) = (phi_s.len(), phi_t.len());
        let phi = phi_s.iter().flat_map(|a| phi_t.iter().map(move |b| a * b)).collect();
        let m = Ar2dModel { phi, p, q, innovation, separable: Some((phi_s, phi_t)) };
        m.check()?;
        Ok(m)
    }

    /// Uncorrelated innovations (`p = q = 0`).
    pub fn white(innovation: Innovation) -> Result<Self> {
        Self::new(0, 0, Vec::new(), innovation)
    }

    pub fn coeff(&self, i: usize, j: usize) -> Complex64 {
        self.phi[(i - 1) * self.q + (j - 1)]
    }

    pub fn is_separable(&self) -> bool {
        self.separable.is_some()
    }

    /// Minimum burn-in accepted by `generate`.
    pub fn min_burn_in(&self) -> usize {
        10 * self.p.max(self.q)
    }

    fn check(&self) -> Result<()> {
        self.innovation.validate()?;
        if self.phi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Validation("AR coefficients must be finite".into()));
        }
        self.check_stability()
    }

    /// Stability of the quarter-plane recursion. Both one-dimensional slices
    /// `P(z, 1)` and `P(1, z)` must be Schur stable, and so must the polynomial in
    /// `z1` for every sampled `z2` on the unit circle.
    pub fn check_stability(&self) -> Result<()> {
        if self.p == 0 || self.q == 0 {
            return Ok(());
        }
        let rows: Vec<Complex64> =
            (1..=self.p).map(|i| (1..=self.q).map(|j| self.coeff(i, j)).sum()).collect();
        let cols: Vec<Complex64> =
            (1..=self.q).map(|j| (1..=self.p).map(|i| self.coeff(i, j)).sum()).collect();
        if !schur_stable(&rows) {
            return Err(Error::Unstable("slice P(z, 1) has a root outside the unit circle".into()));
        }
        if !schur_stable(&cols) {
            return Err(Error::Unstable("slice P(1, z) has a root outside the unit circle".into()));
        }
        // For every z2 on the unit circle the polynomial in z1 must keep its roots
        // inside; slices at isolated bicircle zeros are what a plain grid misses.
        for b in 0..BICIRCLE_GRID {
            let w = 2.0 * PI * b as f64 / BICIRCLE_GRID as f64;
            let c: Vec<Complex64> = (1..=self.p)
                .map(|i| (1..=self.q).map(|j| self.coeff(i, j) * Complex64::from_polar(1.0, -w * j as f64)).sum())
                .collect();
            if !schur_stable(&c) {
                return Err(Error::Unstable(format!("AR polynomial has a zero with |z1| >= 1 at z2 = exp(i {w:.4})")));
            }
        }
        Ok(())
    }

    /// `min |1 - sum phi[i,j] z1^-i z2^-j|` over a `grid x grid` sampling of the bicircle.
    pub fn bicircle_margin(&self, grid: usize) -> f64 {
        let pw = |w: f64, m: usize| -> Vec<Complex64> {
            (1..=m).map(|i| Complex64::from_polar(1.0, -w * i as f64)).collect()
        };
        let mut best = f64::INFINITY;
        for a in 0..grid {
            let z1 = pw(2.0 * PI * a as f64 / grid as f64, self.p);
            // Row combination sum_i phi[i,j] z1^-i, reused across the z2 sweep.
            let r: Vec<Complex64> = (1..=self.q)
                .map(|j| (1..=self.p).map(|i| self.coeff(i, j) * z1[i - 1]).sum())
                .collect();
            for b in 0..grid {
                let z2 = pw(2.0 * PI * b as f64 / grid as f64, self.q);
                let s: Complex64 = r.iter().zip(&z2).map(|(x, y)| x * y).sum();
                best = best.min((Complex64::new(1.0, 0.0) - s).norm());
            }
        }
        best
    }

    /// Energy of the causal impulse response, `sum |h[n,k]|^2`.
    pub fn impulse_energy(&self) -> f64 {
        if self.p == 0 || self.q == 0 {
            return 1.0;
        }
        let size = 64 * self.p.max(self.q);
        let mut h = vec![Complex64::new(0.0, 0.0); size * size];
        h[0] = Complex64::new(1.0, 0.0);
        let mut energy = 1.0;
        for n in 0..size {
            for k in 0..size {
                if n == 0 && k == 0 {
                    continue;
                }
                let mut s = Complex64::new(0.0, 0.0);
                for i in 1..=self.p.min(n) {
                    for j in 1..=self.q.min(k) {
                        s += self.coeff(i, j) * h[(n - i) * size + (k - j)];
                    }
                }
                h[n * size + k] = s;
                energy += s.norm_sqr();
            }
        }
        energy
    }

    /// Nominal per-sample disturbance power: innovation scale times impulse energy.
    /// For heavy-tailed innovations with `nu <= 2` the true variance is infinite,
    /// so the scale parameter is used as the reference power.
    pub fn nominal_power(&self) -> f64 {
        self.innovation.sigma2() * self.impulse_energy()
    }
}

/// Schur stability of `x[n] = sum_i c_i x[n-i]` via the step-down recursion on
/// `A(z) = 1 - sum c_i z^-i`: every reflection coefficient must have modulus < 1.
pub fn schur_stable(c: &[Complex64]) -> bool {
    let mut a: Vec<Complex64> = std::iter::once(Complex64::new(1.0, 0.0))
        .chain(c.iter().map(|x| -x))
        .collect();
    while a.len() > 1 && a[a.len() - 1].norm() == 0.0 {
        a.pop();
    }
    while a.len() > 1 {
        let m = a.len() - 1;
        let k = a[m];
        let d = 1.0 - k.norm_sqr();
        if d <= 0.0 {
            return false;
        }
        a = (0..m).map(|i| (a[i] - k * a[m - i].conj()) / d).collect();
    }
    true
}

/// Coefficients `c` of `x[n] = sum_i c_i x[n-i]` whose characteristic roots are `poles`.
pub fn ar_coefficients_from_poles(poles: &[Complex64]) -> Vec<Complex64> {
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    for &r in poles {
        let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (i, &a) in poly.iter().enumerate() {
            next[i] += a;
            next[i + 1] -= a * r;
        }
        poly = next;
    }
    poly[1..].iter().map(|a| -a).collect()
}

/// Scale applied to the one-dimensional factors of the default model.
const DEFAULT_FACTOR_GAIN: f64 = 0.316_227_766_016_837_94;

/// One-dimensional AR(6) factor shared by both axes of the default model:
/// conjugate pole pairs of radius 0.5 at angles 0.3, 1.2 and 2.4 rad, scaled by
/// `sqrt(0.1)`.
pub fn default_factor() -> Vec<Complex64> {
    let poles: Vec<Complex64> = [0.3f64, 1.2, 2.4]
        .iter()
        .flat_map(|&w| [Complex64::from_polar(0.5, w), Complex64::from_polar(0.5, -w)])
        .collect();
    ar_coefficients_from_poles(&poles)
        .into_iter()
        .map(|c| Complex64::new(c.re * DEFAULT_FACTOR_GAIN, 0.0))
        .collect()
}

/// Separable AR(6,6) with complex-t(2) innovations of unit scale.
pub fn default_model() -> Ar2dModel {
    let f = default_factor();
    Ar2dModel::separable(f.clone(), f, Innovation::ComplexT { nu: 2.0, sigma2: 1.0 })
        .expect("default model is stable")
}

/// Shape of the AR coefficient matrix in a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum Structure {
    Default,
    White,
    Custom { p: usize, q: usize, phi: Vec<Complex64> },
}

/// Clutter knobs of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ClutterConfig {
    pub structure: Structure,
    pub innovation: Innovation,
    pub burn_in: usize,
    /// One realization per radar and CPI reused for every bin.
    pub shared_across_bins: bool,
}

impl Default for ClutterConfig {
    fn default() -> Self {
        ClutterConfig {
            structure: Structure::Default,
            innovation: Innovation::ComplexT { nu: 2.0, sigma2: 1.0 },
            burn_in: 60,
            shared_across_bins: false,
        }
    }
}

impl ClutterConfig {
    pub fn model(&self) -> Result<Ar2dModel> {
        match &self.structure {
            Structure::Default => {
                let f = default_factor();
                Ar2dModel::separable(f.clone(), f, self.innovation)
            }
            Structure::White => Ar2dModel::white(self.innovation),
            Structure::Custom { p, q, phi } => Ar2dModel::new(*p, *q, phi.clone(), self.innovation),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.model()?;
        if self.burn_in < m.min_burn_in() {
            return Err(Error::Validation(format!(
                "burn_in {} is below 10 * max(p, q) = {}",
                self.burn_in,
                m.min_burn_in()
            )));
        }
        Ok(())
    }
}

/// One generated `n_s x k` disturbance field.
#[derive(Debug, Clone, PartialEq)]
pub struct ClutterField {
    /// Row-major `n_s x k`: `c[n * k + kk]`.
    pub c: Vec<Complex64>,
    pub n_s: usize,
    pub k: usize,
    /// Pulse-major stacking: `vectorized[kk * n_s + n] = c[n, kk]`.
    pub vectorized: Vec<Complex64>,
    /// Mean `|c|^2` over the field.
    pub sigma_c2: f64,
}

/// Runs the recursion on an `(n_s + burn_in) x (k + burn_in)` zero-initialized grid
/// in row-major order and keeps the trailing `n_s x k` block.
pub fn generate<R: Rng + ?Sized>(
    model: &Ar2dModel,
    n_s: usize,
    k: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<ClutterField> {
    if burn_in < model.min_burn_in() {
        return Err(Error::Domain(format!(
            "burn_in {burn_in} below required {}",
            model.min_burn_in()
        )));
    }
    let vectorized = generate_vectorized(model, n_s, k, burn_in, rng)?;
    let c = devectorize(&vectorized, n_s, k)?;
    let sigma_c2 = mean_power(&vectorized);
    Ok(ClutterField { c, n_s, k, vectorized, sigma_c2 })
}

/// Same draw sequence as `generate`, returning only the vectorized field.
pub fn generate_vectorized<R: Rng + ?Sized>(
    model: &Ar2dModel,
    n_s: usize,
    k: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let sampler = model.innovation.sampler()?;
    let rows = n_s + burn_in;
    let cols = k + burn_in;
    let zero = Complex64::new(0.0, 0.0);
    let mut grid = vec![zero; rows * cols];
    let (p, q) = (model.p, model.q);

    match &model.separable {
        Some((fs, ft)) if p > 0 && q > 0 => {
            // u[m, kk] = sum_j phi_t[j] c[m, kk - j], filled once row m is final.
            let mut u = vec![zero; rows * cols];
            for n in 0..rows {
                for kk in 0..cols {
                    let mut s = sampler.sample(rng);
                    for i in 1..=p.min(n) {
                        s += fs[i - 1] * u[(n - i) * cols + kk];
                    }
                    grid[n * cols + kk] = s;
                }
                for kk in 0..cols {
                    let mut s = zero;
                    for j in 1..=q.min(kk) {
                        s += ft[j - 1] * grid[n * cols + kk - j];
                    }
                    u[n * cols + kk] = s;
                }
            }
        }
        _ => {
            for n in 0..rows {
                for kk in 0..cols {
                    let mut s = sampler.sample(rng);
                    for i in 1..=p.min(n) {
                        for j in 1..=q.min(kk) {
                            s += model.coeff(i, j) * grid[(n - i) * cols + (kk - j)];
                        }
                    }
                    grid[n * cols + kk] = s;
                }
            }
        }
    }

    let mut out = Vec::with_capacity(n_s * k);
    for kk in 0..k {
        for n in 0..n_s {
            out.push(grid[(burn_in + n) * cols + burn_in + kk]);
        }
    }
    Ok(out)
}

/// Inverse of the pulse-major stacking; returns row-major `n_s x k`.
pub fn devectorize(v: &[Complex64], n_s: usize, k: usize) -> Result<Vec<Complex64>> {
    if v.len() != n_s * k {
        return Err(Error::Dimension { expected: n_s * k, got: v.len() });
    }
    let mut c = vec![Complex64::new(0.0, 0.0); n_s * k];
    for (r, z) in v.iter().enumerate() {
        c[(r % n_s) * k + r / n_s] = *z;
    }
    Ok(c)
}

pub fn mean_power(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>() / v.len() as f64
}

/// Biased sample autocorrelation magnitudes `|rho[r]|`, `r = 0..=max_lag`, with `rho[0] = 1`.
pub fn empirical_autocorrelation(c: &[Complex64], max_lag: usize) -> Result<Vec<f64>> {
    if max_lag >= c.len() {
        return Err(Error::Domain(format!("max_lag {max_lag} >= length {}", c.len())));
    }
    let r0: f64 = c.iter().map(|z| z.norm_sqr()).sum();
    if r0 == 0.0 {
        return Err(Error::Domain("autocorrelation of an all-zero sequence".into()));
    }
    Ok((0..=max_lag)
        .map(|r| {
            let s: Complex64 = c[r..].iter().zip(c).map(|(a, b)| a * b.conj()).sum();
            if r == 0 { 1.0 } else { s.norm() / r0 }
        })
        .collect())
}

/// Outcome of the exponential-envelope check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayReport {
    /// Fitted per-lag decay factor of the envelope `A * gamma^r`.
    pub gamma_fit: f64,
    /// Slope of the least-squares line through `log |rho|`.
    pub log_slope: f64,
    pub passes: bool,
}

/// Margin below one a fitted decay factor must clear; absorbs rounding on
/// sequences whose correlation does not decay at all.
const DECAY_TOL: f64 = 1e-6;

/// Largest over smallest median `|c|^2` among the four quadrants of a field.
/// Medians keep heavy-tailed innovations from dominating; a stationary field
/// gives a ratio near one.
pub fn quadrant_power_spread(f: &ClutterField) -> Result<f64> {
    if f.n_s < 4 || f.k < 4 {
        return Err(Error::Domain(format!("field {}x{} too small to split", f.n_s, f.k)));
    }
    let (hn, hk) = (f.n_s / 2, f.k / 2);
    let mut medians = Vec::with_capacity(4);
    for (n0, n1) in [(0, hn), (hn, f.n_s)] {
        for (k0, k1) in [(0, hk), (hk, f.k)] {
            let mut p: Vec<f64> =
                (n0..n1).flat_map(|n| (k0..k1).map(move |k| (n, k))).map(|(n, k)| f.c[n * f.k + k].norm_sqr()).collect();
            p.sort_by(f64::total_cmp);
            medians.push(p[p.len() / 2]);
        }
    }
    let lo = medians.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = medians.iter().cloned().fold(0.0, f64::max);
    Ok(if lo > 0.0 { hi / lo } else { f64::INFINITY })
}

/// Fits `|rho[r]| <= A * gamma^r` by log-linear regression over `r = 0` and the
/// local maxima of the lag-normalized autocorrelation of `c / |c|` that rise above the
/// sampling noise floor. Lags up to a quarter of the length are examined.
pub fn validate_decay(c: &[Complex64]) -> Result<DecayReport> {
    let n = c.len();
    if n < 512 {
        return Err(Error::Domain(format!("validate_decay needs length >= 512, got {n}")));
    }
    let max_lag = n / 4;
    // Phase-only samples: with infinite-variance innovations a couple of outliers
    // would otherwise put spurious peaks at the lag separating them.
    let sign: Vec<Complex64> = c
        .iter()
        .map(|z| if z.norm() > 0.0 { z / z.norm() } else { Complex64::new(0.0, 0.0) })
        .collect();
    let biased = empirical_autocorrelation(&sign, max_lag + 1)?;
    // Undo the (n - r)/n taper so a non-decaying sequence stays at one.
    let rho: Vec<f64> =
        biased.iter().enumerate().map(|(r, x)| x * n as f64 / (n - r) as f64).collect();
    let floor = 4.0 / ((n - max_lag) as f64).sqrt();

    let mut pts: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    for r in 1..=max_lag {
        let peak = rho[r] >= rho[r - 1] && rho[r] >= rho[r + 1];
        let monotone_head = r == 1 && rho[1] >= rho[2];
        if (peak || monotone_head) && rho[r] > floor {
            pts.push((r as f64, rho[r].ln()));
        }
    }
    let log_slope = if pts.len() == 1 {
        // Nothing above the floor: the envelope collapses within one lag.
        rho[1].max(f64::MIN_POSITIVE).ln()
    } else {
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    };
    let gamma_fit = log_slope.exp();
    Ok(DecayReport { gamma_fit, log_slope, passes: gamma_fit < 1.0 - DECAY_TOL })
}

/// Writes `u64` length then little-endian `f32` (re, im) pairs.
pub fn write_field<W: Write>(mut w: W, v: &[Complex64]) -> Result<()> {
    w.write_all(&(v.len() as u64).to_le_bytes())?;
    for z in v {
        w.write_all(&(z.re as f32).to_le_bytes())?;
        w.write_all(&(z.im as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field<R: Read>(mut r: R) -> Result<Vec<Complex64>> {
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let n = u64::from_le_bytes(len) as usize;
    let mut out = Vec::with_capacity(n);
    let mut buf = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        let re = f32::from_le_bytes(buf[..4].try_into().expect("4 bytes"));
        let im = f32::from_le_bytes(buf[4..].try_into().expect("4 bytes"));
        out.push(Complex64::new(re as f64, im as f64));
    }
    Ok(out)
}
