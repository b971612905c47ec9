//! Uniform linear array manifolds, transmit beamformers and the post-matched-filter
//! virtual-array return of one CPI.
//!
//! Vectors of length `N = N_T * M_R * K` are laid out pulse-major: entry
//! `k * N_s + n` holds spatial channel `n` of pulse `k`, with `N_s = N_T * M_R`
//! and spatial channel `n = t * M_R + r` for transmit column `t`, receiver `r`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scenario::RadarParams;

/// Half-wavelength ULA manifold: entry `m` is `exp(j * pi * m * sin(angle))`.
pub fn steering(angle_rad: f64, n_elems: usize) -> Vec<Complex64> {
    let step = PI * angle_rad.sin();
    (0..n_elems).map(|m| Complex64::from_polar(1.0, step * m as f64)).collect()
}

/// Centers of `n_bins` equal partitions of `[-pi/2, pi/2)`.
pub fn bin_centers(n_bins: usize) -> Vec<f64> {
    let width = PI / n_bins as f64;
    (0..n_bins).map(|l| -PI / 2.0 + (l as f64 + 0.5) * width).collect()
}

/// Transmit and receive manifolds toward one bin center.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringPair {
    pub tx_steering: Vec<Complex64>,
    pub rx_steering: Vec<Complex64>,
    pub angle_rad: f64,
}

impl SteeringPair {
    pub fn for_bin(bin: usize, params: &RadarParams) -> Self {
        let angle_rad = bin_centers(params.n_bins)[bin];
        SteeringPair {
            tx_steering: steering(angle_rad, params.n_tx),
            rx_steering: steering(angle_rad, params.n_rx),
            angle_rad,
        }
    }
}

/// Transmit weight matrix `W` (`N_T x N_T`, row-major) and the bins it points at.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    pub weights: Vec<Complex64>,
    pub n_tx: usize,
    pub illuminated_bins: Vec<usize>,
}

impl Beamformer {
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.weights[row * self.n_tx + col]
    }

    /// `tr(W W^H)`, the total radiated power.
    pub fn trace_power(&self) -> f64 {
        self.weights.iter().map(|w| w.norm_sqr()).sum()
    }

    pub fn is_orthogonal(&self) -> bool {
        self.illuminated_bins.is_empty()
    }

    /// `W^T a`.
    pub fn transmit_response(&self, a: &[Complex64]) -> Vec<Complex64> {
        (0..self.n_tx)
            .map(|col| (0..self.n_tx).map(|row| self.get(row, col) * a[row]).sum())
            .collect()
    }
}

/// Beamformer for a set of bins. The empty set gives the orthogonal flood beam
/// `sqrt(P_T/N_T) I`; `B` bins give one conjugate-steering column per bin with
/// the power split evenly and the remaining columns zero.
pub fn make_beamformer(bins: &[usize], params: &RadarParams) -> Result<Beamformer> {
    let n_tx = params.n_tx;
    if bins.len() > n_tx {
        return Err(Error::Domain(format!(
            "{} bins requested but only {n_tx} transmit columns",
            bins.len()
        )));
    }
    if let Some(&b) = bins.iter().find(|&&b| b >= params.n_bins) {
        return Err(Error::Domain(format!("bin {b} out of range 0..{}", params.n_bins)));
    }
    let mut weights = vec![Complex64::new(0.0, 0.0); n_tx * n_tx];
    if bins.is_empty() {
        let g = (params.total_power / n_tx as f64).sqrt();
        for t in 0..n_tx {
            weights[t * n_tx + t] = Complex64::new(g, 0.0);
        }
    } else {
        let g = (params.total_power / (bins.len() * n_tx) as f64).sqrt();
        let centers = bin_centers(params.n_bins);
        for (col, &b) in bins.iter().enumerate() {
            for (row, a) in steering(centers[b], n_tx).into_iter().enumerate() {
                weights[row * n_tx + col] = a.conj() * g;
            }
        }
    }
    Ok(Beamformer { weights, n_tx, illuminated_bins: bins.to_vec() })
}

/// Virtual steering vector of one bin under one beamformer.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualSteering {
    pub v: Vec<Complex64>,
    pub bin: usize,
}

impl VirtualSteering {
    pub fn norm_sqr(&self) -> f64 {
        self.v.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Single-pulse block `(W^T a) kron b`, length `N_T * M_R`.
pub fn pulse_steering(bf: &Beamformer, bin: usize, params: &RadarParams) -> Vec<Complex64> {
    let pair = SteeringPair::for_bin(bin, params);
    let tx = bf.transmit_response(&pair.tx_steering);
    let mut out = Vec::with_capacity(tx.len() * pair.rx_steering.len());
    for t in &tx {
        out.extend(pair.rx_steering.iter().map(|b| t * b));
    }
    out
}

/// `K`-fold repetition of the single-pulse block.
pub fn virtual_steering(bf: &Beamformer, bin: usize, params: &RadarParams) -> Result<VirtualSteering> {
    if bin >= params.n_bins {
        return Err(Error::Domain(format!("bin {bin} out of range 0..{}", params.n_bins)));
    }
    if bf.n_tx != params.n_tx {
        return Err(Error::Dimension { expected: params.n_tx, got: bf.n_tx });
    }
    let block = pulse_steering(bf, bin, params);
    let v = block.repeat(params.pulses_per_cpi);
    Ok(VirtualSteering { v, bin })
}

/// One radar's return in one bin over one CPI.
#[derive(Debug, Clone, PartialEq)]
pub struct CpiReturn {
    pub x: Vec<Complex64>,
    pub radar: usize,
    pub bin: usize,
    pub cpi: usize,
}

/// Adds every target whose bin is `bin` to the clutter vector.
pub fn synthesize_return(
    targets: &[(usize, Complex64)],
    bf: &Beamformer,
    clutter: Vec<Complex64>,
    bin: usize,
    params: &RadarParams,
) -> Result<CpiReturn> {
    let n = params.n_samples();
    if clutter.len() != n {
        return Err(Error::Dimension { expected: n, got: clutter.len() });
    }
    let mut x = clutter;
    let hits: Vec<Complex64> = targets.iter().filter(|(b, _)| *b == bin).map(|&(_, a)| a).collect();
    if !hits.is_empty() {
        let v = virtual_steering(bf, bin, params)?;
        for alpha in hits {
            add_scaled(&mut x, alpha, &v.v);
        }
    }
    Ok(CpiReturn { x, radar: 0, bin, cpi: 0 })
}

/// `x += alpha * v`.
pub fn add_scaled(x: &mut [Complex64], alpha: Complex64, v: &[Complex64]) {
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi += alpha * vi;
    }
}

/// Amplitude with `|alpha|^2 / sigma_c2` equal to the given element-level SNR.
pub fn alpha_from_snr(snr_db: f64, sigma_c2: f64, phase: f64) -> Complex64 {
    let mag = (sigma_c2 * 10f64.powf(snr_db / 10.0)).sqrt();
    Complex64::from_polar(mag, phase)
}
