//! Multi-point spectral representation of stationary Gaussian processes.
//!
//! Every point `i` (a wind station or a roughness track) receives
//!
//! ```text
//! x_i(t) = Re sum_k A_k Z_i(k) exp(2 pi i f_k t),   A_k = sqrt(2 S(f_k) df)
//! Z(k)   = L(k) xi(k),   xi_m(k) = exp(i phi_mk),   phi ~ U[0, 2 pi)
//! ```
//!
//! where `L(k) L(k)^T` is the coherence matrix at `f_k`. For the exponential
//! coherence `exp(-a(f) |y_i - y_j|)` used throughout, the process across
//! sorted positions is Markov and the Cholesky factor has the closed form
//!
//! ```text
//! Z_0 = xi_0,   Z_i = r_i Z_{i-1} + sqrt(1 - r_i^2) xi_i,   r_i = exp(-a (y_i - y_{i-1}))
//! ```
//!
//! which is what [`Route::Markov`] evaluates in O(points) per line.
//! [`Route::Dense`] factors the full matrix instead and is kept as a
//! cross-check.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rustfft::{num_complex::Complex64, FftPlanner};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Route {
    #[default]
    Markov,
    Dense,
}

/// Line spectrum of a record of `samples` points at `spacing`.
#[derive(Debug, Clone, Copy)]
pub struct Lines {
    pub samples: usize,
    pub spacing: f64,
    /// Inclusive band of synthesised frequencies.
    pub band: (f64, f64),
}

impl Lines {
    pub fn resolution(&self) -> f64 {
        1.0 / (self.samples as f64 * self.spacing)
    }

    /// Indices of the spectral lines inside the band, below Nyquist.
    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        let df = self.resolution();
        let last = (self.samples - 1) / 2;
        (1..=last).filter(move |&k| {
            let f = k as f64 * df;
            f >= self.band.0 * (1.0 - 1e-12) && f <= self.band.1 * (1.0 + 1e-12)
        })
    }
}

/// Dense lower Cholesky factor of `exp(-a |y_i - y_j|)`.
pub fn exponential_coherence_factor(positions: &[f64], a: f64) -> Result<DMatrix<f64>> {
    let n = positions.len();
    let coh = DMatrix::from_fn(n, n, |i, j| (-a * (positions[i] - positions[j]).abs()).exp());
    let chol = coh
        .cholesky()
        .ok_or_else(|| Error::Invariant("coherence matrix is not positive definite".into()))?;
    Ok(chol.l())
}

/// Closed-form factor applied to `xi` for sorted positions.
pub fn markov_apply(sorted: &[f64], a: f64, xi: &[Complex64], out: &mut [Complex64]) {
    let mut prev = Complex64::new(0.0, 0.0);
    for (i, (&x, z)) in xi.iter().zip(out.iter_mut()).enumerate() {
        *z = if i == 0 {
            x
        } else {
            let r = (-a * (sorted[i] - sorted[i - 1])).exp();
            prev * r + x * (1.0 - r * r).max(0.0).sqrt()
        };
        prev = *z;
    }
}

/// Synthesises one record per position. `psd(f)` is the one-sided target
/// PSD and `decay(f)` the coherence exponent per unit separation.
pub fn synthesise<R: Rng>(
    positions: &[f64],
    lines: Lines,
    psd: impl Fn(f64) -> f64,
    decay: impl Fn(f64) -> f64,
    route: Route,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let np = positions.len();
    let n = lines.samples;
    let mut order: Vec<usize> = (0..np).collect();
    order.sort_by(|&a, &b| positions[a].total_cmp(&positions[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| positions[i]).collect();

    let mut spectra = vec![vec![Complex64::new(0.0, 0.0); n]; np];
    let df = lines.resolution();
    let mut xi = vec![Complex64::new(0.0, 0.0); np];
    let mut z = vec![Complex64::new(0.0, 0.0); np];
    for k in lines.active() {
        let f = k as f64 * df;
        for x in xi.iter_mut() {
            let phi = rng.random::<f64>() * 2.0 * PI;
            *x = Complex64::from_polar(1.0, phi);
        }
        let s = psd(f);
        if s <= 0.0 {
            continue;
        }
        let amp = (2.0 * s * df).sqrt();
        let a = decay(f);
        match route {
            Route::Markov => markov_apply(&sorted, a, &xi, &mut z),
            Route::Dense => {
                let l = exponential_coherence_factor(&sorted, a)?;
                for i in 0..np {
                    z[i] = (0..=i).map(|m| xi[m] * l[(i, m)]).sum();
                }
            }
        }
        for (slot, zi) in order.iter().zip(&z) {
            spectra[*slot][k] = zi * amp;
        }
    }

    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let mut scratch = vec![Complex64::new(0.0, 0.0); ifft.get_inplace_scratch_len()];
    Ok(spectra
        .into_iter()
        .map(|mut buf| {
            ifft.process_with_scratch(&mut buf, &mut scratch);
            buf.into_iter().map(|c| c.re).collect()
        })
        .collect())
}
