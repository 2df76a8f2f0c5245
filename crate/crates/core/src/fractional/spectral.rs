use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Result};

/// Fourier-multiplier realization of `g_lambda` on the torus of length `L`:
/// mode `exp(i xi_k x)`, `xi_k = 2 pi k / L`, is multiplied by `-|xi_k|^lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOracle {
    pub lambda: f64,
    pub length: f64,
    /// Largest wavenumber index resolved, `|k| <= cutoff`.
    pub cutoff: usize,
}

impl SpectralOracle {
    pub fn new(lambda: f64, length: f64, cutoff: usize) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(invalid(format!("lambda must lie in (0, 1), got {lambda}")));
        }
        if !(length > 0.0) || cutoff == 0 {
            return Err(invalid("spectral oracle needs positive length and cutoff"));
        }
        Ok(Self {
            lambda,
            length,
            cutoff,
        })
    }

    pub fn wavenumber(&self, k: i64) -> f64 {
        2.0 * PI * k as f64 / self.length
    }

    /// `-|xi_k|^lambda`.
    pub fn symbol(&self, k: i64) -> f64 {
        -self.wavenumber(k).abs().powf(self.lambda)
    }

    /// Applies the operator to `a cos(xi_k x) + b sin(xi_k x)`; returns the new `(a, b)`.
    pub fn apply_mode(&self, k: i64, cos_amp: f64, sin_amp: f64) -> (f64, f64) {
        let s = self.symbol(k);
        (s * cos_amp, s * sin_amp)
    }

    fn samples_to_spectrum(&self, v: &dyn Fn(f64) -> f64) -> Vec<Complex64> {
        let n = 2 * self.cutoff + 2;
        let dx = self.length / n as f64;
        let mut buf: Vec<Complex64> = (0..n).map(|i| Complex64::new(v(i as f64 * dx), 0.0)).collect();
        let fft = FftPlanner::new().plan_fft_forward(n);
        fft.process(&mut buf);
        buf.iter_mut().for_each(|c| *c /= n as f64);
        buf
    }

    fn signed_index(i: usize, n: usize) -> i64 {
        if i <= n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// `g_lambda[v]` on the sampling grid `x_i = i L / (2 cutoff + 2)`.
    pub fn apply_samples(&self, v: &dyn Fn(f64) -> f64) -> Vec<f64> {
        let mut spec = self.samples_to_spectrum(v);
        let n = spec.len();
        for (i, c) in spec.iter_mut().enumerate() {
            *c *= self.symbol(Self::signed_index(i, n));
        }
        let ifft = FftPlanner::new().plan_fft_inverse(n);
        ifft.process(&mut spec);
        spec.iter().map(|c| c.re).collect()
    }

    /// `sum_k |xi_k|^lambda |v_k|^2 L`, the squared `H^{lambda/2}` seminorm in
    /// Fourier normalization, from samples of a smooth periodic `v`.
    pub fn seminorm_sq(&self, v: &dyn Fn(f64) -> f64) -> f64 {
        let spec = self.samples_to_spectrum(v);
        let n = spec.len();
        spec.iter()
            .enumerate()
            .map(|(i, c)| -self.symbol(Self::signed_index(i, n)) * c.norm_sqr())
            .sum::<f64>()
            * self.length
    }
}
