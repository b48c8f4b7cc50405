//! Analytic signal `z(t) = s(t) + j·HT(s)(t) = A(t)·e^{jφ(t)}`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use super::fft::{fft, ifft};
use crate::{Error, Result};

/// Real part `s(t)` and Hilbert transform `HT(s)(t)`, equal lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticSeries {
    real: Vec<f64>,
    imag: Vec<f64>,
}

impl AnalyticSeries {
    pub fn new(real: Vec<f64>, imag: Vec<f64>) -> Result<Self> {
        if real.len() != imag.len() {
            return Err(Error::LengthMismatch { expected: real.len(), found: imag.len() });
        }
        Ok(Self { real, imag })
    }

    pub fn real(&self) -> &[f64] {
        &self.real
    }

    pub fn imag(&self) -> &[f64] {
        &self.imag
    }

    pub fn len(&self) -> usize {
        self.real.len()
    }

    pub fn is_empty(&self) -> bool {
        self.real.is_empty()
    }
}

/// Discrete analytic signal by the frequency-domain method.
///
/// The input is zero-padded to the next power of two, transformed, negative
/// frequencies are zeroed and positive ones doubled (DC and Nyquist kept),
/// and the inverse transform is truncated back to the input length. The real
/// part is the input itself, bit for bit.
pub fn analytic_signal(x: &[f64]) -> Result<AnalyticSeries> {
    if x.len() < 8 {
        return Err(Error::SignalTooShort { len: x.len(), min: 7 });
    }
    let n = x.len().next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (b, &v) in buf.iter_mut().zip(x) {
        b.re = v;
    }
    fft(&mut buf);
    let half = n / 2;
    for v in &mut buf[1..half] {
        *v *= 2.0;
    }
    for v in &mut buf[half + 1..] {
        *v = Complex64::new(0.0, 0.0);
    }
    ifft(&mut buf);
    let imag = buf[..x.len()].iter().map(|c| c.im).collect();
    Ok(AnalyticSeries { real: x.to_vec(), imag })
}

/// Instantaneous phase with samples of zero modulus recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrace {
    /// Wrapped to (−π, π].
    pub values: Vec<f64>,
    /// Indices where `|z| = 0`; the phase there is set to 0.
    pub zero_modulus: Vec<usize>,
}

/// `φ(t) = atan2(HT(s), s)` wrapped to (−π, π].
pub fn instantaneous_phase(z: &AnalyticSeries) -> PhaseTrace {
    let mut zero_modulus = Vec::new();
    let values = z
        .real
        .iter()
        .zip(&z.imag)
        .enumerate()
        .map(|(i, (&re, &im))| {
            if re == 0.0 && im == 0.0 {
                zero_modulus.push(i);
                return 0.0;
            }
            let phi = libm::atan2(im, re);
            if phi <= -PI {
                PI
            } else {
                phi
            }
        })
        .collect();
    PhaseTrace { values, zero_modulus }
}

/// `A(t) = |z(t)|`.
pub fn instantaneous_amplitude(z: &AnalyticSeries) -> Vec<f64> {
    z.real.iter().zip(&z.imag).map(|(&re, &im)| libm::hypot(re, im)).collect()
}

/// `10·log10(A(t)²)` with `A²` floored at 1e-30.
pub fn instantaneous_power_db(z: &AnalyticSeries) -> Vec<f64> {
    z.real
        .iter()
        .zip(&z.imag)
        .map(|(&re, &im)| 10.0 * libm::log10((re * re + im * im).max(1e-30)))
        .collect()
}
