//! Butterworth band-pass design and forward-backward (zero-phase) filtering.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{linalg, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignMeta {
    pub order: usize,
    pub low_hz: f64,
    pub high_hz: f64,
    pub fs: f64,
}

/// Transfer function `B(z)/A(z)` in powers of `z⁻¹` with `a[0] = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IirFilter {
    b: Vec<f64>,
    a: Vec<f64>,
    design_meta: Option<DesignMeta>,
}

impl IirFilter {
    /// Normalizes by `a[0]` and rejects unstable denominators.
    pub fn new(b: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        if b.is_empty() || a.is_empty() {
            return Err(Error::FilterDesign("empty coefficient list".into()));
        }
        let a0 = a[0];
        if a0 == 0.0 || !a0.is_finite() {
            return Err(Error::FilterDesign("a[0] must be non-zero".into()));
        }
        let b: Vec<f64> = b.iter().map(|v| v / a0).collect();
        let a: Vec<f64> = a.iter().map(|v| v / a0).collect();
        if b.iter().chain(&a).any(|v| !v.is_finite()) {
            return Err(Error::FilterDesign("non-finite coefficient".into()));
        }
        if !is_stable(&a) {
            return Err(Error::FilterDesign("poles on or outside the unit circle".into()));
        }
        Ok(Self { b, a, design_meta: None })
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn design_meta(&self) -> Option<&DesignMeta> {
        self.design_meta.as_ref()
    }

    /// `H(e^{jω})` at `freq_hz`.
    pub fn frequency_response(&self, freq_hz: f64, fs: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / fs;
        let eval = |c: &[f64]| {
            c.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (k, &v)| {
                let ang = -w * k as f64;
                acc + Complex64::new(libm::cos(ang), libm::sin(ang)) * v
            })
        };
        eval(&self.b) / eval(&self.a)
    }

    /// Edge padding used by [`filtfilt`].
    pub fn pad_len(&self) -> usize {
        3 * self.a.len().max(self.b.len())
    }
}

/// Schur–Cohn step-down test: every reflection coefficient inside (−1, 1).
fn is_stable(a: &[f64]) -> bool {
    let mut poly = a.to_vec();
    while poly.len() > 1 {
        let m = poly.len() - 1;
        let k = poly[m];
        if libm::fabs(k) >= 1.0 {
            return false;
        }
        let denom = 1.0 - k * k;
        poly = (0..m).map(|i| (poly[i] - k * poly[m - i]) / denom).collect();
    }
    true
}

fn poly_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (i, &v) in c.iter().enumerate() {
            next[i] += v;
            next[i + 1] -= v * r;
        }
        c = next;
    }
    c
}

/// Zeros, poles and gain of the digital band-pass.
struct Zpk {
    zeros: Vec<Complex64>,
    poles: Vec<Complex64>,
    gain: f64,
}

fn butterworth_bandpass_zpk(order: usize, low_hz: f64, high_hz: f64, fs: f64) -> Result<Zpk> {
    if order == 0 {
        return Err(Error::FilterDesign("order must be at least 1".into()));
    }
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::FilterDesign(alloc::format!("invalid sampling rate {fs}")));
    }
    let nyquist = fs / 2.0;
    if !(low_hz > 0.0 && low_hz < high_hz && high_hz < nyquist) {
        return Err(Error::FilterDesign(alloc::format!(
            "band {low_hz}-{high_hz} Hz must satisfy 0 < low < high < {nyquist}"
        )));
    }
    let fs2 = 2.0 * fs;
    let w_low = fs2 * libm::tan(PI * low_hz / fs);
    let w_high = fs2 * libm::tan(PI * high_hz / fs);
    let bw = w_high - w_low;
    let w0_sq = w_low * w_high;

    let mut analog_poles = Vec::with_capacity(2 * order);
    for k in 0..order {
        let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
        let p = Complex64::new(libm::cos(theta), libm::sin(theta)) * (bw / 2.0);
        let disc = (p * p - w0_sq).sqrt();
        analog_poles.push(p + disc);
        analog_poles.push(p - disc);
    }

    let fs2c = Complex64::new(fs2, 0.0);
    let poles: Vec<Complex64> = analog_poles.iter().map(|&p| (fs2c + p) / (fs2c - p)).collect();
    // `order` zeros at s = 0 map to z = 1, the rest from infinity to z = -1.
    let mut zeros = vec![Complex64::new(1.0, 0.0); order];
    zeros.extend(core::iter::repeat_n(Complex64::new(-1.0, 0.0), order));
    let denom = analog_poles.iter().fold(Complex64::new(1.0, 0.0), |acc, &p| acc * (fs2c - p));
    let gain = (Complex64::new(libm::pow(bw * fs2, order as f64), 0.0) / denom).re;
    Ok(Zpk { zeros, poles, gain })
}

/// Digital Butterworth band-pass of prototype order `order` (the resulting
/// filter has `2 * order` poles).
///
/// Analog low-pass prototype, low-pass to band-pass transform at pre-warped
/// edges, then the bilinear transform.
pub fn design_butterworth_bandpass(order: usize, low_hz: f64, high_hz: f64, fs: f64) -> Result<IirFilter> {
    let zpk = butterworth_bandpass_zpk(order, low_hz, high_hz, fs)?;
    let b: Vec<f64> = poly_from_roots(&zpk.zeros).iter().map(|c| c.re * zpk.gain).collect();
    let a: Vec<f64> = poly_from_roots(&zpk.poles).iter().map(|c| c.re).collect();
    let mut filter = IirFilter::new(b, a)?;
    filter.design_meta = Some(DesignMeta { order, low_hz, high_hz, fs });
    Ok(filter)
}

/// One biquad: `b` and `a` in powers of `z⁻¹`, `a[0] = 1`.
#[derive(Debug, Clone, Copy)]
struct Section {
    b: [f64; 3],
    a: [f64; 3],
}

/// Second-order sections of a designed band-pass: conjugate pole pairs,
/// each with one zero at `z = 1` and one at `z = -1`, overall gain on the
/// first section.
fn sections(meta: &DesignMeta) -> Result<Vec<Section>> {
    let zpk = butterworth_bandpass_zpk(meta.order, meta.low_hz, meta.high_hz, meta.fs)?;
    let mut upper: Vec<Complex64> = Vec::new();
    let mut real: Vec<f64> = Vec::new();
    for p in &zpk.poles {
        if libm::fabs(p.im) <= 1e-12 * p.norm().max(1.0) {
            real.push(p.re);
        } else if p.im > 0.0 {
            upper.push(*p);
        }
    }
    let mut out: Vec<Section> = upper
        .iter()
        .map(|p| Section { b: [1.0, 0.0, -1.0], a: [1.0, -2.0 * p.re, p.norm_sqr()] })
        .collect();
    real.sort_by(f64::total_cmp);
    for pair in real.chunks(2) {
        let (p, q) = (pair[0], pair.get(1).copied().unwrap_or(0.0));
        out.push(Section { b: [1.0, 0.0, -1.0], a: [1.0, -(p + q), p * q] });
    }
    if out.len() != meta.order {
        return Err(Error::FilterDesign("poles do not pair into sections".into()));
    }
    for v in out[0].b.iter_mut() {
        *v *= zpk.gain;
    }
    Ok(out)
}

fn sosfilt(sos: &[Section], x: &[f64], zi: &[[f64; 2]]) -> Vec<f64> {
    let mut y = x.to_vec();
    for (s, z0) in sos.iter().zip(zi) {
        let mut z = *z0;
        for v in y.iter_mut() {
            let xi = *v;
            let yi = s.b[0] * xi + z[0];
            z[0] = s.b[1] * xi - s.a[1] * yi + z[1];
            z[1] = s.b[2] * xi - s.a[2] * yi;
            *v = yi;
        }
    }
    y
}

/// Per-section step steady state; each section sees the DC gain of the
/// ones before it.
fn sosfilt_zi(sos: &[Section]) -> Vec<[f64; 2]> {
    let mut scale = 1.0;
    sos.iter()
        .map(|s| {
            let zi = lfilter_zi(&s.b, &s.a);
            let out = [zi[0] * scale, zi[1] * scale];
            scale *= s.b.iter().sum::<f64>() / s.a.iter().sum::<f64>();
            out
        })
        .collect()
}

/// Direct-form II transposed filtering with optional initial state.
pub fn lfilter(f: &IirFilter, x: &[f64], zi: Option<&[f64]>) -> Vec<f64> {
    let n = f.a.len().max(f.b.len());
    let mut b = f.b.clone();
    let mut a = f.a.clone();
    b.resize(n, 0.0);
    a.resize(n, 0.0);
    let mut z = vec![0.0; n - 1];
    if let Some(zi) = zi {
        z.copy_from_slice(&zi[..n - 1]);
    }
    let mut y = Vec::with_capacity(x.len());
    for &xi in x {
        let yi = b[0] * xi + z.first().copied().unwrap_or(0.0);
        for k in 0..n.saturating_sub(1) {
            let next = if k + 1 < n - 1 { z[k + 1] } else { 0.0 };
            z[k] = b[k + 1] * xi - a[k + 1] * yi + next;
        }
        y.push(yi);
    }
    y
}

/// Steady-state initial conditions for a unit step input.
fn lfilter_zi(b: &[f64], a: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    if n < 2 {
        return Vec::new();
    }
    let mut b = b.to_vec();
    let mut a = a.to_vec();
    b.resize(n, 0.0);
    a.resize(n, 0.0);
    let m = n - 1;
    // (I - Aᵀ) zi = b[1:] - a[1:] b[0], A the companion matrix of a.
    let mut lhs = vec![0.0; m * m];
    for i in 0..m {
        lhs[i * m + i] = 1.0;
        lhs[i * m] += a[i + 1];
        if i + 1 < m {
            lhs[i * m + i + 1] -= 1.0;
        }
    }
    let rhs: Vec<f64> = (0..m).map(|i| b[i + 1] - a[i + 1] * b[0]).collect();
    linalg::solve(&lhs, &rhs).unwrap_or_else(|| vec![0.0; m])
}

/// Zero-phase forward-backward filtering.
///
/// The signal is extended at both ends by `3·max(len(a), len(b))` samples of
/// odd (reflect-and-negate) padding and each pass starts from the step
/// steady state scaled to its first sample. Net magnitude response is `|H|²`.
/// Filters from [`design_butterworth_bandpass`] run as cascaded second-order
/// sections, which keeps narrow low-frequency bands accurate.
pub fn filtfilt(f: &IirFilter, x: &[f64]) -> Result<Vec<f64>> {
    let pad = f.pad_len();
    if x.len() <= pad {
        return Err(Error::SignalTooShort { len: x.len(), min: pad });
    }
    let n = x.len();
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    let mut y = match f.design_meta.as_ref().map(sections).transpose()? {
        Some(sos) => {
            let zi = sosfilt_zi(&sos);
            let scaled = |s: f64| zi.iter().map(|z| [z[0] * s, z[1] * s]).collect::<Vec<_>>();
            let mut y = sosfilt(&sos, &ext, &scaled(ext[0]));
            y.reverse();
            sosfilt(&sos, &y, &scaled(y[0]))
        }
        None => {
            let zi = lfilter_zi(&f.b, &f.a);
            let scaled = |s: f64| zi.iter().map(|v| v * s).collect::<Vec<_>>();
            let mut y = lfilter(f, &ext, Some(&scaled(ext[0])));
            y.reverse();
            lfilter(f, &y, Some(&scaled(y[0])))
        }
    };
    y.reverse();
    Ok(y[pad..pad + n].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mrcp_band_passes_center_and_rejects_alpha() {
        let f = design_butterworth_bandpass(2, 0.1, 1.0, 256.0).unwrap();
        let center = libm::sqrt(0.1 * 1.0);
        assert!(f.frequency_response(center, 256.0).norm() >= 0.99);
        assert!(f.frequency_response(10.0, 256.0).norm() <= 0.01);
        assert_eq!(f.b().len(), 5);
        assert_eq!(f.a()[0], 1.0);
        assert_eq!(f.design_meta().unwrap().order, 2);
    }

    #[test]
    fn bandpass_kills_dc_exactly() {
        let f = design_butterworth_bandpass(2, 100.0, 125.0, 512.0).unwrap();
        assert_eq!(f.b().iter().sum::<f64>(), 0.0);
        assert_eq!(f.frequency_response(0.0, 512.0).norm(), 0.0);
    }

    #[test]
    fn rejects_bad_band_edges() {
        assert!(design_butterworth_bandpass(2, 1.0, 1.0, 256.0).is_err());
        assert!(design_butterworth_bandpass(2, 2.0, 1.0, 256.0).is_err());
        assert!(design_butterworth_bandpass(2, 0.0, 1.0, 256.0).is_err());
        assert!(design_butterworth_bandpass(2, 1.0, 128.0, 256.0).is_err());
        assert!(design_butterworth_bandpass(0, 1.0, 10.0, 256.0).is_err());
    }

    #[test]
    fn designs_are_stable_across_orders() {
        for order in 1..=4 {
            let f = design_butterworth_bandpass(order, 0.5, 40.0, 250.0).unwrap();
            assert_eq!(f.a().len(), 2 * order + 1);
            let peak = f.frequency_response(libm::sqrt(0.5 * 40.0), 250.0).norm();
            assert!((peak - 1.0).abs() < 0.02, "order {order}: {peak}");
        }
    }

    #[test]
    fn unstable_denominator_is_rejected() {
        assert!(IirFilter::new(alloc::vec![1.0], alloc::vec![1.0, -1.5]).is_err());
        assert!(IirFilter::new(alloc::vec![1.0], alloc::vec![1.0, -0.5]).is_ok());
    }

    #[test]
    fn short_signal_errors() {
        let f = design_butterworth_bandpass(2, 0.1, 1.0, 256.0).unwrap();
        assert_eq!(filtfilt(&f, &[0.0; 15]), Err(Error::SignalTooShort { len: 15, min: 15 }));
        assert!(filtfilt(&f, &[0.0; 16]).is_ok());
    }

    #[test]
    fn sections_match_the_direct_form() {
        for (order, lo, hi, fs) in [(2, 0.5, 30.0, 256.0), (3, 1.0, 20.0, 128.0), (1, 8.0, 12.0, 100.0)] {
            let f = design_butterworth_bandpass(order, lo, hi, fs).unwrap();
            let sos = sections(f.design_meta().unwrap()).unwrap();
            let x: Vec<f64> = (0..400).map(|i| libm::sin(i as f64 * 0.37) + libm::cos(i as f64 * 0.05)).collect();
            let direct = lfilter(&f, &x, None);
            let cascade = sosfilt(&sos, &x, &alloc::vec![[0.0; 2]; sos.len()]);
            for (a, b) in direct.iter().zip(&cascade) {
                assert!((a - b).abs() < 1e-9, "order {order}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn filtfilt_paths_agree() {
        let f = design_butterworth_bandpass(2, 0.5, 30.0, 256.0).unwrap();
        let plain = IirFilter::new(f.b().to_vec(), f.a().to_vec()).unwrap();
        let x: Vec<f64> = (0..3000).map(|i| libm::sin(i as f64 * 0.11) + 0.01 * i as f64).collect();
        let (a, b) = (filtfilt(&f, &x).unwrap(), filtfilt(&plain, &x).unwrap());
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-8, "{u} vs {v}");
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let f = design_butterworth_bandpass(2, 0.1, 30.0, 256.0).unwrap();
        assert!(filtfilt(&f, &[0.0; 500]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn steady_state_start_has_no_transient_for_constant_input() {
        // A stable low-pass with unit DC gain fed a constant stays constant.
        let f = IirFilter::new(alloc::vec![0.2, 0.2], alloc::vec![1.0, -0.6]).unwrap();
        let y = filtfilt(&f, &[2.0; 64]).unwrap();
        assert!(y.iter().all(|v| (v - 2.0).abs() < 1e-12));
    }
}
