//! Boxcar time average `<g>_T = (1/2T)∫₋ᵀᵀ g dt` and harmonic extraction.
//!
//! Extraction uses the kernel `exp(−iωt)`, which projects the expansion
//! `Σ qₖ·exp(iωₖt)` onto its k-th amplitude.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly sampled complex signal starting at `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    samples: Vec<Complex64>,
    dt: f64,
    t0: f64,
}

impl SampledSignal {
    pub fn new(samples: Vec<Complex64>, dt: f64, t0: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidSignal("need at least 2 samples".into()));
        }
        if !(dt.is_finite() && dt > 0.0) || !t0.is_finite() {
            return Err(Error::InvalidSignal(format!("need finite t0 and dt > 0, got dt = {dt}")));
        }
        if samples.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(Error::NonFinite("signal sample".into()));
        }
        Ok(Self { samples, dt, t0 })
    }

    /// `n` samples of `f` on `[−t_max, t_max]`, endpoints included.
    pub fn symmetric(f: impl Fn(f64) -> Complex64, t_max: f64, n: usize) -> Result<Self> {
        if n < 2 || !(t_max.is_finite() && t_max > 0.0) {
            return Err(Error::InvalidSignal(format!("symmetric window needs n >= 2 and t_max > 0, got {n}, {t_max}")));
        }
        let dt = 2.0 * t_max / (n - 1) as f64;
        let samples = (0..n).map(|i| f(-t_max + i as f64 * dt)).collect();
        Self::new(samples, dt, -t_max)
    }

    /// Signal from `(t, value)` rows that must be uniformly spaced.
    pub fn from_rows(rows: &[(f64, Complex64)]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InvalidSignal("need at least 2 samples".into()));
        }
        let t0 = rows[0].0;
        let dt = (rows[rows.len() - 1].0 - t0) / (rows.len() - 1) as f64;
        for (i, (t, _)) in rows.iter().enumerate() {
            if (t - (t0 + i as f64 * dt)).abs() > 1e-9 * dt.abs().max(1.0) {
                return Err(Error::InvalidSignal(format!("sample {i} at t = {t} is off the uniform grid")));
            }
        }
        Self::new(rows.iter().map(|r| r.1).collect(), dt, t0)
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn end(&self) -> f64 {
        self.time(self.samples.len() - 1)
    }

    /// Largest `T` with `[−T, T]` inside the samples.
    pub fn max_window(&self) -> Result<f64> {
        let t = (-self.t0).min(self.end());
        if t > 0.0 {
            Ok(t)
        } else {
            Err(Error::WindowNotCovered {
                start: self.t0,
                end: self.end(),
                half_width: 0.0,
            })
        }
    }

    fn check_window(&self, half_width: f64) -> Result<()> {
        let slack = 1e-9 * self.dt;
        if !(half_width.is_finite() && half_width > 0.0) || self.t0 > -half_width + slack || self.end() < half_width - slack {
            return Err(Error::WindowNotCovered {
                start: self.t0,
                end: self.end(),
                half_width,
            });
        }
        Ok(())
    }

    /// Indices of the samples lying in `[−T, T]`.
    fn window_indices(&self, half_width: f64) -> std::ops::RangeInclusive<usize> {
        let pos = |t: f64| (t - self.t0) / self.dt;
        let snap = |x: f64| if (x - x.round()).abs() < 1e-9 { x.round() } else { x };
        let last = self.samples.len() - 1;
        let lo = (snap(pos(-half_width)).ceil().max(0.0) as usize).min(last);
        let hi = (snap(pos(half_width)).floor().max(0.0) as usize).min(last);
        lo..=hi
    }

    /// Trapezoidal `(1/2T)∫₋ᵀᵀ f(tᵢ, sᵢ) dt`; window ends falling between
    /// samples are handled by linear interpolation of the integrand.
    fn boxcar(&self, half_width: f64, integrand: impl Fn(f64, Complex64) -> Complex64) -> Result<Complex64> {
        self.check_window(half_width)?;
        let (a, b) = (-half_width, half_width);
        let n = self.samples.len();
        let value = |i: usize| integrand(self.time(i), self.samples[i]);
        let at = |t: f64| -> Complex64 {
            let x = ((t - self.t0) / self.dt).clamp(0.0, (n - 1) as f64);
            let i = (x.floor() as usize).min(n - 2);
            let w = x - i as f64;
            value(i) * (1.0 - w) + value(i + 1) * w
        };

        let range = self.window_indices(half_width);
        let (lo, hi) = (*range.start(), *range.end());
        let mut integral = Complex64::new(0.0, 0.0);
        if lo > hi || self.time(lo) > b || self.time(hi) < a {
            integral = (at(a) + at(b)) * (0.5 * (b - a));
        } else {
            let mut prev = value(lo);
            for i in lo + 1..=hi {
                let cur = value(i);
                integral += (prev + cur) * (0.5 * self.dt);
                prev = cur;
            }
            let (tl, th) = (self.time(lo), self.time(hi));
            if tl > a {
                integral += (at(a) + value(lo)) * (0.5 * (tl - a));
            }
            if th < b {
                integral += (value(hi) + at(b)) * (0.5 * (b - th));
            }
        }
        Ok(integral / (b - a))
    }
}

/// `<g>_T` for the sampled signal.
pub fn time_average(sig: &SampledSignal, half_width: f64) -> Result<Complex64> {
    sig.boxcar(half_width, |_, s| s)
}

/// `<s(t)·exp(−iωt)>_T`: tends to the amplitude of the harmonic at `ω` and to
/// zero for frequencies absent from the signal.
pub fn extract_harmonic(sig: &SampledSignal, omega: f64, half_width: f64) -> Result<Complex64> {
    sig.boxcar(half_width, |t, s| s * Complex64::cis(-omega * t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub omega: f64,
    pub q_hat: Complex64,
    pub window_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    pub entries: Vec<SpectrumEntry>,
    pub residual_rms: f64,
}

/// Extract every probe frequency and measure what the entries fail to explain.
pub fn scan_spectrum(sig: &SampledSignal, omegas: &[f64], half_width: f64) -> Result<SpectrumEstimate> {
    sig.check_window(half_width)?;
    let entries = omegas
        .par_iter()
        .map(|&omega| {
            extract_harmonic(sig, omega, half_width).map(|q_hat| SpectrumEntry {
                omega,
                q_hat,
                window_t: half_width,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let range = sig.window_indices(half_width);
    let times: Vec<f64> = range.clone().map(|i| sig.time(i)).collect();
    let partial = SpectrumEstimate {
        entries,
        residual_rms: 0.0,
    };
    let model = reconstruct(&partial, &times);
    let sum: f64 = range.zip(model).map(|(i, m)| (sig.samples[i] - m).norm_sqr()).sum();
    let residual_rms = (sum / times.len().max(1) as f64).sqrt();
    Ok(SpectrumEstimate {
        residual_rms,
        ..partial
    })
}

/// `Σ q̂·exp(iωt)` at each time.
pub fn reconstruct(est: &SpectrumEstimate, times: &[f64]) -> Vec<Complex64> {
    times
        .iter()
        .map(|&t| est.entries.iter().map(|e| e.q_hat * Complex64::cis(e.omega * t)).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn signal(f: impl Fn(f64) -> Complex64, t_max: f64, dt: f64) -> SampledSignal {
        let n = (2.0 * t_max / dt).round() as usize + 1;
        SampledSignal::symmetric(f, t_max, n).unwrap()
    }

    #[test]
    fn average_of_constant() {
        let c = Complex64::new(1.5, -0.25);
        let s = signal(|_| c, 4.0, 0.1);
        assert!((time_average(&s, 4.0).unwrap() - c).norm() < 1e-14);
        // window ends between samples
        assert!((time_average(&s, 2.33).unwrap() - c).norm() < 1e-14);
    }

    #[test]
    fn average_of_cosine_over_half_periods_vanishes() {
        let w = 1.3;
        let t = 7.0 * PI / w;
        let s = signal(|t| Complex64::new((w * t).cos(), 0.0), t, t / 700.0);
        assert!(time_average(&s, t).unwrap().norm() < 1e-12);
    }

    #[test]
    fn average_of_cosine_matches_sinc() {
        let w: f64 = 2.0;
        let big_t = 3.1;
        let exact = (w * big_t).sin() / (w * big_t);
        let mut errs = vec![];
        for dt in [0.02, 0.01] {
            let s = signal(|t| Complex64::new((w * t).cos(), 0.0), 4.0, dt);
            errs.push((time_average(&s, big_t).unwrap().re - exact).abs());
        }
        assert!(errs[0] < 1e-3);
        // second order: halving dt divides the error by about 4
        let ratio = errs[0] / errs[1];
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn window_must_be_covered() {
        let s = signal(|_| Complex64::new(1.0, 0.0), 1.0, 0.1);
        assert!(matches!(time_average(&s, 1.5), Err(Error::WindowNotCovered { .. })));
        assert!(time_average(&s, 0.0).is_err());
        let shifted = SampledSignal::new(vec![Complex64::new(1.0, 0.0); 10], 0.1, 0.2).unwrap();
        assert!(shifted.max_window().is_err());
    }

    #[test]
    fn signal_construction_errors() {
        assert!(SampledSignal::new(vec![Complex64::new(1.0, 0.0)], 0.1, 0.0).is_err());
        assert!(SampledSignal::new(vec![Complex64::new(1.0, 0.0); 3], 0.0, 0.0).is_err());
        assert!(SampledSignal::new(vec![Complex64::new(f64::NAN, 0.0); 3], 0.1, 0.0).is_err());
        let rows = [(0.0, Complex64::new(1.0, 0.0)), (0.1, Complex64::new(1.0, 0.0)), (0.35, Complex64::new(1.0, 0.0))];
        assert!(SampledSignal::from_rows(&rows).is_err());
    }

    #[test]
    fn extraction_of_single_harmonic() {
        let q = Complex64::from_polar(2.0, PI / 4.0);
        let big_t = 200.0;
        let s = signal(|t| q * Complex64::cis(3.0 * t), big_t, 0.01);
        let on = extract_harmonic(&s, 3.0, big_t).unwrap();
        assert!((on - q).norm() < 1e-6);
        let off = extract_harmonic(&s, 5.0, big_t).unwrap();
        assert!(off.norm() <= 4.0 / (2.0 * big_t) + 1e-6);

        let zero = signal(|_| Complex64::new(0.0, 0.0), 10.0, 0.1);
        assert_eq!(extract_harmonic(&zero, 1.0, 10.0).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn scan_and_reconstruct() {
        let (q1, q2) = (Complex64::new(1.0, 0.5), Complex64::new(-0.3, 0.2));
        let big_t = 400.0;
        let s = signal(|t| q1 * Complex64::cis(1.0 * t) + q2 * Complex64::cis(2.5 * t), big_t, 0.02);
        let est = scan_spectrum(&s, &[1.0, 2.5], big_t).unwrap();
        let bound = 2.0 * (q1.norm() + q2.norm()) / (1.5 * big_t);
        assert!((est.entries[0].q_hat - q1).norm() <= bound);
        assert!((est.entries[1].q_hat - q2).norm() <= bound);
        assert!(est.residual_rms <= bound);

        let off = scan_spectrum(&s, &[0.3, 1.7, 4.0], big_t).unwrap();
        for e in &off.entries {
            let nearest = [1.0f64, 2.5].iter().map(|w| (w - e.omega).abs()).fold(f64::MAX, f64::min);
            assert!(e.q_hat.norm() <= 2.0 * (q1.norm() + q2.norm()) / (nearest * big_t));
        }

        let none = scan_spectrum(&s, &[], big_t).unwrap();
        assert!(none.entries.is_empty());
        let rms = (s.samples().iter().map(|v| v.norm_sqr()).sum::<f64>() / s.samples().len() as f64).sqrt();
        assert!((none.residual_rms - rms).abs() < 1e-12);

        let single = SpectrumEstimate {
            entries: vec![SpectrumEntry { omega: 2.0, q_hat: q1, window_t: 1.0 }],
            residual_rms: 0.0,
        };
        let out = reconstruct(&single, &[0.0, 0.7]);
        assert_eq!(out[0], q1);
        assert!((out[1] - q1 * Complex64::cis(1.4)).norm() < 1e-15);
        let empty = SpectrumEstimate { entries: vec![], residual_rms: 0.0 };
        assert!(reconstruct(&empty, &[1.0, 2.0]).iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn extraction_is_linear() {
        let s1 = signal(|t| Complex64::cis(1.1 * t), 30.0, 0.05);
        let s2 = signal(|t| Complex64::new((0.4 * t).sin(), t.cos()), 30.0, 0.05);
        let (a, b) = (Complex64::new(0.7, -1.2), Complex64::new(2.0, 0.3));
        let mix: Vec<Complex64> = s1.samples().iter().zip(s2.samples()).map(|(x, y)| a * x + b * y).collect();
        let s = SampledSignal::new(mix, s1.dt(), s1.t0()).unwrap();
        for w in [0.4, 1.1, 2.0] {
            let lhs = extract_harmonic(&s, w, 25.0).unwrap();
            let rhs = a * extract_harmonic(&s1, w, 25.0).unwrap() + b * extract_harmonic(&s2, w, 25.0).unwrap();
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }
}
