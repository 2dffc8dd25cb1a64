//! Complex baseband sequences and aperiodic cross-correlation.
//!
//! The lag convention throughout the crate: correlating `s` against `x` at
//! lag `l` means
//!
//! ```text
//! corr(s, x)[l] = sum_k conj(s[k]) * x[k + l]
//! ```
//!
//! with out-of-range terms treated as zero (aperiodic, not circular).
//! Useful identity: `corr(x, s)[l] = conj(corr(s, x)[-l])`.

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite complex baseband sample sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSequence {
    samples: Vec<Complex64>,
}

impl ComplexSequence {
    /// Wraps a sample vector. Fails on empty input or non-finite values.
    pub fn new(samples: Vec<Complex64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::parameter("sequence must contain at least one sample"));
        }
        if !samples.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
            return Err(Error::parameter("sequence contains non-finite samples"));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false // length >= 1 by construction
    }

    /// Total energy `sum |s[k]|^2`.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.energy().sqrt()
    }

    /// Returns a unit-energy copy together with the applied scale factor
    /// (the original norm). Fails on an all-zero sequence.
    pub fn normalized(&self) -> Result<(Self, f64)> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::parameter("cannot normalize an all-zero sequence"));
        }
        let scaled = self.samples.iter().map(|c| c / n).collect();
        Ok((Self { samples: scaled }, n))
    }
}

/// An inclusive integer lag interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagWindow {
    min: i64,
    max: i64,
}

impl LagWindow {
    pub fn new(min: i64, max: i64) -> Result<Self> {
        if min > max {
            return Err(Error::parameter(format!("lag window [{min}, {max}] is empty")));
        }
        Ok(Self { min, max })
    }

    /// The full aperiodic support `[-(K-1), K-1]` for length-`k` sequences.
    pub fn full(k: usize) -> Self {
        let m = k as i64 - 1;
        Self { min: -m, max: m }
    }

    pub fn min(&self) -> i64 {
        self.min
    }

    pub fn max(&self) -> i64 {
        self.max
    }

    /// Number of integer lags in the window.
    pub fn len(&self) -> usize {
        (self.max - self.min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false // non-empty by construction
    }

    pub fn contains(&self, lag: i64) -> bool {
        lag >= self.min && lag <= self.max
    }

    pub fn lags(&self) -> impl Iterator<Item = i64> {
        self.min..=self.max
    }
}

/// Direct evaluation of `corr(s, x)` over a lag window.
pub fn cross_correlation_direct(s: &[Complex64], x: &[Complex64], window: LagWindow) -> Vec<Complex64> {
    let ks = s.len() as i64;
    let kx = x.len() as i64;
    window
        .lags()
        .map(|l| {
            let k_lo = 0.max(-l);
            let k_hi = ks.min(kx - l);
            let mut acc = Complex64::new(0.0, 0.0);
            for k in k_lo..k_hi {
                acc += s[k as usize].conj() * x[(k + l) as usize];
            }
            acc
        })
        .collect()
}

/// FFT evaluation of `corr(s, x)` over a lag window. Exact to roundoff.
pub fn cross_correlation_fft(s: &[Complex64], x: &[Complex64], window: LagWindow) -> Vec<Complex64> {
    let full = s.len() + x.len() - 1; // lags -(Ks-1) ..= Kx-1
    let n = full.next_power_of_two();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);

    let mut fs = vec![Complex64::new(0.0, 0.0); n];
    fs[..s.len()].copy_from_slice(s);
    let mut fx = vec![Complex64::new(0.0, 0.0); n];
    fx[..x.len()].copy_from_slice(x);
    fft.process(&mut fs);
    fft.process(&mut fx);
    for (a, b) in fs.iter_mut().zip(fx.iter()) {
        *a = a.conj() * b;
    }
    ifft.process(&mut fs);
    let scale = 1.0 / n as f64;

    // After the inverse transform, lag l >= 0 sits at index l and lag l < 0
    // wraps to index n + l.
    window
        .lags()
        .map(|l| {
            let ks = s.len() as i64;
            let kx = x.len() as i64;
            if l < -(ks - 1) || l > kx - 1 {
                Complex64::new(0.0, 0.0)
            } else {
                let idx = if l >= 0 { l as usize } else { (n as i64 + l) as usize };
                fs[idx] * scale
            }
        })
        .collect()
}

/// `corr(s, x)` over a lag window, choosing direct or FFT evaluation by cost.
pub fn cross_correlation(s: &[Complex64], x: &[Complex64], window: LagWindow) -> Vec<Complex64> {
    let direct_cost = window.len() as u64 * s.len() as u64;
    let n = (s.len() + x.len() - 1).next_power_of_two() as u64;
    let fft_cost = 3 * n * (64 - n.leading_zeros() as u64);
    if direct_cost <= fft_cost {
        cross_correlation_direct(s, x, window)
    } else {
        cross_correlation_fft(s, x, window)
    }
}

/// Circular cross-correlation of equal-length sequences at every shift.
///
/// `corr_circ(s, x)[l] = sum_k conj(s[k]) x[(k + l) mod K]`. Frequency-disjoint
/// sequences are orthogonal at every *circular* shift; the aperiodic
/// correlation retains edge leakage.
pub fn circular_cross_correlation(s: &[Complex64], x: &[Complex64]) -> Result<Vec<Complex64>> {
    if s.len() != x.len() {
        return Err(Error::shape(format!(
            "circular correlation needs equal lengths, got {} and {}",
            s.len(),
            x.len()
        )));
    }
    let k = s.len();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(k);
    let ifft = planner.plan_fft_inverse(k);
    let mut fs = s.to_vec();
    let mut fx = x.to_vec();
    fft.process(&mut fs);
    fft.process(&mut fx);
    for (a, b) in fs.iter_mut().zip(fx.iter()) {
        *a = a.conj() * b;
    }
    ifft.process(&mut fs);
    let scale = 1.0 / k as f64;
    Ok(fs.into_iter().map(|c| c * scale).collect())
}

/// Lag-indexed cross-correlation matrix of a source sequence.
///
/// Row `l` applied to a length-`K` vector `x` yields `corr(s, x)[l]`; the
/// matrix is the convolution operator built from the time-reversed conjugate
/// of `s`, restricted to the rows in `lag_window`.
#[derive(Debug, Clone)]
pub struct CrossCorrelationMatrix {
    rows: Array2<Complex64>,
    lag_window: LagWindow,
    source_length: usize,
}

impl CrossCorrelationMatrix {
    /// Builds the matrix for source `s` over `lag_window`.
    ///
    /// The window must lie within the valid lag range `[-(K-1), K-1]`.
    pub fn from_sequence(s: &ComplexSequence, lag_window: LagWindow) -> Result<Self> {
        let k = s.len() as i64;
        if lag_window.min() < -(k - 1) || lag_window.max() > k - 1 {
            return Err(Error::parameter(format!(
                "lag window [{}, {}] outside valid range [{}, {}]",
                lag_window.min(),
                lag_window.max(),
                -(k - 1),
                k - 1
            )));
        }
        let mut rows = Array2::zeros((lag_window.len(), s.len()));
        for (ri, l) in lag_window.lags().enumerate() {
            // Entry (l, j) = conj(s[j - l]) for j - l within the sequence.
            for j in 0..s.len() as i64 {
                let si = j - l;
                if si >= 0 && si < k {
                    rows[(ri, j as usize)] = s.samples()[si as usize].conj();
                }
            }
        }
        Ok(Self { rows, lag_window, source_length: s.len() })
    }

    pub fn lag_window(&self) -> LagWindow {
        self.lag_window
    }

    pub fn source_length(&self) -> usize {
        self.source_length
    }

    pub fn rows(&self) -> &Array2<Complex64> {
        &self.rows
    }

    /// Matrix-vector product: `corr(s, x)` at each lag of the window.
    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.source_length {
            return Err(Error::shape(format!(
                "expected length {}, got {}",
                self.source_length,
                x.len()
            )));
        }
        Ok(self
            .rows
            .outer_iter()
            .map(|row| row.iter().zip(x.iter()).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Product with a `K x C` matrix of column vectors, one output column each.
    pub fn apply_matrix(&self, m: &Array2<Complex64>) -> Result<Array2<Complex64>> {
        if m.nrows() != self.source_length {
            return Err(Error::shape(format!(
                "expected {} rows, got {}",
                self.source_length,
                m.nrows()
            )));
        }
        Ok(self.rows.dot(m))
    }
}

/// Pairwise zone cross-correlation residuals of a sequence family.
///
/// Entry `(n, m)` is the maximum `|corr(s_n, s_m)[l]|` over the window,
/// normalized by `||s_n|| * ||s_m||`. The diagonal reports the (normalized)
/// autocorrelation peak over the same window and is not constrained by any
/// waveform design.
pub fn zone_residual(sequences: &[ComplexSequence], window: LagWindow) -> Result<Array2<f64>> {
    let n = sequences.len();
    if n == 0 {
        return Err(Error::parameter("zone residual of an empty family"));
    }
    let k = sequences[0].len();
    if sequences.iter().any(|s| s.len() != k) {
        return Err(Error::shape("sequences must share one length"));
    }
    let norms: Vec<f64> = sequences.iter().map(|s| s.norm()).collect();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let c = cross_correlation(sequences[i].samples(), sequences[j].samples(), window);
            let peak = c.iter().map(|v| v.norm()).fold(0.0, f64::max);
            out[(i, j)] = peak / (norms[i] * norms[j]);
        }
    }
    Ok(out)
}
