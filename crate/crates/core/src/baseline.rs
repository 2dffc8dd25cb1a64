//! Comparison waveform families.
//!
//! Two baselines bracket the zone-constrained design: sub-band OFDM, whose
//! antennas occupy disjoint subcarrier sets (orthogonal at every circular
//! shift but with per-antenna bandwidth shrunk by N), and full-band
//! zero-shift sets, orthogonal only at lag zero and carrying no data.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::encoder::{SetMetadata, SymbolFrame, WaveformFamily, WaveformSet, ZoneMode};
use crate::error::{Error, Result};
use crate::sequence::ComplexSequence;

/// How subcarriers are split across antennas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OfdmAssignment {
    /// Comb allocation: antenna n takes bins `{n, n+N, n+2N, ...}`. Each
    /// antenna keeps full-band range resolution but its pulse response
    /// repeats every `K/N` samples.
    #[default]
    Interleaved,
    /// Block allocation: antenna n takes bins `[n*K/N, (n+1)*K/N)`. Each
    /// antenna's bandwidth (and so its range resolution) shrinks by N,
    /// the mechanism behind the growing sidelobe floor of sub-band MIMO
    /// radar.
    Contiguous,
    /// Every antenna uses the same first `K/N` bins. Spectra overlap, so a
    /// projection receiver cannot separate the streams; kept for
    /// demonstrating that failure mode.
    SharedFullBand,
}

/// Disjoint (or deliberately shared) subcarrier assignment per antenna.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OfdmPlan {
    pub k: usize,
    pub assignments: Vec<Vec<usize>>,
}

impl OfdmPlan {
    /// Splits `k` bins over `n` antennas; the remainder `k mod n` is
    /// dropped.
    pub fn new(k: usize, n: usize, assignment: OfdmAssignment) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::parameter("K and N must be positive"));
        }
        let per = k / n;
        if per == 0 {
            return Err(Error::parameter(format!("subcarrier budget {k} too small for {n} antennas")));
        }
        let assignments = (0..n)
            .map(|a| match assignment {
                OfdmAssignment::Interleaved => (0..per).map(|j| a + j * n).collect(),
                OfdmAssignment::Contiguous => (a * per..(a + 1) * per).collect(),
                OfdmAssignment::SharedFullBand => (0..per).collect(),
            })
            .collect();
        Ok(Self { k, assignments })
    }

    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    pub fn symbols_per_antenna(&self) -> usize {
        self.assignments.first().map(|a| a.len()).unwrap_or(0)
    }

    /// True when no bin is claimed by two antennas.
    pub fn is_disjoint(&self) -> bool {
        let mut seen = vec![false; self.k];
        for a in &self.assignments {
            for &b in a {
                if seen[b] {
                    return false;
                }
                seen[b] = true;
            }
        }
        true
    }
}

/// Synthesizes one OFDM waveform: symbols placed on the assigned bins of a
/// length-`k` spectrum, inverse transformed, unit-energy normalized.
fn ofdm_waveform(k: usize, bins: &[usize], symbols: &[Complex64]) -> Result<(ComplexSequence, f64)> {
    if symbols.len() > bins.len() {
        return Err(Error::parameter(format!(
            "{} symbols exceed the {} assigned subcarriers",
            symbols.len(),
            bins.len()
        )));
    }
    let mut spectrum = vec![Complex64::new(0.0, 0.0); k];
    for (&b, &s) in bins.iter().zip(symbols.iter()) {
        spectrum[b] = s;
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(k).process(&mut spectrum);
    let (wave, scale) = ComplexSequence::new(spectrum)?.normalized()?;
    Ok((wave, scale))
}

/// Builds a data-bearing OFDM set. Frame `n` fills antenna `n`'s bins; all
/// frames must carry exactly the per-antenna subcarrier count.
pub fn generate_ofdm_set(
    k: usize,
    n: usize,
    frames: Vec<SymbolFrame>,
    assignment: OfdmAssignment,
    k_z: usize,
    mode: ZoneMode,
    seed: u64,
) -> Result<(WaveformSet, Vec<SymbolFrame>)> {
    let plan = OfdmPlan::new(k, n, assignment)?;
    if frames.len() != n {
        return Err(Error::parameter(format!("expected {n} frames, got {}", frames.len())));
    }
    let per = plan.symbols_per_antenna();
    let mut waves = Vec::with_capacity(n);
    let mut scales = Vec::with_capacity(n);
    for (antenna, frame) in frames.iter().enumerate() {
        if frame.len() != per {
            return Err(Error::SymbolCountMismatch { antenna, expected: per, got: frame.len() });
        }
        let (w, s) = ofdm_waveform(k, &plan.assignments[antenna], &frame.symbols)?;
        waves.push(w);
        scales.push(s);
    }
    let meta = SetMetadata {
        family: WaveformFamily::Ofdm,
        k,
        n,
        k_s: per,
        k_z,
        mode,
        seed,
        basis_family: None,
        partition: None,
        constellation: frames.first().map(|f| f.constellation),
        pilot_prefix: frames.first().map(|f| f.pilot_prefix).unwrap_or(0),
        per_antenna_capacity: vec![per; n],
        energy_scales: scales,
        subcarriers: Some(plan.assignments.clone()),
        rel_tol: 1e-10,
    };
    let set = WaveformSet::new(waves, meta)?;
    Ok((set, frames))
}

/// OFDM set with random data bits drawn from per-antenna streams of
/// `bits_seed`.
#[allow(clippy::too_many_arguments)]
pub fn generate_ofdm_set_random(
    k: usize,
    n: usize,
    constellation: crate::encoder::Constellation,
    assignment: OfdmAssignment,
    k_z: usize,
    mode: ZoneMode,
    bits_seed: u64,
    pilot_prefix: usize,
) -> Result<(WaveformSet, Vec<SymbolFrame>)> {
    let plan = OfdmPlan::new(k, n, assignment)?;
    let per = plan.symbols_per_antenna();
    let frames: Result<Vec<SymbolFrame>> = (0..n)
        .map(|antenna| {
            let mut rng = ChaCha12Rng::seed_from_u64(bits_seed);
            rng.set_stream(antenna as u64);
            SymbolFrame::random(&mut rng, constellation, per, pilot_prefix)
        })
        .collect();
    generate_ofdm_set(k, n, frames?, assignment, k_z, mode, bits_seed)
}

/// Builds a full-band set orthogonal at lag zero only: orthonormalized
/// seeded Gaussian sequences. Carries no data.
pub fn generate_zero_shift_set(
    k: usize,
    n: usize,
    seed: u64,
    k_z: usize,
    mode: ZoneMode,
) -> Result<WaveformSet> {
    if n > k {
        return Err(Error::parameter(format!("cannot fit {n} orthogonal sequences in length {k}")));
    }
    if n == 0 {
        return Err(Error::parameter("N must be positive"));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let g = nalgebra::DMatrix::<Complex64>::from_fn(k, n, |_, _| {
        let re: f64 = normal.sample(&mut rng);
        let im: f64 = normal.sample(&mut rng);
        Complex64::new(re, im)
    });
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut waves = Vec::with_capacity(n);
    for c in 0..n {
        let d = r[(c, c)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        let col: Vec<Complex64> = (0..k).map(|rr| q[(rr, c)] * ph).collect();
        waves.push(ComplexSequence::new(col)?);
    }
    let meta = SetMetadata {
        family: WaveformFamily::ZeroShift,
        k,
        n,
        k_s: 0,
        k_z,
        mode,
        seed,
        basis_family: None,
        partition: None,
        constellation: None,
        pilot_prefix: 0,
        per_antenna_capacity: vec![0; n],
        energy_scales: vec![1.0; n],
        subcarriers: None,
        rel_tol: 1e-10,
    };
    WaveformSet::new(waves, meta)
}

/// Max energy fraction outside the assigned bins, over all antennas.
pub fn spectrum_leakage(set: &WaveformSet) -> Result<f64> {
    let bins = set
        .meta()
        .subcarriers
        .as_ref()
        .ok_or_else(|| Error::parameter("set carries no subcarrier plan"))?;
    let k = set.k();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(k);
    let mut worst = 0.0f64;
    for (w, assigned) in set.waveforms().iter().zip(bins.iter()) {
        let mut spec = w.samples().to_vec();
        fft.process(&mut spec);
        let total: f64 = spec.iter().map(|c| c.norm_sqr()).sum();
        let inside: f64 = assigned.iter().map(|&b| spec[b].norm_sqr()).sum();
        worst = worst.max((total - inside) / total);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::Constellation;
    use crate::sequence::{circular_cross_correlation, cross_correlation_direct, LagWindow};

    #[test]
    fn interleaved_and_contiguous_assignments() {
        let p = OfdmPlan::new(8, 2, OfdmAssignment::Interleaved).unwrap();
        assert_eq!(p.assignments[0], vec![0, 2, 4, 6]);
        assert_eq!(p.assignments[1], vec![1, 3, 5, 7]);
        assert!(p.is_disjoint());
        let p = OfdmPlan::new(8, 2, OfdmAssignment::Contiguous).unwrap();
        assert_eq!(p.assignments[0], vec![0, 1, 2, 3]);
        assert_eq!(p.assignments[1], vec![4, 5, 6, 7]);
        assert!(p.is_disjoint());
        let p = OfdmPlan::new(8, 2, OfdmAssignment::SharedFullBand).unwrap();
        assert!(!p.is_disjoint());
    }

    #[test]
    fn remainder_bins_dropped() {
        let p = OfdmPlan::new(10, 3, OfdmAssignment::Interleaved).unwrap();
        assert_eq!(p.symbols_per_antenna(), 3);
    }

    #[test]
    fn single_subcarrier_gives_constant_modulus_exponential() {
        // 16 antennas over 16 bins: one subcarrier each.
        let frames: Vec<SymbolFrame> = (0..16)
            .map(|_| SymbolFrame {
                symbols: vec![Complex64::new(1.0, 0.0)],
                constellation: Constellation::Qpsk,
                bits: vec![],
                pilot_prefix: 0,
            })
            .collect();
        let (set, _) = generate_ofdm_set(
            16,
            16,
            frames,
            OfdmAssignment::Interleaved,
            4,
            ZoneMode::PaperLiteralZone,
            0,
        )
        .unwrap();
        for wave in set.waveforms() {
            let w = wave.samples();
            let mag = w[0].norm();
            for s in w {
                assert!((s.norm() - mag).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn disjoint_spectra_orthogonal_at_every_circular_shift() {
        let (set, _) = generate_ofdm_set_random(
            64,
            2,
            Constellation::Qam16,
            OfdmAssignment::Interleaved,
            8,
            ZoneMode::PaperLiteralZone,
            3,
            0,
        )
        .unwrap();
        let r = circular_cross_correlation(set.waveforms()[0].samples(), set.waveforms()[1].samples())
            .unwrap();
        for v in r {
            assert!(v.norm() < 1e-10);
        }
        // Aperiodic correlation is zero at lag 0 (same Parseval argument)
        // but retains edge leakage at other lags.
        let w = LagWindow::new(0, 0).unwrap();
        let zero_lag =
            cross_correlation_direct(set.waveforms()[0].samples(), set.waveforms()[1].samples(), w);
        assert!(zero_lag[0].norm() < 1e-10);
    }

    #[test]
    fn spectrum_energy_confined_to_assigned_bins() {
        for assignment in [OfdmAssignment::Interleaved, OfdmAssignment::Contiguous] {
            let (set, _) = generate_ofdm_set_random(
                128,
                4,
                Constellation::Qam16,
                assignment,
                8,
                ZoneMode::PaperLiteralZone,
                11,
                0,
            )
            .unwrap();
            assert!(spectrum_leakage(&set).unwrap() < 1e-12);
        }
    }

    #[test]
    fn ofdm_waveforms_unit_energy() {
        let (set, _) = generate_ofdm_set_random(
            64,
            2,
            Constellation::Qpsk,
            OfdmAssignment::Contiguous,
            4,
            ZoneMode::PaperLiteralZone,
            5,
            0,
        )
        .unwrap();
        for w in set.waveforms() {
            assert!((w.energy() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_shift_orthogonal_at_lag_zero_only() {
        let set = generate_zero_shift_set(256, 4, 9, 16, ZoneMode::PaperLiteralZone).unwrap();
        let zero = LagWindow::new(0, 0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    let r = cross_correlation_direct(
                        set.waveforms()[i].samples(),
                        set.waveforms()[j].samples(),
                        zero,
                    );
                    assert!(r[0].norm() < 1e-10, "pair ({i},{j})");
                }
            }
        }
        // Nonzero zone lags are not suppressed: the residual sits at the
        // O(1/sqrt(K)) level of random sequences, far above 1e-3.
        let w = LagWindow::new(1, 15).unwrap();
        let r = cross_correlation_direct(set.waveforms()[0].samples(), set.waveforms()[1].samples(), w);
        let peak = r.iter().map(|c| c.norm()).fold(0.0, f64::max);
        assert!(peak > 1e-3, "residual {peak} suspiciously low for a zero-shift set");
    }

    #[test]
    fn zero_shift_full_unitary_when_n_equals_k() {
        let set = generate_zero_shift_set(16, 16, 2, 4, ZoneMode::PaperLiteralZone).unwrap();
        let zero = LagWindow::new(0, 0).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                let r = cross_correlation_direct(
                    set.waveforms()[i].samples(),
                    set.waveforms()[j].samples(),
                    zero,
                );
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((r[0].norm() - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_shift_rejects_more_sequences_than_dimensions() {
        assert!(generate_zero_shift_set(8, 9, 0, 2, ZoneMode::PaperLiteralZone).is_err());
    }

    #[test]
    fn zero_shift_deterministic() {
        let a = generate_zero_shift_set(64, 3, 7, 8, ZoneMode::PaperLiteralZone).unwrap();
        let b = generate_zero_shift_set(64, 3, 7, 8, ZoneMode::PaperLiteralZone).unwrap();
        for (x, y) in a.waveforms().iter().zip(b.waveforms().iter()) {
            assert_eq!(x.samples(), y.samples());
        }
    }

    #[test]
    fn oversized_frame_rejected() {
        let frame = SymbolFrame {
            symbols: vec![Complex64::new(1.0, 0.0); 5],
            constellation: Constellation::Qpsk,
            bits: vec![],
            pilot_prefix: 0,
        };
        let e = generate_ofdm_set(
            8,
            2,
            vec![frame.clone(), frame],
            OfdmAssignment::Interleaved,
            2,
            ZoneMode::PaperLiteralZone,
            0,
        );
        assert!(matches!(e, Err(Error::SymbolCountMismatch { .. })));
    }
}
