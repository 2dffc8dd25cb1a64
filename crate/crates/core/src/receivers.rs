//! Receive-side processing.
//!
//! Communication: project the superimposed signal onto each antenna's
//! sub-basis, reconstruct that antenna's waveform estimate, rebuild the zone
//! constraint matrix from the reconstructions, recompute its canonical
//! null-space basis, and demap the null-space coordinates. The basis
//! computation is the same deterministic function the transmitter used, so
//! at high SNR both sides agree on it.
//!
//! Imaging: matched-filter every receiver sequence against every transmitted
//! waveform on an oversampled lag grid (range compression), then coherently
//! sum per-pixel samples with carrier phase compensation (back-projection).

use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::basis::{build_master_basis, partition_subbases, SubBasis};
use crate::channel::{RadarGeometry, RasterScene};
use crate::encoder::{
    assemble_constraints, null_space_with_dim, SetMetadata, WaveformFamily, WaveformSet,
};
use crate::error::{Error, Result};
use crate::sequence::{ComplexSequence, LagWindow};

/// Least-squares estimate of an antenna's sub-basis coordinates:
/// `x_hat = C_n^H y` (exact LS solution since the columns are orthonormal).
pub fn comm_project(y: &ComplexSequence, c_n: &SubBasis) -> Result<Vec<Complex64>> {
    c_n.project(y.samples())
}

/// How the decoder learns the per-antenna channel gains.
#[derive(Debug, Clone)]
pub enum GainMode {
    /// Assume unit gains.
    Unit,
    /// Genie-aided: the true complex gains are provided.
    Genie(Vec<Complex64>),
    /// Estimate each gain from the frame's known pilot prefix.
    PilotPrefix,
}

/// One antenna's decoded payload.
#[derive(Debug, Clone)]
pub struct DecodedFrame {
    pub antenna: usize,
    /// Equalized data symbol estimates (pilot prefix removed).
    pub symbols: Vec<Complex64>,
    /// Hard bit decisions for the data symbols.
    pub bits: Vec<bool>,
    /// The complex gain the equalizer divided by.
    pub gain_applied: Complex64,
}

/// Result of [`comm_decode`].
#[derive(Debug, Clone)]
pub struct DecodeOutput {
    pub frames: Vec<DecodedFrame>,
    /// Null-space dimension (or subcarrier count) found per antenna.
    pub capacities: Vec<usize>,
}

/// Decodes every antenna's symbols from a single-receiver capture.
///
/// The receiver knows the set metadata (basis seed, partition, zone, scales)
/// but not the transmitted bits.
pub fn comm_decode(y: &ComplexSequence, meta: &SetMetadata, gains: &GainMode) -> Result<DecodeOutput> {
    match meta.family {
        WaveformFamily::Cosmic => decode_cosmic(y, meta, gains),
        WaveformFamily::Ofdm => decode_ofdm(y, meta, gains),
        WaveformFamily::ZeroShift => {
            Err(Error::DecodeInfeasible("zero-shift sets carry no data".into()))
        }
    }
}

fn constellation_of(meta: &SetMetadata) -> Result<crate::encoder::Constellation> {
    meta.constellation
        .ok_or_else(|| Error::DecodeAbort("metadata carries no constellation".into()))
}

fn gain_for(gains: &GainMode, antenna: usize, n: usize) -> Result<Option<Complex64>> {
    match gains {
        GainMode::Unit => Ok(Some(Complex64::new(1.0, 0.0))),
        GainMode::Genie(g) => {
            if g.len() != n {
                return Err(Error::shape(format!("{} gains for {n} antennas", g.len())));
            }
            Ok(Some(g[antenna]))
        }
        GainMode::PilotPrefix => Ok(None),
    }
}

/// Least-squares pilot gain estimate `sum conj(p) x / sum |p|^2`.
fn pilot_estimate(
    constellation: crate::encoder::Constellation,
    observed: &[Complex64],
    pilot_prefix: usize,
) -> Result<Complex64> {
    if pilot_prefix == 0 {
        return Err(Error::DecodeAbort(
            "pilot gain estimation requested but the set has no pilot prefix".into(),
        ));
    }
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = 0.0;
    for (i, x) in observed.iter().take(pilot_prefix).enumerate() {
        let p = constellation.pilot_symbol(i);
        num += p.conj() * x;
        den += p.norm_sqr();
    }
    Ok(num / den)
}

fn decode_cosmic(y: &ComplexSequence, meta: &SetMetadata, gains: &GainMode) -> Result<DecodeOutput> {
    let constellation = constellation_of(meta)?;
    let basis_family = meta
        .basis_family
        .ok_or_else(|| Error::DecodeAbort("metadata carries no master basis family".into()))?;
    let partition = meta
        .partition
        .ok_or_else(|| Error::DecodeAbort("metadata carries no partition strategy".into()))?;
    if y.len() != meta.k {
        return Err(Error::shape(format!("capture length {} != K = {}", y.len(), meta.k)));
    }
    if meta.energy_scales.len() != meta.n || meta.per_antenna_capacity.len() != meta.n {
        return Err(Error::DecodeAbort("metadata scale/capacity arrays malformed".into()));
    }

    let master = build_master_basis(meta.k, basis_family, meta.seed)?;
    let subs = partition_subbases(&master, meta.n, meta.k_s, partition)?;
    let zone_window = meta.mode.lag_window(meta.k_z)?;

    let mut reconstructed: Vec<ComplexSequence> = Vec::with_capacity(meta.n);
    let mut frames = Vec::with_capacity(meta.n);
    let mut capacities = Vec::with_capacity(meta.n);

    for antenna in 0..meta.n {
        let sub = &subs[antenna];
        let projected = comm_project(y, sub)?;

        // Waveform estimate feeding later antennas' constraints. Gain and
        // scale stay baked in; the null space is invariant to them.
        reconstructed.push(ComplexSequence::new(sub.synthesize(&projected)?)?);

        // The transmit-side capacity is known from the metadata; the rank is
        // imposed so that receiver noise cannot masquerade as constraints.
        let expected = meta.per_antenna_capacity[antenna];
        let b = assemble_constraints(&reconstructed[..antenna], sub, zone_window)?;
        let ns = null_space_with_dim(&b, expected)?;
        capacities.push(ns.dim());

        // Undo the transmit energy normalization, then the channel gain.
        let scale = meta.energy_scales[antenna];
        let raw: Vec<Complex64> = ns.project(&projected)?.iter().map(|v| v * scale).collect();
        let h = match gain_for(gains, antenna, meta.n)? {
            Some(h) => h,
            None => pilot_estimate(constellation, &raw, meta.pilot_prefix)?,
        };
        if h.norm() == 0.0 {
            return Err(Error::DecodeAbort(format!("antenna {antenna}: zero channel gain")));
        }
        let equalized: Vec<Complex64> =
            raw.iter().skip(meta.pilot_prefix).map(|v| v / h).collect();
        let bits: Vec<bool> = equalized.iter().flat_map(|&s| constellation.demap(s)).collect();
        frames.push(DecodedFrame { antenna, symbols: equalized, bits, gain_applied: h });
    }

    Ok(DecodeOutput { frames, capacities })
}

fn decode_ofdm(y: &ComplexSequence, meta: &SetMetadata, gains: &GainMode) -> Result<DecodeOutput> {
    let constellation = constellation_of(meta)?;
    let assignments = meta
        .subcarriers
        .as_ref()
        .ok_or_else(|| Error::DecodeAbort("metadata carries no subcarrier plan".into()))?;
    if y.len() != meta.k {
        return Err(Error::shape(format!("capture length {} != K = {}", y.len(), meta.k)));
    }
    let mut seen = vec![false; meta.k];
    for a in assignments {
        for &b in a {
            if seen[b] {
                return Err(Error::DecodeInfeasible(
                    "antennas share subcarriers: simultaneous streams on one bin cannot be \
                     separated by projection; code, frequency, or time division would be needed"
                        .into(),
                ));
            }
            seen[b] = true;
        }
    }

    // One forward transform gives every bin projection at once:
    // u_b^H y = FFT(y)[b] / sqrt(K).
    let mut spec = y.samples().to_vec();
    FftPlanner::new().plan_fft_forward(meta.k).process(&mut spec);
    let root_k = (meta.k as f64).sqrt();

    let mut frames = Vec::with_capacity(meta.n);
    let mut capacities = Vec::with_capacity(meta.n);
    for (antenna, bins) in assignments.iter().enumerate() {
        let scale = meta.energy_scales[antenna];
        // Transmitted time signal was IDFT(spectrum)/scale with the
        // unnormalized transform, so bin b carries h * sqrt(K) * X_b / scale.
        let raw: Vec<Complex64> =
            bins.iter().map(|&b| spec[b] / root_k * scale / root_k).collect();
        let h = match gain_for(gains, antenna, meta.n)? {
            Some(h) => h,
            None => pilot_estimate(constellation, &raw, meta.pilot_prefix)?,
        };
        if h.norm() == 0.0 {
            return Err(Error::DecodeAbort(format!("antenna {antenna}: zero channel gain")));
        }
        let equalized: Vec<Complex64> =
            raw.iter().skip(meta.pilot_prefix).map(|v| v / h).collect();
        let bits: Vec<bool> = equalized.iter().flat_map(|&s| constellation.demap(s)).collect();
        capacities.push(bins.len());
        frames.push(DecodedFrame { antenna, symbols: equalized, bits, gain_applied: h });
    }
    Ok(DecodeOutput { frames, capacities })
}

// ---------------------------------------------------------------------------
// Range compression
// ---------------------------------------------------------------------------

/// Matched-filter outputs for every (transmit, receive) virtual channel on
/// an oversampled lag grid.
#[derive(Debug, Clone)]
pub struct RangeCompressedCube {
    /// Indexed `(n, m, bin)`; bin `i` is lag `lag_start + i / oversample`
    /// in samples.
    pub data: Array3<Complex64>,
    pub lag_start: i64,
    pub oversample: usize,
    /// Seconds per unit lag (the sampling interval).
    pub t_s: f64,
}

impl RangeCompressedCube {
    pub fn n(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn m(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn bins(&self) -> usize {
        self.data.shape()[2]
    }

    /// Lag (in samples) of a bin index.
    pub fn lag_at_bin(&self, bin: usize) -> f64 {
        self.lag_start as f64 + bin as f64 / self.oversample as f64
    }

    /// Linear interpolation of channel `(n, m)` at a fractional lag
    /// (samples). `None` outside the grid.
    pub fn value_at(&self, n: usize, m: usize, lag_samples: f64) -> Option<Complex64> {
        let pos = (lag_samples - self.lag_start as f64) * self.oversample as f64;
        if pos < 0.0 || pos > (self.bins() - 1) as f64 {
            return None;
        }
        let i0 = pos.floor() as usize;
        let frac = pos - i0 as f64;
        let a = self.data[(n, m, i0)];
        if frac == 0.0 {
            return Some(a);
        }
        let b = self.data[(n, m, i0 + 1)];
        Some(a * (1.0 - frac) + b * frac)
    }

    /// Mean power over virtual channels per integer lag of the original
    /// (non-oversampled) grid.
    pub fn mean_power_profile(&self) -> Vec<f64> {
        let step = self.oversample;
        let count = (self.bins() - 1) / step + 1;
        let channels = (self.n() * self.m()) as f64;
        (0..count)
            .map(|i| {
                let bin = i * step;
                let mut acc = 0.0;
                for n in 0..self.n() {
                    for m in 0..self.m() {
                        acc += self.data[(n, m, bin)].norm_sqr();
                    }
                }
                acc / channels
            })
            .collect()
    }
}

/// Range-compresses every receiver sequence against every transmitted
/// waveform over `window`, on a lag grid oversampled by `oversample`
/// (band-limited interpolation via spectral zero-padding).
pub fn range_compress(
    raw: &[ComplexSequence],
    set: &WaveformSet,
    window: LagWindow,
    oversample: usize,
) -> Result<RangeCompressedCube> {
    if raw.is_empty() {
        return Err(Error::parameter("no receiver sequences"));
    }
    if oversample == 0 {
        return Err(Error::parameter("oversample factor must be at least 1"));
    }
    let k = set.k();
    let ylen = raw[0].len();
    if ylen < k {
        return Err(Error::shape(format!("receiver length {ylen} shorter than waveform length {k}")));
    }
    if raw.iter().any(|r| r.len() != ylen) {
        return Err(Error::shape("receiver sequences must share one length"));
    }

    let n = set.n();
    let m = raw.len();
    let bins = (window.len() - 1) * oversample + 1;
    let p = (k + ylen - 1).next_power_of_two();
    let q = p * oversample;

    let mut planner = FftPlanner::new();
    let fft_p = planner.plan_fft_forward(p);
    let ifft_q = planner.plan_fft_inverse(q);

    let wave_spectra: Vec<Vec<Complex64>> = set
        .waveforms()
        .iter()
        .map(|w| {
            let mut buf = vec![Complex64::new(0.0, 0.0); p];
            buf[..k].copy_from_slice(w.samples());
            fft_p.process(&mut buf);
            buf
        })
        .collect();
    let rx_spectra: Vec<Vec<Complex64>> = raw
        .iter()
        .map(|y| {
            let mut buf = vec![Complex64::new(0.0, 0.0); p];
            buf[..ylen].copy_from_slice(y.samples());
            fft_p.process(&mut buf);
            buf
        })
        .collect();

    let mut data = Array3::zeros((n, m, bins));
    let scale = 1.0 / p as f64;
    for (ni, ws) in wave_spectra.iter().enumerate() {
        for (mi, ys) in rx_spectra.iter().enumerate() {
            // Cross spectrum, zero-padded symmetrically to oversample the
            // lag axis. The Nyquist coefficient splits between the two
            // halves to keep the interpolation band-limited.
            let mut padded = vec![Complex64::new(0.0, 0.0); q];
            let half = p / 2;
            for i in 0..half {
                padded[i] = ws[i].conj() * ys[i];
            }
            for i in half + 1..p {
                padded[q - p + i] = ws[i].conj() * ys[i];
            }
            if oversample > 1 {
                let nyq = ws[half].conj() * ys[half] * 0.5;
                padded[half] = nyq;
                padded[q - half] = nyq;
            } else {
                padded[half] = ws[half].conj() * ys[half];
            }
            ifft_q.process(&mut padded);
            for bin in 0..bins {
                // Oversampled lag: window.min() + bin / oversample samples.
                let num = window.min() * oversample as i64 + bin as i64;
                let idx = num.rem_euclid(q as i64) as usize;
                data[(ni, mi, bin)] = padded[idx] * scale;
            }
        }
    }

    Ok(RangeCompressedCube {
        data,
        lag_start: window.min(),
        oversample,
        t_s: 1.0, // caller-facing seconds-per-lag set by the imaging layer
    })
}

/// Same as [`range_compress`] but records the physical sampling interval.
pub fn range_compress_with_geometry(
    raw: &[ComplexSequence],
    set: &WaveformSet,
    window: LagWindow,
    oversample: usize,
    geom: &RadarGeometry,
) -> Result<RangeCompressedCube> {
    let mut cube = range_compress(raw, set, window, oversample)?;
    cube.t_s = geom.sampling_interval();
    Ok(cube)
}

// ---------------------------------------------------------------------------
// Back-projection
// ---------------------------------------------------------------------------

/// Rectangular pixel grid in world coordinates.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ImageGrid {
    pub origin: [f64; 2],
    pub spacing: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

impl ImageGrid {
    pub fn from_raster(r: &RasterScene) -> Self {
        Self { origin: r.origin, spacing: r.spacing, nx: r.nx(), ny: r.ny() }
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> [f64; 2] {
        [
            self.origin[0] + ix as f64 * self.spacing[0],
            self.origin[1] + iy as f64 * self.spacing[1],
        ]
    }
}

/// Complex back-projected image on a world-coordinate grid.
#[derive(Debug, Clone)]
pub struct RadarImage {
    /// Indexed `(ix, iy)`.
    pub values: Array2<Complex64>,
    pub grid: ImageGrid,
    /// Per-channel pixel delays that fell outside the compressed lag grid
    /// (those contributions count as zero).
    pub clipped: usize,
}

impl RadarImage {
    pub fn magnitude(&self) -> Array2<f64> {
        self.values.map(|c| c.norm())
    }

    /// Grid indices of the magnitude peak.
    pub fn peak_cell(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut best_v = f64::NEG_INFINITY;
        for ix in 0..self.grid.nx {
            for iy in 0..self.grid.ny {
                let v = self.values[(ix, iy)].norm();
                if v > best_v {
                    best_v = v;
                    best = (ix, iy);
                }
            }
        }
        best
    }
}

/// Coherent back-projection:
/// `I(p) = sum_{n,m} cube(n, m, tau_{n,m}(p)) * exp(+j 2 pi f0 tau_{n,m}(p))`.
pub fn backproject(cube: &RangeCompressedCube, geom: &RadarGeometry, grid: &ImageGrid) -> Result<RadarImage> {
    if cube.n() != geom.n_tx() || cube.m() != geom.m_rx() {
        return Err(Error::shape(format!(
            "cube is {}x{} but geometry is {}x{}",
            cube.n(),
            cube.m(),
            geom.n_tx(),
            geom.m_rx()
        )));
    }
    let t_s = geom.sampling_interval();
    let mut values = Array2::zeros((grid.nx, grid.ny));
    let mut clipped = 0usize;
    for ix in 0..grid.nx {
        for iy in 0..grid.ny {
            let p = grid.cell_center(ix, iy);
            let mut acc = Complex64::new(0.0, 0.0);
            for n in 0..cube.n() {
                for m in 0..cube.m() {
                    let tau = geom.two_way_delay(n, m, p);
                    match cube.value_at(n, m, tau / t_s) {
                        Some(v) => {
                            let ph = 2.0 * std::f64::consts::PI * geom.carrier_hz * tau;
                            acc += v * Complex64::new(ph.cos(), ph.sin());
                        }
                        None => clipped += 1,
                    }
                }
            }
            values[(ix, iy)] = acc;
        }
    }
    Ok(RadarImage { values, grid: grid.clone(), clipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::{generate_ofdm_set_random, OfdmAssignment};
    use crate::channel::{comm_receive, imaging_receive, CommChannel, PointScatterer, SceneModel};
    use crate::encoder::{
        generate_cosmic_set_random, Constellation, CosmicConfig, ZoneMode,
    };
    use crate::sequence::cross_correlation_direct;
    use crate::SPEED_OF_LIGHT;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn cfg() -> CosmicConfig {
        CosmicConfig::new(128, 3, 32, 4).with_seed(17).with_mode(ZoneMode::SymmetricZone)
    }

    #[test]
    fn projection_recovers_subspace_vectors() {
        let master = crate::basis::build_master_basis(64, crate::basis::BasisFamily::RandomUnitary, 1).unwrap();
        let subs =
            crate::basis::partition_subbases(&master, 2, 16, crate::basis::PartitionStrategy::ContiguousBlocks)
                .unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let v: Vec<Complex64> =
            (0..16).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
        let y = ComplexSequence::new(subs[0].synthesize(&v).unwrap()).unwrap();
        let back = comm_project(&y, &subs[0]).unwrap();
        for (a, b) in v.iter().zip(back.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
        // A vector in the other antenna's subspace projects to zero.
        let z = comm_project(&y, &subs[1]).unwrap();
        for c in z {
            assert!(c.norm() < 1e-12);
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let master = crate::basis::build_master_basis(64, crate::basis::BasisFamily::RandomUnitary, 3).unwrap();
        let subs =
            crate::basis::partition_subbases(&master, 2, 16, crate::basis::PartitionStrategy::Strided).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let y: Vec<Complex64> =
            (0..64).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
        let once = subs[0].synthesize(&subs[0].project(&y).unwrap()).unwrap();
        let twice = subs[0].synthesize(&subs[0].project(&once).unwrap()).unwrap();
        for (a, b) in once.iter().zip(twice.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_noise_roundtrip_recovers_bits_exactly() {
        for constellation in [Constellation::Qam16, Constellation::Qpsk] {
            let (set, frames) = generate_cosmic_set_random(&cfg(), constellation, 23).unwrap();
            let ch = CommChannel::unit(set.n(), 0.0);
            let y = comm_receive(&set, &ch, 0).unwrap();
            let out = comm_decode(&y, set.meta(), &GainMode::Unit).unwrap();
            for (frame, truth) in out.frames.iter().zip(frames.iter()) {
                assert_eq!(frame.bits, truth.bits, "constellation {constellation:?}");
            }
        }
    }

    #[test]
    fn zero_noise_roundtrip_with_complex_gains_genie() {
        let (set, frames) = generate_cosmic_set_random(&cfg(), Constellation::Qam16, 29).unwrap();
        let gains: Vec<Complex64> = (0..set.n())
            .map(|i| Complex64::from_polar(0.5 + 0.3 * i as f64, 0.7 * i as f64 - 1.0))
            .collect();
        let mut ch = CommChannel::unit(set.n(), 0.0);
        ch.gains = gains.clone();
        let y = comm_receive(&set, &ch, 0).unwrap();
        let out = comm_decode(&y, set.meta(), &GainMode::Genie(gains)).unwrap();
        for (frame, truth) in out.frames.iter().zip(frames.iter()) {
            assert_eq!(frame.bits, truth.bits);
        }
    }

    #[test]
    fn pilot_equalization_recovers_bits_and_gain() {
        let mut c = cfg();
        c.pilot_prefix = 4;
        let (set, frames) = generate_cosmic_set_random(&c, Constellation::Qam16, 31).unwrap();
        let gains: Vec<Complex64> =
            (0..set.n()).map(|i| Complex64::from_polar(1.3, 0.4 * i as f64 + 0.2)).collect();
        let mut ch = CommChannel::unit(set.n(), 0.0);
        ch.gains = gains.clone();
        let y = comm_receive(&set, &ch, 0).unwrap();
        let out = comm_decode(&y, set.meta(), &GainMode::PilotPrefix).unwrap();
        for ((frame, truth), h) in out.frames.iter().zip(frames.iter()).zip(gains.iter()) {
            assert_eq!(frame.bits, truth.bits);
            assert!((frame.gain_applied - h).norm() < 1e-9);
        }
    }

    #[test]
    fn recovered_symbols_match_at_zero_noise() {
        let (set, frames) = generate_cosmic_set_random(&cfg(), Constellation::Qam16, 37).unwrap();
        let ch = CommChannel::unit(set.n(), 0.0);
        let y = comm_receive(&set, &ch, 0).unwrap();
        let out = comm_decode(&y, set.meta(), &GainMode::Unit).unwrap();
        for (frame, truth) in out.frames.iter().zip(frames.iter()) {
            let worst = frame
                .symbols
                .iter()
                .zip(truth.data_symbols())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(worst < 1e-9, "symbol EVM {worst}");
        }
    }

    #[test]
    fn ofdm_disjoint_decodes_and_shared_is_infeasible() {
        let (set, frames) = generate_ofdm_set_random(
            128,
            4,
            Constellation::Qam16,
            OfdmAssignment::Interleaved,
            8,
            ZoneMode::PaperLiteralZone,
            5,
            0,
        )
        .unwrap();
        let ch = CommChannel::unit(4, 0.0);
        let y = comm_receive(&set, &ch, 0).unwrap();
        let out = comm_decode(&y, set.meta(), &GainMode::Unit).unwrap();
        for (frame, truth) in out.frames.iter().zip(frames.iter()) {
            assert_eq!(frame.bits, truth.bits);
        }

        let (shared, _) = generate_ofdm_set_random(
            128,
            4,
            Constellation::Qam16,
            OfdmAssignment::SharedFullBand,
            8,
            ZoneMode::PaperLiteralZone,
            5,
            0,
        )
        .unwrap();
        let y = comm_receive(&shared, &CommChannel::unit(4, 0.0), 0).unwrap();
        match comm_decode(&y, shared.meta(), &GainMode::Unit) {
            Err(Error::DecodeInfeasible(_)) => {}
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn range_compression_peaks_at_target_delay() {
        let (set, _) = generate_cosmic_set_random(
            &CosmicConfig::new(128, 1, 64, 8).with_seed(5),
            Constellation::Qam16,
            3,
        )
        .unwrap();
        let geom = RadarGeometry {
            carrier_hz: 77e9,
            bandwidth_hz: 200e6,
            tx_positions: vec![[0.0, 0.0]],
            rx_positions: vec![[0.0, 0.0]],
        };
        let delay_bins = 20.0;
        let range = delay_bins * geom.sampling_interval() * SPEED_OF_LIGHT / 2.0;
        let scene = SceneModel::Points(vec![PointScatterer::new(0.0, range, 1.0)]);
        let cap = imaging_receive(&set, &geom, &scene, 0, 0.0).unwrap();
        let window = LagWindow::new(0, 40).unwrap();
        let cube = range_compress(&cap.sequences, &set, window, 1).unwrap();
        let mut best = (0usize, f64::MIN);
        for bin in 0..cube.bins() {
            let v = cube.data[(0, 0, bin)].norm();
            if v > best.1 {
                best = (bin, v);
            }
        }
        assert_eq!(cube.lag_at_bin(best.0) as i64, 20);
    }

    #[test]
    fn empty_scene_yields_zero_cube() {
        let (set, _) = generate_cosmic_set_random(
            &CosmicConfig::new(64, 1, 32, 4).with_seed(5),
            Constellation::Qpsk,
            3,
        )
        .unwrap();
        let y = vec![ComplexSequence::new(vec![Complex64::new(0.0, 0.0); 80]).unwrap()];
        let cube = range_compress(&y, &set, LagWindow::new(0, 15).unwrap(), 4).unwrap();
        for v in cube.data.iter() {
            assert_eq!(*v, Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn oversampled_grid_matches_integer_lags() {
        let (set, _) = generate_cosmic_set_random(
            &CosmicConfig::new(64, 1, 32, 4).with_seed(6),
            Constellation::Qpsk,
            4,
        )
        .unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let y = vec![ComplexSequence::new(
            (0..90).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect(),
        )
        .unwrap()];
        let w = LagWindow::new(-5, 12).unwrap();
        let direct = cross_correlation_direct(set.waveforms()[0].samples(), y[0].samples(), w);
        let cube = range_compress(&y, &set, w, 4).unwrap();
        for (i, l) in w.lags().enumerate() {
            let v = cube.value_at(0, 0, l as f64).unwrap();
            assert!((v - direct[i]).norm() < 1e-10, "lag {l}");
        }
    }

    fn single_target_setup(
        n: usize,
        m: usize,
    ) -> (WaveformSet, RadarGeometry, [f64; 2], RangeCompressedCube) {
        let c = CosmicConfig::new(256, n, 256 / n.max(1), 8)
            .with_seed(11)
            .with_mode(ZoneMode::SymmetricZone);
        let (set, _) = generate_cosmic_set_random(&c, Constellation::Qam16, 13).unwrap();
        let geom = RadarGeometry::auto_layout(77e9, 200e6, n, m).unwrap();
        let target = [0.8, 6.3];
        let scene = SceneModel::Points(vec![PointScatterer { position: target, reflectivity: [1.0, 0.0] }]);
        let cap = imaging_receive(&set, &geom, &scene, 0, 0.0).unwrap();
        let window = LagWindow::new(0, 24).unwrap();
        let cube = range_compress_with_geometry(&cap.sequences, &set, window, 4, &geom).unwrap();
        (set, geom, target, cube)
    }

    #[test]
    fn backprojection_range_localization() {
        // A strip grid along range at the target's azimuth: the range peak
        // must land within half a resolution cell for every array size
        // (a single channel resolves range only, so azimuth is not probed).
        for (n, m) in [(1usize, 1usize), (2, 2), (4, 4)] {
            let (_set, geom, target, cube) = single_target_setup(n, m);
            let res = geom.range_resolution();
            let grid = ImageGrid {
                origin: [target[0], target[1] - 2.0],
                spacing: [1.0, res / 8.0],
                nx: 1,
                ny: 43,
            };
            let img = backproject(&cube, &geom, &grid).unwrap();
            let (_, py) = img.peak_cell();
            let p = grid.cell_center(0, py);
            let err = (p[1] - target[1]).abs();
            assert!(err <= res / 2.0, "N={n} M={m}: range peak {err} m from target");
        }
    }

    #[test]
    fn backprojection_2d_localization_with_array() {
        let (_set, geom, target, cube) = single_target_setup(4, 4);
        let res = geom.range_resolution();
        // Cross-range cell from the virtual aperture extent at the target
        // range.
        let xs: Vec<f64> = geom.virtual_positions().iter().map(|p| p[0]).collect();
        let aperture = xs.iter().cloned().fold(f64::MIN, f64::max)
            - xs.iter().cloned().fold(f64::MAX, f64::min);
        let range = (target[0] * target[0] + target[1] * target[1]).sqrt();
        let cross_cell = geom.wavelength() * range / (2.0 * aperture);
        let grid = ImageGrid {
            origin: [target[0] - 2.0, target[1] - 2.0],
            spacing: [res / 8.0, res / 8.0],
            nx: 43,
            ny: 43,
        };
        let img = backproject(&cube, &geom, &grid).unwrap();
        let (px, py) = img.peak_cell();
        let p = grid.cell_center(px, py);
        let range_err = (p[1] - target[1]).abs();
        let cross_err = (p[0] - target[0]).abs();
        assert!(range_err <= res / 2.0, "range error {range_err}");
        assert!(cross_err <= cross_cell / 2.0, "cross-range error {cross_err} vs cell {cross_cell}");
    }

    #[test]
    fn coherent_gain_scales_with_channel_count() {
        let (_set, geom, target, cube) = single_target_setup(4, 4);
        let grid = ImageGrid { origin: target, spacing: [0.1, 0.1], nx: 1, ny: 1 };
        let img = backproject(&cube, &geom, &grid).unwrap();
        let full = img.values[(0, 0)].norm();

        let single = RangeCompressedCube {
            data: cube.data.slice(ndarray::s![0..1, 0..1, ..]).to_owned(),
            lag_start: cube.lag_start,
            oversample: cube.oversample,
            t_s: cube.t_s,
        };
        let geom1 = RadarGeometry {
            carrier_hz: geom.carrier_hz,
            bandwidth_hz: geom.bandwidth_hz,
            tx_positions: vec![geom.tx_positions[0]],
            rx_positions: vec![geom.rx_positions[0]],
        };
        let img1 = backproject(&single, &geom1, &grid).unwrap();
        let one = img1.values[(0, 0)].norm();
        let ratio = full / one;
        assert!((ratio - 16.0).abs() < 2.0, "coherent gain {ratio}");
    }

    #[test]
    fn pixels_outside_lag_grid_are_counted() {
        let (_set, geom, _target, cube) = single_target_setup(2, 2);
        let grid = ImageGrid { origin: [0.0, 400.0], spacing: [1.0, 1.0], nx: 2, ny: 2 };
        let img = backproject(&cube, &geom, &grid).unwrap();
        assert_eq!(img.clipped, 2 * 2 * 4);
        for v in img.values.iter() {
            assert_eq!(*v, Complex64::new(0.0, 0.0));
        }
    }
}
