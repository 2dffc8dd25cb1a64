//! Figures of merit: integrated sidelobe ratio, image SNR, spectral
//! efficiency, symbol/bit error rates, and the capacity-versus-antennas
//! comparison table.

use serde::{Deserialize, Serialize};

use crate::baseline::{generate_ofdm_set_random, OfdmAssignment};
use crate::channel::{imaging_receive, CellLabel, PointScatterer, RadarGeometry, SceneModel};
use crate::encoder::{generate_cosmic_set_random, Constellation, CosmicConfig, ZoneMode};
use crate::error::{Error, Result};
use crate::receivers::{range_compress, RadarImage};
use crate::sequence::LagWindow;

/// Reports stay finite: ratios are clamped to +/- this many dB.
pub const DB_FLOOR: f64 = 120.0;

fn clamp_db(ratio: f64) -> f64 {
    if ratio <= 0.0 {
        return -DB_FLOOR;
    }
    (10.0 * ratio.log10()).clamp(-DB_FLOOR, DB_FLOOR)
}

/// Scalar figures of merit for one scenario run. Fields are present when the
/// corresponding stage ran.
#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
pub struct MetricsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub islr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_image_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se_bits_per_s_per_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ser: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ber: Option<f64>,
    /// Largest normalized zone cross-correlation residual of the set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_max: Option<f64>,
    /// Hash of the canonicalized scenario configuration.
    pub config_fingerprint: String,
}

/// Integrated sidelobe ratio of a range magnitude profile, in dB:
/// total energy outside the declared mainlobes over the energy within them.
///
/// A mainlobe is `peak +/- mainlobe_halfwidth` bins. At critical sampling
/// one resolution cell is one bin; oversampled profiles scale the halfwidth
/// accordingly.
pub fn islr(profile: &[f64], mainlobe_halfwidth: usize, peaks: &[usize]) -> Result<f64> {
    if profile.is_empty() {
        return Err(Error::parameter("empty profile"));
    }
    if peaks.is_empty() {
        return Err(Error::parameter("at least one mainlobe peak required"));
    }
    if mainlobe_halfwidth == 0 {
        return Err(Error::parameter("mainlobe halfwidth must be at least one bin"));
    }
    if let Some(&bad) = peaks.iter().find(|&&p| p >= profile.len()) {
        return Err(Error::parameter(format!("peak {bad} outside profile of {} bins", profile.len())));
    }
    let mut main = vec![false; profile.len()];
    for &p in peaks {
        let lo = p.saturating_sub(mainlobe_halfwidth);
        let hi = (p + mainlobe_halfwidth).min(profile.len() - 1);
        for f in main.iter_mut().take(hi + 1).skip(lo) {
            *f = true;
        }
    }
    let total: f64 = profile.iter().map(|v| v * v).sum();
    let mainlobe: f64 = profile.iter().zip(main.iter()).filter(|(_, &m)| m).map(|(v, _)| v * v).sum();
    if mainlobe == 0.0 {
        return Err(Error::parameter("mainlobe energy is zero"));
    }
    Ok(clamp_db((total - mainlobe) / mainlobe))
}

/// Image signal-to-noise ratio in dB: summed squared magnitude over the
/// signal-labeled cells divided by the noise-labeled cells.
pub fn image_snr(img: &RadarImage, labels: &ndarray::Array2<CellLabel>) -> Result<f64> {
    if labels.dim() != img.values.dim() {
        return Err(Error::shape(format!(
            "mask {:?} does not match image {:?}",
            labels.dim(),
            img.values.dim()
        )));
    }
    let mut signal = 0.0;
    let mut noise = 0.0;
    let mut n_signal = 0usize;
    let mut n_noise = 0usize;
    for (v, l) in img.values.iter().zip(labels.iter()) {
        match l {
            CellLabel::Signal => {
                signal += v.norm_sqr();
                n_signal += 1;
            }
            CellLabel::Noise => {
                noise += v.norm_sqr();
                n_noise += 1;
            }
            CellLabel::Excluded => {}
        }
    }
    if n_signal == 0 {
        return Err(Error::EmptyRegion("signal"));
    }
    if n_noise == 0 {
        return Err(Error::EmptyRegion("noise"));
    }
    if noise == 0.0 {
        return Ok(DB_FLOOR);
    }
    Ok(clamp_db(signal / noise))
}

/// Spectral efficiency in bits/s/Hz:
/// `SE = beta * eta * sum_n log2(1 + |h_n|^2 P / (beta N0 B))`.
///
/// `beta` is each antenna's bandwidth fraction, `eta` the fraction of
/// correctly received symbols, `p_i` the per-antenna transmit power.
pub fn spectral_efficiency(
    gains: &[num_complex::Complex64],
    p_i: f64,
    n0: f64,
    bandwidth: f64,
    beta: f64,
    eta: f64,
) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::parameter(format!("beta {beta} outside (0, 1]")));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::parameter(format!("eta {eta} outside [0, 1]")));
    }
    if n0 * bandwidth <= 0.0 {
        return Err(Error::parameter("noise power N0*B must be positive"));
    }
    if p_i <= 0.0 {
        return Err(Error::parameter("transmit power must be positive"));
    }
    let sum: f64 = gains
        .iter()
        .map(|h| (1.0 + h.norm_sqr() * p_i / (beta * n0 * bandwidth)).log2())
        .sum();
    Ok(beta * eta * sum)
}

/// Symbol error rate between decided and transmitted symbol streams
/// (nearest-point classification already applied upstream: inputs are the
/// decided bits grouped per symbol).
pub fn symbol_error_rate(decided_bits: &[bool], truth_bits: &[bool], bits_per_symbol: usize) -> Result<f64> {
    if decided_bits.len() != truth_bits.len() {
        return Err(Error::shape(format!(
            "bit streams differ in length: {} vs {}",
            decided_bits.len(),
            truth_bits.len()
        )));
    }
    if bits_per_symbol == 0 || decided_bits.len() % bits_per_symbol != 0 {
        return Err(Error::parameter("bit count not a multiple of bits per symbol"));
    }
    let symbols = decided_bits.len() / bits_per_symbol;
    if symbols == 0 {
        return Ok(0.0);
    }
    let errors = decided_bits
        .chunks(bits_per_symbol)
        .zip(truth_bits.chunks(bits_per_symbol))
        .filter(|(a, b)| a != b)
        .count();
    Ok(errors as f64 / symbols as f64)
}

/// Bit error rate between two equal-length bit streams.
pub fn bit_error_rate(decided_bits: &[bool], truth_bits: &[bool]) -> Result<f64> {
    if decided_bits.len() != truth_bits.len() {
        return Err(Error::shape("bit streams differ in length"));
    }
    if decided_bits.is_empty() {
        return Ok(0.0);
    }
    let errors = decided_bits.iter().zip(truth_bits.iter()).filter(|(a, b)| a != b).count();
    Ok(errors as f64 / decided_bits.len() as f64)
}

/// Per-antenna entry of a [`DecodeReport`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AntennaDecodeReport {
    pub antenna: usize,
    pub symbols: usize,
    pub symbol_errors: usize,
    pub ser: f64,
    pub ber: f64,
}

/// Decode quality report (JSON artifact): per-antenna and aggregate error
/// rates against the transmitted truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecodeReport {
    pub per_antenna: Vec<AntennaDecodeReport>,
    pub total_symbols: usize,
    pub ser: f64,
    pub ber: f64,
}

/// Compares decoded frames against the transmitted ones.
pub fn decode_report(
    decoded: &crate::receivers::DecodeOutput,
    truth: &[crate::encoder::SymbolFrame],
) -> Result<DecodeReport> {
    if decoded.frames.len() != truth.len() {
        return Err(Error::shape(format!(
            "{} decoded frames vs {} transmitted",
            decoded.frames.len(),
            truth.len()
        )));
    }
    let mut per_antenna = Vec::with_capacity(truth.len());
    let mut total_symbols = 0usize;
    let mut total_errors = 0usize;
    let mut total_bits = 0usize;
    let mut total_bit_errors = 0usize;
    for (frame, t) in decoded.frames.iter().zip(truth.iter()) {
        let bps = t.constellation.bits_per_symbol();
        if frame.bits.len() != t.bits.len() {
            return Err(Error::shape(format!(
                "antenna {}: {} decoded bits vs {} transmitted",
                frame.antenna,
                frame.bits.len(),
                t.bits.len()
            )));
        }
        let symbols = t.bits.len() / bps;
        let symbol_errors = frame
            .bits
            .chunks(bps)
            .zip(t.bits.chunks(bps))
            .filter(|(a, b)| a != b)
            .count();
        let bit_errors = frame.bits.iter().zip(t.bits.iter()).filter(|(a, b)| a != b).count();
        per_antenna.push(AntennaDecodeReport {
            antenna: frame.antenna,
            symbols,
            symbol_errors,
            ser: if symbols > 0 { symbol_errors as f64 / symbols as f64 } else { 0.0 },
            ber: if t.bits.is_empty() { 0.0 } else { bit_errors as f64 / t.bits.len() as f64 },
        });
        total_symbols += symbols;
        total_errors += symbol_errors;
        total_bits += t.bits.len();
        total_bit_errors += bit_errors;
    }
    Ok(DecodeReport {
        per_antenna,
        total_symbols,
        ser: if total_symbols > 0 { total_errors as f64 / total_symbols as f64 } else { 0.0 },
        ber: if total_bits > 0 { total_bit_errors as f64 / total_bits as f64 } else { 0.0 },
    })
}

/// One row of the capacity/ISLR versus antenna-count table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapacityRow {
    pub n: usize,
    /// Sum of computed null-space dimensions across antennas.
    pub zone_constrained_symbols: usize,
    /// Per-antenna computed capacities.
    pub per_antenna: Vec<usize>,
    /// `N * floor(K / N)` subcarriers.
    pub ofdm_symbols: usize,
    pub islr_zone_constrained_db: f64,
    pub islr_ofdm_db: f64,
}

/// Sweep configuration for [`symbol_capacity_vs_n`].
#[derive(Debug, Clone)]
pub struct CapacitySweepConfig {
    pub k: usize,
    pub k_z: usize,
    pub mode: ZoneMode,
    pub seed: u64,
    pub bits_seed: u64,
    /// Range-profile averaging slots (independent symbol draws).
    pub slots: usize,
    pub constellation: Constellation,
}

impl Default for CapacitySweepConfig {
    fn default() -> Self {
        Self {
            k: 512,
            k_z: 16,
            mode: ZoneMode::SymmetricZone,
            seed: 1,
            bits_seed: 2,
            slots: 4,
            constellation: Constellation::Qam16,
        }
    }
}

/// Builds the symbol-capacity and ISLR comparison across antenna counts.
///
/// Both families use the per-antenna budget `K_s = floor(K / N)`. The ISLR
/// is measured on the zone-limited mean power profile of a noiseless
/// single-target capture, averaged over `slots` independent symbol draws;
/// OFDM uses contiguous sub-bands, the allocation whose mainlobe widens
/// with N.
pub fn symbol_capacity_vs_n(cfg: &CapacitySweepConfig, antenna_counts: &[usize]) -> Result<Vec<CapacityRow>> {
    let mut rows = Vec::with_capacity(antenna_counts.len());
    for &n in antenna_counts {
        if n == 0 {
            return Err(Error::parameter("antenna count 0 in sweep"));
        }
        let k_s = cfg.k / n;
        if k_s == 0 {
            return Err(Error::parameter(format!("K = {} cannot host {n} antennas", cfg.k)));
        }

        let mut per_antenna: Vec<usize> = Vec::new();
        let mut islr_zone = 0.0;
        let mut islr_ofdm = 0.0;
        for slot in 0..cfg.slots {
            let ccfg = CosmicConfig {
                k: cfg.k,
                n,
                k_s,
                k_z: cfg.k_z,
                mode: cfg.mode,
                family: crate::basis::BasisFamily::RandomUnitary,
                partition: crate::basis::PartitionStrategy::ContiguousBlocks,
                seed: cfg.seed,
                rel_tol: 1e-10,
                pilot_prefix: 0,
            };
            let (zone_set, _) =
                generate_cosmic_set_random(&ccfg, cfg.constellation, cfg.bits_seed + slot as u64)?;
            if slot == 0 {
                per_antenna = zone_set.meta().per_antenna_capacity.clone();
            }
            let (ofdm_set, _) = generate_ofdm_set_random(
                cfg.k,
                n,
                cfg.constellation,
                OfdmAssignment::Contiguous,
                cfg.k_z,
                cfg.mode,
                cfg.bits_seed + slot as u64,
                0,
            )?;
            islr_zone += single_target_islr(&zone_set, cfg.k_z)?;
            islr_ofdm += single_target_islr(&ofdm_set, cfg.k_z)?;
        }
        islr_zone /= cfg.slots as f64;
        islr_ofdm /= cfg.slots as f64;

        rows.push(CapacityRow {
            n,
            zone_constrained_symbols: per_antenna.iter().sum(),
            per_antenna,
            ofdm_symbols: n * k_s,
            islr_zone_constrained_db: islr_zone,
            islr_ofdm_db: islr_ofdm,
        });
    }
    Ok(rows)
}

/// Zone-windowed ISLR of a noiseless single-target capture with every
/// antenna transmitting (mean power over virtual channels, target centered
/// in the zone, mainlobe of one resolution cell).
fn single_target_islr(set: &crate::encoder::WaveformSet, k_z: usize) -> Result<f64> {
    let geom = RadarGeometry {
        carrier_hz: 77e9,
        bandwidth_hz: 200e6,
        tx_positions: vec![[0.0, 0.0]; set.n()],
        rx_positions: vec![[0.0, 0.0]],
    };
    let delay_bins = k_z as f64 - 1.0;
    let range = delay_bins * geom.sampling_interval() * crate::SPEED_OF_LIGHT / 2.0;
    let scene = SceneModel::Points(vec![PointScatterer::new(0.0, range, 1.0)]);
    let cap = imaging_receive(set, &geom, &scene, 0, 0.0)?;
    let window = LagWindow::new(0, 2 * k_z as i64 - 1)?;
    let cube = range_compress(&cap.sequences, set, window, 1)?;
    let profile: Vec<f64> = cube.mean_power_profile().iter().map(|p| p.sqrt()).collect();
    let peak = delay_bins as usize;
    islr(&profile, 1, &[peak])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::receivers::ImageGrid;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use num_complex::Complex64;

    #[test]
    fn impulse_profile_hits_the_floor() {
        let mut profile = vec![0.0; 64];
        profile[10] = 3.0;
        let v = islr(&profile, 1, &[10]).unwrap();
        assert_eq!(v, -DB_FLOOR);
    }

    #[test]
    fn flat_profile_matches_closed_form() {
        let profile = vec![1.0; 32];
        // Mainlobe +/-1 around bin 5 covers 3 bins; rest is sidelobe.
        let v = islr(&profile, 1, &[5]).unwrap();
        assert_abs_diff_eq!(v, 10.0 * ((29.0f64) / 3.0).log10(), epsilon = 1e-12);
    }

    #[test]
    fn islr_scale_invariant() {
        let profile: Vec<f64> = (0..64).map(|i| ((i * 7 + 3) % 11) as f64 + 0.5).collect();
        let scaled: Vec<f64> = profile.iter().map(|v| v * 1234.5).collect();
        let a = islr(&profile, 2, &[31]).unwrap();
        let b = islr(&scaled, 2, &[31]).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn islr_rejects_bad_inputs() {
        assert!(islr(&[], 1, &[0]).is_err());
        assert!(islr(&[1.0; 8], 1, &[]).is_err());
        assert!(islr(&[1.0; 8], 0, &[1]).is_err());
        assert!(islr(&[1.0; 8], 1, &[9]).is_err());
        assert!(islr(&[0.0; 8], 1, &[1]).is_err());
    }

    fn image_from(values: Array2<Complex64>) -> RadarImage {
        let grid = ImageGrid {
            origin: [0.0, 0.0],
            spacing: [1.0, 1.0],
            nx: values.nrows(),
            ny: values.ncols(),
        };
        RadarImage { values, grid, clipped: 0 }
    }

    #[test]
    fn perfect_mask_image_saturates() {
        let mut values = Array2::zeros((8, 8));
        let mut labels = Array2::from_elem((8, 8), CellLabel::Noise);
        for i in 2..5 {
            values[(i, 4)] = Complex64::new(1.0, 0.0);
            labels[(i, 4)] = CellLabel::Signal;
        }
        let v = image_snr(&image_from(values), &labels).unwrap();
        assert_eq!(v, DB_FLOOR);
    }

    #[test]
    fn constant_image_counts_cells() {
        let values = Array2::from_elem((6, 6), Complex64::new(0.7, -0.2));
        let mut labels = Array2::from_elem((6, 6), CellLabel::Noise);
        for i in 0..6 {
            labels[(i, 0)] = CellLabel::Signal;
        }
        // |S| = 6, |N| = 30.
        let v = image_snr(&image_from(values), &labels).unwrap();
        assert_abs_diff_eq!(v, 10.0 * (6.0f64 / 30.0).log10(), epsilon = 1e-12);
    }

    #[test]
    fn image_snr_phase_invariant() {
        let mut values = Array2::from_elem((5, 5), Complex64::new(0.3, 0.1));
        values[(2, 2)] = Complex64::new(2.0, -1.0);
        let mut labels = Array2::from_elem((5, 5), CellLabel::Noise);
        labels[(2, 2)] = CellLabel::Signal;
        let a = image_snr(&image_from(values.clone()), &labels).unwrap();
        let rotated = values.map(|v| v * Complex64::from_polar(1.0, 1.234));
        let b = image_snr(&image_from(rotated), &labels).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn empty_regions_rejected() {
        let values = Array2::from_elem((3, 3), Complex64::new(1.0, 0.0));
        let labels = Array2::from_elem((3, 3), CellLabel::Noise);
        assert!(matches!(image_snr(&image_from(values.clone()), &labels), Err(Error::EmptyRegion("signal"))));
        let labels = Array2::from_elem((3, 3), CellLabel::Signal);
        assert!(matches!(image_snr(&image_from(values), &labels), Err(Error::EmptyRegion("noise"))));
    }

    #[test]
    fn se_zero_when_nothing_received() {
        let gains = vec![Complex64::new(1.0, 0.0); 3];
        let v = spectral_efficiency(&gains, 1.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn se_unit_case() {
        let gains = vec![Complex64::new(1.0, 0.0)];
        // |h|^2 P / (beta N0 B) = 1 -> log2(2) = 1.
        let v = spectral_efficiency(&gains, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn se_monotone_in_gain_and_power() {
        let g1 = vec![Complex64::new(1.0, 0.0); 2];
        let g2 = vec![Complex64::new(2.0, 0.0); 2];
        let a = spectral_efficiency(&g1, 1.0, 0.1, 1.0, 0.5, 0.9).unwrap();
        let b = spectral_efficiency(&g2, 1.0, 0.1, 1.0, 0.5, 0.9).unwrap();
        let c = spectral_efficiency(&g1, 2.0, 0.1, 1.0, 0.5, 0.9).unwrap();
        assert!(b > a);
        assert!(c > a);
    }

    #[test]
    fn se_rejects_bad_parameters() {
        let g = vec![Complex64::new(1.0, 0.0)];
        assert!(spectral_efficiency(&g, 1.0, 1.0, 1.0, 0.0, 0.5).is_err());
        assert!(spectral_efficiency(&g, 1.0, 1.0, 1.0, 1.1, 0.5).is_err());
        assert!(spectral_efficiency(&g, 1.0, 1.0, 1.0, 1.0, 1.5).is_err());
        assert!(spectral_efficiency(&g, 1.0, 0.0, 1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn error_rates_count_correctly() {
        let truth = vec![false, false, true, true, false, true, false, false];
        let mut decided = truth.clone();
        decided[2] = !decided[2]; // corrupt symbol 1 (bits 2..4)
        let ser = symbol_error_rate(&decided, &truth, 2).unwrap();
        assert_abs_diff_eq!(ser, 0.25, epsilon = 1e-12);
        let ber = bit_error_rate(&decided, &truth).unwrap();
        assert_abs_diff_eq!(ber, 0.125, epsilon = 1e-12);
    }

    #[test]
    fn capacity_table_equal_budgets_at_single_antenna() {
        let cfg = CapacitySweepConfig { k: 128, k_z: 4, slots: 1, ..Default::default() };
        let rows = symbol_capacity_vs_n(&cfg, &[1]).unwrap();
        assert_eq!(rows[0].zone_constrained_symbols, 128);
        assert_eq!(rows[0].ofdm_symbols, 128);
    }

    #[test]
    fn capacity_table_totals_match_rank_sums() {
        let cfg = CapacitySweepConfig { k: 256, k_z: 8, slots: 1, ..Default::default() };
        let rows = symbol_capacity_vs_n(&cfg, &[2, 4]).unwrap();
        for row in &rows {
            assert_eq!(row.zone_constrained_symbols, row.per_antenna.iter().sum::<usize>());
            // Symmetric zone: each prior antenna consumes 2*(K_z - 1).
            let k_s = 256 / row.n;
            for (i, &cap) in row.per_antenna.iter().enumerate() {
                assert_eq!(cap, k_s - i * 2 * (cfg.k_z - 1));
            }
        }
    }
}
