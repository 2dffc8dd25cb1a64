//! End-to-end communication and imaging chain tests.

use cosmic_core::channel::{
    comm_receive, imaging_receive, CommChannel, PointScatterer, RadarGeometry, SceneModel,
};
use cosmic_core::encoder::{
    generate_cosmic_set_random, Constellation, CosmicConfig, WaveformSet, ZoneMode,
};
use cosmic_core::metrics::decode_report;
use cosmic_core::receivers::{comm_decode, range_compress, GainMode};
use cosmic_core::sequence::LagWindow;
use cosmic_core::SPEED_OF_LIGHT;

fn configs() -> Vec<CosmicConfig> {
    let mut out = Vec::new();
    for (i, (k, n, k_s, k_z)) in [
        (128usize, 2usize, 32usize, 4usize),
        (256, 3, 64, 8),
        (512, 4, 96, 8),
        (256, 5, 48, 4),
        (384, 3, 128, 16),
    ]
    .into_iter()
    .enumerate()
    {
        for mode in [ZoneMode::PaperLiteralZone, ZoneMode::SymmetricZone] {
            let mut c = CosmicConfig::new(k, n, k_s, k_z).with_seed(100 + i as u64).with_mode(mode);
            c.partition = if i % 2 == 0 {
                cosmic_core::basis::PartitionStrategy::ContiguousBlocks
            } else {
                cosmic_core::basis::PartitionStrategy::Strided
            };
            out.push(c);
        }
    }
    out
}

#[test]
fn zero_noise_roundtrip_is_exact_everywhere() {
    for (i, cfg) in configs().into_iter().enumerate() {
        for constellation in [Constellation::Qam16, Constellation::Qpsk] {
            let (set, frames) = generate_cosmic_set_random(&cfg, constellation, 500 + i as u64)
                .expect("feasible config must generate");
            let y = comm_receive(&set, &CommChannel::unit(set.n(), 0.0), 0).unwrap();
            let out = comm_decode(&y, set.meta(), &GainMode::Unit).unwrap();
            let report = decode_report(&out, &frames).unwrap();
            assert_eq!(report.ser, 0.0, "config {i} {constellation:?}: SER {}", report.ser);
            assert_eq!(report.ber, 0.0);
        }
    }
}

#[test]
fn ser_decreases_with_snr_in_expectation() {
    let cfg = CosmicConfig::new(128, 2, 32, 4).with_seed(7).with_mode(ZoneMode::SymmetricZone);
    let snrs_db = [0.0f64, 10.0, 20.0, 30.0];
    let seeds = 10u64;
    let mut means = Vec::new();
    for &snr in &snrs_db {
        let sigma2 = 10f64.powf(-snr / 10.0) / cfg.k as f64;
        let mut acc = 0.0;
        for seed in 0..seeds {
            let (set, frames) = generate_cosmic_set_random(&cfg, Constellation::Qam16, 900 + seed).unwrap();
            let y = comm_receive(&set, &CommChannel::unit(set.n(), sigma2), 40 + seed).unwrap();
            let out = comm_decode(&y, set.meta(), &GainMode::Unit).unwrap();
            acc += decode_report(&out, &frames).unwrap().ser;
        }
        means.push(acc / seeds as f64);
    }
    for w in means.windows(2) {
        assert!(
            w[1] <= w[0] + 1e-9,
            "mean SER not monotone over SNR: {means:?}"
        );
    }
    assert!(means[0] > means[3], "SER should fall across the sweep: {means:?}");
    assert!(means[3] < 0.01, "high-SNR SER too large: {}", means[3]);
}

/// Builds a single-waveform set reusing antenna `n`'s waveform so it can be
/// pushed through the imaging channel alone.
fn solo_set(set: &WaveformSet, n: usize) -> WaveformSet {
    let mut meta = set.meta().clone();
    meta.n = 1;
    meta.per_antenna_capacity = vec![meta.per_antenna_capacity[n]];
    meta.energy_scales = vec![meta.energy_scales[n]];
    WaveformSet::new(vec![set.waveforms()[n].clone()], meta).unwrap()
}

#[test]
fn zone_compliant_channels_separate_like_single_waveform() {
    let cfg = CosmicConfig::new(256, 3, 64, 10).with_seed(3).with_mode(ZoneMode::SymmetricZone);
    let (set, _) = generate_cosmic_set_random(&cfg, Constellation::Qam16, 31).unwrap();
    let geom = RadarGeometry {
        carrier_hz: 77e9,
        bandwidth_hz: 200e6,
        tx_positions: vec![[0.0, 0.0]; 3],
        rx_positions: vec![[0.0, 0.0]],
    };
    // Integer-bin delays strictly inside the zone.
    let bin_range = geom.sampling_interval() * SPEED_OF_LIGHT / 2.0;
    let scene = SceneModel::Points(vec![
        PointScatterer::new(0.0, 3.0 * bin_range, 1.0),
        PointScatterer::new(0.0, 6.0 * bin_range, 0.4),
    ]);
    let window = LagWindow::new(0, cfg.k_z as i64 - 1).unwrap();

    let full = imaging_receive(&set, &geom, &scene, 0, 0.0).unwrap();
    let cube_full = range_compress(&full.sequences, &set, window, 1).unwrap();

    let geom1 = RadarGeometry {
        carrier_hz: geom.carrier_hz,
        bandwidth_hz: geom.bandwidth_hz,
        tx_positions: vec![[0.0, 0.0]],
        rx_positions: vec![[0.0, 0.0]],
    };
    for n in 0..3 {
        let solo = solo_set(&set, n);
        let alone = imaging_receive(&solo, &geom1, &scene, 0, 0.0).unwrap();
        let cube_alone = range_compress(&alone.sequences, &solo, window, 1).unwrap();
        let mut diff = 0.0f64;
        let mut norm = 0.0f64;
        for bin in 0..cube_full.bins() {
            let a = cube_full.data[(n, 0, bin)];
            let b = cube_alone.data[(0, 0, bin)];
            diff += (a - b).norm_sqr();
            norm += b.norm_sqr();
        }
        let rel = (diff / norm).sqrt();
        assert!(rel < 1e-6, "antenna {n}: relative contamination {rel}");
    }
}

#[test]
fn literal_zone_mode_does_not_separate_reverse_pairs() {
    // The one-sided zone only suppresses echoes of later waveforms in
    // earlier waveforms' matched filters; the reverse direction keeps the
    // usual random-sequence cross floor. This is the designed asymmetry.
    let cfg = CosmicConfig::new(256, 2, 64, 10).with_seed(5).with_mode(ZoneMode::PaperLiteralZone);
    let (set, _) = generate_cosmic_set_random(&cfg, Constellation::Qam16, 8).unwrap();
    let w = set.zone_window().unwrap();
    let r = cosmic_core::sequence::zone_residual(set.waveforms(), w).unwrap();
    assert!(r[(0, 1)] < 1e-8, "constrained direction {}", r[(0, 1)]);
    assert!(r[(1, 0)] > 1e-4, "unconstrained direction {}", r[(1, 0)]);
}
