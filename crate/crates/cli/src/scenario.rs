//! Scenario configuration: the JSON schema driving every pipeline run.
//!
//! Unknown keys are rejected so a typo cannot silently change an
//! experiment. Every stochastic quantity draws from a named seed recorded
//! in the config.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use cosmic_core::baseline::OfdmAssignment;
use cosmic_core::basis::{BasisFamily, PartitionStrategy};
use cosmic_core::channel::{PathlossMode, PointScatterer, RadarGeometry, RasterScene, SceneModel};
use cosmic_core::encoder::{Constellation, WaveformFamily, ZoneMode};
use cosmic_core::receivers::ImageGrid;

/// Bundled example scenarios, addressable by name through `--config`.
pub const PRESETS: &[(&str, &str)] = &[
    ("desk-imaging", include_str!("../presets/desk-imaging.json")),
    ("paper-sec3", include_str!("../presets/paper-sec3.json")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub waveform: WaveformConfig,
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub scene: SceneConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub imaging: ImagingConfig,
    #[serde(default)]
    pub metrics: MetricsToggles,
    #[serde(default)]
    pub out_dir: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WaveformConfig {
    pub family: WaveformFamily,
    pub k: usize,
    pub n: usize,
    #[serde(default)]
    pub k_s: Option<usize>,
    pub k_z: usize,
    #[serde(default)]
    pub mode: ZoneMode,
    #[serde(default = "default_basis_family")]
    pub basis_family: BasisFamily,
    #[serde(default)]
    pub partition: PartitionStrategy,
    #[serde(default)]
    pub ofdm_assignment: OfdmAssignment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_bits_seed")]
    pub bits_seed: u64,
    #[serde(default = "default_constellation")]
    pub constellation: Constellation,
    #[serde(default)]
    pub pilot_prefix: usize,
}

fn default_basis_family() -> BasisFamily {
    BasisFamily::RandomUnitary
}

fn default_bits_seed() -> u64 {
    1
}

fn default_constellation() -> Constellation {
    Constellation::Qam16
}

impl WaveformConfig {
    /// Per-antenna signal-space budget; defaults to `floor(K / N)`.
    pub fn k_s(&self) -> usize {
        self.k_s.unwrap_or(self.k / self.n.max(1))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    /// Receive antenna count for the standard auto layout.
    #[serde(default)]
    pub m_rx: Option<usize>,
    /// Explicit phase centers; override the auto layout when present.
    #[serde(default)]
    pub tx_positions: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub rx_positions: Option<Vec<[f64; 2]>>,
}

impl GeometryConfig {
    pub fn build(&self, n_tx: usize) -> Result<RadarGeometry, String> {
        match (&self.tx_positions, &self.rx_positions) {
            (Some(tx), Some(rx)) => {
                if tx.len() != n_tx {
                    return Err(format!(
                        "geometry lists {} transmit positions but the waveform set has {n_tx}",
                        tx.len()
                    ));
                }
                if rx.is_empty() {
                    return Err("geometry needs at least one receive position".into());
                }
                Ok(RadarGeometry {
                    carrier_hz: self.carrier_hz,
                    bandwidth_hz: self.bandwidth_hz,
                    tx_positions: tx.clone(),
                    rx_positions: rx.clone(),
                })
            }
            (None, None) => {
                let m = self.m_rx.ok_or("geometry needs either m_rx or explicit positions")?;
                RadarGeometry::auto_layout(self.carrier_hz, self.bandwidth_hz, n_tx, m)
                    .map_err(|e| e.to_string())
            }
            _ => Err("specify both tx_positions and rx_positions, or neither".into()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SceneConfig {
    /// No scene: communication-only scenario.
    #[default]
    None,
    Points {
        targets: Vec<PointTarget>,
    },
    /// A few strong targets plus seeded weak clutter points.
    PointsRandom {
        strong: Vec<PointTarget>,
        weak_count: usize,
        weak_amplitude: f64,
        x_span: [f64; 2],
        y_span: [f64; 2],
        seed: u64,
    },
    /// Synthesized disk raster with speckle.
    RasterDisk {
        origin: [f64; 2],
        spacing: [f64; 2],
        nx: usize,
        ny: usize,
        center: [f64; 2],
        radius: f64,
        amplitude: f64,
        guard_cells: usize,
        #[serde(default)]
        speckle_seed: Option<u64>,
    },
    /// PGM mask plus JSON sidecar on disk, relative to the config file.
    RasterFile {
        pgm: String,
        sidecar: String,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PointTarget {
    pub position: [f64; 2],
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

impl SceneConfig {
    /// Materializes the scene; `base` anchors relative file references.
    pub fn build(&self, base: &Path) -> Result<Option<SceneModel>, String> {
        match self {
            SceneConfig::None => Ok(None),
            SceneConfig::Points { targets } => {
                Ok(Some(SceneModel::Points(targets.iter().map(PointTarget::to_scatterer).collect())))
            }
            SceneConfig::PointsRandom { strong, weak_count, weak_amplitude, x_span, y_span, seed } => {
                use rand::{Rng, SeedableRng};
                let mut pts: Vec<PointScatterer> =
                    strong.iter().map(PointTarget::to_scatterer).collect();
                let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(*seed);
                for _ in 0..*weak_count {
                    let x = rng.gen_range(x_span[0]..x_span[1]);
                    let y = rng.gen_range(y_span[0]..y_span[1]);
                    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                    let refl = Complex64::from_polar(*weak_amplitude, phase);
                    pts.push(PointScatterer { position: [x, y], reflectivity: [refl.re, refl.im] });
                }
                Ok(Some(SceneModel::Points(pts)))
            }
            SceneConfig::RasterDisk {
                origin,
                spacing,
                nx,
                ny,
                center,
                radius,
                amplitude,
                guard_cells,
                speckle_seed,
            } => Ok(Some(SceneModel::Raster(RasterScene::disk(
                *origin,
                *spacing,
                *nx,
                *ny,
                *center,
                *radius,
                *amplitude,
                *guard_cells,
                *speckle_seed,
            )))),
            SceneConfig::RasterFile { pgm, sidecar } => {
                let scene = cosmic_core::io::read_raster_scene(&base.join(pgm), &base.join(sidecar))
                    .map_err(|e| e.to_string())?;
                Ok(Some(SceneModel::Raster(scene)))
            }
        }
    }
}

impl PointTarget {
    fn to_scatterer(&self) -> PointScatterer {
        let refl = Complex64::from_polar(self.amplitude, self.phase);
        PointScatterer { position: self.position, reflectivity: [refl.re, refl.im] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    /// Imaging per-sample noise variance (0 isolates the cross-waveform
    /// interference floor).
    #[serde(default)]
    pub imaging_sigma2: f64,
    #[serde(default = "default_noise_seed")]
    pub noise_seed: u64,
    #[serde(default)]
    pub comm: CommConfig,
}

fn default_noise_seed() -> u64 {
    2
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self { imaging_sigma2: 0.0, noise_seed: default_noise_seed(), comm: CommConfig::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CommConfig {
    /// Per-antenna slot SNR in dB: unit gains with per-sample noise
    /// variance `10^(-snr/10) / K`. Overrides the path-loss budget.
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default = "default_gain_product")]
    pub gain_product: f64,
    #[serde(default = "default_distance")]
    pub distance_m: f64,
    /// Noise spectral density (W/Hz) for the path-loss budget.
    #[serde(default = "default_n0")]
    pub n0: f64,
    #[serde(default)]
    pub pathloss: PathlossMode,
}

fn default_gain_product() -> f64 {
    1.0
}

fn default_distance() -> f64 {
    20.0
}

fn default_n0() -> f64 {
    1e-18
}

impl Default for CommConfig {
    fn default() -> Self {
        Self {
            snr_db: None,
            gain_product: default_gain_product(),
            distance_m: default_distance(),
            n0: default_n0(),
            pathloss: PathlossMode::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ImagingConfig {
    #[serde(default = "default_oversample")]
    pub oversample: usize,
    /// Extra lags kept beyond the zone on each side of the compressed
    /// window.
    #[serde(default = "default_guard")]
    pub window_guard: usize,
    /// Pixel grid; defaults to the raster scene's grid when absent.
    #[serde(default)]
    pub grid: Option<ImageGrid>,
    #[serde(default = "default_floor_db")]
    pub pgm_floor_db: f64,
}

fn default_oversample() -> usize {
    4
}

fn default_guard() -> usize {
    4
}

fn default_floor_db() -> f64 {
    -60.0
}

impl Default for ImagingConfig {
    fn default() -> Self {
        Self {
            oversample: default_oversample(),
            window_guard: default_guard(),
            grid: None,
            pgm_floor_db: default_floor_db(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MetricsToggles {
    #[serde(default = "yes")]
    pub residual: bool,
    #[serde(default = "yes")]
    pub ser: bool,
    #[serde(default = "yes")]
    pub se: bool,
    #[serde(default)]
    pub islr: bool,
    #[serde(default)]
    pub image_snr: bool,
    /// Declared profile peaks (zone-window bins) for the ISLR; derived
    /// from the scene's strong targets when absent.
    #[serde(default)]
    pub islr_peaks: Option<Vec<usize>>,
    #[serde(default = "default_halfwidth")]
    pub mainlobe_halfwidth: usize,
}

fn yes() -> bool {
    true
}

fn default_halfwidth() -> usize {
    1
}

impl Default for MetricsToggles {
    fn default() -> Self {
        Self {
            residual: true,
            ser: true,
            se: true,
            islr: false,
            image_snr: false,
            islr_peaks: None,
            mainlobe_halfwidth: default_halfwidth(),
        }
    }
}

// ---------------------------------------------------------------------------
// Loading, validation, canonical hashing
// ---------------------------------------------------------------------------

/// Resolves `--config`: a filesystem path, or a bundled preset name.
pub fn load_config(arg: &str) -> Result<(ScenarioConfig, PathBuf), String> {
    let path = Path::new(arg);
    let (text, base) = if path.is_file() {
        (
            std::fs::read_to_string(path).map_err(|e| format!("cannot read {arg}: {e}"))?,
            path.parent().unwrap_or(Path::new(".")).to_path_buf(),
        )
    } else if let Some(text) = preset(arg) {
        (text.to_string(), PathBuf::from("."))
    } else {
        return Err(format!(
            "config {arg:?} is neither a file nor a bundled preset (available: {})",
            PRESETS.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
        ));
    };
    let cfg: ScenarioConfig =
        serde_json::from_str(&text).map_err(|e| format!("invalid scenario config: {e}"))?;
    Ok((cfg, base))
}

/// Validates cross-field constraints; returns every violation found.
pub fn validate(cfg: &ScenarioConfig) -> Vec<String> {
    let mut problems = Vec::new();
    let w = &cfg.waveform;
    if w.k == 0 || w.n == 0 || w.k_z == 0 {
        problems.push("waveform: K, N, K_z must all be positive".into());
    }
    if w.k_z > w.k {
        problems.push(format!("waveform: K_z = {} exceeds K = {}", w.k_z, w.k));
    }
    match w.family {
        WaveformFamily::Cosmic => {
            let k_s = w.k_s();
            if k_s == 0 {
                problems.push("waveform: K_s must be positive".into());
            } else if w.n * k_s > w.k {
                problems.push(format!(
                    "waveform: N * K_s = {} exceeds K = {} (no disjoint sub-bases)",
                    w.n * k_s,
                    w.k
                ));
            } else {
                match cosmic_core::encoder::feasibility_check(w.k, w.n, k_s, w.k_z, w.mode) {
                    Ok(report) => {
                        if !report.feasible {
                            problems.push(format!(
                                "waveform: zone-constrained configuration infeasible\n{}",
                                report.render()
                            ));
                        }
                    }
                    Err(e) => problems.push(format!("waveform: {e}")),
                }
            }
            if matches!(w.basis_family, BasisFamily::Hadamard) && !w.k.is_power_of_two() {
                problems.push(format!("waveform: Hadamard basis needs power-of-two K, got {}", w.k));
            }
        }
        WaveformFamily::Ofdm => {
            if w.k / w.n == 0 {
                problems.push(format!("waveform: {} antennas oversubscribe {} subcarriers", w.n, w.k));
            }
        }
        WaveformFamily::ZeroShift => {
            if w.n > w.k {
                problems.push(format!("waveform: cannot fit {} orthogonal sequences in K = {}", w.n, w.k));
            }
        }
    }
    if cfg.geometry.carrier_hz <= 0.0 || cfg.geometry.bandwidth_hz <= 0.0 {
        problems.push("geometry: carrier and bandwidth must be positive".into());
    }
    if let Err(e) = cfg.geometry.build(w.n) {
        problems.push(format!("geometry: {e}"));
    }
    if cfg.imaging.oversample == 0 {
        problems.push("imaging: oversample must be at least 1".into());
    }
    if cfg.imaging.pgm_floor_db >= 0.0 {
        problems.push("imaging: pgm_floor_db must be negative".into());
    }
    if cfg.metrics.mainlobe_halfwidth == 0 {
        problems.push("metrics: mainlobe_halfwidth must be at least one bin".into());
    }
    if let Some(snr) = cfg.channel.comm.snr_db {
        if !snr.is_finite() {
            problems.push("channel: snr_db must be finite".into());
        }
    }
    if cfg.channel.comm.distance_m <= 0.0 {
        problems.push("channel: distance must be positive".into());
    }
    problems
}

/// Whitespace- and key-order-insensitive canonical form of a JSON value.
pub fn canonical_json(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            let inner: Vec<String> = keys
                .iter()
                .map(|k| format!("{}:{}", serde_json::to_string(k).unwrap(), canonical_json(&map[*k])))
                .collect();
            format!("{{{}}}", inner.join(","))
        }
        serde_json::Value::Array(items) => {
            let inner: Vec<String> = items.iter().map(canonical_json).collect();
            format!("[{}]", inner.join(","))
        }
        other => serde_json::to_string(other).unwrap(),
    }
}

/// SHA-256 of the canonicalized config.
pub fn config_hash(cfg: &ScenarioConfig) -> String {
    let value = serde_json::to_value(cfg).expect("config serializes");
    let canonical = canonical_json(&value);
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
