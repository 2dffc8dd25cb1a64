//! Pipeline orchestration: scenario runs, artifact emission, sweeps.
//!
//! Artifact writes are atomic (temp file + rename) and never embed
//! timestamps, so rerunning a scenario reproduces every byte.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use cosmic_core::baseline::{generate_ofdm_set_random, generate_zero_shift_set};
use cosmic_core::channel::{
    comm_receive, imaging_receive, CommChannel, RadarGeometry, SceneModel,
};
use cosmic_core::encoder::{
    generate_cosmic_set_random, CosmicConfig, SymbolFrame, WaveformFamily, WaveformSet,
};
use cosmic_core::error::Error as CoreError;
use cosmic_core::metrics::{decode_report, image_snr, islr, spectral_efficiency, MetricsReport};
use cosmic_core::receivers::{
    backproject, comm_decode, range_compress_with_geometry, GainMode, ImageGrid,
    RangeCompressedCube,
};
use cosmic_core::sequence::{ComplexSequence, LagWindow};
use cosmic_core::SPEED_OF_LIGHT;

use crate::scenario::{config_hash, validate, SceneConfig, ScenarioConfig};

/// Failure class, mapped to the process exit code (2 or 3).
#[derive(Debug)]
pub enum RunError {
    /// The configuration violates its schema or cross-field constraints.
    Validation(String),
    /// The pipeline failed while executing a valid configuration.
    Runtime(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Validation(m) => write!(f, "validation failure:\n{m}"),
            RunError::Runtime(m) => write!(f, "runtime failure: {m}"),
        }
    }
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        RunError::Runtime(e.to_string())
    }
}

pub type RunResult<T> = Result<T, RunError>;

/// Validates and fails with the full list of violations.
pub fn validate_or_fail(cfg: &ScenarioConfig) -> RunResult<()> {
    let problems = validate(cfg);
    if problems.is_empty() {
        Ok(())
    } else {
        Err(RunError::Validation(problems.join("\n")))
    }
}

// ---------------------------------------------------------------------------
// Atomic artifact writing
// ---------------------------------------------------------------------------

/// Runs `write` against a temporary path, then renames into place.
fn atomic<F>(path: &Path, write: F) -> RunResult<()>
where
    F: FnOnce(&Path) -> Result<(), CoreError>,
{
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("artifact")
    ));
    write(&tmp).map_err(RunError::from)?;
    fs::rename(&tmp, path).map_err(|e| RunError::Runtime(format!("renaming {path:?}: {e}")))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> RunResult<()> {
    atomic(path, |tmp| {
        let text = serde_json::to_string_pretty(value).map_err(CoreError::from)?;
        fs::write(tmp, text + "\n").map_err(CoreError::from)
    })
}

// ---------------------------------------------------------------------------
// Stage outputs
// ---------------------------------------------------------------------------

/// The generated set plus the transmitted truth.
pub struct GeneratedSet {
    pub set: WaveformSet,
    pub frames: Vec<SymbolFrame>,
}

/// Everything a full scenario run produces in memory.
pub struct RunOutcome {
    pub metrics: MetricsReport,
    pub warnings: Vec<String>,
    pub artifacts: Vec<String>,
}

/// Deterministic run manifest; rerunning the embedded config reproduces
/// every artifact byte for byte.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub toolkit_version: String,
    pub config_hash: String,
    pub config: ScenarioConfig,
    pub artifacts: Vec<String>,
    pub warnings: Vec<String>,
}

/// Truth record of the transmitted data bits, one string of `0`/`1` per
/// antenna.
#[derive(Debug, Serialize, Deserialize)]
pub struct BitsFile {
    pub antennas: Vec<String>,
}

impl BitsFile {
    fn from_frames(frames: &[SymbolFrame]) -> Self {
        Self {
            antennas: frames
                .iter()
                .map(|f| f.bits.iter().map(|&b| if b { '1' } else { '0' }).collect())
                .collect(),
        }
    }

    pub fn to_bits(&self) -> Vec<Vec<bool>> {
        self.antennas.iter().map(|s| s.chars().map(|c| c == '1').collect()).collect()
    }
}

/// Builds the waveform set for the configured family.
pub fn build_set(cfg: &ScenarioConfig) -> RunResult<GeneratedSet> {
    let w = &cfg.waveform;
    match w.family {
        WaveformFamily::Cosmic => {
            let ccfg = CosmicConfig {
                k: w.k,
                n: w.n,
                k_s: w.k_s(),
                k_z: w.k_z,
                mode: w.mode,
                family: w.basis_family,
                partition: w.partition,
                seed: w.seed,
                rel_tol: 1e-10,
                pilot_prefix: w.pilot_prefix,
            };
            let (set, frames) = generate_cosmic_set_random(&ccfg, w.constellation, w.bits_seed)?;
            Ok(GeneratedSet { set, frames })
        }
        WaveformFamily::Ofdm => {
            let (set, frames) = generate_ofdm_set_random(
                w.k,
                w.n,
                w.constellation,
                w.ofdm_assignment,
                w.k_z,
                w.mode,
                w.bits_seed,
                w.pilot_prefix,
            )?;
            Ok(GeneratedSet { set, frames })
        }
        WaveformFamily::ZeroShift => {
            let set = generate_zero_shift_set(w.k, w.n, w.seed, w.k_z, w.mode)?;
            Ok(GeneratedSet { set, frames: Vec::new() })
        }
    }
}

/// The communication channel implied by the config: either the explicit
/// slot-SNR convention (unit gains, per-sample variance `10^(-snr/10)/K`)
/// or the path-loss budget.
fn build_comm_channel(cfg: &ScenarioConfig, n: usize) -> RunResult<(CommChannel, f64)> {
    let comm = &cfg.channel.comm;
    match comm.snr_db {
        Some(snr) => {
            let sigma2 = 10f64.powf(-snr / 10.0) / cfg.waveform.k as f64;
            let n0b = 10f64.powf(-snr / 10.0);
            Ok((CommChannel::unit(n, sigma2), n0b))
        }
        None => {
            let lambda = SPEED_OF_LIGHT / cfg.geometry.carrier_hz;
            let ch = CommChannel::from_pathloss(
                n,
                comm.gain_product,
                lambda,
                comm.distance_m,
                comm.n0,
                cfg.geometry.bandwidth_hz,
                comm.pathloss,
            )?;
            let n0b = comm.n0 * cfg.geometry.bandwidth_hz;
            Ok((ch, n0b))
        }
    }
}

/// Declared (or derived) ISLR peak bins on the zone-window profile.
fn islr_peaks(
    cfg: &ScenarioConfig,
    scene: &SceneModel,
    geom: &RadarGeometry,
    window: LagWindow,
) -> Vec<usize> {
    if let Some(p) = &cfg.metrics.islr_peaks {
        return p.clone();
    }
    // Strong targets: at least half the largest amplitude.
    let pts = scene.to_points();
    let amax = pts.iter().map(|p| p.reflectivity_c().norm()).fold(0.0, f64::max);
    let centroid_tx = centroid(&geom.tx_positions);
    let centroid_rx = centroid(&geom.rx_positions);
    let mut peaks: Vec<usize> = pts
        .iter()
        .filter(|p| p.reflectivity_c().norm() >= 0.5 * amax)
        .map(|p| {
            let d = dist(centroid_tx, p.position) + dist(p.position, centroid_rx);
            let lag = d / SPEED_OF_LIGHT / geom.sampling_interval();
            (lag.round() as i64 - window.min()).max(0) as usize
        })
        .collect();
    peaks.sort_unstable();
    peaks.dedup();
    peaks
}

fn centroid(pts: &[[f64; 2]]) -> [f64; 2] {
    let n = pts.len() as f64;
    [pts.iter().map(|p| p[0]).sum::<f64>() / n, pts.iter().map(|p| p[1]).sum::<f64>() / n]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Flat CSV row of a metrics report (for plotting across runs).
pub fn metrics_csv_row(name: &str, cfg: &ScenarioConfig, m: &MetricsReport) -> (Vec<String>, Vec<String>) {
    let header = vec![
        "name".into(),
        "family".into(),
        "k".into(),
        "n".into(),
        "k_s".into(),
        "k_z".into(),
        "islr_db".into(),
        "snr_image_db".into(),
        "se_bits_per_s_per_hz".into(),
        "ser".into(),
        "ber".into(),
        "residual_max".into(),
        "config_hash".into(),
    ];
    let fmt = |v: &Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let row = vec![
        name.to_string(),
        format!("{:?}", cfg.waveform.family).to_lowercase(),
        cfg.waveform.k.to_string(),
        cfg.waveform.n.to_string(),
        cfg.waveform.k_s().to_string(),
        cfg.waveform.k_z.to_string(),
        fmt(&m.islr_db),
        fmt(&m.snr_image_db),
        fmt(&m.se_bits_per_s_per_hz),
        fmt(&m.ser),
        fmt(&m.ber),
        fmt(&m.residual_max),
        m.config_fingerprint.clone(),
    ];
    (header, row)
}

// ---------------------------------------------------------------------------
// The full pipeline
// ---------------------------------------------------------------------------

/// Runs generate -> channel -> receivers -> metrics. With `out` set, every
/// artifact class is written; otherwise the run is in-memory (sweeps).
pub fn run_pipeline(cfg: &ScenarioConfig, base: &Path, out: Option<&Path>) -> RunResult<RunOutcome> {
    let mut warnings: Vec<String> = Vec::new();
    let mut artifacts: Vec<String> = Vec::new();
    let mut metrics = MetricsReport { config_fingerprint: config_hash(cfg), ..Default::default() };

    let generated = build_set(cfg)?;
    let set = &generated.set;

    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| RunError::Runtime(format!("creating {dir:?}: {e}")))?;
        if cfg.waveform.family == WaveformFamily::Cosmic {
            let report = cosmic_core::encoder::feasibility_check(
                cfg.waveform.k,
                cfg.waveform.n,
                cfg.waveform.k_s(),
                cfg.waveform.k_z,
                cfg.waveform.mode,
            )?;
            write_json(&dir.join("feasibility.json"), &report)?;
            artifacts.push("feasibility.json".into());
        }
        atomic(&dir.join("waveforms.csv"), |t| cosmic_core::io::write_waveforms_csv(set, t))?;
        atomic(&dir.join("waveforms.meta.json"), |t| cosmic_core::io::write_set_metadata(set.meta(), t))?;
        write_json(&dir.join("bits.json"), &BitsFile::from_frames(&generated.frames))?;
        artifacts.extend(["waveforms.csv".into(), "waveforms.meta.json".into(), "bits.json".into()]);
    }

    if cfg.metrics.residual {
        metrics.residual_max = Some(set.max_constrained_zone_residual()?);
    }

    // Communication stage.
    let carries_data = !matches!(cfg.waveform.family, WaveformFamily::ZeroShift);
    if carries_data && (cfg.metrics.ser || cfg.metrics.se) {
        let (ch, n0b) = build_comm_channel(cfg, set.n())?;
        let y = comm_receive(set, &ch, cfg.channel.noise_seed)?;
        if let Some(dir) = out {
            atomic(&dir.join("comm_rx.csv"), |t| {
                cosmic_core::io::write_capture_csv(std::slice::from_ref(&y), t)
            })?;
            artifacts.push("comm_rx.csv".into());
        }
        let decoded = comm_decode(&y, set.meta(), &GainMode::Genie(ch.gains.clone()))?;
        let report = decode_report(&decoded, &generated.frames)?;
        if cfg.metrics.ser {
            metrics.ser = Some(report.ser);
            metrics.ber = Some(report.ber);
        }
        if cfg.metrics.se {
            // eta: correct data symbols over the full signal-space budget
            // (K_s slots per antenna).
            let budget = set.n() * set.meta().k_s.max(1);
            let correct: usize =
                report.per_antenna.iter().map(|a| a.symbols - a.symbol_errors).sum();
            let eta = (correct as f64 / budget as f64).min(1.0);
            let beta = match cfg.waveform.family {
                WaveformFamily::Ofdm => set.meta().k_s as f64 / set.k() as f64,
                _ => 1.0,
            };
            metrics.se_bits_per_s_per_hz =
                Some(spectral_efficiency(&ch.gains, 1.0, n0b, 1.0, beta, eta)?);
        }
        if let Some(dir) = out {
            write_json(&dir.join("decode.json"), &report)?;
            artifacts.push("decode.json".into());
        }
    }

    // Imaging stage.
    let scene = cfg.scene.build(base).map_err(RunError::Validation)?;
    if let Some(scene) = scene {
        let geom = cfg.geometry.build(set.n()).map_err(RunError::Validation)?;
        let capture = imaging_receive(set, &geom, &scene, cfg.channel.noise_seed, cfg.channel.imaging_sigma2)?;
        if !capture.out_of_zone.is_empty() {
            warnings.push(format!(
                "{} scatterer(s) beyond the zone extent K_z*T_s: indices {:?}",
                capture.out_of_zone.len(),
                capture.out_of_zone
            ));
        }
        let window = LagWindow::new(0, (cfg.waveform.k_z + cfg.imaging.window_guard) as i64 - 1)
            .map_err(RunError::from)?;
        let cube =
            range_compress_with_geometry(&capture.sequences, set, window, cfg.imaging.oversample, &geom)?;
        if let Some(dir) = out {
            atomic(&dir.join("raw_rx.csv"), |t| cosmic_core::io::write_capture_csv(&capture.sequences, t))?;
            let header = dir.join("cube.json");
            atomic(&dir.join("cube.bin"), |t| cosmic_core::io::write_cube(&cube, t, &header))?;
            artifacts.extend(["raw_rx.csv".into(), "cube.bin".into(), "cube.json".into()]);
        }

        if cfg.metrics.islr {
            let profile: Vec<f64> = cube.mean_power_profile().iter().map(|p| p.sqrt()).collect();
            let peaks = islr_peaks(cfg, &scene, &geom, window);
            if peaks.is_empty() {
                warnings.push("no ISLR peaks declared or derivable; skipping ISLR".into());
            } else {
                metrics.islr_db = Some(
                    islr(&profile, cfg.metrics.mainlobe_halfwidth, &peaks).map_err(RunError::from)?,
                );
            }
        }

        let grid = match (&cfg.imaging.grid, &scene) {
            (Some(g), _) => Some(g.clone()),
            (None, SceneModel::Raster(r)) => Some(ImageGrid::from_raster(r)),
            (None, _) => None,
        };
        if let Some(grid) = grid {
            let image = backproject(&cube, &geom, &grid)?;
            if image.clipped > 0 {
                warnings.push(format!(
                    "{} pixel-channel delays fell outside the compressed lag window",
                    image.clipped
                ));
            }
            if let Some(dir) = out {
                atomic(&dir.join("image.csv"), |t| cosmic_core::io::write_image_csv(&image, t))?;
                atomic(&dir.join("image.pgm"), |t| {
                    cosmic_core::io::write_image_pgm(&image, cfg.imaging.pgm_floor_db, t)
                })?;
                artifacts.extend(["image.csv".into(), "image.pgm".into()]);
            }
            if cfg.metrics.image_snr {
                if let SceneModel::Raster(r) = &scene {
                    if ImageGrid::from_raster(r) == grid {
                        metrics.snr_image_db = Some(image_snr(&image, &r.labels).map_err(RunError::from)?);
                    } else {
                        warnings.push("image grid differs from the raster mask; image SNR skipped".into());
                    }
                } else {
                    warnings.push("image SNR needs a raster scene with labels; skipped".into());
                }
            }
        } else if cfg.metrics.image_snr {
            warnings.push("image SNR requested but no grid or raster scene present".into());
        }

        if let Some(dir) = out {
            if let SceneModel::Raster(r) = &scene {
                let sidecar = cosmic_core::io::RasterSidecar {
                    origin: r.origin,
                    spacing: r.spacing,
                    signal_threshold: 128,
                    amplitude_scale: r.reflectivity.iter().cloned().fold(0.0, f64::max).max(1e-12),
                    speckle_seed: r.speckle_seed,
                };
                let sc_path = dir.join("scene_mask.json");
                atomic(&dir.join("scene_mask.pgm"), |t| {
                    cosmic_core::io::write_raster_scene(r, &sidecar, t, &sc_path)
                })?;
                artifacts.extend(["scene_mask.pgm".into(), "scene_mask.json".into()]);
            }
        }
    }

    if let Some(dir) = out {
        write_json(&dir.join("metrics.json"), &metrics)?;
        let (header, row) = metrics_csv_row(&cfg.name, cfg, &metrics);
        atomic(&dir.join("metrics.csv"), |t| {
            let mut w = csv::Writer::from_path(t)?;
            w.write_record(&header)?;
            w.write_record(&row)?;
            w.flush()?;
            Ok(())
        })?;
        artifacts.extend(["metrics.json".into(), "metrics.csv".into()]);

        artifacts.push("manifest.json".into());
        artifacts.sort();
        artifacts.dedup();
        let manifest = Manifest {
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash(cfg),
            config: cfg.clone(),
            artifacts: artifacts.clone(),
            warnings: warnings.clone(),
        };
        write_json(&dir.join("manifest.json"), &manifest)?;
    }

    Ok(RunOutcome { metrics, warnings, artifacts })
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// Numeric parameters a sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    N,
    SnrDb,
    KZ,
    Distance,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "n" => Some(SweepAxis::N),
            "snr_db" | "snr" => Some(SweepAxis::SnrDb),
            "k_z" | "kz" => Some(SweepAxis::KZ),
            "d" | "distance" | "distance_m" => Some(SweepAxis::Distance),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::N => "n",
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::KZ => "k_z",
            SweepAxis::Distance => "d",
        }
    }

    /// Applies the axis value to a copy of the base scenario.
    fn apply(&self, cfg: &ScenarioConfig, value: f64) -> Result<ScenarioConfig, String> {
        let mut c = cfg.clone();
        match self {
            SweepAxis::N => {
                let n = value as usize;
                if n == 0 || (value - n as f64).abs() > 1e-9 {
                    return Err(format!("antenna count must be a positive integer, got {value}"));
                }
                c.waveform.n = n;
                // Per-antenna budget tracks the antenna count.
                c.waveform.k_s = None;
            }
            SweepAxis::SnrDb => c.channel.comm.snr_db = Some(value),
            SweepAxis::KZ => {
                let kz = value as usize;
                if kz == 0 || (value - kz as f64).abs() > 1e-9 {
                    return Err(format!("zone length must be a positive integer, got {value}"));
                }
                c.waveform.k_z = kz;
            }
            SweepAxis::Distance => {
                if value <= 0.0 {
                    return Err(format!("distance must be positive, got {value}"));
                }
                c.channel.comm.distance_m = value;
                c.channel.comm.snr_db = None;
            }
        }
        Ok(c)
    }
}

/// One sweep point's outcome row.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub family: String,
    pub axis: String,
    pub value: f64,
    pub islr_db: Option<f64>,
    pub snr_image_db: Option<f64>,
    pub se_bits_per_s_per_hz: Option<f64>,
    pub se_shannon_bound: Option<f64>,
    pub ser: Option<f64>,
    pub residual_max: Option<f64>,
    pub symbols_total: Option<usize>,
    pub error: String,
}

/// Runs the cartesian product of families and axis values; each point is
/// independent and failures are recorded per row without stopping the
/// sweep. Returns rows in deterministic (family, value) order.
pub fn run_sweep(
    cfg: &ScenarioConfig,
    base: &Path,
    axis: SweepAxis,
    values: &[f64],
    families: &[WaveformFamily],
) -> Vec<SweepRow> {
    use rayon::prelude::*;
    let points: Vec<(WaveformFamily, f64)> = families
        .iter()
        .flat_map(|&f| values.iter().map(move |&v| (f, v)))
        .collect();
    points
        .par_iter()
        .map(|&(family, value)| evaluate_sweep_point(cfg, base, axis, family, value))
        .collect()
}

fn evaluate_sweep_point(
    cfg: &ScenarioConfig,
    base: &Path,
    axis: SweepAxis,
    family: WaveformFamily,
    value: f64,
) -> SweepRow {
    let family_name = format!("{family:?}").to_lowercase();
    let mut row = SweepRow {
        family: family_name,
        axis: axis.name().to_string(),
        value,
        islr_db: None,
        snr_image_db: None,
        se_bits_per_s_per_hz: None,
        se_shannon_bound: None,
        ser: None,
        residual_max: None,
        symbols_total: None,
        error: String::new(),
    };
    let point_cfg = match axis.apply(cfg, value) {
        Ok(mut c) => {
            c.waveform.family = family;
            c
        }
        Err(e) => {
            row.error = e;
            return row;
        }
    };
    if let Err(e) = validate_or_fail(&point_cfg) {
        row.error = e.to_string().replace('\n', "; ");
        return row;
    }
    match run_pipeline(&point_cfg, base, None) {
        Ok(out) => {
            row.islr_db = out.metrics.islr_db;
            row.snr_image_db = out.metrics.snr_image_db;
            row.se_bits_per_s_per_hz = out.metrics.se_bits_per_s_per_hz;
            row.ser = out.metrics.ser;
            row.residual_max = out.metrics.residual_max;
            if let Ok(gen) = build_set(&point_cfg) {
                row.symbols_total = Some(gen.set.meta().per_antenna_capacity.iter().sum());
            }
            // The Shannon-formula bound: same expression with eta = beta = 1.
            if let Ok((ch, n0b)) = build_comm_channel(&point_cfg, point_cfg.waveform.n) {
                row.se_shannon_bound = spectral_efficiency(&ch.gains, 1.0, n0b, 1.0, 1.0, 1.0).ok();
            }
        }
        Err(e) => {
            row.error = e.to_string().replace('\n', "; ");
        }
    }
    row
}

/// Writes the consolidated sweep CSV.
pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> RunResult<()> {
    atomic(path, |tmp| {
        let mut w = csv::Writer::from_path(tmp)?;
        w.write_record([
            "family",
            "axis",
            "value",
            "islr_db",
            "snr_image_db",
            "se_bits_per_s_per_hz",
            "se_shannon_bound",
            "ser",
            "residual_max",
            "symbols_total",
            "error",
        ])?;
        let fmt = |v: &Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in rows {
            w.write_record(&[
                r.family.clone(),
                r.axis.clone(),
                r.value.to_string(),
                fmt(&r.islr_db),
                fmt(&r.snr_image_db),
                fmt(&r.se_bits_per_s_per_hz),
                fmt(&r.se_shannon_bound),
                fmt(&r.ser),
                fmt(&r.residual_max),
                r.symbols_total.map(|v| v.to_string()).unwrap_or_default(),
                r.error.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Stage verbs operating on an existing artifact directory
// ---------------------------------------------------------------------------

/// `image`: recompute the back-projected image from a stored cube.
pub fn image_from_artifacts(cfg: &ScenarioConfig, base: &Path, dir: &Path) -> RunResult<Vec<String>> {
    let cube = cosmic_core::io::read_cube(&dir.join("cube.bin"), &dir.join("cube.json"))
        .map_err(|e| RunError::Runtime(format!("loading cube (run `simulate` first?): {e}")))?;
    let geom = cfg.geometry.build(cube.n()).map_err(RunError::Validation)?;
    let grid = resolve_grid(cfg, base)?;
    let image = backproject(&cube, &geom, &grid)?;
    atomic(&dir.join("image.csv"), |t| cosmic_core::io::write_image_csv(&image, t))?;
    atomic(&dir.join("image.pgm"), |t| {
        cosmic_core::io::write_image_pgm(&image, cfg.imaging.pgm_floor_db, t)
    })?;
    Ok(vec!["image.csv".into(), "image.pgm".into()])
}

fn resolve_grid(cfg: &ScenarioConfig, base: &Path) -> RunResult<ImageGrid> {
    if let Some(g) = &cfg.imaging.grid {
        return Ok(g.clone());
    }
    match cfg.scene.build(base).map_err(RunError::Validation)? {
        Some(SceneModel::Raster(r)) => Ok(ImageGrid::from_raster(&r)),
        _ => Err(RunError::Validation(
            "no image grid: set imaging.grid or use a raster scene".into(),
        )),
    }
}

/// `decode`: decode a stored communication capture against its metadata and
/// score it against the stored truth bits.
pub fn decode_from_artifacts(cfg: &ScenarioConfig, dir: &Path) -> RunResult<Vec<String>> {
    let set = cosmic_core::io::read_waveform_set(
        &dir.join("waveforms.csv"),
        &dir.join("waveforms.meta.json"),
    )
    .map_err(|e| RunError::Runtime(format!("loading waveform set: {e}")))?;
    let captures = cosmic_core::io::read_capture_csv(&dir.join("comm_rx.csv"))
        .map_err(|e| RunError::Runtime(format!("loading comm capture: {e}")))?;
    let y = captures
        .first()
        .ok_or_else(|| RunError::Runtime("comm capture holds no receiver rows".into()))?;
    let bits: BitsFile = serde_json::from_str(
        &fs::read_to_string(dir.join("bits.json"))
            .map_err(|e| RunError::Runtime(format!("loading truth bits: {e}")))?,
    )
    .map_err(|e| RunError::Runtime(format!("parsing truth bits: {e}")))?;

    let (ch, _) = build_comm_channel(cfg, set.n())?;
    let decoded = comm_decode(y, set.meta(), &GainMode::Genie(ch.gains.clone()))?;

    // Reassemble truth frames from the stored bit strings.
    let constellation = set
        .meta()
        .constellation
        .ok_or_else(|| RunError::Runtime("set metadata has no constellation".into()))?;
    let truth: Result<Vec<SymbolFrame>, CoreError> = bits
        .to_bits()
        .iter()
        .zip(set.meta().per_antenna_capacity.iter())
        .map(|(b, &cap)| SymbolFrame::from_bits(b, constellation, cap, set.meta().pilot_prefix))
        .collect();
    let report = decode_report(&decoded, &truth?)?;
    write_json(&dir.join("decode.json"), &report)?;
    Ok(vec!["decode.json".into()])
}

/// `metrics`: recompute the metrics report from stored artifacts.
pub fn metrics_from_artifacts(cfg: &ScenarioConfig, base: &Path, dir: &Path) -> RunResult<MetricsReport> {
    let mut metrics = MetricsReport { config_fingerprint: config_hash(cfg), ..Default::default() };

    if cfg.metrics.residual {
        let set = cosmic_core::io::read_waveform_set(
            &dir.join("waveforms.csv"),
            &dir.join("waveforms.meta.json"),
        )
        .map_err(|e| RunError::Runtime(format!("loading waveform set: {e}")))?;
        metrics.residual_max = Some(set.max_constrained_zone_residual()?);
    }

    if cfg.metrics.ser {
        if let Ok(text) = fs::read_to_string(dir.join("decode.json")) {
            let report: cosmic_core::metrics::DecodeReport =
                serde_json::from_str(&text).map_err(|e| RunError::Runtime(e.to_string()))?;
            metrics.ser = Some(report.ser);
            metrics.ber = Some(report.ber);
        }
    }

    if cfg.metrics.islr {
        if let Ok(cube) = cosmic_core::io::read_cube(&dir.join("cube.bin"), &dir.join("cube.json")) {
            let profile: Vec<f64> = cube.mean_power_profile().iter().map(|p| p.sqrt()).collect();
            let window = LagWindow::new(0, (cfg.waveform.k_z + cfg.imaging.window_guard) as i64 - 1)
                .map_err(RunError::from)?;
            if let Some(scene) = cfg.scene.build(base).map_err(RunError::Validation)? {
                let geom = cfg.geometry.build(cfg.waveform.n).map_err(RunError::Validation)?;
                let peaks = islr_peaks(cfg, &scene, &geom, window);
                if !peaks.is_empty() {
                    metrics.islr_db =
                        Some(islr(&profile, cfg.metrics.mainlobe_halfwidth, &peaks).map_err(RunError::from)?);
                }
            }
        }
    }

    if cfg.metrics.image_snr {
        if let Some(SceneModel::Raster(r)) = cfg.scene.build(base).map_err(RunError::Validation)? {
            let grid = ImageGrid::from_raster(&r);
            if let Ok(image) = cosmic_core::io::read_image_csv(&dir.join("image.csv"), &grid) {
                metrics.snr_image_db = Some(image_snr(&image, &r.labels).map_err(RunError::from)?);
            }
        }
    }

    write_json(&dir.join("metrics.json"), &metrics)?;
    let (header, row) = metrics_csv_row(&cfg.name, cfg, &metrics);
    atomic(&dir.join("metrics.csv"), |t| {
        let mut w = csv::Writer::from_path(t)?;
        w.write_record(&header)?;
        w.write_record(&row)?;
        w.flush()?;
        Ok(())
    })?;
    Ok(metrics)
}

/// Keeps unused-import warnings away in builds without the `image` verb.
#[allow(dead_code)]
fn _unused(_: &ComplexSequence, _: &RangeCompressedCube, _: Complex64) {}
