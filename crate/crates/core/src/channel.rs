//! Channel synthesis: flat-fading communication links and delayed-echo
//! imaging captures over a MIMO virtual array.
//!
//! Echo delays are applied exactly (band-limited fractional shifts via a
//! frequency-domain phase ramp), so near-field wavefront curvature is
//! inherent. All noise comes from per-receiver counter-based streams, which
//! keeps captures deterministic regardless of evaluation order.

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::encoder::WaveformSet;
use crate::error::{Error, Result};
use crate::sequence::ComplexSequence;
use crate::SPEED_OF_LIGHT;

/// Transmit/receive array layout and sampling parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadarGeometry {
    /// Carrier frequency (Hz).
    pub carrier_hz: f64,
    /// Sampled bandwidth (Hz); the sampling interval is its reciprocal.
    pub bandwidth_hz: f64,
    /// Transmit phase centers, meters, in the (x, y) plane.
    pub tx_positions: Vec<[f64; 2]>,
    /// Receive phase centers.
    pub rx_positions: Vec<[f64; 2]>,
}

impl RadarGeometry {
    /// Standard co-located MIMO layout on the x axis: receivers at
    /// half-wavelength pitch, transmitters at `M` times that, so the
    /// `N x M` virtual array lands on a quarter-wavelength grid.
    pub fn auto_layout(carrier_hz: f64, bandwidth_hz: f64, n_tx: usize, m_rx: usize) -> Result<Self> {
        if carrier_hz <= 0.0 || bandwidth_hz <= 0.0 {
            return Err(Error::parameter("carrier and bandwidth must be positive"));
        }
        if n_tx == 0 || m_rx == 0 {
            return Err(Error::parameter("antenna counts must be positive"));
        }
        let lambda = SPEED_OF_LIGHT / carrier_hz;
        let rx_pitch = lambda / 2.0;
        let tx_pitch = m_rx as f64 * rx_pitch;
        let centered = |i: usize, count: usize, pitch: f64| {
            (i as f64 - (count as f64 - 1.0) / 2.0) * pitch
        };
        Ok(Self {
            carrier_hz,
            bandwidth_hz,
            tx_positions: (0..n_tx).map(|i| [centered(i, n_tx, tx_pitch), 0.0]).collect(),
            rx_positions: (0..m_rx).map(|i| [centered(i, m_rx, rx_pitch), 0.0]).collect(),
        })
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Sampling interval `T_s = 1/B` (s).
    pub fn sampling_interval(&self) -> f64 {
        1.0 / self.bandwidth_hz
    }

    /// Two-way range resolution `c / (2B)` (m).
    pub fn range_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth_hz)
    }

    pub fn n_tx(&self) -> usize {
        self.tx_positions.len()
    }

    pub fn m_rx(&self) -> usize {
        self.rx_positions.len()
    }

    /// Monostatic-equivalent phase centers `(tx + rx) / 2`, indexed
    /// `(n, m)`.
    pub fn virtual_positions(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.n_tx() * self.m_rx());
        for t in &self.tx_positions {
            for r in &self.rx_positions {
                out.push([(t[0] + r[0]) / 2.0, (t[1] + r[1]) / 2.0]);
            }
        }
        out
    }

    /// Two-way delay (s) from transmitter `n` to `p` and back to receiver
    /// `m`.
    pub fn two_way_delay(&self, n: usize, m: usize, p: [f64; 2]) -> f64 {
        (dist(self.tx_positions[n], p) + dist(p, self.rx_positions[m])) / SPEED_OF_LIGHT
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

// ---------------------------------------------------------------------------
// Path loss and the communication channel
// ---------------------------------------------------------------------------

/// Which path-loss expression to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PathlossMode {
    /// Free-space amplitude `sqrt(G) * lambda / (4 pi d)`.
    #[default]
    FriisStandard,
    /// Verbatim evaluation of `-10 log10(G lambda^2 / (4 pi d^2))`, the
    /// form some of the radar-communication literature quotes. It yields a
    /// dB-flavored number used directly as an amplitude; kept only for
    /// traceability against such references.
    PaperLiteral,
}

/// Flat-fading channel gain for a link of length `d`, zero phase.
pub fn pathloss_gain(g: f64, lambda: f64, d: f64, mode: PathlossMode) -> Result<Complex64> {
    if d <= 0.0 {
        return Err(Error::parameter(format!("distance must be positive, got {d}")));
    }
    if g <= 0.0 || lambda <= 0.0 {
        return Err(Error::parameter("gain product and wavelength must be positive"));
    }
    let amp = match mode {
        PathlossMode::FriisStandard => g.sqrt() * lambda / (4.0 * std::f64::consts::PI * d),
        PathlossMode::PaperLiteral => {
            -10.0 * (g * lambda * lambda / (4.0 * std::f64::consts::PI * d * d)).log10()
        }
    };
    Ok(Complex64::new(amp, 0.0))
}

/// Flat-fading single-receiver communication channel: one complex gain per
/// transmit antenna, constant over a slot, plus white noise.
#[derive(Debug, Clone)]
pub struct CommChannel {
    /// Per-transmit-antenna complex gains.
    pub gains: Vec<Complex64>,
    /// Link distance (m), informational.
    pub distance: f64,
    /// Product of transmit and receive antenna gains.
    pub gain_product: f64,
    /// Noise spectral density (W/Hz), informational.
    pub n0: f64,
    /// Per-sample complex noise variance actually applied.
    pub noise_variance: f64,
}

impl CommChannel {
    /// Unit-gain channel with explicit noise variance.
    pub fn unit(n_tx: usize, noise_variance: f64) -> Self {
        Self {
            gains: vec![Complex64::new(1.0, 0.0); n_tx],
            distance: 0.0,
            gain_product: 1.0,
            n0: noise_variance,
            noise_variance,
        }
    }

    /// Path-loss channel: every antenna sees the same link budget. The
    /// per-sample noise variance is `N0 * B`.
    pub fn from_pathloss(
        n_tx: usize,
        g: f64,
        lambda: f64,
        d: f64,
        n0: f64,
        bandwidth_hz: f64,
        mode: PathlossMode,
    ) -> Result<Self> {
        let h = pathloss_gain(g, lambda, d, mode)?;
        Ok(Self {
            gains: vec![h; n_tx],
            distance: d,
            gain_product: g,
            n0,
            noise_variance: n0 * bandwidth_hz,
        })
    }
}

/// Draws i.i.d. circular complex Gaussian noise with total per-sample
/// variance `sigma2` from stream `stream` of `seed`.
fn complex_noise(len: usize, sigma2: f64, seed: u64, stream: u64) -> Vec<Complex64> {
    if sigma2 == 0.0 {
        return vec![Complex64::new(0.0, 0.0); len];
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let normal = StandardNormal;
    let s = (sigma2 / 2.0).sqrt();
    (0..len)
        .map(|_| {
            let re: f64 = normal.sample(&mut rng);
            let im: f64 = normal.sample(&mut rng);
            Complex64::new(re * s, im * s)
        })
        .collect()
}

/// Superimposes the set through the flat-fading channel:
/// `y = sum_n h_n s_n + w`.
pub fn comm_receive(set: &WaveformSet, ch: &CommChannel, noise_seed: u64) -> Result<ComplexSequence> {
    if ch.gains.len() != set.n() {
        return Err(Error::shape(format!(
            "{} gains for {} transmit antennas",
            ch.gains.len(),
            set.n()
        )));
    }
    let k = set.k();
    let mut y = complex_noise(k, ch.noise_variance, noise_seed, 0);
    for (h, w) in ch.gains.iter().zip(set.waveforms().iter()) {
        for (yi, si) in y.iter_mut().zip(w.samples().iter()) {
            *yi += h * si;
        }
    }
    ComplexSequence::new(y)
}

// ---------------------------------------------------------------------------
// Scenes
// ---------------------------------------------------------------------------

/// A point reflector.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PointScatterer {
    /// Position (m).
    pub position: [f64; 2],
    /// Complex reflectivity (amplitude units; radar cross-section and
    /// calibration constants folded in).
    pub reflectivity: [f64; 2],
}

impl PointScatterer {
    pub fn new(x: f64, y: f64, amplitude: f64) -> Self {
        Self { position: [x, y], reflectivity: [amplitude, 0.0] }
    }

    pub fn reflectivity_c(&self) -> Complex64 {
        Complex64::new(self.reflectivity[0], self.reflectivity[1])
    }
}

/// Per-cell role in image-quality masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellLabel {
    /// Counted as signal.
    Signal,
    /// Counted as background noise.
    Noise,
    /// Counted in neither region (guard ring around the signal support).
    Excluded,
}

/// A rasterized reflectivity map with signal/noise region labels.
#[derive(Debug, Clone)]
pub struct RasterScene {
    /// World coordinates of cell (0, 0)'s center (m).
    pub origin: [f64; 2],
    /// Cell pitch (m) along x and y.
    pub spacing: [f64; 2],
    /// Reflectivity magnitude per cell, indexed `(ix, iy)`.
    pub reflectivity: Array2<f64>,
    pub labels: Array2<CellLabel>,
    /// Seed for per-cell speckle phase; `None` transmits real reflectivity.
    pub speckle_seed: Option<u64>,
}

impl RasterScene {
    /// Cell center in world coordinates.
    pub fn cell_center(&self, ix: usize, iy: usize) -> [f64; 2] {
        [
            self.origin[0] + ix as f64 * self.spacing[0],
            self.origin[1] + iy as f64 * self.spacing[1],
        ]
    }

    pub fn nx(&self) -> usize {
        self.reflectivity.nrows()
    }

    pub fn ny(&self) -> usize {
        self.reflectivity.ncols()
    }

    /// Expands nonzero cells to point scatterers, applying seeded speckle
    /// phase when configured.
    pub fn to_points(&self) -> Vec<PointScatterer> {
        let mut rng = self.speckle_seed.map(ChaCha12Rng::seed_from_u64);
        let mut out = Vec::new();
        for ix in 0..self.nx() {
            for iy in 0..self.ny() {
                let a = self.reflectivity[(ix, iy)];
                // Phase draw happens for every cell so the speckle pattern
                // does not depend on which cells are zero.
                let phase = match rng.as_mut() {
                    Some(r) => {
                        let u: f64 = rand::Rng::gen(r);
                        2.0 * std::f64::consts::PI * u
                    }
                    None => 0.0,
                };
                if a != 0.0 {
                    let refl = Complex64::from_polar(a, phase);
                    out.push(PointScatterer {
                        position: self.cell_center(ix, iy),
                        reflectivity: [refl.re, refl.im],
                    });
                }
            }
        }
        out
    }

    /// Disk of reflectivity `amplitude` centered at `center` with a guard
    /// ring of `guard_cells` excluded cells; everything else is noise
    /// region.
    pub fn disk(
        origin: [f64; 2],
        spacing: [f64; 2],
        nx: usize,
        ny: usize,
        center: [f64; 2],
        radius: f64,
        amplitude: f64,
        guard_cells: usize,
        speckle_seed: Option<u64>,
    ) -> Self {
        let mut reflectivity = Array2::zeros((nx, ny));
        let mut labels = Array2::from_elem((nx, ny), CellLabel::Noise);
        let guard = radius + guard_cells as f64 * spacing[0].max(spacing[1]);
        for ix in 0..nx {
            for iy in 0..ny {
                let p = [
                    origin[0] + ix as f64 * spacing[0],
                    origin[1] + iy as f64 * spacing[1],
                ];
                let d = dist(p, center);
                if d <= radius {
                    reflectivity[(ix, iy)] = amplitude;
                    labels[(ix, iy)] = CellLabel::Signal;
                } else if d <= guard {
                    labels[(ix, iy)] = CellLabel::Excluded;
                }
            }
        }
        Self { origin, spacing, reflectivity, labels, speckle_seed }
    }
}

/// Scene description consumed by the imaging channel.
#[derive(Debug, Clone)]
pub enum SceneModel {
    Points(Vec<PointScatterer>),
    Raster(RasterScene),
}

impl SceneModel {
    pub fn to_points(&self) -> Vec<PointScatterer> {
        match self {
            SceneModel::Points(p) => p.clone(),
            SceneModel::Raster(r) => r.to_points(),
        }
    }

    /// Scatterers whose two-way delay from any transmit/receive pair
    /// exceeds the zone extent `K_z * T_s`.
    pub fn out_of_zone(&self, geom: &RadarGeometry, k_z: usize) -> Vec<usize> {
        let limit = k_z as f64 * geom.sampling_interval();
        let pts = self.to_points();
        let mut out = Vec::new();
        for (i, p) in pts.iter().enumerate() {
            let mut worst = 0.0f64;
            for n in 0..geom.n_tx() {
                for m in 0..geom.m_rx() {
                    worst = worst.max(geom.two_way_delay(n, m, p.position));
                }
            }
            if worst > limit {
                out.push(i);
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Imaging capture
// ---------------------------------------------------------------------------

/// Result of an imaging capture: one echo sequence per receive antenna plus
/// any zone warnings.
#[derive(Debug, Clone)]
pub struct ImagingCapture {
    pub sequences: Vec<ComplexSequence>,
    /// Indices of scatterers outside the configured zone extent.
    pub out_of_zone: Vec<usize>,
}

/// Applies a band-limited delay of `delay_samples` (possibly fractional) to
/// `s`, returning a length-`out_len` sequence. Integer delays reduce to
/// exact shifting.
pub fn delay_sequence(s: &[Complex64], delay_samples: f64, out_len: usize) -> Vec<Complex64> {
    let n = (s.len() + delay_samples.ceil().max(0.0) as usize + 1)
        .max(out_len)
        .next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    buf[..s.len()].copy_from_slice(s);
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    apply_delay_ramp(&mut buf, delay_samples);
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.truncate(out_len);
    buf.iter_mut().for_each(|c| *c *= scale);
    buf
}

/// Multiplies an FFT-domain buffer by the linear phase of a `delay_samples`
/// shift, using the two-sided frequency convention.
fn apply_delay_ramp(spectrum: &mut [Complex64], delay_samples: f64) {
    let n = spectrum.len();
    for (k, v) in spectrum.iter_mut().enumerate() {
        let f = if k <= n / 2 { k as f64 / n as f64 } else { k as f64 / n as f64 - 1.0 };
        let ph = -2.0 * std::f64::consts::PI * f * delay_samples;
        *v *= Complex64::new(ph.cos(), ph.sin());
    }
}

/// Synthesizes the echoes of every transmitted waveform from every
/// scatterer at every receive antenna:
///
/// `y_m = sum_n sum_t alpha * s_n(delayed by tau) * exp(-j 2 pi f0 tau) + w_m`
///
/// with `tau` the exact two-way delay, `alpha` the reflectivity divided by
/// the two-way distance product, and white per-receiver noise. All receiver
/// sequences share one length covering the largest scene delay.
pub fn imaging_receive(
    set: &WaveformSet,
    geom: &RadarGeometry,
    scene: &SceneModel,
    noise_seed: u64,
    sigma2: f64,
) -> Result<ImagingCapture> {
    if geom.n_tx() != set.n() {
        return Err(Error::shape(format!(
            "{} transmit positions for {} waveforms",
            geom.n_tx(),
            set.n()
        )));
    }
    let points = scene.to_points();
    let t_s = geom.sampling_interval();
    let k = set.k();

    let mut max_delay_samples = 0.0f64;
    for p in &points {
        for n in 0..geom.n_tx() {
            for m in 0..geom.m_rx() {
                max_delay_samples = max_delay_samples.max(geom.two_way_delay(n, m, p.position) / t_s);
            }
        }
    }
    let out_len = k + max_delay_samples.ceil() as usize + 2;
    let nfft = (out_len + 1).next_power_of_two();

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(nfft);
    let ifft = planner.plan_fft_inverse(nfft);

    // One forward transform per waveform, then per (m, n, target) phase
    // ramps accumulated in the frequency domain, one inverse per receiver.
    let spectra: Vec<Vec<Complex64>> = set
        .waveforms()
        .iter()
        .map(|w| {
            let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
            buf[..k].copy_from_slice(w.samples());
            fft.process(&mut buf);
            buf
        })
        .collect();

    let mut sequences = Vec::with_capacity(geom.m_rx());
    for m in 0..geom.m_rx() {
        let mut acc = vec![Complex64::new(0.0, 0.0); nfft];
        for (n, spec) in spectra.iter().enumerate() {
            for p in &points {
                let d_tx = dist(geom.tx_positions[n], p.position);
                let d_rx = dist(p.position, geom.rx_positions[m]);
                if d_tx == 0.0 || d_rx == 0.0 {
                    return Err(Error::parameter(
                        "scatterer coincides with an antenna phase center",
                    ));
                }
                let tau = (d_tx + d_rx) / SPEED_OF_LIGHT;
                let delay = tau / t_s;
                let alpha = p.reflectivity_c() / (d_tx * d_rx);
                let carrier = -2.0 * std::f64::consts::PI * geom.carrier_hz * tau;
                let gain = alpha * Complex64::new(carrier.cos(), carrier.sin());
                for (kk, a) in acc.iter_mut().enumerate() {
                    let f = if kk <= nfft / 2 {
                        kk as f64 / nfft as f64
                    } else {
                        kk as f64 / nfft as f64 - 1.0
                    };
                    let ph = -2.0 * std::f64::consts::PI * f * delay;
                    *a += spec[kk] * gain * Complex64::new(ph.cos(), ph.sin());
                }
            }
        }
        ifft.process(&mut acc);
        let scale = 1.0 / nfft as f64;
        let noise = complex_noise(out_len, sigma2, noise_seed, m as u64);
        let samples: Vec<Complex64> = acc
            .iter()
            .take(out_len)
            .zip(noise.iter())
            .map(|(a, w)| a * scale + w)
            .collect();
        sequences.push(ComplexSequence::new(samples)?);
    }

    Ok(ImagingCapture { sequences, out_of_zone: scene.out_of_zone(geom, set.meta().k_z) })
}
