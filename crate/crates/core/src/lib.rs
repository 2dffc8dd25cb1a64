//! Waveform design and simulation toolkit for joint MIMO radar imaging and
//! communication.
//!
//! The library builds sets of simultaneously transmitted waveforms whose
//! mutual cross-correlation vanishes over a configurable zero-correlation
//! zone, embeds communication symbols in the remaining degrees of freedom,
//! and simulates the full chain: flat-fading communication channel, delayed
//! echo synthesis over a MIMO virtual array, matched-filter range
//! compression, back-projection imaging, symbol decoding, and the standard
//! figures of merit (ISLR, image SNR, spectral efficiency, symbol error
//! rate).
//!
//! Module map:
//! - [`sequence`]: complex baseband sequences, lag windows, cross-correlation
//!   in direct, matrix, and FFT form, zone residual evaluation.
//! - [`basis`]: orthonormal master bases (random unitary, inverse DFT,
//!   Hadamard) and their disjoint column partitions.
//! - [`encoder`]: zone-constrained waveform synthesis via null-space
//!   precoding, symbol mapping, feasibility analysis.
//! - [`baseline`]: comparison families (sub-band OFDM, zero-shift
//!   orthogonal).
//! - [`channel`]: path-loss flat fading, noise injection, delayed-echo scene
//!   synthesis over a virtual array.
//! - [`receivers`]: communication projection/decoding, range compression,
//!   back-projection imaging.
//! - [`metrics`]: ISLR, image SNR, spectral efficiency, error rates,
//!   capacity-versus-antennas tables.
//! - [`io`]: CSV/JSON/PGM artifact formats.

pub mod basis;
pub mod baseline;
pub mod channel;
pub mod encoder;
pub mod error;
pub mod io;
pub mod metrics;
pub mod receivers;
pub mod sequence;

pub use basis::{BasisFamily, MasterBasis, PartitionStrategy, SubBasis};
pub use baseline::{OfdmAssignment, OfdmPlan};
pub use channel::{CommChannel, PathlossMode, PointScatterer, RadarGeometry, RasterScene, SceneModel};
pub use encoder::{
    Constellation, ConstraintMatrix, CosmicConfig, FeasibilityReport, NullSpaceBasis, SetMetadata,
    SymbolFrame, WaveformFamily, WaveformSet, ZoneMode,
};
pub use error::{Error, Result};
pub use metrics::MetricsReport;
pub use receivers::{DecodeOutput, GainMode, ImageGrid, RadarImage, RangeCompressedCube};
pub use sequence::{ComplexSequence, CrossCorrelationMatrix, LagWindow};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Default absolute tolerance for orthonormality checks on unit-energy data.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

/// Default normalized tolerance for zone cross-correlation residuals.
pub const ZONE_RESIDUAL_TOL: f64 = 1e-8;
