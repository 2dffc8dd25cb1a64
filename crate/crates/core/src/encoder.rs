//! Sequential zone-constrained waveform synthesis.
//!
//! Waveforms are built one antenna at a time. Antenna `n`'s signal lives in
//! its sub-basis: `s_n = C_n x_n^p`. The coordinate vector is confined to the
//! null space of the stacked zone cross-correlation constraints against all
//! previously built waveforms, `x_n^p = B_perp x_n`, so every new waveform is
//! zone-orthogonal to its predecessors while the null-space coordinates carry
//! communication symbols.
//!
//! The null-space basis returned by [`null_space`] is *canonical*: it depends
//! only on the null subspace itself, not on the particular matrix entries
//! that produced it. A receiver that reconstructs the constraint matrix from
//! (noisy, rescaled) waveform estimates therefore derives the same basis up
//! to the estimation error, which is what makes symbol recovery possible.

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{
    build_master_basis, partition_subbases, BasisFamily, PartitionStrategy, SubBasis,
};
use crate::error::{Error, Result};
use crate::sequence::{zone_residual, ComplexSequence, CrossCorrelationMatrix, LagWindow};

/// Which lag interval the zero-correlation zone covers.
///
/// `PaperLiteralZone` constrains lags `[0, K_z - 1]`: each new waveform is
/// made orthogonal to earlier ones for echoes *delayed* relative to it.
/// `SymmetricZone` constrains `[-(K_z - 1), K_z - 1]`, which by conjugate
/// symmetry of the cross-correlation suppresses cross-talk between every
/// ordered pair over the whole zone; imaging scenarios want this mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ZoneMode {
    #[default]
    PaperLiteralZone,
    SymmetricZone,
}

impl ZoneMode {
    /// The constrained lag window for a zone of `k_z` samples.
    pub fn lag_window(&self, k_z: usize) -> Result<LagWindow> {
        if k_z == 0 {
            return Err(Error::parameter("zone length K_z must be at least 1"));
        }
        let m = k_z as i64 - 1;
        match self {
            ZoneMode::PaperLiteralZone => LagWindow::new(0, m),
            ZoneMode::SymmetricZone => LagWindow::new(-m, m),
        }
    }

    /// Number of constrained lags per prior waveform.
    pub fn zone_lag_count(&self, k_z: usize) -> usize {
        match self {
            ZoneMode::PaperLiteralZone => k_z,
            ZoneMode::SymmetricZone => 2 * k_z - 1,
        }
    }
}

// ---------------------------------------------------------------------------
// Constellations
// ---------------------------------------------------------------------------

/// Supported symbol constellations, Gray-mapped, unit average energy.
///
/// 16-QAM table (bits MSB-first `b0 b1 b2 b3`; I from `b0 b1`, Q from
/// `b2 b3`; per-axis Gray code `00 -> -3`, `01 -> -1`, `11 -> +1`,
/// `10 -> +3`, scaled by `1/sqrt(10)`). QPSK: `b0` selects the I sign,
/// `b1` the Q sign (`0 -> +`), scaled by `1/sqrt(2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constellation {
    Qam16,
    Qpsk,
}

impl Constellation {
    pub fn bits_per_symbol(&self) -> usize {
        match self {
            Constellation::Qam16 => 4,
            Constellation::Qpsk => 2,
        }
    }

    /// All constellation points, indexed by their bit pattern value
    /// (MSB-first).
    pub fn points(&self) -> Vec<Complex64> {
        let n = 1usize << self.bits_per_symbol();
        (0..n)
            .map(|v| {
                let bits: Vec<bool> =
                    (0..self.bits_per_symbol()).map(|i| (v >> (self.bits_per_symbol() - 1 - i)) & 1 == 1).collect();
                self.map_symbol(&bits)
            })
            .collect()
    }

    fn gray_pam(b_hi: bool, b_lo: bool) -> f64 {
        match (b_hi, b_lo) {
            (false, false) => -3.0,
            (false, true) => -1.0,
            (true, true) => 1.0,
            (true, false) => 3.0,
        }
    }

    fn map_symbol(&self, bits: &[bool]) -> Complex64 {
        match self {
            Constellation::Qam16 => {
                let i = Self::gray_pam(bits[0], bits[1]);
                let q = Self::gray_pam(bits[2], bits[3]);
                Complex64::new(i, q) / 10.0f64.sqrt()
            }
            Constellation::Qpsk => {
                let i = if bits[0] { -1.0 } else { 1.0 };
                let q = if bits[1] { -1.0 } else { 1.0 };
                Complex64::new(i, q) / 2.0f64.sqrt()
            }
        }
    }

    /// Nearest-point hard decision; returns the decided bits.
    pub fn demap(&self, symbol: Complex64) -> Vec<bool> {
        let pts = self.points();
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, p) in pts.iter().enumerate() {
            let d = (symbol - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        let bps = self.bits_per_symbol();
        (0..bps).map(|i| (best >> (bps - 1 - i)) & 1 == 1).collect()
    }

    /// Fixed pilot pattern (maximum-energy corner points, cycled).
    pub fn pilot_symbol(&self, index: usize) -> Complex64 {
        match self {
            Constellation::Qam16 => {
                let s = 1.0 / 10.0f64.sqrt();
                let corners = [
                    Complex64::new(3.0, 3.0),
                    Complex64::new(-3.0, -3.0),
                    Complex64::new(3.0, -3.0),
                    Complex64::new(-3.0, 3.0),
                ];
                corners[index % 4] * s
            }
            Constellation::Qpsk => {
                let s = 1.0 / 2.0f64.sqrt();
                let pts = [
                    Complex64::new(1.0, 1.0),
                    Complex64::new(-1.0, -1.0),
                    Complex64::new(1.0, -1.0),
                    Complex64::new(-1.0, 1.0),
                ];
                pts[index % 4] * s
            }
        }
    }
}

/// Gray-maps a bit string onto constellation points.
pub fn map_bits_to_symbols(bits: &[bool], constellation: Constellation) -> Result<Vec<Complex64>> {
    let bps = constellation.bits_per_symbol();
    if bits.len() % bps != 0 {
        return Err(Error::parameter(format!(
            "bit string length {} is not a multiple of {bps}",
            bits.len()
        )));
    }
    Ok(bits.chunks(bps).map(|c| constellation.map_symbol(c)).collect())
}

/// One antenna's symbol payload: optional pilot prefix followed by
/// Gray-mapped data symbols.
#[derive(Debug, Clone)]
pub struct SymbolFrame {
    pub symbols: Vec<Complex64>,
    pub constellation: Constellation,
    /// Data bits only (pilots excluded).
    pub bits: Vec<bool>,
    pub pilot_prefix: usize,
}

impl SymbolFrame {
    /// Builds a frame filling `capacity` symbol slots: `pilot_prefix` pilots
    /// then data mapped from `bits`.
    pub fn from_bits(
        bits: &[bool],
        constellation: Constellation,
        capacity: usize,
        pilot_prefix: usize,
    ) -> Result<Self> {
        if pilot_prefix > capacity {
            return Err(Error::parameter(format!(
                "pilot prefix {pilot_prefix} exceeds capacity {capacity}"
            )));
        }
        let data_slots = capacity - pilot_prefix;
        let need = data_slots * constellation.bits_per_symbol();
        if bits.len() != need {
            return Err(Error::parameter(format!(
                "expected {need} data bits for {data_slots} symbols, got {}",
                bits.len()
            )));
        }
        let mut symbols: Vec<Complex64> =
            (0..pilot_prefix).map(|i| constellation.pilot_symbol(i)).collect();
        symbols.extend(map_bits_to_symbols(bits, constellation)?);
        Ok(Self { symbols, constellation, bits: bits.to_vec(), pilot_prefix })
    }

    /// Draws random data bits from `rng` to fill `capacity` slots.
    pub fn random(
        rng: &mut impl Rng,
        constellation: Constellation,
        capacity: usize,
        pilot_prefix: usize,
    ) -> Result<Self> {
        let data_slots = capacity.saturating_sub(pilot_prefix);
        let bits: Vec<bool> =
            (0..data_slots * constellation.bits_per_symbol()).map(|_| rng.gen::<bool>()).collect();
        Self::from_bits(&bits, constellation, capacity, pilot_prefix)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Data symbols (pilot prefix skipped).
    pub fn data_symbols(&self) -> &[Complex64] {
        &self.symbols[self.pilot_prefix..]
    }
}

// ---------------------------------------------------------------------------
// Constraint matrix and null space
// ---------------------------------------------------------------------------

/// Vertical stack of zone cross-correlation blocks, one per previously built
/// waveform, expressed in antenna `n`'s sub-basis coordinates.
#[derive(Debug, Clone)]
pub struct ConstraintMatrix {
    stacked: Array2<Complex64>,
    antenna_index: usize,
    zone_window: LagWindow,
}

impl ConstraintMatrix {
    pub fn nrows(&self) -> usize {
        self.stacked.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.stacked.ncols()
    }

    pub fn antenna_index(&self) -> usize {
        self.antenna_index
    }

    pub fn zone_window(&self) -> LagWindow {
        self.zone_window
    }

    pub fn stacked(&self) -> &Array2<Complex64> {
        &self.stacked
    }

    /// `B v` for a sub-basis coordinate vector.
    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.ncols() {
            return Err(Error::shape(format!("expected {} coordinates, got {}", self.ncols(), v.len())));
        }
        Ok(self
            .stacked
            .outer_iter()
            .map(|row| row.iter().zip(v.iter()).map(|(a, b)| a * b).sum())
            .collect())
    }
}

/// Builds the constraint matrix for the antenna owning `c_n` against the
/// waveforms in `previous`. Empty `previous` yields a 0-row matrix.
pub fn assemble_constraints(
    previous: &[ComplexSequence],
    c_n: &SubBasis,
    zone_window: LagWindow,
) -> Result<ConstraintMatrix> {
    let k = c_n.height();
    if previous.iter().any(|s| s.len() != k) {
        return Err(Error::shape("prior waveforms must match the basis length"));
    }
    let w = zone_window.len();
    let mut stacked = Array2::zeros((previous.len() * w, c_n.width()));
    for (i, s) in previous.iter().enumerate() {
        let m = CrossCorrelationMatrix::from_sequence(s, zone_window)?;
        let block = m.apply_matrix(c_n.columns())?;
        stacked.slice_mut(ndarray::s![i * w..(i + 1) * w, ..]).assign(&block);
    }
    Ok(ConstraintMatrix { stacked, antenna_index: c_n.antenna_index(), zone_window })
}

/// Orthonormal basis of a constraint matrix's null space.
#[derive(Debug, Clone)]
pub struct NullSpaceBasis {
    columns: Array2<Complex64>,
    singular_value_floor: f64,
}

impl NullSpaceBasis {
    pub fn dim(&self) -> usize {
        self.columns.ncols()
    }

    pub fn columns(&self) -> &Array2<Complex64> {
        &self.columns
    }

    pub fn singular_value_floor(&self) -> f64 {
        self.singular_value_floor
    }

    /// `B_perp x`: expand null-space coordinates to sub-basis coordinates.
    pub fn expand(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.dim() {
            return Err(Error::shape(format!("expected {} symbols, got {}", self.dim(), x.len())));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.columns.nrows()];
        for (ci, xc) in x.iter().enumerate() {
            for (r, o) in out.iter_mut().enumerate() {
                *o += self.columns[(r, ci)] * xc;
            }
        }
        Ok(out)
    }

    /// `B_perp^H v`: retrieve null-space coordinates from sub-basis ones.
    pub fn project(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.columns.nrows() {
            return Err(Error::shape(format!(
                "expected {} coordinates, got {}",
                self.columns.nrows(),
                v.len()
            )));
        }
        Ok((0..self.dim())
            .map(|ci| {
                self.columns
                    .column(ci)
                    .iter()
                    .zip(v.iter())
                    .map(|(b, x)| b.conj() * x)
                    .sum()
            })
            .collect())
    }

    /// `max_col ||B v_col||_inf` over the basis columns.
    pub fn max_constraint_residual(&self, b: &ConstraintMatrix) -> f64 {
        let mut worst = 0.0f64;
        for ci in 0..self.dim() {
            let col: Vec<Complex64> = self.columns.column(ci).to_vec();
            if let Ok(r) = b.apply(&col) {
                worst = worst.max(r.iter().map(|c| c.norm()).fold(0.0, f64::max));
            }
        }
        worst
    }
}

/// Computes a canonical orthonormal basis of `Null(B)`.
///
/// Rank is the count of singular values above `rel_tol * sigma_max`; the
/// basis construction is shared with [`null_space_with_dim`] and depends
/// only on the null *subspace*, not on the matrix entries that produced it:
/// a fixed reference frame (seeded once, a pure function of `K_s`) is
/// projected onto the subspace and orthonormalized in index order. The map
/// from subspace to basis is continuous, so transmitter and receiver derive
/// matching bases even though the receiver reconstructs the constraints
/// from noisy, rescaled waveform estimates.
pub fn null_space(b: &ConstraintMatrix, rel_tol: f64) -> Result<NullSpaceBasis> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::parameter(format!("rel_tol {rel_tol} outside (0, 1)")));
    }
    let k_s = b.ncols();
    if b.nrows() == 0 {
        return Ok(NullSpaceBasis { columns: Array2::eye(k_s), singular_value_floor: 0.0 });
    }

    let m = DMatrix::<Complex64>::from_fn(b.nrows(), b.ncols(), |r, c| b.stacked[(r, c)]);
    let svd = m.svd(false, true);
    let sv = &svd.singular_values;
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let sigma_max = sv.iter().cloned().fold(0.0f64, f64::max);
    let floor = rel_tol * sigma_max;
    let rank = sv.iter().filter(|&&s| s > floor).count();
    if rank >= k_s {
        return Err(Error::NullSpaceExhausted { antenna: b.antenna_index, rank, k_s });
    }
    Ok(NullSpaceBasis { columns: basis_from_row_space(v_t, rank, k_s), singular_value_floor: floor })
}

/// Canonical null-space basis with the rank *imposed* rather than decided
/// from the spectrum.
///
/// The decoding receiver works on noise-perturbed constraint estimates
/// whose small singular values sit at the noise level, far above any
/// spectral tolerance; re-deciding the rank there would count noise as
/// constraints. It instead keeps the top `K_s - dim` singular directions --
/// the best estimate of the constraint row space -- and derives the basis
/// of their complement exactly like the transmit side.
pub fn null_space_with_dim(b: &ConstraintMatrix, dim: usize) -> Result<NullSpaceBasis> {
    let k_s = b.ncols();
    if dim == 0 || dim > k_s {
        return Err(Error::DecodeAbort(format!(
            "antenna {}: expected capacity {dim} impossible for K_s = {k_s}",
            b.antenna_index
        )));
    }
    let rank = k_s - dim;
    if b.nrows() == 0 || rank == 0 {
        if rank != 0 {
            return Err(Error::DecodeAbort(format!(
                "antenna {}: capacity {dim} below the unconstrained dimension {k_s}",
                b.antenna_index
            )));
        }
        return Ok(NullSpaceBasis { columns: Array2::eye(k_s), singular_value_floor: 0.0 });
    }
    if rank > b.nrows().min(k_s) {
        return Err(Error::DecodeAbort(format!(
            "antenna {}: capacity {dim} needs constraint rank {rank}, but the matrix is {}x{}",
            b.antenna_index,
            b.nrows(),
            k_s
        )));
    }
    let m = DMatrix::<Complex64>::from_fn(b.nrows(), b.ncols(), |r, c| b.stacked[(r, c)]);
    let svd = m.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    Ok(NullSpaceBasis { columns: basis_from_row_space(v_t, rank, k_s), singular_value_floor: 0.0 })
}

/// Shared construction: given the row-space directions (first `rank` rows
/// of `V^T`), produce the canonical orthonormal basis of their complement.
///
/// Candidates are the reference-frame columns with their row-space
/// component removed, accepted in index order, orthogonalized twice against
/// the already-accepted basis, and skipped when nearly dependent. No
/// data-driven pivoting and no per-vector phase convention: the result
/// inherits its orientation from the fixed frame, which keeps it a
/// continuous function of the subspace.
fn basis_from_row_space(v_t: &DMatrix<Complex64>, rank: usize, k_s: usize) -> Array2<Complex64> {
    if rank == 0 {
        return Array2::eye(k_s);
    }
    let dim = k_s - rank;
    let frame = reference_frame(k_s);
    let dotc = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
        a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
    };
    let norm = |v: &[Complex64]| v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();

    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(dim);
    for j in 0..k_s {
        if basis.len() == dim {
            break;
        }
        let r_j: Vec<Complex64> = (0..k_s).map(|i| frame[(i, j)]).collect();
        // Remove the row-space component: c = r_j - V_r (V_r^H r_j).
        let mut c = r_j.clone();
        for vi in 0..rank {
            let row = v_t.row(vi);
            let mut coef = Complex64::new(0.0, 0.0);
            for i in 0..k_s {
                // V_r column vi is conj of row vi of V^T.
                coef += row[i] * r_j[i];
            }
            for i in 0..k_s {
                c[i] -= row[i].conj() * coef;
            }
        }
        for _ in 0..2 {
            for q in &basis {
                let coef = dotc(q, &c);
                for (ci, qi) in c.iter_mut().zip(q.iter()) {
                    *ci -= coef * qi;
                }
            }
        }
        let n = norm(&c);
        if n < 1e-4 {
            continue; // frame vector (numerically) inside the row space
        }
        for ci in c.iter_mut() {
            *ci /= n;
        }
        basis.push(c);
    }
    assert_eq!(basis.len(), dim, "reference frame failed to span the null space");

    let mut out = Array2::zeros((k_s, dim));
    for (ci, col) in basis.iter().enumerate() {
        for (r, val) in col.iter().enumerate() {
            out[(r, ci)] = *val;
        }
    }
    out
}

/// The fixed unitary reference frame for a given dimension: seeded Gaussian
/// matrix orthonormalized by QR with a real-positive diagonal convention.
/// Both link ends evaluate this identically from `k_s` alone.
fn reference_frame(k_s: usize) -> DMatrix<Complex64> {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = ChaCha12Rng::seed_from_u64(0x434f_534d_4943);
    let normal = StandardNormal;
    let g = DMatrix::<Complex64>::from_fn(k_s, k_s, |_, _| {
        let re: f64 = normal.sample(&mut rng);
        let im: f64 = normal.sample(&mut rng);
        Complex64::new(re, im)
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..k_s {
        let d = r[(c, c)];
        if d.norm() > 0.0 {
            let ph = d / d.norm();
            for rr in 0..k_s {
                q[(rr, c)] *= ph;
            }
        }
    }
    q
}

// ---------------------------------------------------------------------------
// Feasibility
// ---------------------------------------------------------------------------

/// Dimension budget for one antenna.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct AntennaBudget {
    /// 1-based antenna number.
    pub antenna: usize,
    /// The closed-form literature prediction `K_s - (n-1)(K_z - 1)`.
    pub closed_form: i64,
    /// The conservative bound `K_s - (n-1) * zone_lag_count`, assuming full
    /// constraint rank. Actual capacities come from computed ranks.
    pub conservative: i64,
}

/// Report of [`feasibility_check`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct FeasibilityReport {
    pub k: usize,
    pub n: usize,
    pub k_s: usize,
    pub k_z: usize,
    pub mode: ZoneMode,
    pub zone_lag_count: usize,
    /// Whether `N * K_s <= K` (the sub-basis partition fits).
    pub partition_ok: bool,
    pub per_antenna: Vec<AntennaBudget>,
    pub feasible: bool,
}

impl FeasibilityReport {
    /// Multi-line human-readable rendering of the budget.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "configuration: K={} N={} K_s={} K_z={} mode={:?} (zone lags per prior waveform: {})\n",
            self.k, self.n, self.k_s, self.k_z, self.mode, self.zone_lag_count
        ));
        out.push_str(&format!(
            "partition: {} ({}x{} = {} of {} master columns)\n",
            if self.partition_ok { "ok" } else { "DOES NOT FIT" },
            self.n,
            self.k_s,
            self.n * self.k_s,
            self.k
        ));
        out.push_str("antenna   closed-form   conservative\n");
        for b in &self.per_antenna {
            out.push_str(&format!("{:>7}   {:>11}   {:>12}\n", b.antenna, b.closed_form, b.conservative));
        }
        out.push_str(if self.feasible {
            "verdict: feasible\n"
        } else {
            "verdict: INFEASIBLE (no symbol dimensions left at some antenna)\n"
        });
        out
    }
}

/// Predicts per-antenna symbol capacities and overall feasibility without
/// building anything. The conservative bound assumes every constraint row is
/// independent; generated sets report their computed ranks, which are
/// authoritative.
pub fn feasibility_check(
    k: usize,
    n: usize,
    k_s: usize,
    k_z: usize,
    mode: ZoneMode,
) -> Result<FeasibilityReport> {
    if k == 0 || n == 0 || k_s == 0 || k_z == 0 {
        return Err(Error::parameter("all of K, N, K_s, K_z must be positive"));
    }
    let w = mode.zone_lag_count(k_z);
    let per_antenna: Vec<AntennaBudget> = (1..=n)
        .map(|a| AntennaBudget {
            antenna: a,
            closed_form: k_s as i64 - (a as i64 - 1) * (k_z as i64 - 1),
            conservative: k_s as i64 - (a as i64 - 1) * w as i64,
        })
        .collect();
    let partition_ok = n * k_s <= k;
    let feasible = partition_ok && per_antenna.last().map(|b| b.conservative >= 1).unwrap_or(false);
    Ok(FeasibilityReport {
        k,
        n,
        k_s,
        k_z,
        mode,
        zone_lag_count: w,
        partition_ok,
        per_antenna,
        feasible,
    })
}

// ---------------------------------------------------------------------------
// Waveform sets
// ---------------------------------------------------------------------------

/// Top-level family of a waveform set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveformFamily {
    Cosmic,
    Ofdm,
    ZeroShift,
}

/// Everything a receiver (or a rerun) needs to know about a set, except the
/// transmitted bits. Serialized as the JSON sidecar next to the sample CSV.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SetMetadata {
    pub family: WaveformFamily,
    pub k: usize,
    pub n: usize,
    pub k_s: usize,
    pub k_z: usize,
    pub mode: ZoneMode,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis_family: Option<BasisFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<PartitionStrategy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constellation: Option<Constellation>,
    #[serde(default)]
    pub pilot_prefix: usize,
    /// Computed symbol capacity per antenna (null-space dimensions for the
    /// zone-constrained family, subcarrier counts for OFDM, zero otherwise).
    pub per_antenna_capacity: Vec<usize>,
    /// Per-antenna energy normalization scalars: the transmitted waveform is
    /// the raw synthesis divided by this value.
    pub energy_scales: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subcarriers: Option<Vec<Vec<usize>>>,
    /// Relative singular-value tolerance used for rank decisions.
    pub rel_tol: f64,
}

/// A family of simultaneously transmitted unit-energy waveforms plus the
/// metadata required to receive them.
#[derive(Debug, Clone)]
pub struct WaveformSet {
    waveforms: Vec<ComplexSequence>,
    meta: SetMetadata,
}

impl WaveformSet {
    pub fn new(waveforms: Vec<ComplexSequence>, meta: SetMetadata) -> Result<Self> {
        if waveforms.is_empty() {
            return Err(Error::parameter("waveform set must not be empty"));
        }
        let k = waveforms[0].len();
        if waveforms.iter().any(|w| w.len() != k) {
            return Err(Error::shape("waveforms must share one length"));
        }
        if meta.k != k || meta.n != waveforms.len() {
            return Err(Error::shape(format!(
                "metadata says K={} N={}, set has K={} N={}",
                meta.k,
                meta.n,
                k,
                waveforms.len()
            )));
        }
        Ok(Self { waveforms, meta })
    }

    pub fn waveforms(&self) -> &[ComplexSequence] {
        &self.waveforms
    }

    pub fn meta(&self) -> &SetMetadata {
        &self.meta
    }

    pub fn n(&self) -> usize {
        self.waveforms.len()
    }

    pub fn k(&self) -> usize {
        self.waveforms[0].len()
    }

    /// The constrained lag window of this set's zone configuration.
    pub fn zone_window(&self) -> Result<LagWindow> {
        self.meta.mode.lag_window(self.meta.k_z)
    }

    /// Full pairwise residual matrix over the set's zone window.
    pub fn zone_residual_matrix(&self) -> Result<Array2<f64>> {
        zone_residual(&self.waveforms, self.zone_window()?)
    }

    /// Maximum normalized zone residual over the *constrained* ordered pairs
    /// (earlier waveform correlated against later one). In symmetric mode
    /// this bounds every ordered pair by conjugate symmetry; in the literal
    /// mode the reverse ordering is unconstrained by design.
    pub fn max_constrained_zone_residual(&self) -> Result<f64> {
        let r = self.zone_residual_matrix()?;
        let mut worst = 0.0f64;
        for i in 0..self.n() {
            for j in (i + 1)..self.n() {
                worst = worst.max(r[(i, j)]);
            }
        }
        Ok(worst)
    }
}

// ---------------------------------------------------------------------------
// The sequential encoder
// ---------------------------------------------------------------------------

/// Parameters for zone-constrained waveform synthesis.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CosmicConfig {
    pub k: usize,
    pub n: usize,
    pub k_s: usize,
    pub k_z: usize,
    #[serde(default)]
    pub mode: ZoneMode,
    pub family: BasisFamily,
    #[serde(default)]
    pub partition: PartitionStrategy,
    pub seed: u64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default)]
    pub pilot_prefix: usize,
}

fn default_rel_tol() -> f64 {
    1e-10
}

impl CosmicConfig {
    pub fn new(k: usize, n: usize, k_s: usize, k_z: usize) -> Self {
        Self {
            k,
            n,
            k_s,
            k_z,
            mode: ZoneMode::default(),
            family: BasisFamily::RandomUnitary,
            partition: PartitionStrategy::default(),
            seed: 0,
            rel_tol: default_rel_tol(),
            pilot_prefix: 0,
        }
    }

    pub fn with_mode(mut self, mode: ZoneMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_family(mut self, family: BasisFamily) -> Self {
        self.family = family;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n == 0 || self.k_s == 0 || self.k_z == 0 {
            return Err(Error::parameter("all of K, N, K_s, K_z must be positive"));
        }
        if self.n * self.k_s > self.k {
            return Err(Error::InfeasiblePartition { n: self.n, k_s: self.k_s, k: self.k });
        }
        if self.k_z > self.k {
            return Err(Error::parameter(format!(
                "zone length K_z={} exceeds sequence length K={}",
                self.k_z, self.k
            )));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::parameter(format!("rel_tol {} outside (0, 1)", self.rel_tol)));
        }
        Ok(())
    }

    pub fn feasibility(&self) -> Result<FeasibilityReport> {
        feasibility_check(self.k, self.n, self.k_s, self.k_z, self.mode)
    }
}

/// Builds waveforms antenna by antenna. Capacities depend on the waveforms
/// already built, so the flow is: query [`CosmicEncoder::next_capacity`],
/// then [`CosmicEncoder::push_frame`] with that many symbols, N times, then
/// [`CosmicEncoder::finish`].
pub struct CosmicEncoder {
    cfg: CosmicConfig,
    subbases: Vec<SubBasis>,
    zone_window: LagWindow,
    built: Vec<ComplexSequence>,
    scales: Vec<f64>,
    frames: Vec<SymbolFrame>,
    pending: Option<NullSpaceBasis>,
}

impl CosmicEncoder {
    pub fn new(cfg: CosmicConfig) -> Result<Self> {
        cfg.validate()?;
        let master = build_master_basis(cfg.k, cfg.family, cfg.seed)?;
        let subbases = partition_subbases(&master, cfg.n, cfg.k_s, cfg.partition)?;
        let zone_window = cfg.mode.lag_window(cfg.k_z)?;
        Ok(Self {
            cfg,
            subbases,
            zone_window,
            built: Vec::new(),
            scales: Vec::new(),
            frames: Vec::new(),
            pending: None,
        })
    }

    /// 0-based index of the antenna the next frame will feed.
    pub fn next_antenna(&self) -> usize {
        self.built.len()
    }

    pub fn is_complete(&self) -> bool {
        self.built.len() == self.cfg.n
    }

    /// Symbol capacity of the next antenna (computes and caches its
    /// null-space basis).
    pub fn next_capacity(&mut self) -> Result<usize> {
        if self.is_complete() {
            return Err(Error::parameter("all antennas already built"));
        }
        if self.pending.is_none() {
            let sub = &self.subbases[self.built.len()];
            let b = assemble_constraints(&self.built, sub, self.zone_window)?;
            self.pending = Some(null_space(&b, self.cfg.rel_tol)?);
        }
        Ok(self.pending.as_ref().unwrap().dim())
    }

    /// Encodes one antenna's frame into its waveform.
    pub fn push_frame(&mut self, frame: SymbolFrame) -> Result<()> {
        let capacity = self.next_capacity()?;
        let antenna = self.built.len();
        if frame.len() != capacity {
            return Err(Error::SymbolCountMismatch {
                antenna,
                expected: capacity,
                got: frame.len(),
            });
        }
        let basis = self.pending.take().unwrap();
        let coords = basis.expand(&frame.symbols)?;
        let raw = self.subbases[antenna].synthesize(&coords)?;
        let (wave, scale) = ComplexSequence::new(raw)?.normalized()?;
        self.built.push(wave);
        self.scales.push(scale);
        self.frames.push(frame);
        Ok(())
    }

    /// Capacities of the antennas built so far.
    pub fn capacities(&self) -> Vec<usize> {
        self.frames.iter().map(|f| f.len()).collect()
    }

    pub fn finish(self) -> Result<(WaveformSet, Vec<SymbolFrame>)> {
        if !self.is_complete() {
            return Err(Error::parameter(format!(
                "only {} of {} antennas built",
                self.built.len(),
                self.cfg.n
            )));
        }
        let constellation = self.frames.first().map(|f| f.constellation);
        let meta = SetMetadata {
            family: WaveformFamily::Cosmic,
            k: self.cfg.k,
            n: self.cfg.n,
            k_s: self.cfg.k_s,
            k_z: self.cfg.k_z,
            mode: self.cfg.mode,
            seed: self.cfg.seed,
            basis_family: Some(self.cfg.family),
            partition: Some(self.cfg.partition),
            constellation,
            pilot_prefix: self.cfg.pilot_prefix,
            per_antenna_capacity: self.frames.iter().map(|f| f.len()).collect(),
            energy_scales: self.scales.clone(),
            subcarriers: None,
            rel_tol: self.cfg.rel_tol,
        };
        let set = WaveformSet::new(self.built, meta)?;
        Ok((set, self.frames))
    }
}

/// Builds a complete set from pre-sized frames (frame `n` must hold exactly
/// the capacity computed for antenna `n`).
pub fn generate_cosmic_set(
    cfg: &CosmicConfig,
    frames: Vec<SymbolFrame>,
) -> Result<(WaveformSet, Vec<SymbolFrame>)> {
    if frames.len() != cfg.n {
        return Err(Error::parameter(format!(
            "expected {} frames, got {}",
            cfg.n,
            frames.len()
        )));
    }
    let mut enc = CosmicEncoder::new(cfg.clone())?;
    for frame in frames {
        enc.push_frame(frame)?;
    }
    enc.finish()
}

/// Builds a complete set with random data bits drawn per antenna from
/// deterministic streams of `bits_seed`.
pub fn generate_cosmic_set_random(
    cfg: &CosmicConfig,
    constellation: Constellation,
    bits_seed: u64,
) -> Result<(WaveformSet, Vec<SymbolFrame>)> {
    let mut enc = CosmicEncoder::new(cfg.clone())?;
    for antenna in 0..cfg.n {
        let capacity = enc.next_capacity()?;
        let mut rng = ChaCha12Rng::seed_from_u64(bits_seed);
        rng.set_stream(antenna as u64);
        let frame = SymbolFrame::random(&mut rng, constellation, capacity, cfg.pilot_prefix)?;
        enc.push_frame(frame)?;
    }
    enc.finish()
}
