//! Orthonormal master bases and their disjoint column partitions.
//!
//! Every transmit antenna draws its signal space from a disjoint subset of
//! columns of one K x K unitary master matrix, so projections onto different
//! antennas' sub-bases never interfere.

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Construction family of the master orthogonal matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisFamily {
    /// Orthonormalized seeded complex Gaussian matrix.
    RandomUnitary,
    /// Inverse DFT matrix; the frequency-domain signal space of an OFDM
    /// system.
    InverseDft,
    /// Sylvester-Hadamard matrix; requires a power-of-two order.
    Hadamard,
}

/// How master columns are assigned to antennas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PartitionStrategy {
    /// Antenna n takes columns `[n*K_s, (n+1)*K_s)`.
    #[default]
    ContiguousBlocks,
    /// Antenna n takes columns `{n, n+N, n+2N, ...}`.
    Strided,
}

/// A K x K unitary matrix whose columns span the full signal space.
#[derive(Debug, Clone)]
pub struct MasterBasis {
    columns: Array2<Complex64>,
    family: BasisFamily,
}

/// One antenna's K x K_s slice of the master basis.
#[derive(Debug, Clone)]
pub struct SubBasis {
    columns: Array2<Complex64>,
    column_indices: Vec<usize>,
    antenna_index: usize,
}

/// Builds a master basis. Deterministic for a fixed seed; the seed is
/// ignored by the structured families.
pub fn build_master_basis(k: usize, family: BasisFamily, seed: u64) -> Result<MasterBasis> {
    if k == 0 {
        return Err(Error::parameter("basis order must be at least 1"));
    }
    let columns = match family {
        BasisFamily::InverseDft => idft_matrix(k),
        BasisFamily::Hadamard => hadamard_matrix(k)?,
        BasisFamily::RandomUnitary => random_unitary(k, seed),
    };
    Ok(MasterBasis { columns, family })
}

fn idft_matrix(k: usize) -> Array2<Complex64> {
    let scale = 1.0 / (k as f64).sqrt();
    Array2::from_shape_fn((k, k), |(r, c)| {
        let ph = 2.0 * std::f64::consts::PI * ((r * c) % k) as f64 / k as f64;
        Complex64::new(ph.cos(), ph.sin()) * scale
    })
}

fn hadamard_matrix(k: usize) -> Result<Array2<Complex64>> {
    if !k.is_power_of_two() {
        return Err(Error::parameter(format!(
            "Hadamard order {k} unsupported: this construction needs a power of two"
        )));
    }
    let mut h = Array2::from_elem((1, 1), 1.0f64);
    let mut size = 1;
    while size < k {
        let mut next = Array2::zeros((2 * size, 2 * size));
        for r in 0..size {
            for c in 0..size {
                let v = h[(r, c)];
                next[(r, c)] = v;
                next[(r, c + size)] = v;
                next[(r + size, c)] = v;
                next[(r + size, c + size)] = -v;
            }
        }
        h = next;
        size *= 2;
    }
    let scale = 1.0 / (k as f64).sqrt();
    Ok(h.map(|&v| Complex64::new(v * scale, 0.0)))
}

fn random_unitary(k: usize, seed: u64) -> Array2<Complex64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let g = DMatrix::<Complex64>::from_fn(k, k, |_, _| {
        let re: f64 = normal.sample(&mut rng);
        let im: f64 = normal.sample(&mut rng);
        Complex64::new(re, im)
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    // Fix column phases so R's diagonal is real-positive; this makes the
    // factorization (and thus the basis) unique for a given input.
    for c in 0..k {
        let d = r[(c, c)];
        if d.norm() > 0.0 {
            let ph = d / d.norm();
            for rr in 0..k {
                q[(rr, c)] *= ph;
            }
        }
    }
    Array2::from_shape_fn((k, k), |(r, c)| q[(r, c)])
}

impl MasterBasis {
    pub fn order(&self) -> usize {
        self.columns.nrows()
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    pub fn columns(&self) -> &Array2<Complex64> {
        &self.columns
    }

    /// `max |C^H C - I|`, the unitarity defect.
    pub fn unitarity_defect(&self) -> f64 {
        gram_defect(&self.columns)
    }
}

impl SubBasis {
    pub fn antenna_index(&self) -> usize {
        self.antenna_index
    }

    pub fn column_indices(&self) -> &[usize] {
        &self.column_indices
    }

    pub fn columns(&self) -> &Array2<Complex64> {
        &self.columns
    }

    /// Signal-space dimension K_s.
    pub fn width(&self) -> usize {
        self.columns.ncols()
    }

    /// Sequence length K.
    pub fn height(&self) -> usize {
        self.columns.nrows()
    }

    /// `C_n x`: synthesize a length-K vector from sub-basis coordinates.
    pub fn synthesize(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.width() {
            return Err(Error::shape(format!(
                "antenna {}: expected {} coordinates, got {}",
                self.antenna_index,
                self.width(),
                x.len()
            )));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.height()];
        for (ci, xc) in x.iter().enumerate() {
            for (r, o) in out.iter_mut().enumerate() {
                *o += self.columns[(r, ci)] * xc;
            }
        }
        Ok(out)
    }

    /// `C_n^H y`: project a length-K vector onto the sub-basis.
    pub fn project(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        if y.len() != self.height() {
            return Err(Error::shape(format!(
                "antenna {}: expected length {}, got {}",
                self.antenna_index,
                self.height(),
                y.len()
            )));
        }
        Ok((0..self.width())
            .map(|ci| {
                self.columns
                    .column(ci)
                    .iter()
                    .zip(y.iter())
                    .map(|(b, v)| b.conj() * v)
                    .sum()
            })
            .collect())
    }

    /// `max |C_n^H C_n - I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        gram_defect(&self.columns)
    }
}

fn gram_defect(m: &Array2<Complex64>) -> f64 {
    let g = m.t().map(|c| c.conj()).dot(m);
    let mut worst = 0.0f64;
    for r in 0..g.nrows() {
        for c in 0..g.ncols() {
            let expect = if r == c { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            worst = worst.max((g[(r, c)] - expect).norm());
        }
    }
    worst
}

/// Splits a master basis into `n` disjoint sub-bases of `k_s` columns each.
pub fn partition_subbases(
    master: &MasterBasis,
    n: usize,
    k_s: usize,
    strategy: PartitionStrategy,
) -> Result<Vec<SubBasis>> {
    let k = master.order();
    if n == 0 || k_s == 0 {
        return Err(Error::parameter("antenna count and K_s must be positive"));
    }
    if n * k_s > k {
        return Err(Error::InfeasiblePartition { n, k_s, k });
    }
    let mut out = Vec::with_capacity(n);
    for antenna in 0..n {
        let indices: Vec<usize> = match strategy {
            PartitionStrategy::ContiguousBlocks => (antenna * k_s..(antenna + 1) * k_s).collect(),
            PartitionStrategy::Strided => (0..k_s).map(|j| antenna + j * n).collect(),
        };
        let mut cols = Array2::zeros((k, k_s));
        for (dst, &src) in indices.iter().enumerate() {
            for r in 0..k {
                cols[(r, dst)] = master.columns[(r, src)];
            }
        }
        out.push(SubBasis { columns: cols, column_indices: indices, antenna_index: antenna });
    }
    Ok(out)
}

/// Max |C_n^H C_m| over all entries, for distinct sub-bases.
pub fn cross_orthogonality_defect(a: &SubBasis, b: &SubBasis) -> f64 {
    let g = a.columns.t().map(|c| c.conj()).dot(&b.columns);
    g.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn idft_entries_match_definition() {
        let b = build_master_basis(4, BasisFamily::InverseDft, 0).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let ph = 2.0 * std::f64::consts::PI * (r * c) as f64 / 4.0;
                let want = Complex64::new(ph.cos(), ph.sin()) * 0.5;
                assert!((b.columns()[(r, c)] - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn all_families_unitary() {
        for k in [4usize, 8, 16, 64] {
            for family in [BasisFamily::RandomUnitary, BasisFamily::InverseDft, BasisFamily::Hadamard] {
                let b = build_master_basis(k, family, 7).unwrap();
                assert!(
                    b.unitarity_defect() < 1e-10,
                    "family {family:?} K={k} defect {}",
                    b.unitarity_defect()
                );
            }
        }
    }

    #[test]
    fn random_unitary_is_deterministic() {
        let a = build_master_basis(8, BasisFamily::RandomUnitary, 3).unwrap();
        let b = build_master_basis(8, BasisFamily::RandomUnitary, 3).unwrap();
        assert_eq!(a.columns(), b.columns());
        let c = build_master_basis(8, BasisFamily::RandomUnitary, 4).unwrap();
        assert_ne!(a.columns(), c.columns());
    }

    #[test]
    fn hadamard_rejects_non_power_of_two() {
        assert!(build_master_basis(12, BasisFamily::Hadamard, 0).is_err());
        assert!(build_master_basis(16, BasisFamily::Hadamard, 0).is_ok());
    }

    #[test]
    fn contiguous_partition_indices() {
        let b = build_master_basis(8, BasisFamily::RandomUnitary, 1).unwrap();
        let subs = partition_subbases(&b, 2, 4, PartitionStrategy::ContiguousBlocks).unwrap();
        assert_eq!(subs[0].column_indices(), &[0, 1, 2, 3]);
        assert_eq!(subs[1].column_indices(), &[4, 5, 6, 7]);
    }

    #[test]
    fn strided_partition_indices() {
        let b = build_master_basis(8, BasisFamily::RandomUnitary, 1).unwrap();
        let subs = partition_subbases(&b, 2, 4, PartitionStrategy::Strided).unwrap();
        assert_eq!(subs[0].column_indices(), &[0, 2, 4, 6]);
        assert_eq!(subs[1].column_indices(), &[1, 3, 5, 7]);
    }

    #[test]
    fn oversubscribed_partition_rejected() {
        let b = build_master_basis(8, BasisFamily::RandomUnitary, 1).unwrap();
        let e = partition_subbases(&b, 3, 3, PartitionStrategy::ContiguousBlocks);
        assert!(matches!(e, Err(Error::InfeasiblePartition { n: 3, k_s: 3, k: 8 })));
    }

    #[test]
    fn subbases_cross_orthogonal_under_both_strategies() {
        for family in [BasisFamily::RandomUnitary, BasisFamily::InverseDft, BasisFamily::Hadamard] {
            for strategy in [PartitionStrategy::ContiguousBlocks, PartitionStrategy::Strided] {
                let b = build_master_basis(16, family, 9).unwrap();
                let subs = partition_subbases(&b, 3, 5, strategy).unwrap();
                for s in &subs {
                    assert!(s.orthonormality_defect() < 1e-10);
                }
                for i in 0..subs.len() {
                    for j in 0..subs.len() {
                        if i != j {
                            assert!(cross_orthogonality_defect(&subs[i], &subs[j]) < 1e-10);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn project_inverts_synthesize() {
        let b = build_master_basis(16, BasisFamily::RandomUnitary, 2).unwrap();
        let subs = partition_subbases(&b, 2, 6, PartitionStrategy::Strided).unwrap();
        let x: Vec<Complex64> =
            (0..6).map(|i| Complex64::new(i as f64 + 0.5, -(i as f64))).collect();
        let y = subs[0].synthesize(&x).unwrap();
        let back = subs[0].project(&y).unwrap();
        for (a, b) in x.iter().zip(back.iter()) {
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-12);
            assert_abs_diff_eq!(a.im, b.im, epsilon = 1e-12);
        }
        // Projection of a foreign-subspace vector vanishes.
        let y1 = subs[1].synthesize(&x[..6].to_vec()).unwrap();
        let z = subs[0].project(&y1).unwrap();
        for v in z {
            assert!(v.norm() < 1e-12);
        }
    }
}
