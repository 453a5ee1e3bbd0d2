//! Empirical moment matrices of point clouds.
//!
//! For a sample x₁, …, xₙ in ℝᵖ the degree-d moment matrix is the s(d) × s(d)
//! Gram matrix of the monomial basis under the empirical measure:
//!
//! ```text
//! M_d = (1/n) Σᵢ v_d(xᵢ) · v_d(xᵢ)ᵀ,      v_d(x) = (X^α(x))_{|α| ≤ d}
//! ```
//!
//! Entry (α, β) is the empirical mean of the single monomial X^(α+β), which
//! gives M_d its generalized Hankel structure: entries depend on α + β only.
//! The accumulator exploits that directly — each point is expanded once in
//! the degree-2d basis and every matrix cell pulls from that shared vector,
//! so cells with equal α + β stay *bitwise* identical no matter how many
//! points stream through.
//!
//! Sums are kept in two levels (a bounded running chunk plus a flushed
//! total) so roundoff grows like the number of chunks rather than the number
//! of points, while staying bitwise deterministic for a fixed feed order and
//! merge tree. Only the lower triangle is stored until [`finalize`]
//! mirrors it into a full [`MomentMatrix`].
//!
//! [`finalize`]: MomentAccumulator::finalize

use crate::basis::MonomialBasis;
use crate::error::{Error, Result};

/// Points per summation chunk before the running sums are flushed into the
/// long-term total.
const CHUNK_POINTS: usize = 65_536;

/// Packed lower-triangle index of (i, j) with i ≥ j.
#[inline]
fn tri(i: usize, j: usize) -> usize {
    debug_assert!(j <= i);
    i * (i + 1) / 2 + j
}

/// Streaming builder for empirical moment matrices.
pub struct MomentAccumulator {
    basis: MonomialBasis,
    /// Degree-2d basis: the shared expansion every matrix cell reads from.
    doubled: MonomialBasis,
    /// For each packed cell (i ≥ j): index of αᵢ + αⱼ in `doubled`.
    pair_index: Vec<u32>,
    /// Flushed sums (multiples of whole chunks), packed lower triangle.
    total: Vec<f64>,
    /// Running sums of the current chunk, packed lower triangle.
    chunk: Vec<f64>,
    chunk_points: usize,
    n: u64,
    scratch: Vec<f64>,
}

impl MomentAccumulator {
    /// Sets up an empty accumulator for p variables and degree d.
    ///
    /// Fails with [`Error::CapacityExceeded`] when s(d) or s(2d) is not
    /// addressable.
    pub fn new(p: usize, d: usize) -> Result<Self> {
        let basis = MonomialBasis::new(p, d)?;
        let doubled = MonomialBasis::new(p, 2 * d)?;
        let s = basis.len();
        let mut pair_index = Vec::with_capacity(s * (s + 1) / 2);
        for i in 0..s {
            for j in 0..=i {
                let sum = basis.exponent(i).sum(basis.exponent(j));
                let k = doubled
                    .index_of(&sum)
                    .expect("α + β has degree ≤ 2d whenever |α|, |β| ≤ d");
                pair_index.push(k as u32);
            }
        }
        let packed = pair_index.len();
        let scratch = vec![0.0; doubled.len()];
        Ok(MomentAccumulator {
            basis,
            doubled,
            pair_index,
            total: vec![0.0; packed],
            chunk: vec![0.0; packed],
            chunk_points: 0,
            n: 0,
            scratch,
        })
    }

    /// The degree-d basis the moment matrix is indexed by.
    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    /// Number of variables p.
    pub fn nvars(&self) -> usize {
        self.basis.nvars()
    }

    /// Degree d of the matrix (monomials up to 2d are tracked internally).
    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    /// Points accumulated so far.
    pub fn count(&self) -> u64 {
        self.n
    }

    /// Adds one point. Rejects wrong dimensions and non-finite coordinates
    /// without touching the accumulated state.
    pub fn accumulate(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.basis.nvars() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.nvars(),
                got: x.len(),
            });
        }
        for (index, &value) in x.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { index, value });
            }
        }
        self.doubled.eval_into(x, &mut self.scratch);
        for (cell, &k) in self.chunk.iter_mut().zip(&self.pair_index) {
            *cell += self.scratch[k as usize];
        }
        self.chunk_points += 1;
        self.n += 1;
        if self.chunk_points >= CHUNK_POINTS {
            self.flush();
        }
        Ok(())
    }

    fn flush(&mut self) {
        for (t, c) in self.total.iter_mut().zip(self.chunk.iter_mut()) {
            *t += *c;
            *c = 0.0;
        }
        self.chunk_points = 0;
    }

    /// Merges two accumulators over the same basis (map-reduce over shards).
    ///
    /// Merging is bitwise commutative; results are deterministic for a fixed
    /// merge tree.
    pub fn merge(mut self, mut other: MomentAccumulator) -> Result<MomentAccumulator> {
        if self.basis.nvars() != other.basis.nvars()
            || self.basis.degree() != other.basis.degree()
        {
            return Err(Error::BasisMismatch {
                left_p: self.basis.nvars(),
                left_d: self.basis.degree(),
                right_p: other.basis.nvars(),
                right_d: other.basis.degree(),
            });
        }
        self.flush();
        other.flush();
        for (t, o) in self.total.iter_mut().zip(&other.total) {
            *t += *o;
        }
        self.n += other.n;
        Ok(self)
    }

    /// Normalizes the sums into the moment matrix `M_d = S / n`.
    ///
    /// The accumulator stays usable; more points may follow.
    pub fn finalize(&self) -> Result<MomentMatrix> {
        if self.n == 0 {
            return Err(Error::EmptyMeasure);
        }
        let s = self.basis.len();
        let n = self.n as f64;
        let mut m = vec![0.0; s * s];
        for i in 0..s {
            for j in 0..=i {
                let value = (self.total[tri(i, j)] + self.chunk[tri(i, j)]) / n;
                m[i * s + j] = value;
                m[j * s + i] = value;
            }
        }
        Ok(MomentMatrix {
            basis: self.basis.clone(),
            m,
            n: self.n,
        })
    }

    /// Unnormalized sums Σᵢ v_d(xᵢ)v_d(xᵢ)ᵀ as a full symmetric matrix.
    pub(crate) fn raw_sum_full(&self) -> Vec<f64> {
        let s = self.basis.len();
        let mut m = vec![0.0; s * s];
        for i in 0..s {
            for j in 0..=i {
                let value = self.total[tri(i, j)] + self.chunk[tri(i, j)];
                m[i * s + j] = value;
                m[j * s + i] = value;
            }
        }
        m
    }
}

/// A finalized empirical moment matrix.
#[derive(Clone, Debug)]
pub struct MomentMatrix {
    basis: MonomialBasis,
    /// Full s × s row-major symmetric matrix.
    m: Vec<f64>,
    n: u64,
}

impl MomentMatrix {
    pub(crate) fn from_raw(basis: MonomialBasis, m: Vec<f64>, n: u64) -> Self {
        debug_assert_eq!(m.len(), basis.len() * basis.len());
        MomentMatrix { basis, m, n }
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    /// Side length s(d).
    pub fn size(&self) -> usize {
        self.basis.len()
    }

    /// Number of points the matrix averages over.
    pub fn count(&self) -> u64 {
        self.n
    }

    /// Entry (i, j) in basis order.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.m[i * self.basis.len() + j]
    }

    /// Row-major dense storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        let s = self.basis.len();
        (0..s).map(|i| self.m[i * s + i]).sum()
    }
}
