//! Multivariate monomial bases in graded lexicographic order.
//!
//! The degree-d basis in p variables collects every monomial
//! `X^α = X₁^α₁ ⋯ Xₚ^αₚ` with `|α| = α₁ + ⋯ + αₚ ≤ d`, ordered by total
//! degree first and, within a degree block, with larger leading exponents
//! first. For p = 2, d = 3 the order is:
//!
//! ```text
//! 1, X₁, X₂, X₁², X₁X₂, X₂², X₁³, X₁²X₂, X₁X₂², X₂³
//! ```
//!
//! The basis size is `s(d) = C(p + d, d)`. Everything downstream — moment
//! matrices, Cholesky factors, persisted models — indexes into this order,
//! so it is fixed once and for all here (`graded_lex_v1` in model files).
//!
//! Evaluation walks a precomputed parent table: each monomial is one
//! multiplication away from a lower-degree one (`X^α = X^(α−e_j) · X_j`), so
//! evaluating the whole basis costs exactly s(d) − 1 multiplications and
//! reuses every partial product. Besides speed this buys determinism: the
//! same point always produces bitwise-identical basis vectors.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

/// Largest basis we are willing to address (parent-table indices are u32).
const MAX_BASIS: usize = u32::MAX as usize;

/// A monomial exponent tuple `α = (α₁, …, αₚ)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Exponent {
    exps: Vec<u32>,
}

impl Exponent {
    pub fn new(exps: Vec<u32>) -> Self {
        Exponent { exps }
    }

    /// Number of variables p.
    pub fn nvars(&self) -> usize {
        self.exps.len()
    }

    /// Total degree |α|.
    pub fn degree(&self) -> u32 {
        self.exps.iter().sum()
    }

    /// The raw exponent tuple.
    pub fn exponents(&self) -> &[u32] {
        &self.exps
    }

    /// Entrywise sum α + β, as needed for products of monomials.
    ///
    /// # Panics
    /// If the two tuples have different lengths.
    pub fn sum(&self, other: &Exponent) -> Exponent {
        assert_eq!(
            self.exps.len(),
            other.exps.len(),
            "exponent tuples must have the same number of variables"
        );
        Exponent {
            exps: self
                .exps
                .iter()
                .zip(&other.exps)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Graded lexicographic comparison: lower total degree first; within a
    /// degree block, the tuple with the larger leading exponent first.
    /// `Ordering::Less` means `self` comes earlier in the basis.
    ///
    /// # Panics
    /// If the two tuples have different lengths.
    pub fn graded_lex_cmp(&self, other: &Exponent) -> Ordering {
        assert_eq!(
            self.exps.len(),
            other.exps.len(),
            "cannot order exponent tuples over different variable counts"
        );
        match self.degree().cmp(&other.degree()) {
            Ordering::Equal => {}
            ord => return ord,
        }
        for (a, b) in self.exps.iter().zip(&other.exps) {
            match b.cmp(a) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        Ordering::Equal
    }
}

impl fmt::Display for Exponent {
    /// Renders `(2,1,0)` as `X1^2·X2`; the zero tuple renders as `1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.degree() == 0 {
            return write!(f, "1");
        }
        let mut first = true;
        for (j, &e) in self.exps.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "·")?;
            }
            first = false;
            if e == 1 {
                write!(f, "X{}", j + 1)?;
            } else {
                write!(f, "X{}^{}", j + 1, e)?;
            }
        }
        Ok(())
    }
}

/// Number of monomials in p variables of degree ≤ d: `C(p + d, d)`.
///
/// Errors with [`Error::CapacityExceeded`] instead of overflowing when the
/// count does not fit the addressable range.
pub fn basis_size(p: usize, d: usize) -> Result<usize> {
    let cap = Err(Error::CapacityExceeded { p, d, max: MAX_BASIS });
    let mut c: u128 = 1;
    for i in 1..=d as u128 {
        c = match c.checked_mul(p as u128 + i) {
            Some(v) => v / i, // exact: C(p+i, i) = C(p+i−1, i−1)·(p+i)/i
            None => return cap,
        };
        if c > MAX_BASIS as u128 {
            return cap;
        }
    }
    Ok(c as usize)
}

/// The full degree-≤ d monomial basis in p variables, graded lex order.
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    p: usize,
    d: usize,
    exponents: Vec<Exponent>,
    /// For each index i ≥ 1: (index of α − e_j, j) where j is the first
    /// variable with a positive exponent. Entry 0 is unused.
    parents: Vec<(u32, u32)>,
}

impl MonomialBasis {
    /// Enumerates the basis for `p ≥ 1` variables up to total degree `d`.
    pub fn new(p: usize, d: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParameter {
                name: "p",
                reason: "the basis needs at least one variable".into(),
            });
        }
        let size = basis_size(p, d)?;
        let mut exponents = Vec::with_capacity(size);
        let mut prefix = Vec::with_capacity(p);
        for k in 0..=d as u32 {
            fill_degree_block(p, k, &mut prefix, &mut exponents);
        }
        debug_assert_eq!(exponents.len(), size);

        // Parent table: each monomial divided by its first active variable.
        let mut parents = vec![(0u32, 0u32); size];
        for i in 1..size {
            let alpha = &exponents[i];
            let j = alpha
                .exps
                .iter()
                .position(|&e| e > 0)
                .expect("non-constant monomial has a positive exponent");
            let mut beta = alpha.clone();
            beta.exps[j] -= 1;
            let parent = exponents
                .binary_search_by(|probe| probe.graded_lex_cmp(&beta))
                .expect("α − e_j is in the basis whenever α is");
            parents[i] = (parent as u32, j as u32);
        }

        Ok(MonomialBasis { p, d, exponents, parents })
    }

    /// Number of variables p.
    pub fn nvars(&self) -> usize {
        self.p
    }

    /// Maximum total degree d.
    pub fn degree(&self) -> usize {
        self.d
    }

    /// Basis size s(d) = C(p + d, d).
    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    /// The exponent tuples in basis order.
    pub fn exponents(&self) -> &[Exponent] {
        &self.exponents
    }

    /// The i-th exponent tuple.
    pub fn exponent(&self, i: usize) -> &Exponent {
        &self.exponents[i]
    }

    /// Position of α in the basis, or `None` when α has the wrong variable
    /// count or degree > d.
    pub fn index_of(&self, alpha: &Exponent) -> Option<usize> {
        if alpha.nvars() != self.p || alpha.degree() as usize > self.d {
            return None;
        }
        self.exponents
            .binary_search_by(|probe| probe.graded_lex_cmp(alpha))
            .ok()
    }

    /// Evaluates every basis monomial at `x`, returning the vector
    /// `v_d(x) = (X^α(x))_α` in basis order.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: x.len(),
            });
        }
        let mut out = vec![0.0; self.exponents.len()];
        self.eval_into(x, &mut out);
        Ok(out)
    }

    /// Allocation-free variant of [`eval`](Self::eval) for hot loops.
    ///
    /// # Panics
    /// If `x.len() != nvars()` or `out.len() != len()`.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.p, "point has wrong dimension");
        assert_eq!(out.len(), self.exponents.len(), "output buffer has wrong length");
        out[0] = 1.0;
        for i in 1..out.len() {
            let (parent, var) = self.parents[i];
            out[i] = out[parent as usize] * x[var as usize];
        }
    }
}

/// Appends all |α| = k tuples over `p` variables in descending lex order.
fn fill_degree_block(p: usize, k: u32, prefix: &mut Vec<u32>, out: &mut Vec<Exponent>) {
    if p == 1 {
        prefix.push(k);
        out.push(Exponent::new(prefix.clone()));
        prefix.pop();
        return;
    }
    for lead in (0..=k).rev() {
        prefix.push(lead);
        fill_degree_block(p - 1, k - lead, prefix, out);
        prefix.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn e(exps: &[u32]) -> Exponent {
        Exponent::new(exps.to_vec())
    }

    #[test]
    fn planar_cubic_basis_matches_published_order() {
        let basis = MonomialBasis::new(2, 3).unwrap();
        let expect: Vec<Exponent> = [
            [0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2], [3, 0], [2, 1], [1, 2], [0, 3],
        ]
        .iter()
        .map(|t| e(t))
        .collect();
        assert_eq!(basis.exponents(), expect.as_slice());
    }

    #[test]
    fn size_formula_matches_brute_force_count() {
        // Independent count: triple loop over (a, b, c) with a + b + c ≤ 4.
        let mut count = 0usize;
        for a in 0..=4 {
            for b in 0..=4 {
                for c in 0..=4 {
                    if a + b + c <= 4 {
                        count += 1;
                    }
                }
            }
        }
        assert_eq!(count, 35);
        assert_eq!(basis_size(3, 4).unwrap(), 35);
        assert_eq!(MonomialBasis::new(3, 4).unwrap().len(), 35);
    }

    #[test]
    fn size_is_strictly_monotone_in_degree() {
        for p in 1..=4 {
            for d in 0..=5 {
                assert!(basis_size(p, d).unwrap() < basis_size(p, d + 1).unwrap());
            }
        }
    }

    #[test]
    fn degree_zero_basis_is_the_constant() {
        let basis = MonomialBasis::new(1, 0).unwrap();
        assert_eq!(basis.exponents(), &[e(&[0])]);
        assert_eq!(basis.eval(&[3.7]).unwrap(), vec![1.0]);
    }

    #[test]
    fn capacity_overflow_is_an_error_not_a_panic() {
        match basis_size(60, 60) {
            Err(Error::CapacityExceeded { .. }) => {}
            other => panic!("expected CapacityExceeded, got {other:?}"),
        }
    }

    #[test]
    fn univariate_eval_is_the_power_sequence() {
        let basis = MonomialBasis::new(1, 3).unwrap();
        assert_eq!(basis.eval(&[-1.0]).unwrap(), vec![1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn planar_eval_matches_hand_products() {
        let basis = MonomialBasis::new(2, 2).unwrap();
        assert_eq!(
            basis.eval(&[2.0, 3.0]).unwrap(),
            vec![1.0, 2.0, 3.0, 4.0, 6.0, 9.0]
        );
    }

    #[test]
    fn eval_matches_naive_powers_on_random_points() {
        // Oracle: straightforward powf-free pow products, no shared partials.
        let basis = MonomialBasis::new(3, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rand::Rng::random_range(&mut rng, -2.0..2.0)).collect();
            let fast = basis.eval(&x).unwrap();
            for (i, alpha) in basis.exponents().iter().enumerate() {
                let mut direct = 1.0;
                for (j, &a) in alpha.exponents().iter().enumerate() {
                    direct *= x[j].powi(a as i32);
                }
                let tol = 1e-12 * direct.abs().max(1.0);
                assert!(
                    (fast[i] - direct).abs() <= tol,
                    "monomial {alpha} at {x:?}: {} vs {direct}",
                    fast[i]
                );
            }
        }
    }

    #[test]
    fn eval_rejects_wrong_dimension() {
        let basis = MonomialBasis::new(2, 2).unwrap();
        match basis.eval(&[1.0]) {
            Err(Error::DimensionMismatch { expected: 2, got: 1 }) => {}
            other => panic!("expected DimensionMismatch, got {other:?}"),
        }
    }

    #[test]
    fn product_of_monomials_lands_at_the_summed_exponent() {
        let basis = MonomialBasis::new(2, 2).unwrap();
        let doubled = MonomialBasis::new(2, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let x: Vec<f64> = (0..2).map(|_| rand::Rng::random_range(&mut rng, -3.0..3.0)).collect();
            let v = basis.eval(&x).unwrap();
            let v2 = doubled.eval(&x).unwrap();
            for i in 0..basis.len() {
                for j in 0..basis.len() {
                    let sum = basis.exponent(i).sum(basis.exponent(j));
                    let k = doubled.index_of(&sum).unwrap();
                    let prod = v[i] * v[j];
                    let tol = 1e-12 * prod.abs().max(1.0);
                    assert!(
                        (prod - v2[k]).abs() <= tol,
                        "X^{:?}·X^{:?} mismatch",
                        basis.exponent(i),
                        basis.exponent(j)
                    );
                }
            }
        }
    }

    #[test]
    fn index_of_finds_every_member_and_rejects_outsiders() {
        let basis = MonomialBasis::new(2, 3).unwrap();
        for (i, alpha) in basis.exponents().iter().enumerate() {
            assert_eq!(basis.index_of(alpha), Some(i));
        }
        assert_eq!(basis.index_of(&e(&[1, 1])), Some(4));
        assert_eq!(basis.index_of(&e(&[4, 0])), None, "degree too high");
        assert_eq!(basis.index_of(&e(&[1, 1, 0])), None, "wrong variable count");
    }

    #[test]
    fn comparator_orders_the_quadratic_block_by_descending_lead() {
        assert_eq!(e(&[2, 0]).graded_lex_cmp(&e(&[1, 1])), std::cmp::Ordering::Less);
        assert_eq!(e(&[1, 1]).graded_lex_cmp(&e(&[0, 2])), std::cmp::Ordering::Less);
        assert_eq!(e(&[0, 2]).graded_lex_cmp(&e(&[3, 0])), std::cmp::Ordering::Less);
        assert_eq!(e(&[1, 2]).graded_lex_cmp(&e(&[1, 2])), std::cmp::Ordering::Equal);
    }

    #[test]
    fn display_renders_compact_monomials() {
        assert_eq!(e(&[0, 0]).to_string(), "1");
        assert_eq!(e(&[2, 1]).to_string(), "X1^2·X2");
        assert_eq!(e(&[0, 1, 3]).to_string(), "X2·X3^3");
    }

    proptest! {
        /// Shuffling the enumerated basis and re-sorting with the comparator
        /// must reproduce the enumeration exactly: the comparator and the
        /// enumerator define the same order.
        #[test]
        fn sorting_reproduces_enumeration(p in 1usize..=4, d in 0usize..=6, seed in 0u64..1000) {
            let basis = MonomialBasis::new(p, d).unwrap();
            let mut shuffled = basis.exponents().to_vec();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            shuffled.shuffle(&mut rng);
            shuffled.sort_by(|a, b| a.graded_lex_cmp(b));
            prop_assert_eq!(shuffled.as_slice(), basis.exponents());
        }

        /// s(d) matches an independent recurrence: s(p, d) = s(p−1, d) + s(p, d−1).
        #[test]
        fn size_matches_pascal_recurrence(p in 1usize..=6, d in 1usize..=8) {
            let lhs = basis_size(p, d).unwrap();
            let a = if p > 1 { basis_size(p - 1, d).unwrap() } else { 1 };
            let b = basis_size(p, d - 1).unwrap();
            prop_assert_eq!(lhs, a + b);
        }
    }
}
