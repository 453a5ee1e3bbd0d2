//! Streaming scores via rank-1 inverse updates.
//!
//! Keeping the inverse of the *unnormalized* Gram sum
//! `S = ridge₀·I + Σᵢ v_d(xᵢ)·v_d(xᵢ)ᵀ` lets each arriving point update the
//! state in O(s²) by Sherman–Morrison:
//!
//! ```text
//! (S + v·vᵀ)⁻¹ = S⁻¹ − (S⁻¹v)(S⁻¹v)ᵀ / (1 + vᵀS⁻¹v)
//! ```
//!
//! and lets the score come out as `Q(x) ≈ n·v(x)ᵀ·S⁻¹·v(x)` with no
//! factorization in the loop. The ridge₀ seed makes the very first inserts
//! well-posed (before n ≥ s(d) the exact Gram sum is singular); it decays
//! relative to the data at rate 1/n, so scores converge to the batch model's
//! as the stream grows.
//!
//! Rank-1 updates accumulate roundoff, so every `cadence` inserts (512 by
//! default) the inverse is rebuilt exactly from the running moment sums the
//! state carries anyway. Those sums also make [`OnlineInverse::snapshot`]
//! exact: the snapshot model is bit-for-bit the batch fit of everything
//! inserted so far, not an approximation read off the drifting inverse.

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{ChristoffelModel, FitOptions};
use crate::moments::MomentAccumulator;

/// Rebuild the inverse from exact sums after this many rank-1 updates.
pub const DEFAULT_CADENCE: usize = 512;

/// Streaming Christoffel state.
pub struct OnlineInverse {
    acc: MomentAccumulator,
    /// Inverse of ridge₀·I + Σ v·vᵀ, full s×s, kept exactly symmetric.
    s_inv: Vec<f64>,
    ridge0: f64,
    cadence: usize,
    since_refactor: usize,
    v: Vec<f64>,
    w: Vec<f64>,
}

impl OnlineInverse {
    /// Fresh state for p variables, degree d, seeded with `ridge0 > 0`.
    pub fn new(p: usize, d: usize, ridge0: f64) -> Result<Self> {
        Self::with_cadence(p, d, ridge0, DEFAULT_CADENCE)
    }

    /// As [`new`](Self::new) with an explicit refactorization cadence.
    pub fn with_cadence(p: usize, d: usize, ridge0: f64, cadence: usize) -> Result<Self> {
        if !(ridge0.is_finite() && ridge0 > 0.0) {
            return Err(Error::InvalidParameter {
                name: "ridge0",
                reason: format!("the seed ridge must be finite and > 0, got {ridge0}"),
            });
        }
        if cadence == 0 {
            return Err(Error::InvalidParameter {
                name: "cadence",
                reason: "refactorization cadence must be at least 1".into(),
            });
        }
        let acc = MomentAccumulator::new(p, d)?;
        let s = acc.basis().len();
        let mut s_inv = vec![0.0; s * s];
        for i in 0..s {
            s_inv[i * s + i] = 1.0 / ridge0;
        }
        Ok(OnlineInverse {
            acc,
            s_inv,
            ridge0,
            cadence,
            since_refactor: 0,
            v: vec![0.0; s],
            w: vec![0.0; s],
        })
    }

    pub fn nvars(&self) -> usize {
        self.acc.nvars()
    }

    pub fn degree(&self) -> usize {
        self.acc.degree()
    }

    /// Points inserted so far.
    pub fn count(&self) -> u64 {
        self.acc.count()
    }

    pub fn ridge0(&self) -> f64 {
        self.ridge0
    }

    /// Inserts a point in O(s²). Invalid points are rejected with the state
    /// untouched.
    pub fn insert(&mut self, x: &[f64]) -> Result<()> {
        // Validates dimensions and finiteness; on error nothing changed.
        self.acc.accumulate(x)?;
        let s = self.acc.basis().len();
        self.acc.basis().eval_into(x, &mut self.v);
        linalg::matvec_into(&self.s_inv, s, &self.v, &mut self.w);
        let denom = 1.0 + linalg::dot(&self.v, &self.w);
        for i in 0..s {
            for j in 0..=i {
                let updated = self.s_inv[i * s + j] - self.w[i] * self.w[j] / denom;
                self.s_inv[i * s + j] = updated;
                self.s_inv[j * s + i] = updated;
            }
        }
        self.since_refactor += 1;
        if self.since_refactor >= self.cadence {
            self.refactor()?;
        }
        Ok(())
    }

    /// Q(x) from the current state: `n·v(x)ᵀ·S⁻¹·v(x)`.
    ///
    /// Undefined before the first insert ([`Error::EmptyMeasure`]): the seed
    /// ridge alone would yield an arbitrary huge score and silently mislabel
    /// "no data yet" as "extreme outlier".
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if self.acc.count() == 0 {
            return Err(Error::EmptyMeasure);
        }
        if x.len() != self.acc.nvars() {
            return Err(Error::DimensionMismatch {
                expected: self.acc.nvars(),
                got: x.len(),
            });
        }
        for (index, &value) in x.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { index, value });
            }
        }
        let s = self.acc.basis().len();
        let v = self.acc.basis().eval(x)?;
        Ok(self.acc.count() as f64 * linalg::quadform(&self.s_inv, s, &v))
    }

    /// Exact batch model of everything inserted so far, fitted from the
    /// running moment sums (no preconditioning, no ridge — degenerate
    /// streams fail with the usual diagnosis).
    pub fn snapshot(&self) -> Result<ChristoffelModel> {
        let moments = self.acc.finalize()?;
        ChristoffelModel::fit(
            moments,
            &FitOptions {
                ridge: 0.0,
                precondition: false,
            },
        )
    }

    /// Rebuilds S⁻¹ from the exact running sums, clearing accumulated
    /// rank-1 roundoff.
    fn refactor(&mut self) -> Result<()> {
        let s = self.acc.basis().len();
        let mut gram = self.acc.raw_sum_full();
        for i in 0..s {
            gram[i * s + i] += self.ridge0;
        }
        let (l, _) = linalg::cholesky_lower(&gram, s, 0.0).map_err(|(index, pivot)| {
            Error::CholeskyFailure {
                pivot,
                index,
                threshold: 0.0,
                degree: self.acc.degree(),
            }
        })?;
        let d = linalg::invert_lower(&l, s);
        self.s_inv = linalg::lower_t_times_lower(&d, s);
        self.since_refactor = 0;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, p: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..p).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect()
    }

    #[test]
    fn first_insert_matches_the_hand_computed_rank_one_update() {
        // Seed S⁻¹ = I/r; inserting the origin gives v = (1, 0) and the
        // Sherman–Morrison update collapses to diag(1/(r+1), 1/r).
        let r = 0.25;
        let mut state = OnlineInverse::new(1, 1, r).unwrap();
        state.insert(&[0.0]).unwrap();
        let expect = [1.0 / (r + 1.0), 0.0, 0.0, 1.0 / r];
        for (got, want) in state.s_inv.iter().zip(&expect) {
            assert!((got - want).abs() <= 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn inverse_tracks_the_dense_oracle_between_refactorizations() {
        let points = cloud(50, 2, 5);
        // Cadence far beyond the stream: pure rank-1 updates throughout.
        let mut state = OnlineInverse::with_cadence(2, 2, 1e-3, usize::MAX).unwrap();
        let s = state.acc.basis().len();
        let basis = state.acc.basis().clone();
        let mut gram = nalgebra::DMatrix::<f64>::identity(s, s) * 1e-3;
        for x in &points {
            state.insert(x).unwrap();
            let v = nalgebra::DVector::from_column_slice(&basis.eval(x).unwrap());
            gram += &v * v.transpose();
        }
        let oracle = gram.try_inverse().unwrap();
        for i in 0..s {
            for j in 0..s {
                let got = state.s_inv[i * s + j];
                let want = oracle[(i, j)];
                assert!(
                    (got - want).abs() <= 1e-10 * want.abs().max(1.0),
                    "S⁻¹[{i},{j}] = {got} vs oracle {want}"
                );
            }
        }
    }

    #[test]
    fn online_scores_converge_to_the_batch_model() {
        let points = cloud(300, 2, 9);
        let mut state = OnlineInverse::new(2, 3, 1e-8).unwrap();
        for x in &points {
            state.insert(x).unwrap();
        }
        let batch = ChristoffelModel::fit_points(
            &points,
            3,
            &FitOptions {
                ridge: 0.0,
                precondition: false,
            },
        )
        .unwrap();
        for x in points.iter().take(60) {
            let online = state.score(x).unwrap();
            let exact = batch.score(x).unwrap();
            assert!(
                (online - exact).abs() <= 1e-6 * exact,
                "online {online} vs batch {exact}"
            );
        }
    }

    #[test]
    fn frequent_refactorization_does_not_change_scores_materially() {
        let points = cloud(200, 2, 13);
        let mut eager = OnlineInverse::with_cadence(2, 2, 1e-6, 16).unwrap();
        let mut lazy = OnlineInverse::with_cadence(2, 2, 1e-6, usize::MAX).unwrap();
        for x in &points {
            eager.insert(x).unwrap();
            lazy.insert(x).unwrap();
        }
        for x in points.iter().take(40) {
            let a = eager.score(x).unwrap();
            let b = lazy.score(x).unwrap();
            assert!((a - b).abs() <= 1e-9 * a.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn identical_streams_give_bitwise_identical_scores() {
        let points = cloud(100, 2, 17);
        let mut a = OnlineInverse::new(2, 2, 1e-8).unwrap();
        let mut b = OnlineInverse::new(2, 2, 1e-8).unwrap();
        for x in &points {
            a.insert(x).unwrap();
            b.insert(x).unwrap();
        }
        let probe = [0.3, -1.2];
        assert_eq!(
            a.score(&probe).unwrap().to_bits(),
            b.score(&probe).unwrap().to_bits()
        );
    }

    #[test]
    fn larger_seed_ridge_never_increases_a_score() {
        let points = cloud(40, 2, 21);
        let mut small = OnlineInverse::new(2, 2, 1e-4).unwrap();
        let mut large = OnlineInverse::new(2, 2, 1e-2).unwrap();
        for x in &points {
            small.insert(x).unwrap();
            large.insert(x).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..50 {
            let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let qs = small.score(&x).unwrap();
            let ql = large.score(&x).unwrap();
            assert!(
                ql <= qs * (1.0 + 1e-12),
                "ridge₀ 1e-2 score {ql} exceeded ridge₀ 1e-4 score {qs}"
            );
        }
    }

    #[test]
    fn snapshot_is_bitwise_the_batch_fit() {
        let points = cloud(200, 2, 25);
        let mut state = OnlineInverse::new(2, 3, 1e-8).unwrap();
        for x in &points {
            state.insert(x).unwrap();
        }
        let snapshot = state.snapshot().unwrap();
        let batch = ChristoffelModel::fit_points(
            &points,
            3,
            &FitOptions {
                ridge: 0.0,
                precondition: false,
            },
        )
        .unwrap();
        for x in points.iter().take(30) {
            assert_eq!(
                snapshot.score(x).unwrap().to_bits(),
                batch.score(x).unwrap().to_bits()
            );
        }
        assert_eq!(snapshot.count(), 200);
    }

    #[test]
    fn scoring_the_empty_state_is_an_error() {
        let state = OnlineInverse::new(2, 1, 1e-8).unwrap();
        assert!(matches!(state.score(&[0.0, 0.0]), Err(Error::EmptyMeasure)));
    }

    #[test]
    fn seed_ridge_must_be_positive() {
        for bad in [0.0, -1.0, f64::NAN] {
            assert!(matches!(
                OnlineInverse::new(2, 1, bad),
                Err(Error::InvalidParameter { name: "ridge0", .. })
            ));
        }
        assert!(matches!(
            OnlineInverse::with_cadence(2, 1, 1e-8, 0),
            Err(Error::InvalidParameter { name: "cadence", .. })
        ));
    }

    #[test]
    fn rejected_inserts_leave_the_state_untouched() {
        let mut state = OnlineInverse::new(2, 1, 1e-8).unwrap();
        state.insert(&[1.0, 2.0]).unwrap();
        let before = state.score(&[0.5, 0.5]).unwrap();
        assert!(state.insert(&[1.0]).is_err());
        assert!(state.insert(&[f64::NAN, 0.0]).is_err());
        assert_eq!(state.count(), 1);
        assert_eq!(
            state.score(&[0.5, 0.5]).unwrap().to_bits(),
            before.to_bits()
        );
    }
}
