//! The fitted Christoffel score: Q(x) = v_d(x)ᵀ M_d⁻¹ v_d(x).
//!
//! Fitting factors the (optionally ridge-regularized) empirical moment
//! matrix as M = L·Lᵀ and keeps D = L⁻¹. The rows of D are the coefficients
//! of polynomials P₁, …, P_s that are *orthonormal* under the empirical
//! measure, and the score evaluates as a plain sum of squares:
//!
//! ```text
//! Q(x) = ‖D·v_d(x)‖²  =  Σ_α P_α(x)²
//! ```
//!
//! No explicit matrix inverse is ever formed. Three consequences worth
//! remembering:
//!
//! * **Mean-score identity.** Averaged over the training points,
//!   Q equals s(d), the basis size. That gives the natural outlier
//!   threshold: points with Q(x) ≫ s(d) are far outside the cloud.
//! * **Floor at one.** P₁ ≡ 1, so Q ≥ 1 everywhere, with equality only in
//!   the infinite-data Gaussian-center limit.
//! * **Affine invariance.** Replacing the data by Ax + b (A invertible)
//!   leaves Q unchanged: Q'(Ax + b) = Q(x). Internally this licenses the
//!   default preconditioning — standardize each coordinate, fit, and the
//!   scores are those of the raw data but with a far better conditioned
//!   moment matrix.
//!
//! Degree-1 models are exactly the Mahalanobis distance
//! (Q = 1 + (x−μ̄)ᵀV⁻¹(x−μ̄), see [`ChristoffelModel::mahalanobis_view`]);
//! higher degrees follow level sets of non-ellipsoidal clouds.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::basis::MonomialBasis;
use crate::error::{Error, Result};
use crate::linalg;
use crate::moments::{MomentAccumulator, MomentMatrix};

/// Relative pivot threshold: with no ridge, a Cholesky pivot at or below
/// `1e-12 · trace(M)/s(d)` is treated as numerically singular.
const PIVOT_RELATIVE_FLOOR: f64 = 1e-12;

/// Affine change of coordinates `x ↦ A·x + b` (A row-major, p×p).
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl AffineMap {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let p = b.len();
        if a.len() != p * p {
            return Err(Error::DimensionMismatch {
                expected: p * p,
                got: a.len(),
            });
        }
        Ok(AffineMap { a, b })
    }

    pub fn identity(p: usize) -> Self {
        let mut a = vec![0.0; p * p];
        for i in 0..p {
            a[i * p + i] = 1.0;
        }
        AffineMap { a, b: vec![0.0; p] }
    }

    /// Diagonal standardization `x ↦ (x − mean)/scale`, coordinatewise.
    pub fn standardize(mean: &[f64], scale: &[f64]) -> Self {
        let p = mean.len();
        debug_assert_eq!(scale.len(), p);
        let mut a = vec![0.0; p * p];
        let mut b = vec![0.0; p];
        for j in 0..p {
            a[j * p + j] = 1.0 / scale[j];
            b[j] = -mean[j] / scale[j];
        }
        AffineMap { a, b }
    }

    pub fn nvars(&self) -> usize {
        self.b.len()
    }

    /// Row-major p×p linear part.
    pub fn linear(&self) -> &[f64] {
        &self.a
    }

    /// Translation part.
    pub fn offset(&self) -> &[f64] {
        &self.b
    }

    pub fn is_identity(&self) -> bool {
        let p = self.b.len();
        self.b.iter().all(|&v| v == 0.0)
            && (0..p).all(|i| {
                (0..p).all(|j| self.a[i * p + j] == if i == j { 1.0 } else { 0.0 })
            })
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let p = self.b.len();
        debug_assert_eq!(x.len(), p);
        debug_assert_eq!(out.len(), p);
        for ((o, row), bi) in out.iter_mut().zip(self.a.chunks_exact(p)).zip(&self.b) {
            let mut sum = 0.0;
            for (aij, xj) in row.iter().zip(x) {
                sum += aij * xj;
            }
            *o = sum + bi;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.b.len()];
        self.apply_into(x, &mut out);
        out
    }
}

/// Fitting knobs.
#[derive(Clone, Debug)]
pub struct FitOptions {
    /// Ridge added to the moment-matrix diagonal before factoring.
    /// Zero (the default) keeps the exact empirical matrix and lets the
    /// pivot check reject degenerate data.
    pub ridge: f64,
    /// Standardize coordinates before accumulating moments (default true).
    /// Scores are affine-invariant, so this changes conditioning, not
    /// results.
    pub precondition: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            ridge: 0.0,
            precondition: true,
        }
    }
}

impl FitOptions {
    fn validate(&self) -> Result<()> {
        if !self.ridge.is_finite() || self.ridge < 0.0 {
            return Err(Error::InvalidParameter {
                name: "ridge",
                reason: format!("must be finite and >= 0, got {}", self.ridge),
            });
        }
        Ok(())
    }
}

/// Degree-1 reading of the score: mean and precision (inverse covariance)
/// in the *original* coordinates, so that Q(x) = 1 + (x−mean)ᵀ·precision·(x−mean).
#[derive(Clone, Debug)]
pub struct MahalanobisView {
    pub mean: Vec<f64>,
    /// Row-major p×p inverse covariance.
    pub precision: Vec<f64>,
}

/// The variational optimum of the score at a target point (the polynomial
/// that is 1 at the target with the least empirical mean square).
#[derive(Clone, Debug)]
pub struct Minimizer {
    /// Monomial coefficients in basis order, *in the model's preconditioned
    /// coordinates* — evaluate with [`ChristoffelModel::evaluate_polynomial`].
    pub coefficients: Vec<f64>,
    /// The minimal empirical mean square, equal to 1/Q(target).
    pub attained_value: f64,
    /// Q at the target point.
    pub score_at_target: f64,
}

/// Markov inequality applied to the minimizer at a target point.
#[derive(Clone, Debug)]
pub struct MarkovBound {
    /// Certified lower bound 1 − 1/Q(target) on the sublevel-set mass.
    pub bound: f64,
    /// Fraction of the supplied points with P*(x)² ≤ 1.
    pub empirical_mass: f64,
}

/// KKT certificate that D's rows solve the determinant-maximizing
/// orthonormalization problem; see [`ChristoffelModel::variational_certificate`].
#[derive(Clone, Debug)]
pub struct Certificate {
    /// Geometric-mean normalizer λ = (∏_α p_αα)^(−2/s).
    pub lambda: f64,
    /// Multipliers λ_α = √λ / p_αα of the active leading-coefficient bounds.
    pub lambda_diag: Vec<f64>,
    /// Multipliers λ_αβ (β after α) of the sparsity constraints:
    /// `off_diagonal[α]` holds (λ_αβ) for β = α+1, …, s−1.
    pub off_diagonal: Vec<Vec<f64>>,
    /// Log leading coefficients θ*_α = log(√λ·p_αα); they sum to zero.
    pub theta: Vec<f64>,
    /// Optimal objective ½·s(d)·λ.
    pub objective: f64,
    /// Σ_α θ*_α (zero up to roundoff).
    pub theta_sum: f64,
    /// Worst stationarity violation max_α ‖M·q*_α − λ_α·e_α − Σ_β λ_αβ·e_β‖.
    pub max_stationarity_residual: f64,
    /// Worst relative gap between the leading coefficients q*_αα and
    /// exp(θ*_α); the inequality constraints are active, so this is
    /// roundoff-sized.
    pub max_activeness_gap: f64,
}

/// Rectangular grid of Q values for plotting level sets of planar models.
#[derive(Clone, Debug)]
pub struct LevelsetGrid {
    /// Grid abscissae (length nx, inclusive of both box edges).
    pub xs: Vec<f64>,
    /// Grid ordinates (length ny).
    pub ys: Vec<f64>,
    /// Q values, row-major by y: `values[iy * nx + ix]`.
    pub values: Vec<f64>,
    /// The natural contour level s(d) (the training mean of Q).
    pub threshold: f64,
}

impl LevelsetGrid {
    /// Writes the grid as CSV: a `# threshold=` comment line, an `x,y,q`
    /// header, then one sample per row in row-major order (y outer).
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut out = io::BufWriter::new(fs::File::create(path)?);
        writeln!(out, "# threshold={}", self.threshold)?;
        writeln!(out, "x,y,q")?;
        let nx = self.xs.len();
        for (iy, &y) in self.ys.iter().enumerate() {
            for (ix, &x) in self.xs.iter().enumerate() {
                writeln!(out, "{},{},{}", x, y, self.values[iy * nx + ix])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// A fitted inverse-moment-matrix score.
#[derive(Clone, Debug)]
pub struct ChristoffelModel {
    basis: MonomialBasis,
    /// Moments of the preconditioned data (reconstructed from the factor
    /// when the model was loaded from a file).
    moments: MomentMatrix,
    /// Lower Cholesky factor L of M + ridge·I.
    chol: Vec<f64>,
    /// D = L⁻¹; row α holds the coefficients of the orthonormal P_α.
    ortho: Vec<f64>,
    /// Coordinate change applied to inputs before basis evaluation.
    map: AffineMap,
    ridge: f64,
    min_pivot: f64,
}

impl ChristoffelModel {
    /// Fits from a prebuilt moment matrix.
    ///
    /// With `precondition` set (and d ≥ 1) the matrix is first pushed
    /// through the coordinatewise standardization derived from its own
    /// first and second moments; the fitted scores refer to the original
    /// coordinates either way.
    pub fn fit(moments: MomentMatrix, opts: &FitOptions) -> Result<Self> {
        opts.validate()?;
        if opts.precondition && moments.basis().degree() >= 1 {
            let (map, change) = standardization_from_moments(&moments);
            let s = moments.size();
            let cm = linalg::matmul(&change, moments.as_slice(), s);
            let transformed = linalg::matmul_abt(&cm, &change, s);
            let preconditioned =
                MomentMatrix::from_raw(moments.basis().clone(), transformed, moments.count());
            Self::from_preconditioned(preconditioned, map, opts)
        } else {
            let p = moments.basis().nvars();
            Self::from_preconditioned(moments, AffineMap::identity(p), opts)
        }
    }

    /// Fits directly from points: standardize (by default), accumulate
    /// moments, factor. This is the best-conditioned path and the one the
    /// CLI uses.
    pub fn fit_points(points: &[Vec<f64>], d: usize, opts: &FitOptions) -> Result<Self> {
        opts.validate()?;
        if points.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        let p = points[0].len();
        let map = if opts.precondition && d >= 1 {
            standardization_from_points(points, p)?
        } else {
            AffineMap::identity(p)
        };
        let mut acc = MomentAccumulator::new(p, d)?;
        let mut mapped = vec![0.0; p];
        for x in points {
            if x.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: x.len(),
                });
            }
            for (index, &value) in x.iter().enumerate() {
                if !value.is_finite() {
                    return Err(Error::NonFinite { index, value });
                }
            }
            map.apply_into(x, &mut mapped);
            acc.accumulate(&mapped)?;
        }
        let moments = acc.finalize()?;
        Self::from_preconditioned(moments, map, opts)
    }

    fn from_preconditioned(
        moments: MomentMatrix,
        map: AffineMap,
        opts: &FitOptions,
    ) -> Result<Self> {
        let s = moments.size();
        let floor = if opts.ridge == 0.0 {
            PIVOT_RELATIVE_FLOOR * moments.trace() / s as f64
        } else {
            0.0
        };
        let mut target = moments.as_slice().to_vec();
        for i in 0..s {
            target[i * s + i] += opts.ridge;
        }
        let (chol, min_pivot) =
            linalg::cholesky_lower(&target, s, floor).map_err(|(index, pivot)| {
                Error::CholeskyFailure {
                    pivot,
                    index,
                    threshold: floor,
                    degree: moments.basis().degree(),
                }
            })?;
        let ortho = linalg::invert_lower(&chol, s);
        Ok(ChristoffelModel {
            basis: moments.basis().clone(),
            moments,
            chol,
            ortho,
            map,
            ridge: opts.ridge,
            min_pivot,
        })
    }

    // =========================================================================
    // Accessors
    // =========================================================================

    pub fn nvars(&self) -> usize {
        self.basis.nvars()
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    /// Number of training points behind the moment matrix.
    pub fn count(&self) -> u64 {
        self.moments.count()
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Smallest Cholesky pivot met while factoring (conditioning diagnostic).
    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    /// Moment matrix of the preconditioned data.
    pub fn moments(&self) -> &MomentMatrix {
        &self.moments
    }

    /// The input-side coordinate change (identity when fitted without
    /// preconditioning).
    pub fn precondition_map(&self) -> &AffineMap {
        &self.map
    }

    /// D = L⁻¹ as a full row-major s×s matrix (zero above the diagonal).
    /// Row α holds the monomial coefficients of the α-th orthonormal
    /// polynomial in the preconditioned coordinates.
    pub fn orthonormal_coefficients(&self) -> &[f64] {
        &self.ortho
    }

    /// Lower Cholesky factor of M + ridge·I.
    pub fn cholesky_factor(&self) -> &[f64] {
        &self.chol
    }

    /// The natural outlier threshold s(d): the training mean of the score.
    pub fn threshold(&self) -> f64 {
        self.basis.len() as f64
    }

    // =========================================================================
    // Scoring
    // =========================================================================

    fn check_point(&self, x: &[f64]) -> Result<()> {
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
        Ok(())
    }

    #[inline]
    fn score_buffers(
        &self,
        x: &[f64],
        mapped: &mut [f64],
        v: &mut [f64],
        u: &mut [f64],
    ) -> f64 {
        self.map.apply_into(x, mapped);
        self.basis.eval_into(mapped, v);
        linalg::lower_matvec_into(&self.ortho, self.basis.len(), v, u);
        u.iter().map(|ui| ui * ui).sum()
    }

    /// Q(x) = Σ_α P_α(x)².
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let s = self.basis.len();
        let mut mapped = vec![0.0; self.basis.nvars()];
        let mut v = vec![0.0; s];
        let mut u = vec![0.0; s];
        Ok(self.score_buffers(x, &mut mapped, &mut v, &mut u))
    }

    /// Scores many points, reusing buffers. Each result is bitwise equal to
    /// the corresponding [`score`](Self::score) call.
    pub fn score_batch(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        let s = self.basis.len();
        let mut mapped = vec![0.0; self.basis.nvars()];
        let mut v = vec![0.0; s];
        let mut u = vec![0.0; s];
        let mut out = Vec::with_capacity(points.len());
        for x in points {
            self.check_point(x)?;
            out.push(self.score_buffers(x, &mut mapped, &mut v, &mut u));
        }
        Ok(out)
    }

    /// The orthonormal evaluations (P₁(x), …, P_s(x)); the score is their
    /// sum of squares.
    pub fn orthonormal_eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let s = self.basis.len();
        let mut mapped = vec![0.0; self.basis.nvars()];
        let mut v = vec![0.0; s];
        let mut u = vec![0.0; s];
        self.map.apply_into(x, &mut mapped);
        self.basis.eval_into(&mapped, &mut v);
        linalg::lower_matvec_into(&self.ortho, s, &v, &mut u);
        Ok(u)
    }

    /// Evaluates a polynomial given by monomial coefficients *in the model's
    /// preconditioned coordinates* (as produced by
    /// [`christoffel_minimizer`](Self::christoffel_minimizer)) at a point in
    /// the original coordinates.
    pub fn evaluate_polynomial(&self, coefficients: &[f64], x: &[f64]) -> Result<f64> {
        if coefficients.len() != self.basis.len() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.len(),
                got: coefficients.len(),
            });
        }
        self.check_point(x)?;
        let mapped = self.map.apply(x);
        let v = self.basis.eval(&mapped)?;
        Ok(linalg::dot(coefficients, &v))
    }

    // =========================================================================
    // Interpretations and guarantees
    // =========================================================================

    /// For degree-1 models, the score is exactly the Mahalanobis distance:
    /// Q(x) = 1 + (x − mean)ᵀ·precision·(x − mean), with `mean` and
    /// `precision` expressed in the original coordinates.
    pub fn mahalanobis_view(&self) -> Result<MahalanobisView> {
        if self.basis.degree() != 1 {
            return Err(Error::NotDegreeOne {
                d: self.basis.degree(),
            });
        }
        let p = self.basis.nvars();
        let s = self.basis.len(); // = p + 1
        let inv = linalg::lower_t_times_lower(&self.ortho, s);
        // Lower-right p×p block of M⁻¹ is the precision of the
        // preconditioned data; the first moment row is its mean.
        let mut prec_tilde = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                prec_tilde[i * p + j] = inv[(i + 1) * s + (j + 1)];
            }
        }
        let mean_tilde: Vec<f64> = (1..=p).map(|j| self.moments.value(0, j)).collect();

        // Undo the preconditioning x̃ = A·x + b:
        //   mean = A⁻¹(mean_tilde − b),  precision = Aᵀ·prec_tilde·A.
        let a = self.map.linear();
        let a_inv = linalg::invert_small(a, p).ok_or(Error::SingularMap {
            det: linalg::det(a, p),
        })?;
        let shifted: Vec<f64> = mean_tilde
            .iter()
            .zip(self.map.offset())
            .map(|(m, b)| m - b)
            .collect();
        let mut mean = vec![0.0; p];
        linalg::matvec_into(&a_inv, p, &shifted, &mut mean);
        let ta = linalg::matmul_atb(a, &prec_tilde, p);
        let precision = linalg::matmul(&ta, a, p);
        Ok(MahalanobisView { mean, precision })
    }

    /// Solves min ∫R² dμ over polynomials R of degree ≤ d with R(target) = 1.
    ///
    /// The solution is P* = Σ_α a_α P_α with a_α = P_α(target)/Q(target) and
    /// minimal value 1/Q(target) — large scores certify that *every*
    /// normalized polynomial has large mean square, i.e. the target cannot
    /// be separated cheaply from the cloud.
    pub fn christoffel_minimizer(&self, target: &[f64]) -> Result<Minimizer> {
        let u = self.orthonormal_eval(target)?;
        let q: f64 = u.iter().map(|ui| ui * ui).sum();
        let a: Vec<f64> = u.iter().map(|ui| ui / q).collect();
        let s = self.basis.len();
        // Monomial coefficients: c = Dᵀ·a (column combination of D's rows).
        let mut coefficients = vec![0.0; s];
        for (beta, c) in coefficients.iter_mut().enumerate() {
            let mut sum = 0.0;
            for (alpha, a_alpha) in a.iter().enumerate().skip(beta) {
                sum += self.ortho[alpha * s + beta] * a_alpha;
            }
            *c = sum;
        }
        let attained_value = linalg::dot(&a, &a);
        Ok(Minimizer {
            coefficients,
            attained_value,
            score_at_target: q,
        })
    }

    /// Markov bound: at least 1 − 1/Q(target) of the mass lies where the
    /// minimizing polynomial satisfies P*² ≤ 1. Returns the bound together
    /// with the fraction of `points` actually inside that sublevel set.
    pub fn markov_mass_bound(&self, target: &[f64], points: &[Vec<f64>]) -> Result<MarkovBound> {
        let minimizer = self.christoffel_minimizer(target)?;
        let bound = 1.0 - 1.0 / minimizer.score_at_target;
        if points.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        let mut inside = 0usize;
        for x in points {
            let value = self.evaluate_polynomial(&minimizer.coefficients, x)?;
            if value * value <= 1.0 {
                inside += 1;
            }
        }
        Ok(MarkovBound {
            bound,
            empirical_mass: inside as f64 / points.len() as f64,
        })
    }

    /// KKT certificate that the rows of D solve the convex program
    ///
    /// ```text
    /// min ½ Σ_α ⟨q_α, M q_α⟩   over polynomials q_α = Σ_{β ≤ α} q_αβ X^β
    /// s.t. q_αα ≥ exp(θ_α),    Σ_α θ_α = 0
    /// ```
    ///
    /// at the optimal θ* = log(√λ·p_αα) with λ = (∏ p_αα)^(−2/s): the
    /// optimizers are q*_α = √λ·P_α and the optimal value is ½·s(d)·λ.
    /// The returned multipliers and residuals let a caller re-verify the
    /// stationarity conditions independently; the verification quantities
    /// (`theta_sum`, `max_stationarity_residual`, `max_activeness_gap`) are
    /// all roundoff-sized for a healthy fit. The certified floor is computed
    /// against the ridge-adjusted moment matrix the model actually factored.
    pub fn variational_certificate(&self) -> Certificate {
        let s = self.basis.len();
        // Work in logs: p_αα spans many orders of magnitude at high degree.
        let log_diag: Vec<f64> = (0..s).map(|i| self.ortho[i * s + i].ln()).collect();
        let log_sum: f64 = log_diag.iter().sum();
        let log_lambda = (-2.0 / s as f64) * log_sum;
        let lambda = log_lambda.exp();
        let sqrt_lambda = (0.5 * log_lambda).exp();
        let theta: Vec<f64> = log_diag.iter().map(|ld| 0.5 * log_lambda + ld).collect();
        let theta_sum = theta.iter().sum();

        // Effective Gram matrix the factorization certified.
        let mut m_eff = self.moments.as_slice().to_vec();
        if self.ridge != 0.0 {
            for i in 0..s {
                m_eff[i * s + i] += self.ridge;
            }
        }

        let mut lambda_diag = vec![0.0; s];
        let mut off_diagonal = Vec::with_capacity(s);
        let mut max_residual: f64 = 0.0;
        let mut max_gap: f64 = 0.0;
        let mut q = vec![0.0; s];
        let mut w = vec![0.0; s];
        for alpha in 0..s {
            for (beta, qb) in q.iter_mut().enumerate() {
                *qb = if beta <= alpha {
                    sqrt_lambda * self.ortho[alpha * s + beta]
                } else {
                    0.0
                };
            }
            linalg::matvec_into(&m_eff, s, &q, &mut w);
            let l_alpha = sqrt_lambda / self.ortho[alpha * s + alpha];
            lambda_diag[alpha] = l_alpha;
            off_diagonal.push(w[alpha + 1..].to_vec());
            // Stationarity: M·q*_α − λ_α·e_α − Σ_{β>α} λ_αβ·e_β should vanish;
            // with λ_αβ read off w, only the components at β ≤ α can deviate.
            let mut residual_sq = (w[alpha] - l_alpha).powi(2);
            for &wb in &w[..alpha] {
                residual_sq += wb * wb;
            }
            max_residual = max_residual.max(residual_sq.sqrt());
            // Activeness of the leading-coefficient constraint.
            let lead = q[alpha];
            let gap = (lead - theta[alpha].exp()).abs() / lead.abs().max(f64::MIN_POSITIVE);
            max_gap = max_gap.max(gap);
        }
        let objective = 0.5 * s as f64 * lambda;
        Certificate {
            lambda,
            lambda_diag,
            off_diagonal,
            theta,
            objective,
            theta_sum,
            max_stationarity_residual: max_residual,
            max_activeness_gap: max_gap,
        }
    }

    /// Empirical check of affine invariance: transform the training cloud by
    /// x ↦ A·x + b, refit with the same degree/options, and return the
    /// largest relative deviation |Q(x) − Q'(Ax+b)| / Q(x) over the probes.
    ///
    /// A must be invertible; numerically singular maps are rejected.
    pub fn affine_pushforward_check(
        &self,
        training: &[Vec<f64>],
        a: &[f64],
        b: &[f64],
        probes: &[Vec<f64>],
    ) -> Result<f64> {
        let p = self.basis.nvars();
        if b.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: b.len(),
            });
        }
        let map = AffineMap::new(a.to_vec(), b.to_vec())?;
        let det = linalg::det(a, p);
        let scale = a.iter().fold(1.0_f64, |m, &v| m.max(v.abs()));
        if !det.is_finite() || det.abs() < 1e-8 * scale.powi(p as i32) {
            return Err(Error::SingularMap { det });
        }
        let transformed: Vec<Vec<f64>> = training.iter().map(|x| map.apply(x)).collect();
        let opts = FitOptions {
            ridge: self.ridge,
            precondition: !self.map.is_identity(),
        };
        let refit = ChristoffelModel::fit_points(&transformed, self.basis.degree(), &opts)?;
        let mut worst = 0.0_f64;
        for x in probes {
            let here = self.score(x)?;
            let there = refit.score(&map.apply(x))?;
            worst = worst.max((here - there).abs() / here);
        }
        Ok(worst)
    }

    /// Samples Q on an inclusive (nx × ny) grid over the box
    /// [xmin, xmax] × [ymin, ymax]. Planar models only.
    pub fn levelset_grid(
        &self,
        xmin: f64,
        xmax: f64,
        ymin: f64,
        ymax: f64,
        nx: usize,
        ny: usize,
    ) -> Result<LevelsetGrid> {
        let p = self.basis.nvars();
        if p != 2 {
            return Err(Error::GridDimension { p });
        }
        let corners = [xmin, xmax, ymin, ymax];
        if corners.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateBox {
                reason: "box corners must be finite".into(),
            });
        }
        if xmax <= xmin || ymax <= ymin {
            return Err(Error::DegenerateBox {
                reason: format!(
                    "box [{xmin}, {xmax}] × [{ymin}, {ymax}] has no interior"
                ),
            });
        }
        if nx < 2 || ny < 2 {
            return Err(Error::DegenerateBox {
                reason: format!("resolution {nx}×{ny} must be at least 2×2"),
            });
        }
        let xs: Vec<f64> = (0..nx)
            .map(|i| xmin + (xmax - xmin) * i as f64 / (nx - 1) as f64)
            .collect();
        let ys: Vec<f64> = (0..ny)
            .map(|i| ymin + (ymax - ymin) * i as f64 / (ny - 1) as f64)
            .collect();
        let s = self.basis.len();
        let mut mapped = vec![0.0; 2];
        let mut v = vec![0.0; s];
        let mut u = vec![0.0; s];
        let mut values = Vec::with_capacity(nx * ny);
        for &y in &ys {
            for &x in &xs {
                values.push(self.score_buffers(&[x, y], &mut mapped, &mut v, &mut u));
            }
        }
        Ok(LevelsetGrid {
            xs,
            ys,
            values,
            threshold: self.threshold(),
        })
    }

    // =========================================================================
    // Persistence
    // =========================================================================

    /// Serializes the model as deterministic JSON (same model → same bytes).
    pub fn to_json(&self) -> Result<String> {
        let s = self.basis.len();
        let mut packed = Vec::with_capacity(s * (s + 1) / 2);
        for i in 0..s {
            for j in 0..=i {
                packed.push(self.ortho[i * s + j]);
            }
        }
        let file = ModelFile {
            format_version: FORMAT_VERSION,
            basis_order: BASIS_ORDER.to_string(),
            p: self.basis.nvars(),
            d: self.basis.degree(),
            n: self.moments.count(),
            ridge: self.ridge,
            precondition_map: MapFile {
                a: self.map.linear().to_vec(),
                b: self.map.offset().to_vec(),
            },
            d_factor: packed,
        };
        let mut json = serde_json::to_string_pretty(&file)?;
        json.push('\n');
        Ok(json)
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Reads a model back; scores produced by the loaded model are bitwise
    /// identical to the original's.
    pub fn from_json(json: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(json)?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported format_version {} (this build reads {})",
                file.format_version, FORMAT_VERSION
            )));
        }
        if file.basis_order != BASIS_ORDER {
            return Err(Error::ModelFormat(format!(
                "unknown basis_order {:?} (this build reads {:?})",
                file.basis_order, BASIS_ORDER
            )));
        }
        let basis = MonomialBasis::new(file.p, file.d)?;
        let s = basis.len();
        let packed_len = s * (s + 1) / 2;
        if file.d_factor.len() != packed_len {
            return Err(Error::ModelFormat(format!(
                "factor has {} entries, expected {} for p={}, d={}",
                file.d_factor.len(),
                packed_len,
                file.p,
                file.d
            )));
        }
        if file.precondition_map.b.len() != file.p
            || file.precondition_map.a.len() != file.p * file.p
        {
            return Err(Error::ModelFormat(
                "precondition map does not match the model dimension".into(),
            ));
        }
        if !(file.ridge.is_finite() && file.ridge >= 0.0) {
            return Err(Error::ModelFormat(format!("invalid ridge {}", file.ridge)));
        }
        let mut ortho = vec![0.0; s * s];
        let mut k = 0;
        for i in 0..s {
            for j in 0..=i {
                let value = file.d_factor[k];
                k += 1;
                if !value.is_finite() {
                    return Err(Error::ModelFormat(format!(
                        "non-finite factor entry at row {i}, column {j}"
                    )));
                }
                ortho[i * s + j] = value;
            }
            if ortho[i * s + i] <= 0.0 {
                return Err(Error::ModelFormat(format!(
                    "factor diagonal must be positive, got {} at index {i}",
                    ortho[i * s + i]
                )));
            }
        }
        for &value in file
            .precondition_map
            .a
            .iter()
            .chain(&file.precondition_map.b)
        {
            if !value.is_finite() {
                return Err(Error::ModelFormat("non-finite precondition map".into()));
            }
        }
        // Rebuild the factor pair and the effective moments: L = D⁻¹,
        // M = L·Lᵀ − ridge·I.
        let chol = linalg::invert_lower(&ortho, s);
        let mut m = linalg::lower_times_lower_t(&chol, s);
        if file.ridge != 0.0 {
            for i in 0..s {
                m[i * s + i] -= file.ridge;
            }
        }
        let min_pivot = (0..s)
            .map(|i| chol[i * s + i] * chol[i * s + i])
            .fold(f64::INFINITY, f64::min);
        let map = AffineMap::new(file.precondition_map.a, file.precondition_map.b)?;
        Ok(ChristoffelModel {
            moments: MomentMatrix::from_raw(basis.clone(), m, file.n),
            basis,
            chol,
            ortho,
            map,
            ridge: file.ridge,
            min_pivot,
        })
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let json = fs::read_to_string(path)?;
        Self::from_json(&json)
    }
}

const FORMAT_VERSION: u32 = 1;
const BASIS_ORDER: &str = "graded_lex_v1";

#[derive(Serialize, Deserialize)]
struct MapFile {
    #[serde(rename = "A")]
    a: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    basis_order: String,
    p: usize,
    d: usize,
    n: u64,
    ridge: f64,
    precondition_map: MapFile,
    /// Lower triangle of D, rows concatenated.
    #[serde(rename = "D")]
    d_factor: Vec<f64>,
}

/// Coordinatewise mean and population σ from raw points (two passes).
fn standardization_from_points(points: &[Vec<f64>], p: usize) -> Result<AffineMap> {
    let n = points.len() as f64;
    let mut mean = vec![0.0; p];
    for x in points {
        if x.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: x.len(),
            });
        }
        for (index, &value) in x.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { index, value });
            }
            mean[index] += value;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; p];
    for x in points {
        for j in 0..p {
            let c = x[j] - mean[j];
            var[j] += c * c;
        }
    }
    let scale: Vec<f64> = var
        .iter()
        .map(|&v| {
            let sigma = (v / n).sqrt();
            if sigma.is_finite() && sigma > 0.0 {
                sigma
            } else {
                1.0 // constant coordinate: leave it alone, the factorization
                    // will flag the degeneracy
            }
        })
        .collect();
    Ok(AffineMap::standardize(&mean, &scale))
}

/// Standardization read off a moment matrix, plus the induced change of
/// basis C with (C M Cᵀ) the moments of the standardized data.
///
/// Row α of C expands the standardized monomial ((x − μ)/σ)^α in raw
/// monomials: C[α][β] = ∏_j binom(α_j, β_j)·(−μ_j)^(α_j−β_j) / σ_j^α_j for
/// β ≤ α elementwise (zero otherwise), which is lower-triangular in graded
/// lex order.
fn standardization_from_moments(moments: &MomentMatrix) -> (AffineMap, Vec<f64>) {
    let basis = moments.basis();
    let p = basis.nvars();
    let s = basis.len();
    // In graded lex, X_j sits at index j for j = 1..=p.
    let mean: Vec<f64> = (1..=p).map(|j| moments.value(0, j)).collect();
    let scale: Vec<f64> = (1..=p)
        .map(|j| {
            let var = moments.value(j, j) - mean[j - 1] * mean[j - 1];
            let sigma = var.max(0.0).sqrt();
            if sigma.is_finite() && sigma > 0.0 {
                sigma
            } else {
                1.0
            }
        })
        .collect();
    let mut change = vec![0.0; s * s];
    for (row, alpha) in basis.exponents().iter().enumerate() {
        let ae = alpha.exponents();
        let sigma_pow: f64 = ae
            .iter()
            .enumerate()
            .map(|(j, &a)| scale[j].powi(a as i32))
            .product();
        for (col, beta) in basis.exponents().iter().enumerate() {
            let be = beta.exponents();
            if be.iter().zip(ae).any(|(b, a)| b > a) {
                continue;
            }
            let mut coeff = 1.0;
            for j in 0..p {
                let (a, b) = (ae[j], be[j]);
                coeff *= binomial_f64(a, b) * (-mean[j]).powi((a - b) as i32);
            }
            change[row * s + col] = coeff / sigma_pow;
        }
    }
    (AffineMap::standardize(&mean, &scale), change)
}

/// Exact small binomial coefficient as f64.
fn binomial_f64(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c.round()
}
