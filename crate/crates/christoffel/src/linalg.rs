//! Small dense linear-algebra kernels used by the fitting code.
//!
//! Matrices are `Vec<f64>` in row-major order with an explicit side length;
//! at the sizes this crate works with (s(d) is a few hundred at most) the
//! classic triple loops below are fast, allocation-free in the hot paths,
//! and — importantly — let us control the pivot-failure policy and keep
//! results bitwise reproducible across runs.

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix:
/// `a = L·Lᵀ`.
///
/// `pivot_floor` is the smallest acceptable pivot (the value under the square
/// root). On success returns `(l, min_pivot)` where `min_pivot` is the
/// smallest pivot encountered; on failure returns `Err((index, pivot))` for
/// the first pivot that fell to or below the floor.
pub(crate) fn cholesky_lower(
    a: &[f64],
    n: usize,
    pivot_floor: f64,
) -> Result<(Vec<f64>, f64), (usize, f64)> {
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![0.0; n * n];
    let mut min_pivot = f64::INFINITY;
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= pivot_floor || !sum.is_finite() {
                    return Err((i, sum));
                }
                min_pivot = min_pivot.min(sum);
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Ok((l, min_pivot))
}

/// Inverse of a lower-triangular matrix with positive diagonal (forward
/// substitution column by column). The result is again lower-triangular.
pub(crate) fn invert_lower(l: &[f64], n: usize) -> Vec<f64> {
    debug_assert_eq!(l.len(), n * n);
    let mut inv = vec![0.0; n * n];
    for j in 0..n {
        inv[j * n + j] = 1.0 / l[j * n + j];
        for i in j + 1..n {
            let mut sum = 0.0;
            for k in j..i {
                sum += l[i * n + k] * inv[k * n + j];
            }
            inv[i * n + j] = -sum / l[i * n + i];
        }
    }
    inv
}

/// `out = L·x` for lower-triangular `L`.
pub(crate) fn lower_matvec_into(l: &[f64], n: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(l.len(), n * n);
    debug_assert_eq!(x.len(), n);
    debug_assert_eq!(out.len(), n);
    for i in 0..n {
        let row = &l[i * n..i * n + i + 1];
        let mut sum = 0.0;
        for (lk, xk) in row.iter().zip(&x[..=i]) {
            sum += lk * xk;
        }
        out[i] = sum;
    }
}

/// `out = A·x` for a full (not necessarily triangular) square matrix.
pub(crate) fn matvec_into(a: &[f64], n: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(x.len(), n);
    debug_assert_eq!(out.len(), n);
    for i in 0..n {
        let row = &a[i * n..(i + 1) * n];
        let mut sum = 0.0;
        for (ak, xk) in row.iter().zip(x) {
            sum += ak * xk;
        }
        out[i] = sum;
    }
}

/// Quadratic form `xᵀ·A·x`.
pub(crate) fn quadform(a: &[f64], n: usize, x: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(x.len(), n);
    let mut total = 0.0;
    for i in 0..n {
        let row = &a[i * n..(i + 1) * n];
        let mut sum = 0.0;
        for (ak, xk) in row.iter().zip(x) {
            sum += ak * xk;
        }
        total += x[i] * sum;
    }
    total
}

/// `Dᵀ·D` for lower-triangular `D`, returned as a full symmetric matrix.
pub(crate) fn lower_t_times_lower(d: &[f64], n: usize) -> Vec<f64> {
    debug_assert_eq!(d.len(), n * n);
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            // Column i of D meets column j of D; rows k < max(i,j) are zero.
            let mut sum = 0.0;
            for k in i..n {
                sum += d[k * n + i] * d[k * n + j];
            }
            out[i * n + j] = sum;
            out[j * n + i] = sum;
        }
    }
    out
}

/// `L·Lᵀ` for lower-triangular `L`, returned as a full symmetric matrix.
pub(crate) fn lower_times_lower_t(l: &[f64], n: usize) -> Vec<f64> {
    debug_assert_eq!(l.len(), n * n);
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = 0.0;
            for k in 0..=j.min(i) {
                sum += l[i * n + k] * l[j * n + k];
            }
            out[i * n + j] = sum;
            out[j * n + i] = sum;
        }
    }
    out
}

/// Square matrix product `A·B`.
pub(crate) fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n * n);
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b[k * n..(k + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o += aik * bv;
            }
        }
    }
    out
}

/// Square matrix product `A·Bᵀ`.
pub(crate) fn matmul_abt(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n * n);
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut sum = 0.0;
            for k in 0..n {
                sum += a[i * n + k] * b[j * n + k];
            }
            out[i * n + j] = sum;
        }
    }
    out
}

/// Square matrix product `Aᵀ·B`.
pub(crate) fn matmul_atb(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n * n);
    let mut out = vec![0.0; n * n];
    for k in 0..n {
        for i in 0..n {
            let aki = a[k * n + i];
            if aki == 0.0 {
                continue;
            }
            let brow = &b[k * n..(k + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o += aki * bv;
            }
        }
    }
    out
}

/// Determinant via partial-pivot LU. Intended for small p×p affine maps.
pub(crate) fn det(a: &[f64], n: usize) -> f64 {
    debug_assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut sign = 1.0;
    let mut d = 1.0;
    for col in 0..n {
        let mut pivot_row = col;
        let mut best = m[col * n + col].abs();
        for r in col + 1..n {
            let v = m[r * n + col].abs();
            if v > best {
                best = v;
                pivot_row = r;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if pivot_row != col {
            for c in 0..n {
                m.swap(col * n + c, pivot_row * n + c);
            }
            sign = -sign;
        }
        let pivot = m[col * n + col];
        d *= pivot;
        for r in col + 1..n {
            let f = m[r * n + col] / pivot;
            for c in col..n {
                m[r * n + c] -= f * m[col * n + c];
            }
        }
    }
    sign * d
}

/// Inverse of a small square matrix by Gauss–Jordan with partial pivoting.
/// Returns `None` when a pivot vanishes (singular input).
pub(crate) fn invert_small(a: &[f64], n: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let mut pivot_row = col;
        let mut best = m[col * n + col].abs();
        for r in col + 1..n {
            let v = m[r * n + col].abs();
            if v > best {
                best = v;
                pivot_row = r;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return None;
        }
        if pivot_row != col {
            for c in 0..n {
                m.swap(col * n + c, pivot_row * n + c);
                inv.swap(col * n + c, pivot_row * n + c);
            }
        }
        let pivot = m[col * n + col];
        for c in 0..n {
            m[col * n + c] /= pivot;
            inv[col * n + c] /= pivot;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r * n + col];
            if f == 0.0 {
                continue;
            }
            for c in 0..n {
                m[r * n + c] -= f * m[col * n + c];
                inv[r * n + c] -= f * inv[col * n + c];
            }
        }
    }
    Some(inv)
}

/// Dot product.
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    const N3: usize = 3;

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn cholesky_of_identity_is_identity() {
        let eye = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let (l, min_pivot) = cholesky_lower(&eye, N3, 0.0).expect("identity is SPD");
        assert_eq!(l, eye);
        assert_eq!(min_pivot, 1.0);
    }

    #[test]
    fn cholesky_recovers_known_factor() {
        // L = [[2,0],[1,3]] → A = L·Lᵀ = [[4,2],[2,10]].
        let a = vec![4.0, 2.0, 2.0, 10.0];
        let (l, _) = cholesky_lower(&a, 2, 0.0).unwrap();
        assert_eq!(l, vec![2.0, 0.0, 1.0, 3.0]);
    }

    #[test]
    fn cholesky_rejects_semidefinite_matrix() {
        // Rank-1: [1 1; 1 1] — second pivot is exactly 0.
        let a = vec![1.0, 1.0, 1.0, 1.0];
        let err = cholesky_lower(&a, 2, 0.0).unwrap_err();
        assert_eq!(err.0, 1, "failure should be at the second pivot");
        assert!(err.1 <= 0.0 + 1e-15);
    }

    #[test]
    fn cholesky_honours_pivot_floor() {
        let a = vec![1.0, 0.0, 0.0, 1e-13];
        assert!(cholesky_lower(&a, 2, 0.0).is_ok());
        let err = cholesky_lower(&a, 2, 1e-12).unwrap_err();
        assert_eq!(err.0, 1);
    }

    #[test]
    fn invert_lower_matches_hand_inverse() {
        // L = [[2,0],[1,3]] → L⁻¹ = [[1/2, 0], [-1/6, 1/3]].
        let l = vec![2.0, 0.0, 1.0, 3.0];
        let inv = invert_lower(&l, 2);
        let expect = vec![0.5, 0.0, -1.0 / 6.0, 1.0 / 3.0];
        assert!(max_abs_diff(&inv, &expect) < 1e-15);
    }

    #[test]
    fn invert_lower_times_original_is_identity() {
        let a = random_spd(6, 42);
        let (l, _) = cholesky_lower(&a, 6, 0.0).unwrap();
        let inv = invert_lower(&l, 6);
        // (L⁻¹·L) entrywise.
        let mut prod = vec![0.0; 36];
        for i in 0..6 {
            for j in 0..6 {
                let mut s = 0.0;
                for k in 0..6 {
                    s += inv[i * 6 + k] * l[k * 6 + j];
                }
                prod[i * 6 + j] = s;
            }
        }
        let mut eye = vec![0.0; 36];
        for i in 0..6 {
            eye[i * 6 + i] = 1.0;
        }
        assert!(
            max_abs_diff(&prod, &eye) < 1e-12,
            "L⁻¹·L deviates from identity by {}",
            max_abs_diff(&prod, &eye)
        );
    }

    #[test]
    fn quadform_matches_two_matvecs() {
        let a = random_spd(5, 7);
        let x: Vec<f64> = (0..5).map(|i| (i as f64) - 1.7).collect();
        let mut ax = vec![0.0; 5];
        matvec_into(&a, 5, &x, &mut ax);
        let direct = dot(&x, &ax);
        assert!((quadform(&a, 5, &x) - direct).abs() < 1e-12 * direct.abs().max(1.0));
    }

    #[test]
    fn factor_identities_roundtrip() {
        let a = random_spd(8, 3);
        let (l, _) = cholesky_lower(&a, 8, 0.0).unwrap();
        let back = lower_times_lower_t(&l, 8);
        assert!(max_abs_diff(&back, &a) < 1e-10);
        let d = invert_lower(&l, 8);
        let inv = lower_t_times_lower(&d, 8);
        // A·A⁻¹ ≈ I.
        for i in 0..8 {
            for j in 0..8 {
                let mut s = 0.0;
                for k in 0..8 {
                    s += a[i * 8 + k] * inv[k * 8 + j];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((s - expect).abs() < 1e-9, "({i},{j}): {s}");
            }
        }
    }

    #[test]
    fn det_and_invert_small_agree_on_diagonal() {
        let a = vec![2.0, 0.0, 0.0, 0.0, -3.0, 0.0, 0.0, 0.0, 5.0];
        assert!((det(&a, 3) - (-30.0)).abs() < 1e-12);
        let inv = invert_small(&a, 3).unwrap();
        assert!((inv[0] - 0.5).abs() < 1e-15);
        assert!((inv[4] + 1.0 / 3.0).abs() < 1e-15);
        assert!((inv[8] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn invert_small_rejects_singular() {
        let a = vec![1.0, 2.0, 2.0, 4.0];
        assert!(invert_small(&a, 2).is_none());
        assert_eq!(det(&a, 2), 0.0);
    }

    /// Deterministic SPD test matrix: B·Bᵀ + n·I from a fixed LCG stream.
    fn random_spd(n: usize, seed: u64) -> Vec<f64> {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let b: Vec<f64> = (0..n * n).map(|_| next()).collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += b[i * n + k] * b[j * n + k];
                }
                a[i * n + j] = s + if i == j { n as f64 } else { 0.0 };
            }
        }
        a
    }
}
