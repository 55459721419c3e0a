//! Small dense-linear-algebra and polynomial helpers shared across modules.
//!
//! Polynomials are represented as coefficient slices in *descending* powers of
//! `s`, e.g. `[2.0, 3.0, 1.0]` is `2s² + 3s + 1`. Roots are computed as the
//! eigenvalues of the companion matrix of the monic-normalized polynomial.

use nalgebra::{Complex, DMatrix, DVector};

/// Multiply two polynomials (convolution of coefficient vectors).
pub fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Evaluate a polynomial at `x` (Horner's scheme, descending coefficients).
pub fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, &c| acc * x + c)
}

/// Polynomial long division: returns `(quotient, remainder)` with
/// `dividend = quotient * divisor + remainder` and
/// `deg(remainder) < deg(divisor)`.
///
/// Panics if the divisor is empty or has a zero leading coefficient.
pub fn poly_div(dividend: &[f64], divisor: &[f64]) -> (Vec<f64>, Vec<f64>) {
    assert!(
        !divisor.is_empty() && divisor[0] != 0.0,
        "polynomial division by zero leading coefficient"
    );
    let mut rem: Vec<f64> = dividend.to_vec();
    if rem.len() < divisor.len() {
        return (vec![0.0], rem);
    }
    let qlen = rem.len() - divisor.len() + 1;
    let mut quot = vec![0.0; qlen];
    for k in 0..qlen {
        let q = rem[k] / divisor[0];
        quot[k] = q;
        for (j, &dj) in divisor.iter().enumerate() {
            rem[k + j] -= q * dj;
        }
    }
    let remainder = rem.split_off(qlen);
    (quot, remainder)
}

/// Strip leading (highest-power) coefficients that are exactly zero.
pub fn poly_trim(coeffs: &[f64]) -> Vec<f64> {
    let first = coeffs.iter().position(|&c| c != 0.0);
    match first {
        Some(i) => coeffs[i..].to_vec(),
        None => vec![0.0],
    }
}

/// Companion matrix of the monic normalization of `poly` (descending
/// coefficients, leading coefficient must be nonzero, degree ≥ 1).
///
/// The matrix is in bottom-row form: its characteristic polynomial equals the
/// monic input, so its eigenvalues are the polynomial roots.
pub fn companion(poly: &[f64]) -> DMatrix<f64> {
    let p = poly_trim(poly);
    let n = p.len() - 1;
    assert!(n >= 1, "companion matrix needs degree >= 1");
    let lead = p[0];
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n - 1 {
        a[(i, i + 1)] = 1.0;
    }
    for j in 0..n {
        // Monic coefficient of s^j is p[n - j] / lead.
        a[(n - 1, j)] = -p[n - j] / lead;
    }
    a
}

/// Roots of a real polynomial via companion-matrix eigenvalues.
///
/// Returns an empty vector for constant polynomials.
pub fn poly_roots(poly: &[f64]) -> Vec<Complex<f64>> {
    let p = poly_trim(poly);
    if p.len() <= 1 {
        return Vec::new();
    }
    let comp = companion(&p);
    comp.schur().complex_eigenvalues().iter().copied().collect()
}

/// Zero-order-hold discretization of `ẋ = Ax + Bu` over a step `dt`:
/// returns `(Ad, Bd)` with `x[k+1] = Ad x[k] + Bd u[k]`.
///
/// Computed through the exponential of the augmented matrix `[[A, B], [0, 0]]`,
/// which is exact for piecewise-constant inputs and handles singular `A`.
pub fn discretize_zoh(a: &DMatrix<f64>, b: &DVector<f64>, dt: f64) -> (DMatrix<f64>, DVector<f64>) {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(b.len(), n);
    let mut aug = DMatrix::<f64>::zeros(n + 1, n + 1);
    aug.view_mut((0, 0), (n, n)).copy_from(a);
    aug.view_mut((0, n), (n, 1)).copy_from(b);
    let e = (aug * dt).exp();
    let ad = e.view((0, 0), (n, n)).into_owned();
    let bd = DVector::from_fn(n, |i, _| e[(i, n)]);
    (ad, bd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn multiplies_polynomials() {
        // (s + 1)(2s + 3) = 2s^2 + 5s + 3
        assert_eq!(poly_mul(&[1.0, 1.0], &[2.0, 3.0]), vec![2.0, 5.0, 3.0]);
    }

    #[test]
    fn divides_exactly_when_factor_is_shared() {
        // (s + 2)(3s^2 + s + 5) divided by (s + 2)
        let prod = poly_mul(&[1.0, 2.0], &[3.0, 1.0, 5.0]);
        let (q, r) = poly_div(&prod, &[1.0, 2.0]);
        assert_eq!(q, vec![3.0, 1.0, 5.0]);
        for c in r {
            assert_abs_diff_eq!(c, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn division_returns_remainder() {
        // (s^2 + 1) / (s + 1) = (s - 1) remainder 2
        let (q, r) = poly_div(&[1.0, 0.0, 1.0], &[1.0, 1.0]);
        assert_eq!(q, vec![1.0, -1.0]);
        assert_eq!(r, vec![2.0]);
    }

    #[test]
    fn companion_roots_of_known_quadratic() {
        // 50 s^2 + 10 s + 20: roots -0.1 ± 0.6245 j
        let roots = poly_roots(&[50.0, 10.0, 20.0]);
        assert_eq!(roots.len(), 2);
        for r in &roots {
            assert_abs_diff_eq!(r.re, -0.1, epsilon = 1e-12);
            assert_abs_diff_eq!(r.im.abs(), 0.6244997998398398, epsilon = 1e-12);
        }
    }

    #[test]
    fn zoh_matches_analytic_first_order() {
        // ẋ = -x + u, u = 1: x(t) = 1 - e^{-t}
        let a = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let b = DVector::from_column_slice(&[1.0]);
        let (ad, bd) = discretize_zoh(&a, &b, 0.1);
        let mut x = 0.0;
        for _ in 0..10 {
            x = ad[(0, 0)] * x + bd[0];
        }
        assert_abs_diff_eq!(x, 1.0 - (-1.0_f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn zoh_handles_singular_dynamics() {
        // Pure integrator: ẋ = u, u = 2: x(1) = 2.
        let a = DMatrix::from_row_slice(1, 1, &[0.0]);
        let b = DVector::from_column_slice(&[1.0]);
        let (ad, bd) = discretize_zoh(&a, &b, 0.5);
        let x1 = ad[(0, 0)] * 0.0 + bd[0] * 2.0;
        let x2 = ad[(0, 0)] * x1 + bd[0] * 2.0;
        assert_abs_diff_eq!(x2, 2.0, epsilon = 1e-14);
    }
}
