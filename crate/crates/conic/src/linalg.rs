//! Complex Hermitian helpers: eigendecomposition, numerical rank and the
//! real symmetric embedding used to hand complex blocks to the real solver.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;

use crate::ConicError;

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Relative eigenvalue threshold used for numerical rank throughout the workspace.
pub const DEFAULT_RANK_TOL: f64 = 1e-6;

/// Frobenius norm of `H - H^H` relative to `max(‖H‖_F, 1e-300)`.
pub fn hermitian_defect(h: &CMat) -> f64 {
    let diff = h - h.adjoint();
    diff.norm() / h.norm().max(1e-300)
}

/// `(H + H^H) / 2`.
pub fn hermitize(h: &CMat) -> CMat {
    (h + h.adjoint()).scale(0.5)
}

/// Eigenpairs of a Hermitian matrix, eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector for `values[i]`.
    pub vectors: CMat,
}

/// Eigendecomposition of a Hermitian matrix. The input is hermitized first, so
/// round-off asymmetry is ignored.
pub fn hermitian_eig(h: &CMat) -> HermitianEig {
    assert!(h.is_square(), "hermitian_eig needs a square matrix");
    let n = h.nrows();
    if n == 0 {
        return HermitianEig { values: Vec::new(), vectors: CMat::zeros(0, 0) };
    }
    let eig = SymmetricEigen::new(hermitize(h));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    HermitianEig { values, vectors }
}

/// Number of eigenvalues strictly above `rel_tol * λ_max`. Zero when `λ_max <= 0`.
pub fn rank_eps(h: &CMat, rel_tol: f64) -> usize {
    rank_of_spectrum(&hermitian_eig(h).values, rel_tol)
}

/// Rank rule shared by [`rank_eps`] and callers that already hold a spectrum
/// sorted in any order.
pub fn rank_of_spectrum(values: &[f64], rel_tol: f64) -> usize {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return 0;
    }
    values.iter().filter(|&&v| v > rel_tol * max).count()
}

/// Real symmetric embedding `[[Re H, -Im H], [Im H, Re H]]` of a Hermitian matrix.
/// Every eigenvalue of `H` appears twice in the embedding.
pub fn embed_hermitian(h: &CMat) -> Result<DMatrix<f64>, ConicError> {
    if !h.is_square() {
        return Err(ConicError::Dimension(format!(
            "embedding needs a square matrix, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let defect = hermitian_defect(h);
    if defect > 1e-9 {
        return Err(ConicError::NotHermitian(defect));
    }
    Ok(embed_unchecked(h))
}

pub(crate) fn embed_unchecked(h: &CMat) -> DMatrix<f64> {
    let n = h.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        for i in 0..n {
            let v = h[(i, j)];
            out[(i, j)] = v.re;
            out[(i + n, j + n)] = v.re;
            out[(i + n, j)] = v.im;
            out[(i, j + n)] = -v.im;
        }
    }
    out
}

/// Inverse of [`embed_hermitian`] that projects an arbitrary real symmetric
/// `2n x 2n` matrix onto the embedded subspace: `Re = (X11 + X22)/2`,
/// `Im = (X21 - X12)/2`. PSD inputs give PSD outputs.
pub fn unembed_symmetric(x: &DMatrix<f64>) -> CMat {
    let n = x.nrows() / 2;
    assert_eq!(x.nrows(), 2 * n);
    CMat::from_fn(n, n, |i, j| {
        C64::new(
            0.5 * (x[(i, j)] + x[(i + n, j + n)]),
            0.5 * (x[(i + n, j)] - x[(i, j + n)]),
        )
    })
}

/// Real vector pair `[Re v; Im v]`, `[-Im v; Re v]` whose outer products sum to
/// the embedding of `v v^H`.
pub(crate) fn embed_vector_pair(v: &[C64]) -> (DVector<f64>, DVector<f64>) {
    let n = v.len();
    let mut a = DVector::zeros(2 * n);
    let mut b = DVector::zeros(2 * n);
    for (i, z) in v.iter().enumerate() {
        a[i] = z.re;
        a[i + n] = z.im;
        b[i] = -z.im;
        b[i + n] = z.re;
    }
    (a, b)
}

/// `Re Tr(A X)` for Hermitian `A`, `X`.
pub fn trace_inner(a: &CMat, x: &CMat) -> f64 {
    a.iter().zip(x.transpose().iter()).map(|(p, q)| (p * q).re).sum()
}

/// Outer product `v v^H`.
pub fn outer(v: &CVec) -> CMat {
    v * v.adjoint()
}

/// Smallest eigenvalue of a real symmetric matrix (`+inf` for the empty matrix).
pub(crate) fn min_eig_sym(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// One-sided Jacobi SVD `a = u diag(s) v^T` of a square matrix.
///
/// Used instead of the bidiagonal QR SVD for its high relative accuracy on
/// graded and nearly diagonal inputs, which is exactly what the scaled
/// iterates of an interior-point method look like. `None` if `a` is singular.
pub fn jacobi_svd(a: &DMatrix<f64>) -> Option<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "jacobi_svd needs a square matrix");
    let mut u = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let rotate = |m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64| {
        let rows = m.nrows();
        let data = m.as_mut_slice();
        for k in 0..rows {
            let x = data[i * rows + k];
            let y = data[j * rows + k];
            data[i * rows + k] = c * x - s * y;
            data[j * rows + k] = s * x + c * y;
        }
    };
    for _ in 0..80 {
        let mut rotated = false;
        for i in 0..n.saturating_sub(1) {
            for j in i + 1..n {
                let (alpha, beta, gamma) = {
                    let ci = u.column(i);
                    let cj = u.column(j);
                    (ci.norm_squared(), cj.norm_squared(), ci.dot(&cj))
                };
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta.abs() > 1e150 {
                    0.5 / zeta
                } else {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut u, i, j, c, s);
                rotate(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv = Vec::with_capacity(n);
    for k in 0..n {
        let nk = u.column(k).norm();
        if !(nk > 0.0) || !nk.is_finite() {
            return None;
        }
        u.column_mut(k).scale_mut(1.0 / nk);
        sv.push(nk);
    }
    Some((u, sv, v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn eig_of_pauli_y_like_matrix() {
        let h = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]);
        let e = hermitian_eig(&h);
        assert!((e.values[0] - 1.0).abs() < 1e-12);
        assert!((e.values[1] + 1.0).abs() < 1e-12);
        let v = e.vectors.column(0).into_owned();
        let hv = &h * &v;
        assert!((hv - v).norm() < 1e-12);
    }

    #[test]
    fn embedding_duplicates_spectrum() {
        let h = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]);
        let r = embed_hermitian(&h).unwrap();
        let mut ev: Vec<f64> = r.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for (got, want) in ev.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn embedding_rejects_non_hermitian() {
        let h = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(embed_hermitian(&h), Err(ConicError::NotHermitian(_))));
    }

    #[test]
    fn rank_of_rank_one_plus_tiny_identity() {
        let a = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0)]);
        let h = outer(&a) + CMat::identity(3, 3) * c(1e-9, 0.0);
        assert_eq!(rank_eps(&h, DEFAULT_RANK_TOL), 1);
        assert_eq!(rank_eps(&CMat::zeros(3, 3), DEFAULT_RANK_TOL), 0);
    }

    #[test]
    fn jacobi_svd_is_accurate_on_nearly_diagonal_input() {
        let a = DMatrix::from_row_slice(
            3,
            3,
            &[0.0624280841, 6.4e-17, 1.8e-15, 3.0e-17, 0.0547306027, 5.1e-15, -3.8e-16, -1.2e-15, 0.1156211112],
        );
        let (u, s, v) = jacobi_svd(&a).unwrap();
        let rec = &u * DMatrix::from_diagonal(&DVector::from_vec(s.clone())) * v.transpose();
        assert!((rec - &a).norm() < 1e-15);
        let mut got = s;
        got.sort_by(f64::total_cmp);
        assert!((got[2] - 0.1156211112).abs() < 1e-15);
    }

    #[test]
    fn vector_pair_reproduces_embedded_outer_product() {
        let v = [c(0.3, -1.2), c(2.0, 0.5)];
        let (a, b) = embed_vector_pair(&v);
        let sum = &a * a.transpose() + &b * b.transpose();
        let want = embed_unchecked(&outer(&CVec::from_column_slice(&v)));
        assert!((sum - want).norm() < 1e-12);
    }
}
