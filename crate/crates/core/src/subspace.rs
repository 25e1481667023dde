//! Orthonormal bases of small complex spans by Gram-Schmidt with one round of
//! reorthogonalisation, which keeps the basis orthogonal to working precision
//! even for nearly collinear channels.

use cfisac_conic::{CVec, C64};

/// Removes the components of `v` along every vector of the orthonormal `basis`.
pub(crate) fn project_out(basis: &[CVec], v: &CVec) -> CVec {
    let mut r = v.clone();
    for _ in 0..2 {
        for q in basis {
            let c = q.dotc(&r);
            r.axpy(-c, q, C64::new(1.0, 0.0));
        }
    }
    r
}

/// Orthonormal basis of `span(cols)`. A column joins the basis only if its
/// residual keeps more than `rel_tol` of its own norm.
pub(crate) fn orthonormal_basis(cols: &[CVec], rel_tol: f64) -> Vec<CVec> {
    let mut basis: Vec<CVec> = Vec::new();
    for c in cols {
        let norm = c.norm();
        if norm == 0.0 {
            continue;
        }
        let r = project_out(&basis, c);
        let rn = r.norm();
        if rn > rel_tol * norm {
            basis.push(r.unscale(rn));
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use cfisac_conic::C64;

    #[test]
    fn collinear_columns_collapse() {
        let a = CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(2.0, 0.0)]);
        let b = a.scale(-3.0);
        let c = CVec::from_vec(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let basis = orthonormal_basis(&[a.clone(), b, c.clone()], 1e-10);
        assert_eq!(basis.len(), 2);
        assert!(basis[0].dotc(&basis[1]).norm() < 1e-15);
        let r = project_out(&basis, &(a + c));
        assert!(r.norm() < 1e-14);
    }
}
