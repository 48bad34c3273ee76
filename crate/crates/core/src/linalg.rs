//! Small dense linear algebra helpers shared by the index machinery.
//!
//! Singular value and symmetric eigen decompositions are computed by Jacobi
//! rotation methods implemented here: the matrices in this crate are tiny
//! (at most 2m x 2m for m <= a handful) and the one-sided Jacobi SVD is
//! accurate to machine precision on them, which the rank decisions rely on.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Canonical symplectic matrix J = [[0, I], [-I, 0]] of size 2m x 2m,
/// matching omega((v1,w1),(v2,w2)) = <v1,w2> - <w1,v2> = x^T J y on stacked
/// phase coordinates (value; derivative).
pub fn symplectic_form_matrix(m: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        j[(i, m + i)] = 1.0;
        j[(m + i, i)] = -1.0;
    }
    j
}

/// omega applied to stacked phase columns: x^T J y without forming J.
pub fn omega_columns(x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let m = x.len() / 2;
    let mut acc = 0.0;
    for i in 0..m {
        acc += x[i] * y[m + i] - x[m + i] * y[i];
    }
    acc
}

/// k x k omega-Gram matrix of the columns of a 2m x k frame.
pub fn omega_gram(frame: &DMatrix<f64>) -> DMatrix<f64> {
    let k = frame.ncols();
    let mut g = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let ci = frame.column(i).into_owned();
            let cj = frame.column(j).into_owned();
            g[(i, j)] = omega_columns(&ci, &cj);
        }
    }
    g
}

// ---------------------------------------------------------------------
// Jacobi decompositions
// ---------------------------------------------------------------------

/// Thin singular value decomposition A = U diag(s) V^T with singular values
/// in descending order, U: m x r, V: k x r, r = min(m, k).
#[derive(Clone, Debug)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v: DMatrix<f64>,
}

impl ThinSvd {
    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn sigma_min(&self) -> f64 {
        self.singular_values.last().copied().unwrap_or(0.0)
    }

    /// Number of singular values above `rel_tol * scale`.
    pub fn rank_with_scale(&self, scale: f64, rel_tol: f64) -> usize {
        let thresh = rel_tol * scale.max(1e-300);
        self.singular_values.iter().filter(|&&s| s > thresh).count()
    }
}

/// Extend the orthonormal columns of `q` to an orthonormal basis of R^n and
/// return the n - j new columns, by modified Gram-Schmidt with
/// re-orthogonalization over the identity candidates.
pub fn complete_orthonormal_basis(q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = q.nrows();
    let j = q.ncols();
    let mut acc: Vec<DVector<f64>> = (0..j).map(|c| q.column(c).into_owned()).collect();
    let mut extra: Vec<DVector<f64>> = Vec::with_capacity(n - j);
    for i in 0..n {
        if extra.len() == n - j {
            break;
        }
        let mut cand = DVector::zeros(n);
        cand[i] = 1.0;
        for _ in 0..2 {
            for b in &acc {
                let p = b.dot(&cand);
                cand -= b * p;
            }
        }
        let norm = cand.norm();
        if norm > 1e-8 {
            cand /= norm;
            acc.push(cand.clone());
            extra.push(cand);
        }
    }
    // Identity candidates can only all fail if q was not orthonormal.
    debug_assert_eq!(extra.len(), n - j);
    let mut out = DMatrix::zeros(n, extra.len());
    for (c, v) in extra.iter().enumerate() {
        out.set_column(c, v);
    }
    out
}

/// One-sided Jacobi SVD: rotates column pairs until all columns are
/// mutually orthogonal, accumulating V; singular values are the final
/// column norms. Exact left vectors for vanishing singular values are
/// completed orthonormally. Deterministic and accurate to machine
/// precision for the small matrices used throughout this crate.
pub fn thin_svd(a: &DMatrix<f64>) -> ThinSvd {
    let m = a.nrows();
    let k = a.ncols();
    if m == 0 || k == 0 {
        return ThinSvd {
            u: DMatrix::zeros(m, 0),
            singular_values: Vec::new(),
            v: DMatrix::zeros(k, 0),
        };
    }
    if m < k {
        let t = thin_svd(&a.transpose());
        return ThinSvd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        };
    }
    let mut w = a.clone();
    let mut v = DMatrix::identity(k, k);
    let tol = 1e-15_f64;
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..k {
            for q in (p + 1)..k {
                let apq: f64 = w.column(p).dot(&w.column(q));
                let app: f64 = w.column(p).norm_squared();
                let aqq: f64 = w.column(q).norm_squared();
                let scale = (app * aqq).sqrt();
                if scale <= 0.0 || apq.abs() <= tol * scale {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)];
                    w[(i, p)] = c * wp - s * wq;
                    w[(i, q)] = s * wp + c * wq;
                }
                for i in 0..k {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..k).collect();
    let norms: Vec<f64> = (0..k).map(|c| w.column(c).norm()).collect();
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).unwrap());
    let smax = norms[order[0]];
    let mut u = DMatrix::zeros(m, k);
    let mut vv = DMatrix::zeros(k, k);
    let mut sigma = Vec::with_capacity(k);
    let mut pending: Vec<usize> = Vec::new();
    for (slot, &c) in order.iter().enumerate() {
        sigma.push(norms[c]);
        vv.set_column(slot, &v.column(c).into_owned());
        if norms[c] > smax * 1e-150 && norms[c] > 0.0 {
            let col = w.column(c).into_owned() / norms[c];
            u.set_column(slot, &col);
        } else {
            pending.push(slot);
        }
    }
    if !pending.is_empty() {
        // Left vectors for exactly-vanishing singular values: complete the
        // basis spanned by the nonzero ones.
        let good: Vec<usize> = (0..k).filter(|s| !pending.contains(s)).collect();
        let mut base = DMatrix::zeros(m, good.len());
        for (i, &s) in good.iter().enumerate() {
            base.set_column(i, &u.column(s).into_owned());
        }
        let completion = complete_orthonormal_basis(&base);
        for (i, &slot) in pending.iter().enumerate() {
            u.set_column(slot, &completion.column(i).into_owned());
        }
    }
    ThinSvd {
        u,
        singular_values: sigma,
        v: vv,
    }
}

/// Eigen decomposition of a symmetric matrix by the cyclic Jacobi rotation
/// method: A = Q diag(vals) Q^T with eigenvalues in descending order.
pub fn sym_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let mut w = 0.5 * (a + a.transpose());
    let mut q = DMatrix::identity(n, n);
    let tol = 1e-15_f64;
    for _sweep in 0..80 {
        let mut off = 0.0_f64;
        let mut diag = 0.0_f64;
        for i in 0..n {
            diag = diag.max(w[(i, i)].abs());
            for j in (i + 1)..n {
                off = off.max(w[(i, j)].abs());
            }
        }
        if off <= tol * diag.max(1e-300) {
            break;
        }
        for p in 0..n {
            for r in (p + 1)..n {
                let apq = w[(p, r)];
                if apq.abs() <= tol * (w[(p, p)].abs() + w[(r, r)].abs()).max(1e-300) {
                    continue;
                }
                let theta = (w[(r, r)] - w[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let wip = w[(i, p)];
                    let wir = w[(i, r)];
                    w[(i, p)] = c * wip - s * wir;
                    w[(i, r)] = s * wip + c * wir;
                }
                for i in 0..n {
                    let wpi = w[(p, i)];
                    let wri = w[(r, i)];
                    w[(p, i)] = c * wpi - s * wri;
                    w[(r, i)] = s * wpi + c * wri;
                }
                for i in 0..n {
                    let qip = q[(i, p)];
                    let qir = q[(i, r)];
                    q[(i, p)] = c * qip - s * qir;
                    q[(i, r)] = s * qip + c * qir;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| w[(y, y)].partial_cmp(&w[(x, x)]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| w[(i, i)]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (slot, &i) in order.iter().enumerate() {
        vecs.set_column(slot, &q.column(i).into_owned());
    }
    (vals, vecs)
}

// ---------------------------------------------------------------------
// Derived helpers
// ---------------------------------------------------------------------

/// Frobenius norm of Phi^T J Phi - J.
pub fn symplectic_defect_raw(phi: &DMatrix<f64>) -> f64 {
    let m = phi.nrows() / 2;
    let j = symplectic_form_matrix(m);
    (phi.transpose() * &j * phi - j).norm()
}

/// Defect normalized by the squared scale of Phi; equal to the raw defect
/// for transfer matrices of norm at most one.
pub fn symplectic_defect_relative(phi: &DMatrix<f64>) -> f64 {
    let scale = phi.norm();
    symplectic_defect_raw(phi) / (1.0_f64).max(scale * scale)
}

/// Project a near-symplectic matrix onto the symplectic group via the
/// generalized polar decomposition Phi = W S with W symplectic and S
/// J-selfadjoint: W = Phi (Phi* Phi)^{-1/2}, Phi* = J^{-1} Phi^T J.
pub fn symplectify(phi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = phi.nrows();
    let m = n / 2;
    let j = symplectic_form_matrix(m);
    let mut out = phi.clone();
    for _ in 0..4 {
        // G = Phi* Phi = -J Phi^T J Phi  (J^{-1} = -J)
        let g = -(&j) * out.transpose() * &j * &out;
        let s = &g - DMatrix::identity(n, n);
        let snorm = s.norm();
        if snorm < 1e-15 {
            break;
        }
        if snorm > 0.5 {
            return Err(Error::SymplecticDefect {
                defect: snorm,
                t: f64::NAN,
            });
        }
        // G^{-1/2} by truncated binomial series in S = G - I.
        let id = DMatrix::identity(n, n);
        let h = &id - 0.5 * &s + 0.375 * (&s * &s) - 0.3125 * (&s * &s * &s);
        out *= h;
    }
    Ok(out)
}

/// Orthonormal basis of the column span (thin, rank assumed full).
pub fn orthonormal_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.ncols() == 0 {
        return m.clone();
    }
    let qr = m.clone().qr();
    qr.q()
}

/// Closest matrix with orthonormal columns in Frobenius norm: U V^T.
pub fn polar_orthonormal(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.ncols() == 0 {
        return m.clone();
    }
    let svd = thin_svd(m);
    &svd.u * svd.v.transpose()
}

/// Orthonormal basis of the right null space of `m`, with a singular value
/// threshold relative to the largest singular value.
pub fn null_space(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let k = m.ncols();
    if k == 0 {
        return DMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return DMatrix::identity(k, k);
    }
    let svd = thin_svd(m);
    let thresh = rel_tol * svd.sigma_max().max(1e-300);
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= thresh {
            cols.push(svd.v.column(i).into_owned());
        }
    }
    // Wide matrices: directions beyond the row space are kernel as well.
    if k > svd.v.ncols() {
        let completion = complete_orthonormal_basis(&svd.v);
        for c in 0..completion.ncols() {
            cols.push(completion.column(c).into_owned());
        }
    }
    let mut out = DMatrix::zeros(k, cols.len());
    for (i, c) in cols.iter().enumerate() {
        out.set_column(i, c);
    }
    out
}

/// Orthonormal basis of the orthogonal complement of the span of the
/// orthonormal columns of `q` inside R^n.
pub fn orthogonal_complement(q: &DMatrix<f64>) -> DMatrix<f64> {
    if q.ncols() == 0 {
        return DMatrix::identity(q.nrows(), q.nrows());
    }
    complete_orthonormal_basis(q)
}

/// Principal angles between the spans of two frames (orthonormalized
/// internally); both must live in the same ambient dimension. Small angles
/// are recovered from the sine-based formulation so that equal subspaces
/// report angles at machine precision rather than the acos noise floor.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    if a.ncols() == 0 || b.ncols() == 0 {
        return Vec::new();
    }
    let qa = orthonormal_columns(a);
    let qb = orthonormal_columns(b);
    let prod = qa.transpose() * &qb;
    let mut cos_based: Vec<f64> = thin_svd(&prod)
        .singular_values
        .iter()
        .map(|s| s.clamp(-1.0, 1.0).acos())
        .collect();
    cos_based.sort_by(|x, y| x.partial_cmp(y).unwrap());
    // sin(theta_i) are the singular values of (I - Qa Qa^T) Qb.
    let resid = &qb - &qa * (qa.transpose() * &qb);
    let mut sin_based: Vec<f64> = thin_svd(&resid)
        .singular_values
        .iter()
        .map(|s| s.clamp(-1.0, 1.0).asin())
        .collect();
    sin_based.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cos_based
        .iter()
        .zip(sin_based.iter())
        .map(|(&c, &s)| if c < std::f64::consts::FRAC_PI_4 { s } else { c })
        .collect()
}

/// Grassmann (geodesic) distance: l2 norm of the principal angles.
pub fn grassmann_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    principal_angles(a, b)
        .iter()
        .map(|t| t * t)
        .sum::<f64>()
        .sqrt()
}

/// Rank of `m` with singular values below `rel_tol * scale` treated as zero.
pub fn rank_with_scale(m: &DMatrix<f64>, scale: f64, rel_tol: f64) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    thin_svd(m).rank_with_scale(scale, rel_tol)
}

/// Least-squares solve via the truncated pseudo-inverse: singular values
/// below `rel_tol * scale` are dropped. Returns pinv(m) * rhs.
pub fn pseudo_solve(m: &DMatrix<f64>, rhs: &DMatrix<f64>, scale: f64, rel_tol: f64) -> DMatrix<f64> {
    if m.ncols() == 0 {
        return DMatrix::zeros(0, rhs.ncols());
    }
    let svd = thin_svd(m);
    let thresh = rel_tol * scale.max(1e-300);
    let r = svd.singular_values.len();
    let mut sinv = DMatrix::zeros(r, r);
    for i in 0..r {
        let s = svd.singular_values[i];
        if s > thresh {
            sinv[(i, i)] = 1.0 / s;
        }
    }
    &svd.v * sinv * svd.u.transpose() * rhs
}

/// Largest singular value (0 for empty matrices).
pub fn sigma_max(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0.0;
    }
    thin_svd(m).sigma_max()
}

/// Operator norm of a symmetric matrix: largest absolute eigenvalue.
pub fn sym_op_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let (vals, _) = sym_eigen(m);
    vals.iter().fold(0.0_f64, |a, &l| a.max(l.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn symplectic_matrix_squares_to_minus_identity() {
        let j = symplectic_form_matrix(3);
        let jj = &j * &j;
        assert_relative_eq!(jj, -DMatrix::identity(6, 6), epsilon = 1e-14);
    }

    #[test]
    fn symplectify_restores_structure() {
        let m = 2;
        let t: f64 = 0.7;
        let mut phi = DMatrix::zeros(4, 4);
        for i in 0..m {
            phi[(i, i)] = t.cos();
            phi[(i, m + i)] = t.sin();
            phi[(m + i, i)] = -t.sin();
            phi[(m + i, m + i)] = t.cos();
        }
        phi[(0, 1)] += 3e-6;
        let fixed = symplectify(&phi).unwrap();
        assert!(symplectic_defect_raw(&fixed) < 1e-13);
        assert!((&fixed - &phi).norm() < 1e-4);
    }

    #[test]
    fn thin_svd_reconstructs_and_is_orthogonal() {
        let cases = vec![
            DMatrix::from_row_slice(2, 2, &[0.0873, -0.2823, -0.2823, 0.9127]),
            DMatrix::from_row_slice(1, 2, &[0.9553, 0.2955]),
            DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
            DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 2.0, -1.0, 0.0, 1.0, 1.0, 1.0]),
            DMatrix::zeros(3, 3),
        ];
        for a in cases {
            let svd = thin_svd(&a);
            let r = svd.singular_values.len();
            assert_eq!(r, a.nrows().min(a.ncols()));
            let sigma = DMatrix::from_fn(r, r, |i, j| {
                if i == j {
                    svd.singular_values[i]
                } else {
                    0.0
                }
            });
            let rec = &svd.u * sigma * svd.v.transpose();
            assert!((&rec - &a).norm() <= 1e-13 * (1.0 + a.norm()), "reconstruction");
            let iu = svd.u.transpose() * &svd.u;
            let iv = svd.v.transpose() * &svd.v;
            assert_relative_eq!(iu, DMatrix::identity(r, r), epsilon = 1e-12);
            assert_relative_eq!(iv, DMatrix::identity(r, r), epsilon = 1e-12);
            for w in svd.singular_values.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn thin_svd_projector_case_is_exact() {
        // The 2x2 orthogonal projector that defeats less careful SVDs.
        let v = (0.9553364891256195_f64, 0.29552020666129636_f64);
        let proj = DMatrix::from_row_slice(
            2,
            2,
            &[1.0 - v.0 * v.0, -v.0 * v.1, -v.0 * v.1, 1.0 - v.1 * v.1],
        );
        let svd = thin_svd(&proj);
        assert_relative_eq!(svd.singular_values[0], 1.0, epsilon = 1e-14);
        assert!(svd.singular_values[1].abs() < 1e-14);
        let u0 = svd.u.column(0);
        let dot = u0[0] * v.0 + u0[1] * v.1;
        assert!(dot.abs() < 1e-12, "top singular vector must be orthogonal to v");
    }

    #[test]
    fn sym_eigen_matches_hand_values() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (vals, vecs) = sym_eigen(&a);
        assert_relative_eq!(vals[0], 3.0, epsilon = 1e-13);
        assert_relative_eq!(vals[1], 1.0, epsilon = 1e-13);
        let rec = &vecs
            * DMatrix::from_fn(2, 2, |i, j| if i == j { vals[i] } else { 0.0 })
            * vecs.transpose();
        assert_relative_eq!(rec, a, epsilon = 1e-13);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let m = DMatrix::from_row_slice(1, 4, &[1.0, 0.0, 2.0, 0.0]);
        let ns = null_space(&m, 1e-10);
        assert_eq!(ns.ncols(), 3);
        let residual = (&m * &ns).norm();
        assert!(residual < 1e-12, "residual {residual}");
        let gram = ns.transpose() * &ns;
        assert_relative_eq!(gram, DMatrix::identity(3, 3), epsilon = 1e-12);
    }

    #[test]
    fn orthogonal_complement_is_orthogonal() {
        for theta in [0.3_f64, -0.1, 2.2, 1.57] {
            let q = DMatrix::from_column_slice(2, 1, &[theta.cos(), theta.sin()]);
            let e = orthogonal_complement(&q);
            assert_eq!(e.ncols(), 1);
            assert!(q.column(0).dot(&e.column(0)).abs() < 1e-14);
            assert_relative_eq!(e.column(0).norm(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn principal_angles_of_orthogonal_lines() {
        let a = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let b = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let angles = principal_angles(&a, &b);
        assert_eq!(angles.len(), 1);
        assert_relative_eq!(angles[0], std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
        // Equal subspaces: angles at machine precision.
        let d = grassmann_distance(&a, &a.clone());
        assert!(d < 1e-14, "distance {d}");
    }

    #[test]
    fn pseudo_solve_recovers_coefficients() {
        let m = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 2.0, 0.0]);
        let rhs = DMatrix::from_column_slice(3, 1, &[3.0, 4.0, 0.0]);
        let c = pseudo_solve(&m, &rhs, sigma_max(&m), 1e-12);
        assert_relative_eq!(c[(0, 0)], 3.0, epsilon = 1e-12);
        assert_relative_eq!(c[(1, 0)], 2.0, epsilon = 1e-12);
    }
}
