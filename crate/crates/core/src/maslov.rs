//! Maslov-Arnold index of the Lagrangian curve traced by the flow, via
//! crossing forms against the reference Lagrangian {0} x V and via an
//! independent winding number in the unitary parametrization of the
//! Lagrangian Grassmannian.

use crate::error::{Error, Result};
use crate::flow::{hamiltonian_matrix, FundamentalSolution};
use crate::interval::Interval;
use crate::linalg::{orthonormal_columns, sigma_max};
use crate::subspace::{locate_focal_points, JacobiSubspace, SubspaceClass};
use crate::tol::Tolerances;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

/// The curve t -> Lambda(t) = Phi(t0 -> t) Lambda in the Lagrangian
/// Grassmannian of (T, omega), with the fixed reference Lambda_0 = {0} x V.
pub struct LagrangianCurve<'a> {
    lagrangian: &'a JacobiSubspace,
    sol: &'a FundamentalSolution,
}

impl<'a> LagrangianCurve<'a> {
    pub fn new(lagrangian: &'a JacobiSubspace, sol: &'a FundamentalSolution) -> Result<Self> {
        if lagrangian.class() != SubspaceClass::Lagrangian {
            return Err(Error::NotIsotropicInput);
        }
        lagrangian.check_anchor(sol)?;
        Ok(LagrangianCurve { lagrangian, sol })
    }

    pub fn lagrangian(&self) -> &JacobiSubspace {
        self.lagrangian
    }

    pub fn sol(&self) -> &FundamentalSolution {
        self.sol
    }
}

/// A crossing of the curve with the reference Lagrangian.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CrossingReport {
    pub time: f64,
    pub intersection_dim: usize,
    pub crossing_eigenvalues: Vec<f64>,
}

/// The crossing form B(x, y) = omega(A(t) x, y) restricted to an
/// orthonormal basis of F_t = Lambda(t) with the reference Lagrangian,
/// realized inside {0} x V from the kernel of the evaluation matrix.
pub fn crossing_form(curve: &LagrangianCurve, t: f64, tol: &Tolerances) -> Result<DMatrix<f64>> {
    let w = curve.lagrangian;
    let sol = curve.sol;
    let m = w.ambient_dim();
    let p = w.phase_evaluation(sol, t)?;
    let values = p.rows(0, m).into_owned();
    let scale = sigma_max(&p).max(1e-300);
    let vmax = sigma_max(&values);
    let kernel = if vmax <= tol.rank * scale {
        DMatrix::identity(w.dim(), w.dim())
    } else {
        crate::linalg::null_space(&values, tol.rank * scale / vmax)
    };
    let mu = kernel.ncols();
    if mu == 0 {
        return Err(Error::Precondition(format!("t = {t} is not a crossing")));
    }
    // Kernel phase vectors have (near-)zero value part; their derivative
    // parts span F_t inside Lambda_0 = {0} x V.
    let derivs = p.rows(m, m).into_owned() * &kernel;
    let basis = orthonormal_columns(&derivs);
    let a = hamiltonian_matrix(sol.family(), t)?;
    let mut b = DMatrix::zeros(mu, mu);
    for i in 0..mu {
        let mut xi = DVector::zeros(2 * m);
        xi.rows_mut(m, m).copy_from(&basis.column(i).into_owned());
        let axi = &a * &xi;
        for j in 0..mu {
            let mut xj = DVector::zeros(2 * m);
            xj.rows_mut(m, m).copy_from(&basis.column(j).into_owned());
            b[(i, j)] = crate::linalg::omega_columns(&axi, &xj);
        }
    }
    Ok(0.5 * (&b + b.transpose()))
}

/// All interior crossings over an interval, with crossing-form eigenvalues.
pub fn crossings(
    curve: &LagrangianCurve,
    interval: Interval,
    tol: &Tolerances,
) -> Result<Vec<CrossingReport>> {
    let report = locate_focal_points(curve.lagrangian, curve.sol, interval, tol)?;
    let mut out = Vec::new();
    for e in &report.events {
        let b = crossing_form(curve, e.time, tol)?;
        let eig = b.symmetric_eigen();
        out.push(CrossingReport {
            time: e.time,
            intersection_dim: e.multiplicity,
            crossing_eigenvalues: eig.eigenvalues.iter().copied().collect(),
        });
    }
    Ok(out)
}

fn require_nonfocal_endpoints(
    curve: &LagrangianCurve,
    interval: Interval,
    tol: &Tolerances,
) -> Result<()> {
    for t in [interval.lo, interval.hi] {
        let f = curve.lagrangian.focal_index(curve.sol, t, tol)?;
        if f > 0 {
            return Err(Error::FocalEndpoint { t, index: f });
        }
    }
    Ok(())
}

/// Maslov-Arnold index over [a, b] with non-focal endpoints: the sum of
/// crossing-form signatures over interior crossings. The form is positive
/// definite for Jacobi flows, so this equals the sum of intersection
/// dimensions and the interval index.
pub fn maslov_index(
    curve: &LagrangianCurve,
    interval: Interval,
    tol: &Tolerances,
) -> Result<i64> {
    require_nonfocal_endpoints(curve, interval, tol)?;
    let reports = crossings(curve, interval, tol)?;
    let mut total = 0_i64;
    for c in &reports {
        for &l in &c.crossing_eigenvalues {
            if l > 1e-6 {
                total += 1;
            } else if l < -1e-6 {
                total -= 1;
            }
        }
    }
    Ok(total)
}

/// Unitary-parametrization data of the plane spanned by an orthonormalized
/// frame [X; Y]: Z = X - iY is unitary; det(Z)^2 descends to the
/// Grassmannian and generates its fundamental group.
fn square_det(sol: &FundamentalSolution, frame: &DMatrix<f64>, t: f64) -> Result<Complex<f64>> {
    let g = sol.transfer(t)? * frame;
    let q = orthonormal_columns(&g);
    let m = q.nrows() / 2;
    let k = q.ncols();
    let mut z = DMatrix::<Complex<f64>>::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            z[(i, j)] = Complex::new(q[(i, j)], -q[(m + i, j)]);
        }
    }
    let det = z.lu().determinant();
    let d2 = det * det;
    let n = d2.norm();
    if n <= 0.0 {
        return Err(Error::Precondition(format!(
            "degenerate unitary frame at t = {t}"
        )));
    }
    Ok(d2 / n)
}

/// Angles of a symmetric unitary matrix S = Q diag(e^{i phi}) Q^T with Q
/// real orthogonal: joint diagonalization of the commuting real and
/// imaginary parts.
fn symmetric_unitary_angles(s: &DMatrix<Complex<f64>>) -> Result<Vec<f64>> {
    let n = s.nrows();
    let a = DMatrix::from_fn(n, n, |i, j| s[(i, j)].re);
    let b = DMatrix::from_fn(n, n, |i, j| s[(i, j)].im);
    let eig = a.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let mut angles = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n
            && (eig.eigenvalues[order[end]] - eig.eigenvalues[order[start]]).abs() < 1e-8
        {
            end += 1;
        }
        let dim = end - start;
        let mut basis = DMatrix::zeros(n, dim);
        for (c, &idx) in order[start..end].iter().enumerate() {
            basis.set_column(c, &eig.eigenvectors.column(idx).into_owned());
        }
        let bc = basis.transpose() * &b * &basis;
        let sub = bc.symmetric_eigen();
        for c in 0..dim {
            let v = &basis * sub.eigenvectors.column(c).into_owned();
            let av = v.dot(&(&a * &v));
            let bv = v.dot(&(&b * &v));
            let r = (av * av + bv * bv).sqrt();
            if (r - 1.0).abs() > 1e-6 {
                return Err(Error::Precondition(format!(
                    "symmetric unitary eigenvalue off the circle: |.| = {r}"
                )));
            }
            angles.push(bv.atan2(av));
        }
        start = end;
    }
    Ok(angles)
}

fn plane_s_matrix(sol: &FundamentalSolution, frame: &DMatrix<f64>, t: f64) -> Result<DMatrix<Complex<f64>>> {
    let g = sol.transfer(t)? * frame;
    let q = orthonormal_columns(&g);
    let m = q.nrows() / 2;
    let k = q.ncols();
    let mut z = DMatrix::<Complex<f64>>::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            z[(i, j)] = Complex::new(q[(i, j)], -q[(m + i, j)]);
        }
    }
    Ok(&z * z.transpose())
}

/// Winding-number computation of the Maslov-Arnold index: track the
/// continuous argument of det(X - iY)^2 along the curve, close the loop
/// through the chart of Lagrangians transversal to the reference by
/// geodesics to the base plane V x {0}, and return the total winding.
///
/// The completion legs rotate each eigen-angle of the symmetric unitary
/// representative monotonically to zero; since the endpoint angles stay in
/// (-pi, pi) when the endpoints are non-focal, the legs cannot cross the
/// reference Lagrangian. Both the margin and the near-integrality of the
/// result are verified.
pub fn winding_index(
    curve: &LagrangianCurve,
    interval: Interval,
    tol: &Tolerances,
) -> Result<i64> {
    require_nonfocal_endpoints(curve, interval, tol)?;
    let sol = curve.sol;
    let frame = curve.lagrangian.frame();

    // Sample grid: integrator grid restricted to the interval, refined x4.
    let mut samples: Vec<f64> = vec![interval.lo];
    for t in sol.grid() {
        if t > interval.lo && t < interval.hi {
            samples.push(t);
        }
    }
    samples.push(interval.hi);
    let mut refined = Vec::with_capacity(samples.len() * 4);
    for w in samples.windows(2) {
        for i in 0..4 {
            refined.push(w[0] + (w[1] - w[0]) * i as f64 / 4.0);
        }
    }
    refined.push(interval.hi);

    // Continuous argument of det^2 along the curve, with adaptive midpoint
    // insertion whenever a jump reaches pi/2.
    let mut theta = 0.0_f64;
    let mut prev_t = refined[0];
    let mut prev = square_det(sol, frame, prev_t)?;
    let mut stack: Vec<f64> = refined[1..].iter().rev().copied().collect();
    let mut depth_guard = 0usize;
    while let Some(t) = stack.pop() {
        let cur = square_det(sol, frame, t)?;
        let jump = (cur / prev).arg();
        if jump.abs() >= std::f64::consts::FRAC_PI_2 {
            depth_guard += 1;
            if depth_guard > 10_000 || (t - prev_t).abs() < 1e-13 * (1.0 + t.abs()) {
                return Err(Error::WindingJump { jump, t });
            }
            stack.push(t);
            stack.push(0.5 * (prev_t + t));
            continue;
        }
        theta += jump;
        prev = cur;
        prev_t = t;
    }

    // Completion through the transversal chart via the base plane V x {0}.
    let s_lo = plane_s_matrix(sol, frame, interval.lo)?;
    let s_hi = plane_s_matrix(sol, frame, interval.hi)?;
    let ang_lo = symmetric_unitary_angles(&s_lo)?;
    let ang_hi = symmetric_unitary_angles(&s_hi)?;
    for (&a, which) in ang_lo
        .iter()
        .zip(std::iter::repeat("start"))
        .chain(ang_hi.iter().zip(std::iter::repeat("end")))
    {
        if std::f64::consts::PI - a.abs() <= 1e-9 {
            return Err(Error::Precondition(format!(
                "completion path at the {which} endpoint approaches a crossing (angle margin {:.3e})",
                std::f64::consts::PI - a.abs()
            )));
        }
    }
    let total = theta + ang_lo.iter().sum::<f64>() - ang_hi.iter().sum::<f64>();
    let winding = total / (2.0 * std::f64::consts::PI);
    let rounded = winding.round();
    if (winding - rounded).abs() > 0.05 {
        return Err(Error::Precondition(format!(
            "winding {winding} is not close to an integer"
        )));
    }
    Ok(rounded as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::CurvatureFamily;
    use crate::flow::integrate;
    use crate::subspace::index;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn dom(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    fn sphere_sol(m: usize, lo: f64, hi: f64) -> FundamentalSolution {
        let fam = CurvatureFamily::constant_scalar(m, 1.0, dom(lo, hi)).unwrap();
        integrate(&fam, 0.0, dom(lo, hi), &Default::default()).unwrap()
    }

    #[test]
    fn crossing_form_is_identity_for_unit_curvature() {
        // m = 1: at t = pi the kernel field is the sine, F spanned by
        // (0, -1), and B = [1] (B(x,x) = |x|^2 on {0} x V).
        let sol = sphere_sol(1, 0.0, 5.0);
        let lam = JacobiSubspace::lambda_at(1, 0.0);
        let curve = LagrangianCurve::new(&lam, &sol).unwrap();
        let b = crossing_form(&curve, PI, &tols()).unwrap();
        assert_eq!(b.nrows(), 1);
        assert_relative_eq!(b[(0, 0)], 1.0, epsilon = 1e-8);

        // m = 2: B = I_2 on the two-dimensional kernel.
        let sol = sphere_sol(2, 0.0, 5.0);
        let lam = JacobiSubspace::lambda_at(2, 0.0);
        let curve = LagrangianCurve::new(&lam, &sol).unwrap();
        let b = crossing_form(&curve, PI, &tols()).unwrap();
        assert_eq!(b.nrows(), 2);
        assert_relative_eq!(b, DMatrix::identity(2, 2), epsilon = 1e-7);
    }

    #[test]
    fn crossing_form_rejects_non_crossings() {
        let sol = sphere_sol(1, 0.0, 5.0);
        let lam = JacobiSubspace::lambda_at(1, 0.0);
        let curve = LagrangianCurve::new(&lam, &sol).unwrap();
        assert!(crossing_form(&curve, 1.0, &tols()).is_err());
    }

    #[test]
    fn maslov_index_matches_sine_oracle() {
        let sol = sphere_sol(2, 0.0, 10.2);
        let lam = JacobiSubspace::lambda_at(2, 0.0);
        let curve = LagrangianCurve::new(&lam, &sol).unwrap();
        let iv = dom(0.1, 3.2 * PI);
        assert_eq!(maslov_index(&curve, iv, &tols()).unwrap(), 6);
        assert_eq!(index(&lam, &sol, iv, &tols()).unwrap() as i64, 6);
    }

    #[test]
    fn maslov_index_flat_is_zero() {
        let fam = CurvatureFamily::constant_scalar(1, 0.0, dom(0.0, 50.0)).unwrap();
        let sol = integrate(&fam, 0.0, dom(0.0, 50.0), &Default::default()).unwrap();
        let lam = JacobiSubspace::lambda_at(1, 0.0);
        let curve = LagrangianCurve::new(&lam, &sol).unwrap();
        assert_eq!(maslov_index(&curve, dom(0.1, 50.0), &tols()).unwrap(), 0);
    }

    #[test]
    fn maslov_index_parallel_frame() {
        // V x {0}: J = cos, one crossing at pi/2 in [0.1, 2].
        let sol = sphere_sol(1, 0.0, 2.5);
        let lam = JacobiSubspace::parallel_at(1, 0.0);
        let curve = LagrangianCurve::new(&lam, &sol).unwrap();
        assert_eq!(maslov_index(&curve, dom(0.1, 2.0), &tols()).unwrap(), 1);
    }

    #[test]
    fn focal_endpoint_is_a_named_error() {
        let sol = sphere_sol(1, 0.0, 5.0);
        let lam = JacobiSubspace::lambda_at(1, 0.0);
        let curve = LagrangianCurve::new(&lam, &sol).unwrap();
        match maslov_index(&curve, dom(0.0, 2.0), &tols()) {
            Err(Error::FocalEndpoint { t, .. }) => assert_eq!(t, 0.0),
            other => panic!("expected focal endpoint error, got {other:?}"),
        }
    }

    #[test]
    fn winding_index_unit_curvature() {
        let sol = sphere_sol(1, 0.0, 4.0);
        let lam = JacobiSubspace::lambda_at(1, 0.0);
        let curve = LagrangianCurve::new(&lam, &sol).unwrap();
        assert_eq!(
            winding_index(&curve, dom(0.1, PI + 0.1), &tols()).unwrap(),
            1
        );
    }

    #[test]
    fn winding_index_flat_is_zero() {
        let fam = CurvatureFamily::constant_scalar(1, 0.0, dom(0.0, 50.0)).unwrap();
        let sol = integrate(&fam, 0.0, dom(0.0, 50.0), &Default::default()).unwrap();
        let lam = JacobiSubspace::lambda_at(1, 0.0);
        let curve = LagrangianCurve::new(&lam, &sol).unwrap();
        assert_eq!(winding_index(&curve, dom(0.1, 50.0), &tols()).unwrap(), 0);
    }

    #[test]
    fn winding_matches_maslov_on_multiplicity_two() {
        let sol = sphere_sol(2, 0.0, 10.2);
        let lam = JacobiSubspace::lambda_at(2, 0.0);
        let curve = LagrangianCurve::new(&lam, &sol).unwrap();
        let iv = dom(0.1, 3.2 * PI);
        assert_eq!(winding_index(&curve, iv, &tols()).unwrap(), 6);
    }

    #[test]
    fn perturbation_stability_of_the_index() {
        let base = CurvatureFamily::constant_scalar(2, 1.0, dom(0.0, 10.2)).unwrap();
        let bump = CurvatureFamily::constant(
            2,
            DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.1, -0.2]),
            dom(0.0, 10.2),
        )
        .unwrap();
        let iv = dom(0.1, 3.2 * PI);
        let lam = JacobiSubspace::lambda_at(2, 0.0);
        let sol0 = integrate(&base, 0.0, iv, &Default::default()).unwrap();
        let c0 = LagrangianCurve::new(&lam, &sol0).unwrap();
        let m0 = maslov_index(&c0, iv, &tols()).unwrap();
        for delta in [1e-3, 1e-4] {
            let fam = CurvatureFamily::sum(vec![base.clone(), bump.scaled(delta)]).unwrap();
            let sol = integrate(&fam, 0.0, iv, &Default::default()).unwrap();
            let c = LagrangianCurve::new(&lam, &sol).unwrap();
            assert_eq!(maslov_index(&c, iv, &tols()).unwrap(), m0);
        }
    }
}
