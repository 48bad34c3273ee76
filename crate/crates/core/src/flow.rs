//! The linear Hamiltonian flow X'(t) = A(t) X(t) on T = V x V associated
//! with the Jacobi equation, integrated as a family of transfer matrices
//! Phi(t0 -> t) with symplecticity control and dense output.

use crate::error::{Error, Result};
use crate::family::CurvatureFamily;
use crate::interval::Interval;
use crate::linalg::{
    symplectic_defect_raw, symplectic_defect_relative, symplectify, sym_op_norm,
};
use crate::tol::Tolerances;
use nalgebra::{DMatrix, DVector};

/// A point of phase space T = V x V: the value and derivative of a Jacobi
/// field at a fixed time.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseVector {
    pub value: DVector<f64>,
    pub derivative: DVector<f64>,
}

impl PhaseVector {
    pub fn new(value: DVector<f64>, derivative: DVector<f64>) -> Result<Self> {
        if value.len() != derivative.len() {
            return Err(Error::DimensionMismatch {
                expected: value.len(),
                actual: derivative.len(),
            });
        }
        Ok(PhaseVector { value, derivative })
    }

    pub fn dim(&self) -> usize {
        self.value.len()
    }

    pub fn from_column(col: &DVector<f64>) -> Self {
        let m = col.len() / 2;
        PhaseVector {
            value: col.rows(0, m).into_owned(),
            derivative: col.rows(m, m).into_owned(),
        }
    }

    pub fn to_column(&self) -> DVector<f64> {
        let m = self.dim();
        let mut col = DVector::zeros(2 * m);
        col.rows_mut(0, m).copy_from(&self.value);
        col.rows_mut(m, m).copy_from(&self.derivative);
        col
    }

    pub fn norm(&self) -> f64 {
        (self.value.norm_squared() + self.derivative.norm_squared()).sqrt()
    }
}

/// The canonical symplectic form omega((v1,w1),(v2,w2)) = <v1,w2> - <w1,v2>,
/// constant along the flow.
pub fn omega(p: &PhaseVector, q: &PhaseVector) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            actual: q.dim(),
        });
    }
    Ok(p.value.dot(&q.derivative) - p.derivative.dot(&q.value))
}

/// A(t) = [[0, I], [-R(t), 0]]; J A(t) is symmetric, so the flow is
/// symplectic.
pub fn hamiltonian_matrix(family: &CurvatureFamily, t: f64) -> Result<DMatrix<f64>> {
    let r = family.evaluate(t)?;
    let m = family.dim();
    let mut a = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        a[(i, m + i)] = 1.0;
    }
    for i in 0..m {
        for j in 0..m {
            a[(m + i, j)] = -r[(i, j)];
        }
    }
    Ok(a)
}

/// Options controlling [`integrate`].
#[derive(Clone, Copy, Debug)]
pub struct IntegrationOptions {
    pub tol: Tolerances,
    /// Optional cap on the accepted step size.
    pub max_step: Option<f64>,
    pub min_step: f64,
    /// Fixed step size; disables adaptivity (convergence studies).
    pub fixed_step: Option<f64>,
    /// Re-project onto the symplectic group when the defect exceeds
    /// sympl/2.
    pub reproject: bool,
    pub max_steps: usize,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        IntegrationOptions {
            tol: Tolerances::default(),
            max_step: None,
            min_step: 1e-12,
            fixed_step: None,
            reproject: true,
            max_steps: 4_000_000,
        }
    }
}

impl IntegrationOptions {
    pub fn with_tolerances(tol: Tolerances) -> Self {
        IntegrationOptions {
            tol,
            ..Default::default()
        }
    }
}

/// Grid node: transfer matrix and its time derivative A(t) Phi.
#[derive(Clone, Debug)]
struct Node {
    t: f64,
    phi: DMatrix<f64>,
    dphi: DMatrix<f64>,
}

/// Dense-output fundamental solution Phi(t0 -> t) of X' = A(t)X over a time
/// range containing the anchor t0. Immutable; safe to evaluate concurrently.
#[derive(Clone, Debug)]
pub struct FundamentalSolution {
    family: CurvatureFamily,
    anchor: f64,
    nodes: Vec<Node>,
    steps: usize,
    max_defect: f64,
    max_defect_rel: f64,
}

fn rk4_step(
    family: &CurvatureFamily,
    t: f64,
    phi: &DMatrix<f64>,
    h: f64,
) -> Result<DMatrix<f64>> {
    let k1 = hamiltonian_matrix(family, t)? * phi;
    let k2 = hamiltonian_matrix(family, t + 0.5 * h)? * (phi + 0.5 * h * &k1);
    let k3 = hamiltonian_matrix(family, t + 0.5 * h)? * (phi + 0.5 * h * &k2);
    let k4 = hamiltonian_matrix(family, t + h)? * (phi + h * &k3);
    Ok(phi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

/// Integrate the flow from the anchor t0 over `interval` (which need not
/// contain t0; the integrated range always covers both).
///
/// Classical RK4 with step-doubling error control, plus re-projection onto
/// the symplectic group whenever the relative defect exceeds half the
/// tolerance. Deterministic for fixed options.
pub fn integrate(
    family: &CurvatureFamily,
    t0: f64,
    interval: Interval,
    opts: &IntegrationOptions,
) -> Result<FundamentalSolution> {
    family.check_domain(t0)?;
    family.check_domain(interval.lo)?;
    family.check_domain(interval.hi)?;

    let m = family.dim();
    let lo = interval.lo.min(t0);
    let hi = interval.hi.max(t0);

    // Cap the grid spacing so that (a) cubic Hermite dense output meets the
    // dense tolerance, and (b) no focal cluster can hide between nodes
    // (spacing <= min_focal_gap / 4).
    let c2 = family.norm_bound().max(0.0);
    let h_dense = (384.0 * opts.tol.dense).powf(0.25) / (1.0 + c2).sqrt();
    let c = c2.sqrt();
    let h_gap = if c > 0.0 { 1.0 / (8.0 * c) } else { f64::INFINITY };
    let span = (hi - lo).max(1e-9);
    let mut h_cap = h_dense.min(h_gap).min(span / 8.0);
    if let Some(hm) = opts.max_step {
        h_cap = h_cap.min(hm);
    }
    // A fixed step is taken literally (convergence and defect studies).
    if let Some(hf) = opts.fixed_step {
        h_cap = hf.abs();
    }

    let mut steps = 0usize;
    let mut max_defect = 0.0_f64;
    let mut max_defect_rel = 0.0_f64;

    let mut march = |target: f64| -> Result<Vec<Node>> {
        let mut out = Vec::new();
        if (target - t0).abs() == 0.0 {
            return Ok(out);
        }
        let dir = (target - t0).signum();
        let mut t = t0;
        let mut phi: DMatrix<f64> = DMatrix::identity(2 * m, 2 * m);
        let mut h = h_cap.min((target - t0).abs());
        loop {
            if steps >= opts.max_steps {
                return Err(Error::StepUnderflow { t });
            }
            h = h.min((target - t).abs()).min(h_cap);
            if h < opts.min_step {
                return Err(Error::StepUnderflow { t });
            }
            let hs = dir * h;
            let (next, err_rel) = if opts.fixed_step.is_some() {
                (rk4_step(family, t, &phi, hs)?, 0.0)
            } else {
                let big = rk4_step(family, t, &phi, hs)?;
                let half = rk4_step(family, t, &phi, 0.5 * hs)?;
                let two = rk4_step(family, t + 0.5 * hs, &half, 0.5 * hs)?;
                let scale = two.norm().max(1.0);
                let err = (&two - &big).norm() / 15.0 / scale;
                // Local extrapolation: the doubled step is fifth-order.
                (&two + (&two - &big) / 15.0, err)
            };
            steps += 1;
            let accept = opts.fixed_step.is_some() || err_rel <= opts.tol.step * h;
            if accept {
                t += hs;
                phi = next;
                let rel = symplectic_defect_relative(&phi);
                if rel > 0.5 * opts.tol.sympl && opts.reproject {
                    phi = symplectify(&phi).map_err(|_| Error::SymplecticDefect {
                        defect: rel,
                        t,
                    })?;
                }
                let rel2 = symplectic_defect_relative(&phi);
                if rel2 > opts.tol.sympl && opts.reproject {
                    return Err(Error::SymplecticDefect { defect: rel2, t });
                }
                max_defect = max_defect.max(symplectic_defect_raw(&phi));
                max_defect_rel = max_defect_rel.max(rel2);
                // Norm-bound invariant, checked at accepted nodes.
                let r = family.evaluate(t)?;
                let rnorm = sym_op_norm(&r);
                if rnorm > family.norm_bound() * (1.0 + 1e-9) + 1e-12 {
                    return Err(Error::NormBoundViolated {
                        t,
                        norm: rnorm,
                        bound: family.norm_bound(),
                    });
                }
                let dphi = hamiltonian_matrix(family, t)? * &phi;
                out.push(Node {
                    t,
                    phi: phi.clone(),
                    dphi,
                });
                if (t - target).abs() < 1e-14 * (1.0 + target.abs()) || (dir > 0.0 && t >= target) || (dir < 0.0 && t <= target) {
                    break;
                }
            }
            if opts.fixed_step.is_none() {
                let grow = if err_rel > 0.0 {
                    0.9 * (opts.tol.step * h / err_rel).powf(0.2)
                } else {
                    4.0
                };
                h *= grow.clamp(0.25, 4.0);
            }
        }
        Ok(out)
    };

    let forward = march(hi)?;
    let mut backward = march(lo)?;
    backward.reverse();

    let a0 = hamiltonian_matrix(family, t0)?;
    let mut nodes = backward;
    nodes.push(Node {
        t: t0,
        phi: DMatrix::identity(2 * m, 2 * m),
        dphi: a0,
    });
    nodes.extend(forward);

    Ok(FundamentalSolution {
        family: family.clone(),
        anchor: t0,
        nodes,
        steps,
        max_defect,
        max_defect_rel,
    })
}

impl FundamentalSolution {
    pub fn family(&self) -> &CurvatureFamily {
        &self.family
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    /// Integrated time range.
    pub fn range(&self) -> Interval {
        Interval {
            lo: self.nodes.first().map(|n| n.t).unwrap_or(self.anchor),
            hi: self.nodes.last().map(|n| n.t).unwrap_or(self.anchor),
        }
    }

    pub fn grid(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.t).collect()
    }

    /// Median grid spacing, used to inherit resolutions downstream.
    pub fn median_spacing(&self) -> f64 {
        if self.nodes.len() < 2 {
            return self.range().len().max(1e-6);
        }
        let mut gaps: Vec<f64> = self
            .nodes
            .windows(2)
            .map(|w| (w[1].t - w[0].t).abs())
            .collect();
        gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        gaps[gaps.len() / 2]
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    /// Max Frobenius defect |Phi^T J Phi - J| over the grid.
    pub fn symplectic_defect(&self) -> f64 {
        self.max_defect
    }

    /// Defect normalized by the squared transfer-matrix scale.
    pub fn symplectic_defect_relative(&self) -> f64 {
        self.max_defect_rel
    }

    fn check_range(&self, t: f64) -> Result<()> {
        let r = self.range();
        if r.contains(t) {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                t,
                lo: r.lo,
                hi: r.hi,
            })
        }
    }

    /// Phi(t0 -> t) via cubic Hermite interpolation between grid nodes.
    pub fn transfer(&self, t: f64) -> Result<DMatrix<f64>> {
        self.check_range(t)?;
        let n = self.nodes.len();
        if n == 1 {
            return Ok(self.nodes[0].phi.clone());
        }
        let mut i = self.nodes.partition_point(|node| node.t < t);
        i = i.clamp(1, n - 1);
        let a = &self.nodes[i - 1];
        let b = &self.nodes[i];
        let h = b.t - a.t;
        if h <= 0.0 {
            return Ok(a.phi.clone());
        }
        let s = ((t - a.t) / h).clamp(0.0, 1.0);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Ok(h00 * &a.phi + (h10 * h) * &a.dphi + h01 * &b.phi + (h11 * h) * &b.dphi)
    }

    /// Apply the flow to an initial condition at the anchor.
    pub fn evaluate(&self, x0: &PhaseVector, t: f64) -> Result<PhaseVector> {
        if x0.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x0.dim(),
            });
        }
        let phi = self.transfer(t)?;
        Ok(PhaseVector::from_column(&(phi * x0.to_column())))
    }
}

/// Max raw symplectic defect over the stored grid (operation form).
pub fn symplectic_defect(sol: &FundamentalSolution) -> f64 {
    sol.symplectic_defect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dom(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    fn constant(m: usize, kappa: f64, lo: f64, hi: f64) -> CurvatureFamily {
        CurvatureFamily::constant_scalar(m, kappa, dom(lo, hi)).unwrap()
    }

    #[test]
    fn hamiltonian_matrix_zero_curvature() {
        let fam = constant(1, 0.0, 0.0, 1.0);
        let a = hamiltonian_matrix(&fam, 0.3).unwrap();
        assert_relative_eq!(a, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn hamiltonian_matrix_unit_curvature() {
        let fam = constant(1, 1.0, 0.0, 1.0);
        let a = hamiltonian_matrix(&fam, 0.5).unwrap();
        assert_relative_eq!(a, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
    }

    #[test]
    fn hamiltonian_matrix_diagonal_block_form() {
        let fam = CurvatureFamily::constant(
            2,
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]),
            dom(-1.0, 1.0),
        )
        .unwrap();
        let a = hamiltonian_matrix(&fam, 0.0).unwrap();
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 0.0, 1.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                -1.0, 0.0, 0.0, 0.0, //
                0.0, -4.0, 0.0, 0.0,
            ],
        );
        assert_relative_eq!(a, expected);
        // (JA)^T = JA: A lies in the symplectic Lie algebra.
        let j = crate::linalg::symplectic_form_matrix(2);
        let ja = &j * &a;
        assert_relative_eq!(ja, ja.transpose(), epsilon = 1e-14);
    }

    #[test]
    fn hamiltonian_matrix_out_of_domain() {
        let fam = constant(1, 1.0, 0.0, 1.0);
        assert!(hamiltonian_matrix(&fam, 2.0).is_err());
    }

    #[test]
    fn free_particle_transfer_is_shear() {
        let fam = constant(1, 0.0, 0.0, 10.0);
        let sol = integrate(&fam, 0.0, dom(0.0, 10.0), &Default::default()).unwrap();
        for &t in &[0.5, 2.0, 7.3] {
            let phi = sol.transfer(t).unwrap();
            let expected = DMatrix::from_row_slice(2, 2, &[1.0, t, 0.0, 1.0]);
            assert_relative_eq!(phi, expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn unit_curvature_transfer_is_rotation() {
        let fam = constant(1, 1.0, 0.0, 10.0);
        let sol = integrate(&fam, 0.0, dom(0.0, 10.0), &Default::default()).unwrap();
        let mut worst = 0.0_f64;
        for i in 0..=200 {
            let t = 10.0 * i as f64 / 200.0;
            let phi = sol.transfer(t).unwrap();
            let expected =
                DMatrix::from_row_slice(2, 2, &[t.cos(), t.sin(), -t.sin(), t.cos()]);
            worst = worst.max((&phi - expected).norm());
        }
        assert!(worst <= 1e-9, "max error {worst}");
    }

    #[test]
    fn negative_curvature_transfer_is_hyperbolic() {
        let fam = constant(1, -1.0, 0.0, 5.0);
        let sol = integrate(&fam, 0.0, dom(0.0, 5.0), &Default::default()).unwrap();
        let mut worst = 0.0_f64;
        for i in 0..=100 {
            let t = 5.0 * i as f64 / 100.0;
            let phi = sol.transfer(t).unwrap();
            let expected =
                DMatrix::from_row_slice(2, 2, &[t.cosh(), t.sinh(), t.sinh(), t.cosh()]);
            worst = worst.max((&phi - expected).norm() / phi.norm());
        }
        assert!(worst <= 1e-9, "max relative error {worst}");
    }

    #[test]
    fn evaluate_matches_closed_forms() {
        let flat = constant(1, 0.0, 0.0, 5.0);
        let sol = integrate(&flat, 0.0, dom(0.0, 5.0), &Default::default()).unwrap();
        let x0 = PhaseVector::new(DVector::from_vec(vec![0.0]), DVector::from_vec(vec![1.0]))
            .unwrap();
        let x = sol.evaluate(&x0, 2.0).unwrap();
        assert_relative_eq!(x.value[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(x.derivative[0], 1.0, epsilon = 1e-12);

        let round = constant(1, 1.0, 0.0, 5.0);
        let sol = integrate(&round, 0.0, dom(0.0, 5.0), &Default::default()).unwrap();
        let sine = sol.evaluate(&x0, std::f64::consts::FRAC_PI_2).unwrap();
        assert_relative_eq!(sine.value[0], 1.0, epsilon = 1e-8);
        assert_relative_eq!(sine.derivative[0], 0.0, epsilon = 1e-8);
        let x1 = PhaseVector::new(DVector::from_vec(vec![1.0]), DVector::from_vec(vec![0.0]))
            .unwrap();
        let cosine = sol.evaluate(&x1, std::f64::consts::PI).unwrap();
        assert_relative_eq!(cosine.value[0], -1.0, epsilon = 1e-8);
        assert_relative_eq!(cosine.derivative[0], 0.0, epsilon = 1e-8);
    }

    #[test]
    fn evaluate_outside_range_is_an_error() {
        let fam = constant(1, 0.0, 0.0, 5.0);
        let sol = integrate(&fam, 0.0, dom(0.0, 2.0), &Default::default()).unwrap();
        let x0 = PhaseVector::new(DVector::from_vec(vec![0.0]), DVector::from_vec(vec![1.0]))
            .unwrap();
        assert!(sol.evaluate(&x0, 3.0).is_err());
    }

    #[test]
    fn omega_canonical_pairs() {
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        let e2 = DVector::from_vec(vec![0.0, 1.0]);
        let zero = DVector::from_vec(vec![0.0, 0.0]);
        let p = PhaseVector::new(e1.clone(), zero.clone()).unwrap();
        let q = PhaseVector::new(zero.clone(), e1.clone()).unwrap();
        assert_relative_eq!(omega(&p, &q).unwrap(), 1.0);
        let r = PhaseVector::new(e2.clone(), zero.clone()).unwrap();
        assert_relative_eq!(omega(&p, &r).unwrap(), 0.0);
        let s = PhaseVector::new(e1.clone(), e2.clone()).unwrap();
        let u = PhaseVector::new(e2, e1).unwrap();
        assert_relative_eq!(omega(&s, &u).unwrap(), 0.0);
        assert_relative_eq!(omega(&s, &s).unwrap(), 0.0);
    }

    #[test]
    fn omega_dimension_mismatch() {
        let p = PhaseVector::new(DVector::zeros(2), DVector::zeros(2)).unwrap();
        let q = PhaseVector::new(DVector::zeros(3), DVector::zeros(3)).unwrap();
        assert!(omega(&p, &q).is_err());
    }

    #[test]
    fn symplectic_defect_small_on_rotation_flow() {
        let fam = constant(1, 1.0, 0.0, 10.0);
        let sol = integrate(&fam, 0.0, dom(0.0, 10.0), &Default::default()).unwrap();
        assert!(sol.symplectic_defect() <= 1e-9, "{}", sol.symplectic_defect());
    }

    #[test]
    fn coarse_step_defect_dominates_fine_step_defect() {
        let fam = constant(1, 1.0, 0.0, 10.0);
        let coarse = IntegrationOptions {
            fixed_step: Some(0.5),
            reproject: false,
            ..Default::default()
        };
        let fine = IntegrationOptions {
            fixed_step: Some(0.05),
            reproject: false,
            ..Default::default()
        };
        let d_coarse = integrate(&fam, 0.0, dom(0.0, 10.0), &coarse)
            .unwrap()
            .symplectic_defect();
        let d_fine = integrate(&fam, 0.0, dom(0.0, 10.0), &fine)
            .unwrap()
            .symplectic_defect();
        assert!(
            d_coarse > d_fine,
            "coarse {d_coarse} should exceed fine {d_fine}"
        );
    }

    #[test]
    fn convergence_order_is_fourth() {
        // Fixed-step errors against the rotation oracle drop by ~2^4 when
        // the step is halved (within a factor of two).
        let fam = constant(1, 1.0, 0.0, 4.0);
        let err_for = |h: f64| -> f64 {
            let opts = IntegrationOptions {
                fixed_step: Some(h),
                reproject: false,
                ..Default::default()
            };
            let sol = integrate(&fam, 0.0, dom(0.0, 4.0), &opts).unwrap();
            let t = 4.0;
            let phi = sol.transfer(t).unwrap();
            let expected =
                DMatrix::from_row_slice(2, 2, &[t.cos(), t.sin(), -t.sin(), t.cos()]);
            (&phi - expected).norm()
        };
        let e1 = err_for(0.02);
        let e2 = err_for(0.01);
        let ratio = e1 / e2;
        assert!(
            (8.0..=32.0).contains(&ratio),
            "order-4 ratio expected in [8,32], got {ratio}"
        );
    }

    #[test]
    fn backward_integration_covers_negative_times() {
        let fam = constant(1, 1.0, -5.0, 5.0);
        let sol = integrate(&fam, 0.0, dom(-3.0, 3.0), &Default::default()).unwrap();
        let t = -2.0_f64;
        let phi = sol.transfer(t).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[t.cos(), t.sin(), -t.sin(), t.cos()]);
        assert_relative_eq!(phi, expected, epsilon = 1e-9);
    }

    #[test]
    fn omega_is_constant_along_the_flow() {
        // |omega(X1(t1),X2(t1)) - omega(X1(t2),X2(t2))| stays within
        // 10 * sympl * |X1(t0)| * |X2(t0)|.
        let fam = CurvatureFamily::constant(
            2,
            DMatrix::from_row_slice(2, 2, &[0.3, -0.4, -0.4, 1.2]),
            dom(0.0, 8.0),
        )
        .unwrap();
        let opts = IntegrationOptions::default();
        let sol = integrate(&fam, 0.0, dom(0.0, 8.0), &opts).unwrap();
        let x1 = PhaseVector::new(
            DVector::from_vec(vec![1.0, -0.3]),
            DVector::from_vec(vec![0.2, 0.9]),
        )
        .unwrap();
        let x2 = PhaseVector::new(
            DVector::from_vec(vec![-0.5, 0.8]),
            DVector::from_vec(vec![1.1, 0.4]),
        )
        .unwrap();
        let budget = 10.0 * opts.tol.sympl * x1.norm() * x2.norm();
        let base = omega(&x1, &x2).unwrap();
        for i in 0..=40 {
            let t = 8.0 * i as f64 / 40.0;
            let w = omega(
                &sol.evaluate(&x1, t).unwrap(),
                &sol.evaluate(&x2, t).unwrap(),
            )
            .unwrap();
            assert!(
                (w - base).abs() <= budget.max(1e-12),
                "omega drift {} at t={t}",
                (w - base).abs()
            );
        }
    }

    #[test]
    fn cocycle_property_on_random_triples() {
        let fam = constant(2, 1.0, 0.0, 6.0);
        let opts = IntegrationOptions::default();
        let sol0 = integrate(&fam, 0.0, dom(0.0, 6.0), &opts).unwrap();
        for &(t1, t2) in &[(1.0_f64, 4.0_f64), (2.5, 5.5), (0.5, 3.0)] {
            let sol1 = integrate(&fam, t1, dom(t1, t2), &opts).unwrap();
            let lhs = sol0.transfer(t2).unwrap();
            let rhs = sol1.transfer(t2).unwrap() * sol0.transfer(t1).unwrap();
            assert!(
                (&lhs - &rhs).norm() < 1e-8,
                "cocycle defect {}",
                (&lhs - &rhs).norm()
            );
        }
    }
}
