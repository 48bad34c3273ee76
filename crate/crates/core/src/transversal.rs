//! Transversal Jacobi equation with respect to an isotropic subspace W:
//! the moving bundle W-tilde, its orthogonal complement H with a parallel
//! frame, the O'Neill operator A, the reduced curvature
//! R^H = P(R .) + 3 A A*, quotient Lagrangians, and the index
//! decomposition ind_W + ind_{Lambda/W} = ind_Lambda.

use crate::error::{Error, Result};
use crate::family::CurvatureFamily;
use crate::flow::{integrate, FundamentalSolution, IntegrationOptions};
use crate::interval::Interval;
use crate::linalg::{
    orthogonal_complement, orthonormal_columns, polar_orthonormal, pseudo_solve, sigma_max,
};
use crate::subspace::{
    index, locate_focal_points, omega_gram_relative, omega_gram_schmidt, JacobiSubspace,
    SubspaceClass,
};
use crate::tol::Tolerances;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Relative singular value below which a value direction of the frame is
/// treated as exactly vanishing when assembling W-tilde. Far below the rank
/// tolerance so that grid nodes essentially never straddle the branch.
const WTILDE_SWITCH: f64 = 1e-12;

/// Construction options for [`TransversalSystem::build`].
#[derive(Clone, Debug, Default)]
pub struct TransversalOptions {
    /// Initial orthonormal basis of H at the left endpoint (defaults to the
    /// canonical complement of W-tilde there).
    pub initial_frame: Option<DMatrix<f64>>,
    /// Base grid spacing before residual-driven refinement.
    pub base_step: Option<f64>,
    /// Maximal number of grid halvings while chasing the frame tolerance.
    pub max_refinements: usize,
}

impl TransversalOptions {
    fn refinements(&self) -> usize {
        if self.max_refinements == 0 {
            8
        } else {
            self.max_refinements
        }
    }
}

fn split_phase(p: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let m = p.nrows() / 2;
    (p.rows(0, m).into_owned(), p.rows(m, m).into_owned())
}

/// W-tilde(t) = W(t) + {J'(t) | J in W, J(t) = 0} as an orthonormal m x k
/// basis: left singular vectors of the value matrix, augmented by the
/// derivative parts of kernel fields at focal times.
fn wtilde_from_eval(
    values: &DMatrix<f64>,
    derivs: &DMatrix<f64>,
    scale: f64,
    t: f64,
    k: usize,
) -> Result<DMatrix<f64>> {
    let m = values.nrows();
    if k == 0 {
        return Ok(DMatrix::zeros(m, 0));
    }
    let svd = values.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let thresh = WTILDE_SWITCH * scale.max(1e-300);
    // A thin SVD of a wide value matrix (k > m) cannot happen here: k <= m
    // for isotropic W.
    let mut cand = DMatrix::zeros(m, svd.singular_values.len());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > thresh {
            cand.set_column(i, &u.column(i).into_owned());
        } else {
            let d = derivs * vt.row(i).transpose();
            cand.set_column(i, &d);
        }
    }
    let q = orthonormal_columns(&cand);
    let rank = crate::linalg::rank_with_scale(&cand, sigma_max(&cand), 1e-8);
    if rank < k {
        return Err(Error::SubbundleRank {
            t,
            rank,
            expected: k,
        });
    }
    Ok(q)
}

/// Orthonormal basis of W-tilde(t) (pointwise, canonical gauge).
pub fn wtilde_basis(
    w: &JacobiSubspace,
    sol: &FundamentalSolution,
    t: f64,
    _tol: &Tolerances,
) -> Result<DMatrix<f64>> {
    if !w.class().is_isotropic() {
        return Err(Error::NotIsotropicInput);
    }
    let p = w.phase_evaluation(sol, t)?;
    let (values, derivs) = split_phase(&p);
    wtilde_from_eval(&values, &derivs, sigma_max(&p), t, w.dim())
}

/// The O'Neill-type operator and reduced curvature sample at one node, in
/// the bases (columns of `q` for W-tilde, columns of `e` for H).
fn oneill_at_node(
    values: &DMatrix<f64>,
    derivs: &DMatrix<f64>,
    scale: f64,
    q: &DMatrix<f64>,
    e: &DMatrix<f64>,
    rank_tol: f64,
) -> DMatrix<f64> {
    if q.ncols() == 0 || e.ncols() == 0 {
        return DMatrix::zeros(e.ncols(), q.ncols());
    }
    let c = pseudo_solve(values, q, scale, rank_tol);
    e.transpose() * (derivs * c)
}

fn reduced_sample(
    r: &DMatrix<f64>,
    e: &DMatrix<f64>,
    a: &DMatrix<f64>,
) -> DMatrix<f64> {
    let pr = e.transpose() * r * e;
    let sym = &pr + 3.0 * a * a.transpose();
    0.5 * (&sym + sym.transpose())
}

/// The assembled transversal system over an interval: per-node orthonormal
/// bases of W-tilde and H, the O'Neill operator matrices, and the reduced
/// curvature family (sampled kind, dimension m - k) ready for the full
/// index stack. Immutable after construction.
#[derive(Clone, Debug)]
pub struct TransversalSystem {
    base: JacobiSubspace,
    interval: Interval,
    step: f64,
    times: Vec<f64>,
    wtilde: Vec<DMatrix<f64>>,
    frame: Vec<DMatrix<f64>>,
    oneill: Vec<DMatrix<f64>>,
    reduced: CurvatureFamily,
    residual: f64,
    refinements: usize,
    w_focal_times: Vec<f64>,
}

impl TransversalSystem {
    /// Build bases, parallel frame, O'Neill operator and reduced family.
    ///
    /// The horizontal frame is propagated by discrete parallel transport
    /// (orthogonal projection onto the next fibre with a midpoint
    /// correction, then re-orthonormalization) and the grid is refined
    /// until the finite-difference parallelism residual max |P(E')| drops
    /// below the frame tolerance.
    pub fn build(
        w: &JacobiSubspace,
        sol: &FundamentalSolution,
        interval: Interval,
        tol: &Tolerances,
        opts: &TransversalOptions,
    ) -> Result<Self> {
        if !w.class().is_isotropic() {
            return Err(Error::NotIsotropicInput);
        }
        w.check_anchor(sol)?;
        if !sol.range().contains_interval(&interval) {
            return Err(Error::OutOfRange {
                t: interval.lo,
                lo: sol.range().lo,
                hi: sol.range().hi,
            });
        }
        let m = w.ambient_dim();
        let k = w.dim();
        let mk = m - k;
        let len = interval.len().max(1e-9);

        let w_report = locate_focal_points(w, sol, interval, tol)?;
        let w_focal_times = w_report.event_times();

        let mut h = opts
            .base_step
            .unwrap_or_else(|| {
                let base = (len / 256.0).min(sol.median_spacing());
                if w_focal_times.is_empty() {
                    base
                } else {
                    0.5 * base
                }
            })
            .min(len / 16.0);

        let mut last_residual = f64::INFINITY;
        for refinement in 0..=opts.refinements() {
            let n = (len / h).ceil() as usize;
            let n = n.clamp(16, 8_000_000);
            let he = len / n as f64;
            let times: Vec<f64> = (0..=n)
                .map(|i| interval.lo + len * i as f64 / n as f64)
                .collect();

            // Phase evaluations and aligned W-tilde bases.
            let mut vals = Vec::with_capacity(n + 1);
            let mut ders = Vec::with_capacity(n + 1);
            let mut scales = Vec::with_capacity(n + 1);
            let mut wt: Vec<DMatrix<f64>> = Vec::with_capacity(n + 1);
            for (i, &t) in times.iter().enumerate() {
                let p = w.phase_evaluation(sol, t)?;
                let (v, d) = split_phase(&p);
                let scale = sigma_max(&p);
                let mut q = wtilde_from_eval(&v, &d, scale, t, k)?;
                if i > 0 && k > 0 {
                    let align = polar_orthonormal(&(q.transpose() * &wt[i - 1]));
                    q *= align;
                }
                vals.push(v);
                ders.push(d);
                scales.push(scale);
                wt.push(q);
            }

            // Parallel transport of the horizontal frame.
            let mut e0 = match &opts.initial_frame {
                Some(f) => {
                    if f.nrows() != m || f.ncols() != mk {
                        return Err(Error::DimensionMismatch {
                            expected: mk,
                            actual: f.ncols(),
                        });
                    }
                    let proj = f - &wt[0] * (wt[0].transpose() * f);
                    polar_orthonormal(&proj)
                }
                None => orthogonal_complement(&wt[0]),
            };
            if e0.ncols() != mk {
                return Err(Error::SubbundleRank {
                    t: times[0],
                    rank: e0.ncols(),
                    expected: mk,
                });
            }
            let mut frames: Vec<DMatrix<f64>> = Vec::with_capacity(n + 1);
            frames.push(e0.clone());
            if k > 0 && mk > 0 {
                // Central-difference derivatives of the aligned bases.
                let qdot = |i: usize| -> DMatrix<f64> {
                    if i == 0 {
                        (&wt[1] - &wt[0]) / he
                    } else if i == n {
                        (&wt[n] - &wt[n - 1]) / he
                    } else {
                        (&wt[i + 1] - &wt[i - 1]) / (2.0 * he)
                    }
                };
                for i in 0..n {
                    let f_i = -(&wt[i]) * (qdot(i).transpose() * &e0);
                    let e_half = &e0 + (he / 2.0) * f_i;
                    let q_mid = polar_orthonormal(&(0.5 * (&wt[i] + &wt[i + 1])));
                    let qdot_mid = (&wt[i + 1] - &wt[i]) / he;
                    let f_mid = -q_mid * (qdot_mid.transpose() * e_half);
                    let e_raw = &e0 + he * f_mid;
                    let projected = &e_raw - &wt[i + 1] * (wt[i + 1].transpose() * &e_raw);
                    e0 = polar_orthonormal(&projected);
                    frames.push(e0.clone());
                }
            } else {
                for _ in 0..n {
                    frames.push(e0.clone());
                }
            }

            // Finite-difference parallelism residual max_i |P(E_i')|.
            let mut residual = 0.0_f64;
            if k > 0 && mk > 0 {
                for i in 1..n {
                    let de = (&frames[i + 1] - &frames[i - 1]) / (2.0 * he);
                    residual = residual.max((frames[i].transpose() * de).norm());
                }
            }
            last_residual = residual;

            if residual <= tol.frame {
                // O'Neill matrices and reduced curvature samples.
                let mut oneill = Vec::with_capacity(n + 1);
                let mut samples = Vec::with_capacity(n + 1);
                for i in 0..=n {
                    let a = oneill_at_node(
                        &vals[i],
                        &ders[i],
                        scales[i],
                        &wt[i],
                        &frames[i],
                        tol.rank,
                    );
                    let r = sol.family().evaluate(times[i])?;
                    samples.push(reduced_sample(&r, &frames[i], &a));
                    oneill.push(a);
                }
                let reduced = CurvatureFamily::sampled(interval.lo, he, samples)?;
                return Ok(TransversalSystem {
                    base: w.clone(),
                    interval,
                    step: he,
                    times,
                    wtilde: wt,
                    frame: frames,
                    oneill,
                    reduced,
                    residual,
                    refinements: refinement,
                    w_focal_times,
                });
            }
            h *= 0.5;
        }
        Err(Error::FrameResidual {
            residual: last_residual,
            tol: tol.frame,
            refinements: opts.refinements(),
        })
    }

    pub fn base(&self) -> &JacobiSubspace {
        &self.base
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn grid_step(&self) -> f64 {
        self.step
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn wtilde_frames(&self) -> &[DMatrix<f64>] {
        &self.wtilde
    }

    pub fn horizontal_frames(&self) -> &[DMatrix<f64>] {
        &self.frame
    }

    pub fn oneill_matrices(&self) -> &[DMatrix<f64>] {
        &self.oneill
    }

    /// The reduced curvature family R^H as a first-class sampled family of
    /// dimension m - k, reusable by the entire index stack.
    pub fn reduced_family(&self) -> &CurvatureFamily {
        &self.reduced
    }

    pub fn frame_residual(&self) -> f64 {
        self.residual
    }

    pub fn refinements(&self) -> usize {
        self.refinements
    }

    pub fn w_focal_times(&self) -> &[f64] {
        &self.w_focal_times
    }

    fn node_index(&self, t: f64) -> usize {
        let n = self.times.len() - 1;
        (((t - self.interval.lo) / self.step).round() as isize).clamp(0, n as isize) as usize
    }

    /// Horizontal frame derivative at an interior grid node, by central
    /// differences of the transported frames.
    fn frame_derivative(&self, i: usize) -> DMatrix<f64> {
        let n = self.times.len() - 1;
        if n == 0 {
            return DMatrix::zeros(self.frame[0].nrows(), self.frame[0].ncols());
        }
        if i == 0 {
            (&self.frame[1] - &self.frame[0]) / self.step
        } else if i == n {
            (&self.frame[n] - &self.frame[n - 1]) / self.step
        } else {
            (&self.frame[i + 1] - &self.frame[i - 1]) / (2.0 * self.step)
        }
    }
}

/// Spec-level alias: building the system is building the frame.
pub fn horizontal_frame(
    w: &JacobiSubspace,
    sol: &FundamentalSolution,
    interval: Interval,
    tol: &Tolerances,
    opts: &TransversalOptions,
) -> Result<TransversalSystem> {
    TransversalSystem::build(w, sol, interval, tol, opts)
}

/// Matrix of A: W-tilde -> H at time t in the system's bases, interpolating
/// the stored gauge between grid nodes.
pub fn oneill_operator(
    w: &JacobiSubspace,
    sol: &FundamentalSolution,
    t: f64,
    system: &TransversalSystem,
    tol: &Tolerances,
) -> Result<DMatrix<f64>> {
    if !system.interval.contains(t) {
        return Err(Error::OutOfRange {
            t,
            lo: system.interval.lo,
            hi: system.interval.hi,
        });
    }
    let p = w.phase_evaluation(sol, t)?;
    let (values, derivs) = split_phase(&p);
    let scale = sigma_max(&p);
    let k = w.dim();
    let n = system.times.len() - 1;
    let pos = ((t - system.interval.lo) / system.step).clamp(0.0, n as f64);
    let i = (pos.floor() as usize).min(n.saturating_sub(1));
    let s = pos - i as f64;
    let mut q = wtilde_from_eval(&values, &derivs, scale, t, k)?;
    if k > 0 {
        let blend = polar_orthonormal(
            &((1.0 - s) * &system.wtilde[i] + s * &system.wtilde[(i + 1).min(n)]),
        );
        q *= polar_orthonormal(&(q.transpose() * blend));
    }
    let e_lin = (1.0 - s) * &system.frame[i] + s * &system.frame[(i + 1).min(n)];
    let e = if q.ncols() > 0 {
        polar_orthonormal(&(&e_lin - &q * (q.transpose() * &e_lin)))
    } else {
        polar_orthonormal(&e_lin)
    };
    Ok(oneill_at_node(&values, &derivs, scale, &q, &e, tol.rank))
}

/// Build only the reduced curvature family of the transversal system.
pub fn transversal_family(
    w: &JacobiSubspace,
    sol: &FundamentalSolution,
    interval: Interval,
    tol: &Tolerances,
    opts: &TransversalOptions,
) -> Result<CurvatureFamily> {
    Ok(TransversalSystem::build(w, sol, interval, tol, opts)?.reduced.clone())
}

/// Reduced curvature sample at a single time in an arbitrary orthonormal
/// basis of H(t); basis-independent up to orthogonal conjugation (exact for
/// one-dimensional H). Used for pointwise limit studies without building a
/// whole system.
pub fn transversal_curvature_pointwise(
    w: &JacobiSubspace,
    sol: &FundamentalSolution,
    t: f64,
    tol: &Tolerances,
) -> Result<DMatrix<f64>> {
    let p = w.phase_evaluation(sol, t)?;
    let (values, derivs) = split_phase(&p);
    let scale = sigma_max(&p);
    let q = wtilde_from_eval(&values, &derivs, scale, t, w.dim())?;
    let e = orthogonal_complement(&q);
    let a = oneill_at_node(&values, &derivs, scale, &q, &e, tol.rank);
    let r = sol.family().evaluate(t)?;
    Ok(reduced_sample(&r, &e, &a))
}

/// Projection of a Lagrangian containing W onto the transversal system: a
/// Lagrangian subspace (dimension m - k) of the reduced family, anchored at
/// the midpoint of the largest W-focal-free gap.
pub fn project_subspace(
    lambda: &JacobiSubspace,
    system: &TransversalSystem,
    sol: &FundamentalSolution,
    tol: &Tolerances,
) -> Result<JacobiSubspace> {
    let w = &system.base;
    let m = w.ambient_dim();
    let k = w.dim();
    if lambda.class() != SubspaceClass::Lagrangian {
        return Err(Error::NotIsotropicInput);
    }
    lambda.check_anchor(sol)?;

    // Containment W <= Lambda.
    if k > 0 {
        let ql = orthonormal_columns(lambda.frame());
        let proj = &ql * (ql.transpose() * w.frame());
        let residual = (&proj - w.frame()).norm() / w.frame().norm().max(1e-300);
        if residual > 100.0 * tol.iso {
            return Err(Error::NotContained { residual });
        }
    }
    if k == m {
        // Zero-dimensional quotient.
        return JacobiSubspace::new(
            system.interval.midpoint(),
            DMatrix::zeros(0, 0),
            SubspaceClass::Lagrangian,
            tol,
        );
    }

    // Anchor: midpoint of the largest focal-free gap, snapped to a grid node.
    let mut cuts = vec![system.interval.lo];
    cuts.extend(system.w_focal_times.iter().copied());
    cuts.push(system.interval.hi);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best = (0.0, system.interval.midpoint());
    for pair in cuts.windows(2) {
        let gapw = pair[1] - pair[0];
        if gapw > best.0 {
            best = (gapw, 0.5 * (pair[0] + pair[1]));
        }
    }
    if best.0 <= 4.0 * system.step {
        return Err(Error::NoFocalFreeAnchor {
            lo: system.interval.lo,
            hi: system.interval.hi,
        });
    }
    let n = system.times.len() - 1;
    let j = system.node_index(best.1).clamp(1, n - 1);
    let tau = system.times[j];

    // Complete the W-frame to a Lambda-frame: orthonormal complement of W
    // inside Lambda.
    let ql = orthonormal_columns(lambda.frame());
    let qw = orthonormal_columns(w.frame());
    let c = if k > 0 {
        &ql - &qw * (qw.transpose() * &ql)
    } else {
        ql.clone()
    };
    let svd = c.clone().svd(true, false);
    let u = svd.u.expect("svd with u");
    let mut complement = DMatrix::zeros(2 * m, m - k);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap()
    });
    for (col, &idx) in order.iter().take(m - k).enumerate() {
        complement.set_column(col, &u.column(idx).into_owned());
    }

    // Reduced phase coordinates at tau: y = E^T J, y' = (E^T J)' = E'^T J + E^T J'.
    let e = &system.frame[j];
    let edot = system.frame_derivative(j);
    let mut frame = DMatrix::zeros(2 * (m - k), m - k);
    for l in 0..(m - k) {
        let pv = sol.transfer(tau)? * complement.column(l).into_owned();
        let v = pv.rows(0, m).into_owned();
        let d = pv.rows(m, m).into_owned();
        let y = e.transpose() * &v;
        let yp = edot.transpose() * &v + e.transpose() * &d;
        for r in 0..(m - k) {
            frame[(r, l)] = y[r];
            frame[(m - k + r, l)] = yp[r];
        }
    }

    // The quotient of a Lagrangian is Lagrangian; the discrete frame
    // derivative perturbs the omega-Gram at the truncation order, so correct
    // it back onto an isotropic frame instead of rejecting.
    let rel = omega_gram_relative(&frame);
    let frame = if rel > tol.iso {
        if rel > 1e-3 {
            return Err(Error::NotIsotropic {
                class: "lagrangian",
                gram: rel,
            });
        }
        omega_gram_schmidt(&frame, 0.1 * tol.iso, 60)?
    } else {
        frame
    };
    JacobiSubspace::new(tau, frame, SubspaceClass::Lagrangian, tol)
}

/// The three indices of the decomposition ind_W + ind_{Lambda/W} = ind_Lambda
/// over a closed interval, computed independently (the quotient index by a
/// full re-integration of the reduced family).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecompositionCheck {
    pub ind_w: usize,
    pub ind_quotient: usize,
    pub ind_lambda: usize,
    pub equal: bool,
    pub anchor: f64,
}

pub fn check_decomposition(
    w: &JacobiSubspace,
    lambda: &JacobiSubspace,
    sol: &FundamentalSolution,
    interval: Interval,
    tol: &Tolerances,
) -> Result<DecompositionCheck> {
    let ind_w = index(w, sol, interval, tol)?;
    let ind_lambda = index(lambda, sol, interval, tol)?;
    let m = w.ambient_dim();
    let k = w.dim();
    if k == m {
        return Ok(DecompositionCheck {
            ind_w,
            ind_quotient: 0,
            ind_lambda,
            equal: ind_w == ind_lambda,
            anchor: interval.midpoint(),
        });
    }
    let system = TransversalSystem::build(w, sol, interval, tol, &TransversalOptions::default())?;
    let projected = project_subspace(lambda, &system, sol, tol)?;
    let opts = IntegrationOptions::with_tolerances(*tol);
    let reduced_sol = integrate(system.reduced_family(), projected.anchor(), interval, &opts)?;
    let ind_quotient = index(&projected, &reduced_sol, interval, tol)?;
    Ok(DecompositionCheck {
        ind_w,
        ind_quotient,
        ind_lambda,
        equal: ind_w + ind_quotient == ind_lambda,
        anchor: projected.anchor(),
    })
}
